#include <atomic>
#include <cstdlib>
#include <string>

#include "dlmix/error.hpp"
#include "dlmix/kernels.hpp"

namespace dlmix::kernels {
namespace {

const Ops* select_from_name(const std::string& name) {
  if (name == "scalar") return &scalar_ops();
#if defined(__x86_64__) || defined(_M_X64)
  if (name == "avx2") {
    if (!cpu_has_avx2()) throw ConfigError("kernel backend 'avx2' not supported by this CPU");
    return &avx2_ops();
  }
#endif
  throw ConfigError("unknown kernel backend '" + name + "' (expected 'scalar' or 'avx2')");
}

const Ops* select_default() {
  if (const char* env = std::getenv("DLMIX_KERNELS")) return select_from_name(env);
#if defined(__x86_64__) || defined(_M_X64)
  if (cpu_has_avx2()) return &avx2_ops();
#endif
  return &scalar_ops();
}

std::atomic<const Ops*> g_active{nullptr};

}  // namespace

const Ops& active() {
  const Ops* ops = g_active.load(std::memory_order_acquire);
  if (!ops) {
    ops = select_default();
    g_active.store(ops, std::memory_order_release);
  }
  return *ops;
}

void force_backend(const std::string& name) {
  g_active.store(select_from_name(name), std::memory_order_release);
}

}  // namespace dlmix::kernels
