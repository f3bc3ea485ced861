#pragma once

#include <cstddef>
#include <string>

namespace dlmix::kernels {

// Vector primitives behind the sampler's inner loops. Each backend fills one
// table; the active table is picked once at startup from CPU features and can
// be overridden (tests, DLMIX_KERNELS env var).
//
// Matrices are column-major with leading dimension == n (Eigen default).
struct Ops {
  // sum_i a[i]*b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // sum_i a[i]^2
  double (*sum_sq)(const double* a, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out = a .* b
  void (*hadamard)(const double* a, const double* b, double* out, std::size_t n);
  // out[c] = dot(A.col(c), x), A is n x k
  void (*matvec_t)(const double* A, std::size_t n, std::size_t k, const double* x, double* out);
  // out = A * x, A is n x k
  void (*matvec)(const double* A, std::size_t n, std::size_t k, const double* x, double* out);
  const char* name;
};

const Ops& scalar_ops();

#if defined(__x86_64__) || defined(_M_X64)
bool cpu_has_avx2();
const Ops& avx2_ops();  // only call when cpu_has_avx2()
#endif

// The dispatched table. First call inspects DLMIX_KERNELS ("scalar"/"avx2")
// then CPU features.
const Ops& active();

// Test hook. Throws ConfigError for unknown or unsupported backends.
void force_backend(const std::string& name);

inline double dot(const double* a, const double* b, std::size_t n) {
  return active().dot(a, b, n);
}
inline double sum_sq(const double* a, std::size_t n) { return active().sum_sq(a, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}
inline void hadamard(const double* a, const double* b, double* out, std::size_t n) {
  active().hadamard(a, b, out, n);
}
inline void matvec_t(const double* A, std::size_t n, std::size_t k, const double* x, double* out) {
  active().matvec_t(A, n, k, x, out);
}
inline void matvec(const double* A, std::size_t n, std::size_t k, const double* x, double* out) {
  active().matvec(A, n, k, x, out);
}

}  // namespace dlmix::kernels
