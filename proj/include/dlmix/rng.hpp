#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace dlmix {

// Philox-4x32 with 10 rounds: a counter-based generator, so any stream is a
// pure function of (key, counter). Streams for chains, replicates and
// calibration blocks are derived by hashing labels into the key, which makes
// results independent of scheduling and thread count.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;

  Philox4x32() = default;
  explicit Philox4x32(std::uint64_t key) : key_{static_cast<std::uint32_t>(key),
                                                static_cast<std::uint32_t>(key >> 32)} {}

  Block operator()(std::uint64_t counter_lo, std::uint64_t counter_hi = 0) const;

 private:
  std::array<std::uint32_t, 2> key_{0, 0};
};

// Buffered stream over a Philox keystream plus the non-uniform draws used by
// the sampler. All transforms are explicit (no std:: distributions) so a given
// (seed, path) reproduces the same values everywhere.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  // Child stream: independent keystream addressed by a label and up to three
  // integers, e.g. derive("chain", c) or derive("calib", block, b1, b2).
  RngStream derive(std::string_view label, std::uint64_t a = 0, std::uint64_t b = 0,
                   std::uint64_t c = 0) const;

  std::uint64_t next_u64();
  double uniform();                             // open interval (0,1)
  double normal();                              // standard normal (Box-Muller)
  double gamma(double shape, double scale);     // Marsaglia-Tsang
  double inv_gamma(double shape, double rate);  // mean rate/(shape-1)
  double beta(double a, double b);

 private:
  explicit RngStream(std::uint64_t key, int) : philox_(key) {}

  Philox4x32 philox_;
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  Philox4x32::Block buffer_{};
  int buffered_ = 0;  // remaining u32 pairs in buffer_
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

// 64-bit FNV-1a, used for stream labels and for hashing basis matrices into
// archive metadata.
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ull);
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace dlmix
