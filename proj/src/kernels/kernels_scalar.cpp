#include "dlmix/kernels.hpp"

// Reference implementations. These define the semantics the SIMD variants are
// equivalence-tested against (up to summation-order rounding).

namespace dlmix::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_sq_scalar(const double* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * a[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void hadamard_scalar(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void matvec_t_scalar(const double* A, std::size_t n, std::size_t k, const double* x, double* out) {
  for (std::size_t c = 0; c < k; ++c) out[c] = dot_scalar(A + c * n, x, n);
}

void matvec_scalar(const double* A, std::size_t n, std::size_t k, const double* x, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = 0.0;
  for (std::size_t c = 0; c < k; ++c) axpy_scalar(x[c], A + c * n, out, n);
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops{dot_scalar,      sum_sq_scalar,   axpy_scalar,
                       hadamard_scalar, matvec_t_scalar, matvec_scalar,
                       "scalar"};
  return ops;
}

}  // namespace dlmix::kernels
