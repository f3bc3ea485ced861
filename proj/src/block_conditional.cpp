#include "dlmix/block_conditional.hpp"

#include <cmath>
#include <limits>

#include "dlmix/error.hpp"

namespace dlmix {

BlockConditional BlockConditional::make(const Eigen::MatrixXd& gram, double sigma2, double slab) {
  if (!(sigma2 > 0.0) || !(slab > 0.0))
    throw NumericalError("block conditional requires positive variances");
  const Eigen::Index K = gram.rows();
  Eigen::MatrixXd precision = gram / sigma2;
  precision.diagonal().array() += 1.0 / (sigma2 * slab);

  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    precision.diagonal().array() += 1e-10;  // one jitter retry
    llt.compute(precision);
    if (llt.info() != Eigen::Success)
      throw NumericalError("block conditional: Cholesky factorization failed");
  }

  BlockConditional out;
  out.chol_lower_ = llt.matrixL();
  out.sigma2_ = sigma2;
  out.slab_ = slab;
  out.log_det_precision_ = 0.0;
  for (Eigen::Index i = 0; i < K; ++i) out.log_det_precision_ += 2.0 * std::log(out.chol_lower_(i, i));
  return out;
}

double BlockConditional::log_ratio(const Eigen::VectorXd& b) const {
  const double K = static_cast<double>(dim());
  // quad = (b/s2)' A^-1 (b/s2) via one triangular solve
  Eigen::VectorXd w = chol_lower_.triangularView<Eigen::Lower>().solve(b / sigma2_);
  const double quad = w.squaredNorm();
  return -0.5 * K * std::log(sigma2_ * slab_) - 0.5 * log_det_precision_ + 0.5 * quad;
}

Eigen::VectorXd BlockConditional::mean(const Eigen::VectorXd& b) const {
  Eigen::VectorXd w = chol_lower_.triangularView<Eigen::Lower>().solve(b / sigma2_);
  return chol_lower_.transpose().triangularView<Eigen::Upper>().solve(w);
}

Eigen::VectorXd BlockConditional::draw(const Eigen::VectorXd& b, RngStream& rng) const {
  Eigen::VectorXd z(dim());
  for (Eigen::Index i = 0; i < dim(); ++i) z[i] = rng.normal();
  // M + L^-T z has covariance (L L')^-1 = V
  return mean(b) + chol_lower_.transpose().triangularView<Eigen::Upper>().solve(z);
}

Eigen::MatrixXd BlockConditional::covariance() const {
  const Eigen::Index K = dim();
  Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(K, K);
  Eigen::MatrixXd inv_l = chol_lower_.triangularView<Eigen::Lower>().solve(identity);
  return inv_l.transpose() * inv_l;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return std::log(p) - std::log1p(-p);
}

double inclusion_probability(double tau, double log_ratio) {
  if (tau <= 0.0) return 0.0;
  if (tau >= 1.0) return 1.0;
  return sigmoid(logit(tau) + log_ratio);
}

}  // namespace dlmix
