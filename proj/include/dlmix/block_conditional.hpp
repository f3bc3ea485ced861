#pragma once

#include <Eigen/Dense>

#include "dlmix/rng.hpp"

namespace dlmix {

// Full conditional of one coefficient block given its partial residual.
// With G = X'X and b = X'y*, the conditional when the block is active is
// MVN(M, V) with V = (G/s2 + I/(s2*slab))^-1 and M = V b / s2. The density
// ratio used by the inclusion draw is phi(0; 0, s2*slab*I) / phi(0; M, V),
// kept in log space throughout.
class BlockConditional {
 public:
  static BlockConditional make(const Eigen::MatrixXd& gram, double sigma2, double slab);

  double log_ratio(const Eigen::VectorXd& b) const;
  Eigen::VectorXd mean(const Eigen::VectorXd& b) const;
  Eigen::VectorXd draw(const Eigen::VectorXd& b, RngStream& rng) const;  // MVN(M, V)
  Eigen::MatrixXd covariance() const;                                    // V, for tests

  Eigen::Index dim() const { return chol_lower_.rows(); }
  double log_det_precision() const { return log_det_precision_; }

 private:
  Eigen::MatrixXd chol_lower_;  // L with L L' = G/s2 + I/(s2*slab)
  double log_det_precision_ = 0.0;
  double sigma2_ = 1.0;
  double slab_ = 1.0;
};

// Numerically stable x -> 1/(1+exp(-x)).
double sigmoid(double x);

// log p - log(1-p); -inf at 0 and +inf at 1.
double logit(double p);

// Inclusion probability tau*r/(tau*r + 1 - tau) from log r, stable for
// log r up to +-700 and tau in [0,1].
double inclusion_probability(double tau, double log_ratio);

// Same probability with the prior odds already in log space. Calibrated tau
// values can sit closer to 1 than doubles resolve, so the sampler works with
// log-odds throughout.
inline double inclusion_probability_logit(double logit_tau, double log_ratio) {
  return sigmoid(logit_tau + log_ratio);
}

}  // namespace dlmix
