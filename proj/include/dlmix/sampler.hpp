#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "dlmix/basis.hpp"
#include "dlmix/calibration.hpp"
#include "dlmix/data_model.hpp"
#include "dlmix/model.hpp"
#include "dlmix/rng.hpp"

namespace dlmix {

// Thinned post-burn-in draws from one chain. Coefficient blocks are stored
// sparsely: an empty vector when the block was excluded at that iteration.
struct ChainArchive {
  int chain_index = 0;
  long kept = 0;
  std::vector<double> beta0, sigma2, sigma_m2, sigma_i2;
  Eigen::MatrixXd beta_cov;  // kept x q
  Eigen::MatrixXd tau_main;  // kept x p
  Eigen::MatrixXd tau_int;   // kept x C(p,2)
  std::vector<std::vector<std::uint8_t>> gamma_main;      // kept rows of length p
  std::vector<std::vector<std::uint8_t>> gamma_int;       // kept rows
  std::vector<std::vector<Eigen::VectorXd>> beta_main;    // [kept][p]
  std::vector<std::vector<Eigen::VectorXd>> beta_int;     // [kept][pairs]
  std::vector<CalibrationTraceRow> calibration_trace;
};

// Systematic-scan Gibbs sampler over one chain. The public step methods map
// one-to-one onto the sweep stages so unit tests can drive them directly.
class GibbsSampler {
 public:
  GibbsSampler(const ExposurePanel& panel, const DesignMatrices& designs,
               const PriorConfig& prior, RngStream rng);

  void update_tau_fb();
  void calibrate_taus(long iteration);
  void update_main_block(Eigen::Index j);
  void update_pair_block(Eigen::Index k);
  void update_fixed_effects();
  void update_sigma2();
  void update_slab_variances();
  void sweep(long iteration);

  // Conditional moments for main block j given the current partial residual.
  std::pair<Eigen::VectorXd, Eigen::MatrixXd> main_effect_conditional(Eigen::Index j) const;
  std::pair<Eigen::VectorXd, Eigen::MatrixXd> pair_effect_conditional(Eigen::Index k) const;
  std::pair<Eigen::VectorXd, Eigen::MatrixXd> fixed_effect_conditional() const;
  // The sigma^2 full-conditional parameters the next draw would use.
  std::pair<double, double> sigma2_posterior() const;
  // (shape, rate) for the two slab-variance conditionals.
  std::pair<std::pair<double, double>, std::pair<double, double>> slab_posteriors() const;

  double log_ratio_main(Eigen::Index j) const;
  double log_ratio_pair(Eigen::Index k) const;

  ModelState& state() { return state_; }
  const ModelState& state() const { return state_; }
  const Eigen::VectorXd& residual() const { return resid_; }
  const Calibrator* calibrator() const { return calibrator_.get(); }
  void rebuild_residual();  // recompute fits and residual from the current state

  ChainArchive run(const Schedule& schedule, int chain_index);

 private:
  Eigen::VectorXd partial_residual_main(Eigen::Index j) const;
  Eigen::VectorXd partial_residual_pair(Eigen::Index k) const;
  Eigen::VectorXd block_stat(const Eigen::MatrixXd& design, const Eigen::VectorXd& ystar) const;

  const ExposurePanel& panel_;
  const DesignMatrices& designs_;
  PriorConfig prior_;
  RngStream rng_;
  std::unique_ptr<Calibrator> calibrator_;

  ModelState state_;
  // Prior inclusion log-odds; calibrated values can be closer to 1 than a
  // double resolves, so gamma draws use these rather than state_.tau_*.
  Eigen::VectorXd tau_main_logit_;
  Eigen::VectorXd tau_int_logit_;
  Eigen::VectorXd resid_;
  Eigen::VectorXd fitted_fixed_;
  std::vector<Eigen::VectorXd> fitted_main_;
  std::vector<Eigen::VectorXd> fitted_int_;
};

ChainArchive run_chain(const ExposurePanel& panel, const DesignMatrices& designs,
                       const PriorConfig& prior, const Schedule& schedule, int chain_index);

// Runs `n_chains` chains with independent derived streams on up to `threads`
// workers. Results are ordered by chain index regardless of scheduling.
std::vector<ChainArchive> run_chains(const ExposurePanel& panel, const DesignMatrices& designs,
                                     const PriorConfig& prior, const Schedule& schedule,
                                     int n_chains, int threads);

}  // namespace dlmix
