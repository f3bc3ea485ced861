#include "dlmix/calibration.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "dlmix/block_conditional.hpp"
#include "dlmix/error.hpp"

namespace dlmix {

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& gram) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success) throw NumericalError("psd_factor: eigendecomposition failed");
  Eigen::VectorXd roots = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return solver.eigenvectors() * roots.asDiagonal();
}

std::vector<double> simulate_null_ratios(const CalibrationRequest& req,
                                         const Eigen::MatrixXd& gram_factor, RngStream& rng) {
  if (req.draws < 1) throw ConfigError("calibration requires at least one draw");
  const Eigen::Index K = req.gram->rows();
  const BlockConditional cond = BlockConditional::make(*req.gram, req.sigma2, req.slab_variance);
  const double sd = std::sqrt(req.sigma2);

  std::vector<double> log_ratios(static_cast<std::size_t>(req.draws));
  Eigen::VectorXd z(K);
  Eigen::VectorXd b(K);
  for (int d = 0; d < req.draws; ++d) {
    for (Eigen::Index i = 0; i < K; ++i) z[i] = rng.normal();
    b.noalias() = sd * (gram_factor * z);  // b = X'Y, Y ~ N(0, sigma2 I)
    log_ratios[static_cast<std::size_t>(d)] = cond.log_ratio(b);
  }
  return log_ratios;
}

std::vector<double> simulate_null_ratios(const CalibrationRequest& req, RngStream& rng) {
  return simulate_null_ratios(req, psd_factor(*req.gram), rng);
}

double null_inclusion_mean_logit(const std::vector<double>& log_ratios, double logit_tau) {
  double total = 0.0;
  for (double lr : log_ratios) total += sigmoid(logit_tau + lr);
  return total / static_cast<double>(log_ratios.size());
}

double null_inclusion_mean(const std::vector<double>& log_ratios, double tau) {
  if (tau <= 0.0) return 0.0;
  if (tau >= 1.0) return 1.0;
  return null_inclusion_mean_logit(log_ratios, std::log(tau) - std::log1p(-tau));
}

CalibrationResult find_tau(const std::vector<double>& log_ratios, double alpha) {
  if (log_ratios.empty()) throw ConfigError("find_tau: no ratios");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("find_tau: alpha must be in (0,1)");

  CalibrationResult result;
  result.draws_used = static_cast<int>(log_ratios.size());

  // Ratios are bounded by e+-700, so the crossing's log-odds live in +-745.
  constexpr double kLogitMax = 745.0;
  if (null_inclusion_mean_logit(log_ratios, kLogitMax) <= alpha) {
    result.tau = 1.0;
    result.logit_tau = kLogitMax;
    result.achieved_level = null_inclusion_mean_logit(log_ratios, kLogitMax);
    return result;
  }

  double lo = -kLogitMax;  // g(lo) <= alpha
  double hi = kLogitMax;
  if (null_inclusion_mean_logit(log_ratios, lo) > alpha) {
    // Even a vanishing prior odds exceeds the target; return tau = 0.
    result.tau = 0.0;
    result.logit_tau = -kLogitMax;
    result.achieved_level = 0.0;
    return result;
  }
  for (int iter = 0; iter < 80; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (null_inclusion_mean_logit(log_ratios, mid) <= alpha) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  result.logit_tau = lo;
  result.tau = sigmoid(lo);
  result.achieved_level = null_inclusion_mean_logit(log_ratios, lo);
  return result;
}

namespace {

// Geometric bucket index at 1% relative resolution.
std::int64_t bucket_of(double value) {
  return static_cast<std::int64_t>(std::floor(std::log(value) / std::log(1.01)));
}

double bucket_midpoint(std::int64_t bucket) {
  return std::pow(1.01, static_cast<double>(bucket) + 0.5);
}

}  // namespace

Calibrator::Calibrator(const DesignMatrices& designs, const PriorConfig& prior, RngStream stream)
    : prior_(prior), stream_(stream) {
  n_main_ = static_cast<Eigen::Index>(designs.main.size());
  for (std::size_t j = 0; j < designs.main.size(); ++j) {
    blocks_.push_back({&designs.main_gram[j], psd_factor(designs.main_gram[j]),
                       fmt::format("main_{}", j)});
  }
  for (std::size_t k = 0; k < designs.pairs.size(); ++k) {
    blocks_.push_back({&designs.pairs[k].gram, psd_factor(designs.pairs[k].gram),
                       fmt::format("int_{}_{}", designs.pairs[k].j1, designs.pairs[k].j2)});
  }
}

CalibrationResult Calibrator::calibrate_block(Eigen::Index block, double sigma2, double slab,
                                              double alpha, long iteration) {
  const Block& info = blocks_[static_cast<std::size_t>(block)];

  double use_sigma2 = sigma2;
  double use_slab = slab;
  std::uint64_t key = 0;
  bool cache_hit = false;

  if (prior_.calibration_cache) {
    const std::int64_t b_sigma = bucket_of(sigma2);
    const std::int64_t b_slab = bucket_of(slab);
    use_sigma2 = bucket_midpoint(b_sigma);
    use_slab = bucket_midpoint(b_slab);
    key = splitmix64(static_cast<std::uint64_t>(block) ^
                     splitmix64(static_cast<std::uint64_t>(b_sigma)) ^
                     splitmix64(splitmix64(static_cast<std::uint64_t>(b_slab))));
    if (auto it = cache_.find(key); it != cache_.end()) {
      cache_hit = true;
      if (prior_.calibration_trace)
        trace_.push_back({iteration, info.label, use_sigma2, use_slab, it->second.tau,
                          it->second.achieved_level, true});
      return it->second;
    }
  }

  CalibrationRequest req;
  req.gram = info.gram;
  req.sigma2 = use_sigma2;
  req.slab_variance = use_slab;
  req.alpha = alpha;
  req.draws = prior_.calibration_draws;

  // The stream depends only on (block, bucket) when caching, so the cached
  // value is independent of when it was first needed.
  RngStream rng = prior_.calibration_cache
                      ? stream_.derive("calib", static_cast<std::uint64_t>(block), key)
                      : stream_.derive("calib-exact", static_cast<std::uint64_t>(block),
                                       static_cast<std::uint64_t>(iteration));
  const std::vector<double> ratios = simulate_null_ratios(req, info.factor, rng);
  CalibrationResult result = find_tau(ratios, alpha);
  result.cache_key = key;

  if (prior_.calibration_cache) cache_.emplace(key, result);
  if (prior_.calibration_trace)
    trace_.push_back({iteration, info.label, use_sigma2, use_slab, result.tau,
                      result.achieved_level, cache_hit});
  return result;
}

void Calibrator::calibrate_all(ModelState& state, Eigen::VectorXd& logit_main,
                               Eigen::VectorXd& logit_int, long iteration) {
  for (Eigen::Index j = 0; j < n_main_; ++j) {
    const CalibrationResult res =
        calibrate_block(j, state.sigma2, state.sigma_m2, prior_.alpha_main, iteration);
    state.tau_main[j] = res.tau;
    logit_main[j] = res.logit_tau;
  }
  const Eigen::Index n_pairs = static_cast<Eigen::Index>(blocks_.size()) - n_main_;
  for (Eigen::Index k = 0; k < n_pairs; ++k) {
    const CalibrationResult res =
        calibrate_block(n_main_ + k, state.sigma2, state.sigma_i2, prior_.alpha_int, iteration);
    state.tau_int[k] = res.tau;
    logit_int[k] = res.logit_tau;
  }
}

}  // namespace dlmix
