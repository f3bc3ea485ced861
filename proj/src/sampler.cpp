#include "dlmix/sampler.hpp"

#include <cmath>
#include <cstdlib>

#include "dlmix/block_conditional.hpp"
#include "dlmix/error.hpp"
#include "dlmix/kernels.hpp"
#include "dlmix/parallel.hpp"

namespace dlmix {

int default_threads() {
  if (const char* env = std::getenv("DLMIX_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

GibbsSampler::GibbsSampler(const ExposurePanel& panel, const DesignMatrices& designs,
                           const PriorConfig& prior, RngStream rng)
    : panel_(panel), designs_(designs), prior_(prior), rng_(rng) {
  prior_.validate();
  const Eigen::Index n = panel.n;
  const Eigen::Index p = panel.p;
  const auto n_pairs = static_cast<Eigen::Index>(designs.pairs.size());

  state_.beta_cov = Eigen::VectorXd::Zero(panel.q);
  state_.beta_main.resize(static_cast<std::size_t>(p));
  state_.gamma_main.assign(static_cast<std::size_t>(p), 0);
  for (Eigen::Index j = 0; j < p; ++j)
    state_.beta_main[static_cast<std::size_t>(j)] = Eigen::VectorXd::Zero(designs.main[static_cast<std::size_t>(j)].cols());
  state_.beta_int.resize(static_cast<std::size_t>(n_pairs));
  state_.gamma_int.assign(static_cast<std::size_t>(n_pairs), 0);
  for (Eigen::Index k = 0; k < n_pairs; ++k)
    state_.beta_int[static_cast<std::size_t>(k)] = Eigen::VectorXd::Zero(designs.pairs[static_cast<std::size_t>(k)].design.cols());
  state_.tau_main = Eigen::VectorXd::Constant(p, prior_.fixed_tau_main.value_or(0.5));
  state_.tau_int = Eigen::VectorXd::Constant(n_pairs, prior_.fixed_tau_int.value_or(0.5));
  tau_main_logit_ = state_.tau_main.unaryExpr([](double t) { return logit(t); });
  tau_int_logit_ = state_.tau_int.unaryExpr([](double t) { return logit(t); });

  // Warm start: OLS-ish fixed effects, sigma^2 at the outcome variance.
  const double y_mean = panel.outcome.mean();
  const double y_var =
      (panel.outcome.array() - y_mean).square().sum() / std::max<double>(1.0, static_cast<double>(n - 1));
  state_.sigma2 = prior_.fixed_sigma2.value_or(std::max(y_var, 1e-12));
  state_.sigma_m2 = prior_.fixed_slab_m.value_or(1.0);
  state_.sigma_i2 = prior_.fixed_slab_i.value_or(1.0);

  Eigen::MatrixXd ridge = designs.fixed_gram;
  ridge.diagonal().array() += 1.0 / prior_.v_c;
  Eigen::VectorXd coef = Eigen::LLT<Eigen::MatrixXd>(ridge).solve(designs.fixed.transpose() * panel.outcome);
  state_.beta0 = coef[0];
  if (panel.q > 0) state_.beta_cov = coef.tail(panel.q);

  fitted_main_.assign(static_cast<std::size_t>(p), Eigen::VectorXd::Zero(n));
  fitted_int_.assign(static_cast<std::size_t>(n_pairs), Eigen::VectorXd::Zero(n));
  fitted_fixed_.resize(n);
  resid_.resize(n);
  rebuild_residual();

  if (prior_.mode == Mode::FDTau) {
    calibrator_ = std::make_unique<Calibrator>(designs_, prior_, rng_.derive("calibration"));
  }
}

void GibbsSampler::rebuild_residual() {
  const Eigen::Index n = panel_.n;
  Eigen::VectorXd coef(1 + panel_.q);
  coef[0] = state_.beta0;
  if (panel_.q > 0) coef.tail(panel_.q) = state_.beta_cov;
  kernels::matvec(designs_.fixed.data(), static_cast<std::size_t>(n),
                  static_cast<std::size_t>(designs_.fixed.cols()), coef.data(),
                  fitted_fixed_.data());
  for (std::size_t j = 0; j < fitted_main_.size(); ++j) {
    const auto& X = designs_.main[j];
    if (state_.gamma_main[j]) {
      kernels::matvec(X.data(), static_cast<std::size_t>(n), static_cast<std::size_t>(X.cols()),
                      state_.beta_main[j].data(), fitted_main_[j].data());
    } else {
      fitted_main_[j].setZero();
    }
  }
  for (std::size_t k = 0; k < fitted_int_.size(); ++k) {
    const auto& X = designs_.pairs[k].design;
    if (state_.gamma_int[k]) {
      kernels::matvec(X.data(), static_cast<std::size_t>(n), static_cast<std::size_t>(X.cols()),
                      state_.beta_int[k].data(), fitted_int_[k].data());
    } else {
      fitted_int_[k].setZero();
    }
  }
  resid_ = panel_.outcome;
  kernels::axpy(-1.0, fitted_fixed_.data(), resid_.data(), static_cast<std::size_t>(n));
  for (const auto& f : fitted_main_)
    kernels::axpy(-1.0, f.data(), resid_.data(), static_cast<std::size_t>(n));
  for (const auto& f : fitted_int_)
    kernels::axpy(-1.0, f.data(), resid_.data(), static_cast<std::size_t>(n));
}

Eigen::VectorXd GibbsSampler::partial_residual_main(Eigen::Index j) const {
  Eigen::VectorXd ystar = resid_;
  kernels::axpy(1.0, fitted_main_[static_cast<std::size_t>(j)].data(), ystar.data(),
                static_cast<std::size_t>(panel_.n));
  return ystar;
}

Eigen::VectorXd GibbsSampler::partial_residual_pair(Eigen::Index k) const {
  Eigen::VectorXd ystar = resid_;
  kernels::axpy(1.0, fitted_int_[static_cast<std::size_t>(k)].data(), ystar.data(),
                static_cast<std::size_t>(panel_.n));
  return ystar;
}

Eigen::VectorXd GibbsSampler::block_stat(const Eigen::MatrixXd& design,
                                         const Eigen::VectorXd& ystar) const {
  Eigen::VectorXd b(design.cols());
  kernels::matvec_t(design.data(), static_cast<std::size_t>(design.rows()),
                    static_cast<std::size_t>(design.cols()), ystar.data(), b.data());
  return b;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> GibbsSampler::main_effect_conditional(
    Eigen::Index j) const {
  const auto& gram = designs_.main_gram[static_cast<std::size_t>(j)];
  const BlockConditional cond = BlockConditional::make(gram, state_.sigma2, state_.sigma_m2);
  const Eigen::VectorXd b = block_stat(designs_.main[static_cast<std::size_t>(j)],
                                       partial_residual_main(j));
  return {cond.mean(b), cond.covariance()};
}

double GibbsSampler::log_ratio_main(Eigen::Index j) const {
  const auto& gram = designs_.main_gram[static_cast<std::size_t>(j)];
  const BlockConditional cond = BlockConditional::make(gram, state_.sigma2, state_.sigma_m2);
  const Eigen::VectorXd b = block_stat(designs_.main[static_cast<std::size_t>(j)],
                                       partial_residual_main(j));
  return cond.log_ratio(b);
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> GibbsSampler::pair_effect_conditional(
    Eigen::Index k) const {
  const auto& pd = designs_.pairs[static_cast<std::size_t>(k)];
  const BlockConditional cond = BlockConditional::make(pd.gram, state_.sigma2, state_.sigma_i2);
  const Eigen::VectorXd b = block_stat(pd.design, partial_residual_pair(k));
  return {cond.mean(b), cond.covariance()};
}

double GibbsSampler::log_ratio_pair(Eigen::Index k) const {
  const auto& pd = designs_.pairs[static_cast<std::size_t>(k)];
  const BlockConditional cond = BlockConditional::make(pd.gram, state_.sigma2, state_.sigma_i2);
  const Eigen::VectorXd b = block_stat(pd.design, partial_residual_pair(k));
  return cond.log_ratio(b);
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> GibbsSampler::fixed_effect_conditional() const {
  Eigen::VectorXd ystar = resid_;
  kernels::axpy(1.0, fitted_fixed_.data(), ystar.data(), static_cast<std::size_t>(panel_.n));
  Eigen::MatrixXd precision = designs_.fixed_gram / state_.sigma2;
  precision.diagonal().array() += 1.0 / prior_.v_c;
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success)
    throw NumericalError("fixed-effect conditional: singular normal equations");
  const Eigen::VectorXd b = block_stat(designs_.fixed, ystar) / state_.sigma2;
  const Eigen::Index m = precision.rows();
  return {llt.solve(b), llt.solve(Eigen::MatrixXd::Identity(m, m))};
}

std::pair<std::pair<double, double>, std::pair<double, double>> GibbsSampler::slab_posteriors()
    const {
  double shape_m = prior_.a_slab_m;
  double rate_m = prior_.b_slab_m;
  for (std::size_t j = 0; j < state_.beta_main.size(); ++j) {
    if (!state_.gamma_main[j]) continue;
    shape_m += 0.5 * static_cast<double>(state_.beta_main[j].size());
    rate_m += state_.beta_main[j].squaredNorm() / (2.0 * state_.sigma2);
  }
  double shape_i = prior_.a_slab_i;
  double rate_i = prior_.b_slab_i;
  for (std::size_t k = 0; k < state_.beta_int.size(); ++k) {
    if (!state_.gamma_int[k]) continue;
    shape_i += 0.5 * static_cast<double>(state_.beta_int[k].size());
    rate_i += state_.beta_int[k].squaredNorm() / (2.0 * state_.sigma2);
  }
  return {{shape_m, rate_m}, {shape_i, rate_i}};
}

void GibbsSampler::update_main_block(Eigen::Index j) {
  const auto js = static_cast<std::size_t>(j);
  const auto& X = designs_.main[js];
  const auto n = static_cast<std::size_t>(panel_.n);

  const Eigen::VectorXd ystar = partial_residual_main(j);
  const Eigen::VectorXd b = block_stat(X, ystar);
  const BlockConditional cond =
      BlockConditional::make(designs_.main_gram[js], state_.sigma2, state_.sigma_m2);

  const double pi = inclusion_probability_logit(tau_main_logit_[j], cond.log_ratio(b));
  const bool include = rng_.uniform() < pi;
  state_.gamma_main[js] = include ? 1 : 0;
  if (include) {
    state_.beta_main[js] = cond.draw(b, rng_);
    kernels::matvec(X.data(), n, static_cast<std::size_t>(X.cols()), state_.beta_main[js].data(),
                    fitted_main_[js].data());
  } else {
    state_.beta_main[js].setZero();
    fitted_main_[js].setZero();
  }
  resid_ = ystar;
  kernels::axpy(-1.0, fitted_main_[js].data(), resid_.data(), n);
}

void GibbsSampler::update_pair_block(Eigen::Index k) {
  const auto ks = static_cast<std::size_t>(k);
  const auto& X = designs_.pairs[ks].design;
  const auto n = static_cast<std::size_t>(panel_.n);

  const Eigen::VectorXd ystar = partial_residual_pair(k);
  const Eigen::VectorXd b = block_stat(X, ystar);
  const BlockConditional cond =
      BlockConditional::make(designs_.pairs[ks].gram, state_.sigma2, state_.sigma_i2);

  const double pi = inclusion_probability_logit(tau_int_logit_[k], cond.log_ratio(b));
  const bool include = rng_.uniform() < pi;
  state_.gamma_int[ks] = include ? 1 : 0;
  if (include) {
    state_.beta_int[ks] = cond.draw(b, rng_);
    kernels::matvec(X.data(), n, static_cast<std::size_t>(X.cols()), state_.beta_int[ks].data(),
                    fitted_int_[ks].data());
  } else {
    state_.beta_int[ks].setZero();
    fitted_int_[ks].setZero();
  }
  resid_ = ystar;
  kernels::axpy(-1.0, fitted_int_[ks].data(), resid_.data(), n);
}

void GibbsSampler::update_fixed_effects() {
  const auto n = static_cast<std::size_t>(panel_.n);
  Eigen::VectorXd ystar = resid_;
  kernels::axpy(1.0, fitted_fixed_.data(), ystar.data(), n);

  Eigen::MatrixXd precision = designs_.fixed_gram / state_.sigma2;
  precision.diagonal().array() += 1.0 / prior_.v_c;
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success)
    throw NumericalError("fixed-effect update: singular normal equations");
  const Eigen::VectorXd b = block_stat(designs_.fixed, ystar) / state_.sigma2;
  Eigen::VectorXd z(b.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng_.normal();
  const Eigen::MatrixXd chol_l = llt.matrixL();
  Eigen::VectorXd coef = llt.solve(b);
  coef += chol_l.transpose().triangularView<Eigen::Upper>().solve(z);

  state_.beta0 = coef[0];
  if (panel_.q > 0) state_.beta_cov = coef.tail(panel_.q);
  kernels::matvec(designs_.fixed.data(), n, static_cast<std::size_t>(designs_.fixed.cols()),
                  coef.data(), fitted_fixed_.data());
  resid_ = ystar;
  kernels::axpy(-1.0, fitted_fixed_.data(), resid_.data(), n);
}

std::pair<double, double> GibbsSampler::sigma2_posterior() const {
  double shape = prior_.a_sigma2 + 0.5 * static_cast<double>(panel_.n);
  double rate = prior_.b_sigma2 + 0.5 * kernels::sum_sq(resid_.data(), static_cast<std::size_t>(panel_.n));
  for (std::size_t j = 0; j < state_.beta_main.size(); ++j) {
    if (!state_.gamma_main[j]) continue;
    shape += 0.5 * static_cast<double>(state_.beta_main[j].size());
    rate += state_.beta_main[j].squaredNorm() / (2.0 * state_.sigma_m2);
  }
  for (std::size_t k = 0; k < state_.beta_int.size(); ++k) {
    if (!state_.gamma_int[k]) continue;
    shape += 0.5 * static_cast<double>(state_.beta_int[k].size());
    rate += state_.beta_int[k].squaredNorm() / (2.0 * state_.sigma_i2);
  }
  return {shape, rate};
}

void GibbsSampler::update_sigma2() {
  rebuild_residual();  // assemble the residual exactly from the stored fits
  if (prior_.fixed_sigma2) {
    state_.sigma2 = *prior_.fixed_sigma2;
    return;
  }
  const auto [shape, rate] = sigma2_posterior();
  state_.sigma2 = rng_.inv_gamma(shape, rate);
}

void GibbsSampler::update_slab_variances() {
  double shape_m = prior_.a_slab_m;
  double rate_m = prior_.b_slab_m;
  for (std::size_t j = 0; j < state_.beta_main.size(); ++j) {
    if (!state_.gamma_main[j]) continue;
    shape_m += 0.5 * static_cast<double>(state_.beta_main[j].size());
    rate_m += state_.beta_main[j].squaredNorm() / (2.0 * state_.sigma2);
  }
  double shape_i = prior_.a_slab_i;
  double rate_i = prior_.b_slab_i;
  for (std::size_t k = 0; k < state_.beta_int.size(); ++k) {
    if (!state_.gamma_int[k]) continue;
    shape_i += 0.5 * static_cast<double>(state_.beta_int[k].size());
    rate_i += state_.beta_int[k].squaredNorm() / (2.0 * state_.sigma2);
  }
  state_.sigma_m2 = prior_.fixed_slab_m ? *prior_.fixed_slab_m : rng_.inv_gamma(shape_m, rate_m);
  state_.sigma_i2 = prior_.fixed_slab_i ? *prior_.fixed_slab_i : rng_.inv_gamma(shape_i, rate_i);
}

void GibbsSampler::update_tau_fb() {
  if (!prior_.fixed_tau_main) {
    long included = 0;
    for (auto g : state_.gamma_main) included += g;
    const double p = static_cast<double>(state_.gamma_main.size());
    const double tau =
        rng_.beta(prior_.a_tau_m + static_cast<double>(included), prior_.b_tau_m + p - static_cast<double>(included));
    state_.tau_main.setConstant(tau);
    tau_main_logit_.setConstant(logit(tau));
  }
  if (!prior_.fixed_tau_int) {
    long included = 0;
    for (auto g : state_.gamma_int) included += g;
    const double n_pairs = static_cast<double>(state_.gamma_int.size());
    const double tau = rng_.beta(prior_.a_tau_i + static_cast<double>(included),
                                 prior_.b_tau_i + n_pairs - static_cast<double>(included));
    state_.tau_int.setConstant(tau);
    tau_int_logit_.setConstant(logit(tau));
  }
}

void GibbsSampler::calibrate_taus(long iteration) {
  if (!calibrator_) throw ConfigError("calibrate_taus requires FD-Tau mode");
  calibrator_->calibrate_all(state_, tau_main_logit_, tau_int_logit_, iteration);
  if (prior_.fixed_tau_main) {
    state_.tau_main.setConstant(*prior_.fixed_tau_main);
    tau_main_logit_.setConstant(logit(*prior_.fixed_tau_main));
  }
  if (prior_.fixed_tau_int) {
    state_.tau_int.setConstant(*prior_.fixed_tau_int);
    tau_int_logit_.setConstant(logit(*prior_.fixed_tau_int));
  }
}

void GibbsSampler::sweep(long iteration) {
  if (prior_.mode == Mode::FDTau) {
    calibrate_taus(iteration);
  } else {
    update_tau_fb();
  }
  for (Eigen::Index j = 0; j < panel_.p; ++j) update_main_block(j);
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(designs_.pairs.size()); ++k)
    update_pair_block(k);
  update_fixed_effects();
  update_sigma2();
  update_slab_variances();
}

ChainArchive GibbsSampler::run(const Schedule& schedule, int chain_index) {
  schedule.validate();
  ChainArchive archive;
  archive.chain_index = chain_index;
  const long kept = schedule.kept();
  const auto p = static_cast<std::size_t>(panel_.p);
  const auto n_pairs = designs_.pairs.size();

  archive.beta0.reserve(kept);
  archive.sigma2.reserve(kept);
  archive.sigma_m2.reserve(kept);
  archive.sigma_i2.reserve(kept);
  archive.beta_cov.resize(kept, panel_.q);
  archive.tau_main.resize(kept, panel_.p);
  archive.tau_int.resize(kept, static_cast<Eigen::Index>(n_pairs));
  archive.gamma_main.reserve(kept);
  archive.gamma_int.reserve(kept);
  archive.beta_main.reserve(kept);
  archive.beta_int.reserve(kept);

  for (long it = 0; it < schedule.iterations; ++it) {
    try {
      sweep(it);
    } catch (const NumericalError& err) {
      throw NumericalError(err.what(), it);
    }
    if (it < schedule.burn_in || (it - schedule.burn_in) % schedule.thin != 0) continue;

    const long row = archive.kept++;
    archive.beta0.push_back(state_.beta0);
    archive.sigma2.push_back(state_.sigma2);
    archive.sigma_m2.push_back(state_.sigma_m2);
    archive.sigma_i2.push_back(state_.sigma_i2);
    archive.beta_cov.row(row) = state_.beta_cov.transpose();
    archive.tau_main.row(row) = state_.tau_main.transpose();
    archive.tau_int.row(row) = state_.tau_int.transpose();
    archive.gamma_main.push_back(state_.gamma_main);
    archive.gamma_int.push_back(state_.gamma_int);

    std::vector<Eigen::VectorXd> betas(p);
    for (std::size_t j = 0; j < p; ++j)
      if (state_.gamma_main[j]) betas[j] = state_.beta_main[j];
    archive.beta_main.push_back(std::move(betas));
    std::vector<Eigen::VectorXd> betas_int(n_pairs);
    for (std::size_t k = 0; k < n_pairs; ++k)
      if (state_.gamma_int[k]) betas_int[k] = state_.beta_int[k];
    archive.beta_int.push_back(std::move(betas_int));
  }

  if (calibrator_ && prior_.calibration_trace) archive.calibration_trace = calibrator_->trace();
  return archive;
}

ChainArchive run_chain(const ExposurePanel& panel, const DesignMatrices& designs,
                       const PriorConfig& prior, const Schedule& schedule, int chain_index) {
  RngStream rng = RngStream(schedule.seed).derive("chain", static_cast<std::uint64_t>(chain_index));
  GibbsSampler sampler(panel, designs, prior, rng);
  return sampler.run(schedule, chain_index);
}

std::vector<ChainArchive> run_chains(const ExposurePanel& panel, const DesignMatrices& designs,
                                     const PriorConfig& prior, const Schedule& schedule,
                                     int n_chains, int threads) {
  std::vector<ChainArchive> archives(static_cast<std::size_t>(n_chains));
  parallel_for(static_cast<std::size_t>(n_chains), threads, [&](std::size_t c) {
    archives[c] = run_chain(panel, designs, prior, schedule, static_cast<int>(c));
  });
  return archives;
}

}  // namespace dlmix
