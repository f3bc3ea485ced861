#include "dlmix/model.hpp"

#include "dlmix/error.hpp"

namespace dlmix {

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::FB: return "fb";
    case Mode::FBReduced: return "fb-reduced";
    case Mode::FDTau: return "fd-tau";
  }
  throw ConfigError("unknown mode");
}

Mode mode_from_name(const std::string& name) {
  if (name == "fb") return Mode::FB;
  if (name == "fb-reduced") return Mode::FBReduced;
  if (name == "fd-tau") return Mode::FDTau;
  throw ConfigError("unknown mode '" + name + "' (expected fb, fb-reduced or fd-tau)");
}

void PriorConfig::validate() const {
  const double positives[] = {a_tau_m, b_tau_m, a_tau_i, b_tau_i, a_sigma2, b_sigma2,
                              a_slab_m, b_slab_m, a_slab_i, b_slab_i, v_c};
  for (double v : positives)
    if (!(v > 0.0)) throw ConfigError("prior hyperparameters must be positive");
  if (!(alpha_main > 0.0 && alpha_main < 1.0) || !(alpha_int > 0.0 && alpha_int < 1.0))
    throw ConfigError("alpha levels must be in (0,1)");
  if (calibration_draws < 1) throw ConfigError("calibration_draws must be >= 1");
  for (auto v : {fixed_sigma2, fixed_slab_m, fixed_slab_i})
    if (v && !(*v > 0.0)) throw ConfigError("fixed variances must be positive");
  for (auto v : {fixed_tau_main, fixed_tau_int})
    if (v && !(*v >= 0.0 && *v <= 1.0)) throw ConfigError("fixed tau must be in [0,1]");
}

void Schedule::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (burn_in < 0 || burn_in >= iterations) throw ConfigError("burn_in must be in [0, iterations)");
  if (thin < 1) throw ConfigError("thin must be >= 1");
}

void ModelState::check_invariants() const {
  if (!(sigma2 > 0.0) || !(sigma_m2 > 0.0) || !(sigma_i2 > 0.0))
    throw NumericalError("model state: variance parameter not positive");
  for (std::size_t j = 0; j < gamma_main.size(); ++j) {
    if (gamma_main[j] == 0 && beta_main[j].size() > 0 && (beta_main[j].array() != 0.0).any())
      throw NumericalError("model state: excluded main block has nonzero coefficients");
  }
  for (std::size_t k = 0; k < gamma_int.size(); ++k) {
    if (gamma_int[k] == 0 && beta_int[k].size() > 0 && (beta_int[k].array() != 0.0).any())
      throw NumericalError("model state: excluded interaction block has nonzero coefficients");
  }
  for (Eigen::Index j = 0; j < tau_main.size(); ++j)
    if (!(tau_main[j] >= 0.0 && tau_main[j] <= 1.0))
      throw NumericalError("model state: tau_main outside [0,1]");
  for (Eigen::Index k = 0; k < tau_int.size(); ++k)
    if (!(tau_int[k] >= 0.0 && tau_int[k] <= 1.0))
      throw NumericalError("model state: tau_int outside [0,1]");
}

}  // namespace dlmix
