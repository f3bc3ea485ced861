#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dlmix {

enum class Mode { FB, FBReduced, FDTau };

std::string mode_name(Mode mode);
Mode mode_from_name(const std::string& name);

// Hyperparameters and sampler options. Defaults follow the weakly-informative
// choices documented in the README. The fixed_* overrides pin a parameter for
// the whole run (used by validation against enumeration oracles and for
// sensitivity studies).
struct PriorConfig {
  Mode mode = Mode::FDTau;

  double a_tau_m = 1.0, b_tau_m = 1.0;  // Beta prior on shared tau_M (FB modes)
  double a_tau_i = 1.0, b_tau_i = 1.0;
  double a_sigma2 = 0.001, b_sigma2 = 0.001;  // InvGamma on sigma^2
  double a_slab_m = 2.0, b_slab_m = 1.0;      // InvGamma on sigma_M^2
  double a_slab_i = 2.0, b_slab_i = 1.0;      // InvGamma on sigma_I^2
  double v_c = 1e6;                           // diffuse normal variance for (beta0, beta_C)

  double alpha_main = 0.1;  // target null inclusion, main effects
  double alpha_int = 0.05;  // target null inclusion, interactions
  int calibration_draws = 200;
  bool calibration_cache = true;
  bool calibration_trace = false;

  std::optional<double> fixed_sigma2;
  std::optional<double> fixed_slab_m;
  std::optional<double> fixed_slab_i;
  std::optional<double> fixed_tau_main;
  std::optional<double> fixed_tau_int;

  void validate() const;
};

struct Schedule {
  long iterations = 10000;
  long burn_in = 5000;
  long thin = 5;
  std::uint64_t seed = 1;

  long kept() const { return (iterations - burn_in + thin - 1) / thin; }
  void validate() const;
};

// One Gibbs iteration's parameters. gamma == 0 forces the matching beta block
// to be exactly zero.
struct ModelState {
  double beta0 = 0.0;
  Eigen::VectorXd beta_cov;                // q
  std::vector<Eigen::VectorXd> beta_main;  // p blocks
  std::vector<std::uint8_t> gamma_main;    // p
  std::vector<Eigen::VectorXd> beta_int;   // C(p,2) blocks (reduced dimension)
  std::vector<std::uint8_t> gamma_int;
  double sigma2 = 1.0;
  double sigma_m2 = 1.0;
  double sigma_i2 = 1.0;
  Eigen::VectorXd tau_main;  // p
  Eigen::VectorXd tau_int;   // C(p,2)

  void check_invariants() const;  // throws NumericalError on violation
};

}  // namespace dlmix
