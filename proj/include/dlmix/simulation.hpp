#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "dlmix/data_model.hpp"
#include "dlmix/fit.hpp"
#include "dlmix/model.hpp"
#include "dlmix/posterior.hpp"
#include "dlmix/rng.hpp"

namespace dlmix {

// Synthetic data-generating process: a stationary VAR(1) across exposures
// plus true lag curves and interaction surfaces feeding a Gaussian outcome.
struct Scenario {
  std::string name;
  Eigen::Index n = 0, p = 0, T = 0;
  Eigen::MatrixXd var_coefficient;              // A, p x p (spectral radius < 1)
  Eigen::MatrixXd innovation_cov;               // Sigma, p x p SPD
  std::vector<Eigen::VectorXd> main_curves;     // p entries, length T (zero = null)
  struct Surface {
    Eigen::Index j1 = 0, j2 = 0;  // j1 < j2
    Eigen::MatrixXd grid;         // T x T
  };
  std::vector<Surface> surfaces;                // active pairs only
  std::vector<double> sigma2_grid;
  int replicates = 50;
  std::vector<Mode> modes;

  void validate() const;
  bool main_active(Eigen::Index j) const;
  const Eigen::MatrixXd* surface_for(Eigen::Index j1, Eigen::Index j2) const;  // null if inactive
};

// Curve/surface shapes used by the builtin scenarios. The lag argument is
// 1-based: value(t) = amplitude * exp(-(t - center)^2 / width).
Eigen::VectorXd gaussian_bump_curve(Eigen::Index T, double amplitude, double center, double width);
Eigen::VectorXd flat_curve(Eigen::Index T, double level);
Eigen::MatrixXd bump_product_surface(Eigen::Index T, double amplitude, double center1,
                                     double width1, double center2, double width2);

// Builtins: "paper-main", "null", "main-only".
Scenario builtin_scenario(const std::string& name);
std::vector<std::string> builtin_scenario_names();
Scenario scenario_from_json(const std::filesystem::path& path);

// X_1 = eps_1, X_t = A X_{t-1} + eps_t, eps ~ MVN(0, Sigma). Returns p
// matrices of shape n x T.
std::vector<Eigen::MatrixXd> gen_exposures(const Scenario& scenario, RngStream& rng);

Eigen::VectorXd gen_outcome(const std::vector<Eigen::MatrixXd>& exposures,
                            const Scenario& scenario, double sigma2, RngStream& rng);

ExposurePanel make_panel(std::vector<Eigen::MatrixXd> exposures, Eigen::VectorXd outcome);

// Empirical per-effect signal variance (variance across subjects of the
// effect's contribution to the outcome mean); divide by sigma2 for SNR.
double signal_variance_main(const Eigen::MatrixXd& Xj, const Eigen::VectorXd& curve);
double signal_variance_surface(const Eigen::MatrixXd& X1, const Eigen::MatrixXd& X2,
                               const Eigen::MatrixXd& grid);

// Ordinary least squares of the outcome on per-exposure time averages and
// their pairwise products. The coefficient on a time average is the implied
// cumulative effect (per-lag slope times T under the equal-weights model).
struct ComparatorFit {
  Eigen::VectorXd cumulative_main;  // p
  Eigen::VectorXd pvalue_main;
  Eigen::VectorXd cumulative_int;   // C(p,2)
  Eigen::VectorXd pvalue_int;
};
ComparatorFit averaged_comparator(const ExposurePanel& panel);

double two_sided_t_pvalue(double t_stat, double df);

// Scoring inputs reduced per replicate so large grids are never retained.
struct ReplicateScore {
  Eigen::VectorXd pip_main, pip_int;
  Eigen::VectorXd cumulative_main, cumulative_int;  // posterior means
  double cov_main_hits = 0, cov_main_total = 0;
  double cov_int_hits = 0, cov_int_total = 0;
  double mse_main_sum = 0;
  long mse_main_count = 0;
  double mse_int_sum = 0;
  long mse_int_count = 0;
};

ReplicateScore score_replicate(const PosteriorSummary& summary, const Scenario& scenario);

struct MetricRow {
  std::string mode;
  double sigma2 = 0.0;
  double power_main = 0, power_int = 0;    // mean PIP over active blocks
  double fd_main = 0, fd_int = 0;          // mean PIP over null blocks
  double coverage_main = 0, coverage_int = 0;
  double mse_main = 0, mse_int = 0;
  double sig_power_main = 0, sig_power_int = 0;  // fraction of PIP > 0.5 on actives
  double comparator_power_main = 0, comparator_power_int = 0;
  double comparator_fd_main = 0, comparator_fd_int = 0;
};

MetricRow score(const std::string& mode_label, double sigma2,
                const std::vector<ReplicateScore>& fits,
                const std::vector<ComparatorFit>& comparators, const Scenario& scenario);

void write_metric_report(const std::vector<MetricRow>& rows, const std::filesystem::path& path);

// Full harness: for every (sigma2, mode, replicate) generate data, fit, and
// reduce to scores. Replicates share exposures across modes at a given sigma2
// so approaches are compared on identical data.
struct SimulationOptions {
  FitOptions fit;  // fit.prior.mode is overridden per scenario mode
  int threads = 1;
  bool keep_replicate_detail = true;
};

struct SimulationResult {
  std::vector<MetricRow> metrics;
  // [sigma2 index][mode index][replicate]
  std::vector<std::vector<std::vector<ReplicateScore>>> detail;
  std::vector<std::vector<ComparatorFit>> comparators;  // [sigma2 index][replicate]
};

SimulationResult run_simulation(const Scenario& scenario, const SimulationOptions& options);

void write_replicate_log(const SimulationResult& result, const Scenario& scenario,
                         const std::filesystem::path& path);

}  // namespace dlmix
