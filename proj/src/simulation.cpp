#include "dlmix/simulation.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "dlmix/basis.hpp"
#include "dlmix/csv.hpp"
#include "dlmix/error.hpp"
#include "dlmix/parallel.hpp"

namespace dlmix {

using nlohmann::json;

void Scenario::validate() const {
  if (n < 1 || p < 1 || T < 1) throw ConfigError("scenario: n, p, T must be positive");
  if (var_coefficient.rows() != p || var_coefficient.cols() != p)
    throw ConfigError("scenario: VAR coefficient matrix must be p x p");
  if (innovation_cov.rows() != p || innovation_cov.cols() != p)
    throw ConfigError("scenario: innovation covariance must be p x p");
  const auto eigenvalues = var_coefficient.eigenvalues();
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i)
    if (std::abs(eigenvalues[i]) >= 1.0)
      throw ConfigError("scenario: VAR coefficient spectral radius must be < 1");
  Eigen::LLT<Eigen::MatrixXd> llt(innovation_cov);
  if (llt.info() != Eigen::Success)
    throw ConfigError("scenario: innovation covariance must be positive definite");
  if (static_cast<Eigen::Index>(main_curves.size()) != p)
    throw ConfigError("scenario: one main curve per exposure required");
  for (const auto& curve : main_curves)
    if (curve.size() != T) throw ConfigError("scenario: main curve length must equal T");
  for (const auto& s : surfaces) {
    if (s.j1 >= s.j2 || s.j1 < 0 || s.j2 >= p) throw ConfigError("scenario: bad surface pair");
    if (s.grid.rows() != T || s.grid.cols() != T)
      throw ConfigError("scenario: surface grid must be T x T");
  }
  if (sigma2_grid.empty()) throw ConfigError("scenario: sigma2 grid empty");
  if (replicates < 1) throw ConfigError("scenario: replicates must be >= 1");
  if (modes.empty()) throw ConfigError("scenario: no modes listed");
}

bool Scenario::main_active(Eigen::Index j) const {
  return !main_curves[static_cast<std::size_t>(j)].isZero(0.0);
}

const Eigen::MatrixXd* Scenario::surface_for(Eigen::Index j1, Eigen::Index j2) const {
  for (const auto& s : surfaces)
    if (s.j1 == j1 && s.j2 == j2) return &s.grid;
  return nullptr;
}

Eigen::VectorXd gaussian_bump_curve(Eigen::Index T, double amplitude, double center, double width) {
  Eigen::VectorXd curve(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const double lag = static_cast<double>(t + 1);
    curve[t] = amplitude * std::exp(-(lag - center) * (lag - center) / width);
  }
  return curve;
}

Eigen::VectorXd flat_curve(Eigen::Index T, double level) {
  return Eigen::VectorXd::Constant(T, level);
}

Eigen::MatrixXd bump_product_surface(Eigen::Index T, double amplitude, double center1,
                                     double width1, double center2, double width2) {
  const Eigen::VectorXd b1 = gaussian_bump_curve(T, 1.0, center1, width1);
  const Eigen::VectorXd b2 = gaussian_bump_curve(T, 1.0, center2, width2);
  return amplitude * (b1 * b2.transpose());
}

namespace {

Eigen::MatrixXd ar_correlation(Eigen::Index p, double rho) {
  Eigen::MatrixXd sigma(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) sigma(i, j) = std::pow(rho, std::abs(i - j));
  return sigma;
}

}  // namespace

std::vector<std::string> builtin_scenario_names() { return {"paper-main", "null", "main-only"}; }

Scenario builtin_scenario(const std::string& name) {
  Scenario s;
  s.name = name;
  s.p = 10;
  s.T = 37;
  s.var_coefficient = Eigen::MatrixXd::Identity(s.p, s.p) * 0.95;
  s.innovation_cov = ar_correlation(s.p, 0.5);
  s.main_curves.assign(static_cast<std::size_t>(s.p), Eigen::VectorXd::Zero(s.T));
  s.modes = {Mode::FB, Mode::FBReduced, Mode::FDTau};

  if (name == "paper-main") {
    s.n = 400;
    s.sigma2_grid = {0.5, 1.0, 2.0, 3.0, 4.0};
    s.replicates = 50;
    s.main_curves[0] = gaussian_bump_curve(s.T, 0.03, 10.0, 18.0);
    s.main_curves[6] = gaussian_bump_curve(s.T, 0.03, 28.0, 32.0);
    s.main_curves[7] = flat_curve(s.T, 0.01);
    s.surfaces.push_back({0, 1, bump_product_surface(s.T, 0.004, 10.0, 18.0, 25.0, 32.0)});
    s.surfaces.push_back({2, 3, bump_product_surface(s.T, 0.004, 20.0, 25.0, 8.0, 18.0)});
  } else if (name == "null") {
    s.n = 200;
    s.sigma2_grid = {1.0};
    s.replicates = 50;
  } else if (name == "main-only") {
    s.n = 300;
    s.sigma2_grid = {0.5, 1.0, 2.0, 3.0, 4.0};
    s.replicates = 50;
    s.main_curves[0] = gaussian_bump_curve(s.T, 0.03, 10.0, 18.0);
    s.main_curves[6] = gaussian_bump_curve(s.T, 0.03, 28.0, 32.0);
  } else {
    throw ConfigError(fmt::format("unknown scenario '{}'; builtins: paper-main, null, main-only",
                                  name));
  }
  s.validate();
  return s;
}

Scenario scenario_from_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path.string() + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("scenario file '{}': {}", path.string(), e.what()));
  }

  try {
    if (doc.contains("builtin")) {
      Scenario s = builtin_scenario(doc.at("builtin").get<std::string>());
      if (doc.contains("replicates")) s.replicates = doc.at("replicates").get<int>();
      if (doc.contains("sigma2_grid")) s.sigma2_grid = doc.at("sigma2_grid").get<std::vector<double>>();
      if (doc.contains("n")) s.n = doc.at("n").get<Eigen::Index>();
      s.validate();
      return s;
    }

    Scenario s;
    s.name = doc.value("name", std::string("custom"));
    s.n = doc.at("n").get<Eigen::Index>();
    s.p = doc.at("p").get<Eigen::Index>();
    s.T = doc.at("T").get<Eigen::Index>();
    const double a = doc.value("var_diagonal", 0.95);
    s.var_coefficient = Eigen::MatrixXd::Identity(s.p, s.p) * a;
    const std::string cov = doc.value("innovation", std::string("ar"));
    if (cov == "independent") {
      s.innovation_cov = Eigen::MatrixXd::Identity(s.p, s.p);
    } else if (cov == "ar") {
      s.innovation_cov = ar_correlation(s.p, doc.value("innovation_rho", 0.5));
    } else {
      throw ConfigError("scenario innovation must be 'independent' or 'ar'");
    }
    s.main_curves.assign(static_cast<std::size_t>(s.p), Eigen::VectorXd::Zero(s.T));
    if (doc.contains("curves")) {
      for (const auto& c : doc.at("curves")) {
        const auto j = c.at("exposure").get<Eigen::Index>();
        if (j < 0 || j >= s.p) throw ConfigError("curve exposure index out of range");
        const std::string type = c.at("type").get<std::string>();
        if (type == "bump") {
          s.main_curves[static_cast<std::size_t>(j)] =
              gaussian_bump_curve(s.T, c.at("amplitude").get<double>(), c.at("center").get<double>(),
                                  c.at("width").get<double>());
        } else if (type == "flat") {
          s.main_curves[static_cast<std::size_t>(j)] = flat_curve(s.T, c.at("level").get<double>());
        } else {
          throw ConfigError("curve type must be 'bump' or 'flat'");
        }
      }
    }
    if (doc.contains("surfaces")) {
      for (const auto& c : doc.at("surfaces")) {
        Scenario::Surface surf;
        surf.j1 = c.at("j1").get<Eigen::Index>();
        surf.j2 = c.at("j2").get<Eigen::Index>();
        surf.grid = bump_product_surface(s.T, c.at("amplitude").get<double>(),
                                         c.at("center1").get<double>(), c.at("width1").get<double>(),
                                         c.at("center2").get<double>(), c.at("width2").get<double>());
        s.surfaces.push_back(std::move(surf));
      }
    }
    s.sigma2_grid = doc.value("sigma2_grid", std::vector<double>{1.0});
    s.replicates = doc.value("replicates", 50);
    s.modes.clear();
    for (const auto& m : doc.value("modes", std::vector<std::string>{"fb", "fb-reduced", "fd-tau"}))
      s.modes.push_back(mode_from_name(m));
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("scenario file '{}': {}", path.string(), e.what()));
  }
}

std::vector<Eigen::MatrixXd> gen_exposures(const Scenario& scenario, RngStream& rng) {
  const Eigen::Index n = scenario.n;
  const Eigen::Index p = scenario.p;
  const Eigen::Index T = scenario.T;
  Eigen::LLT<Eigen::MatrixXd> llt(scenario.innovation_cov);
  const Eigen::MatrixXd chol_l = llt.matrixL();

  std::vector<Eigen::MatrixXd> exposures(static_cast<std::size_t>(p), Eigen::MatrixXd(n, T));
  Eigen::VectorXd z(p);
  Eigen::VectorXd x(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.setZero();
    for (Eigen::Index t = 0; t < T; ++t) {
      for (Eigen::Index j = 0; j < p; ++j) z[j] = rng.normal();
      if (t == 0) {
        x = chol_l * z;
      } else {
        x = scenario.var_coefficient * x + chol_l * z;
      }
      for (Eigen::Index j = 0; j < p; ++j) exposures[static_cast<std::size_t>(j)](i, t) = x[j];
    }
  }
  return exposures;
}

Eigen::VectorXd gen_outcome(const std::vector<Eigen::MatrixXd>& exposures,
                            const Scenario& scenario, double sigma2, RngStream& rng) {
  const Eigen::Index n = scenario.n;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  for (Eigen::Index j = 0; j < scenario.p; ++j) {
    const auto& curve = scenario.main_curves[static_cast<std::size_t>(j)];
    if (curve.isZero(0.0)) continue;
    y += exposures[static_cast<std::size_t>(j)] * curve;
  }
  for (const auto& s : scenario.surfaces) {
    const auto& X1 = exposures[static_cast<std::size_t>(s.j1)];
    const auto& X2 = exposures[static_cast<std::size_t>(s.j2)];
    // sum_{t1,t2} grid(t1,t2) X1_{i t1} X2_{i t2}
    y += ((X1 * s.grid).cwiseProduct(X2)).rowwise().sum();
  }
  const double sd = std::sqrt(sigma2);
  for (Eigen::Index i = 0; i < n; ++i) y[i] += sd * rng.normal();
  return y;
}

ExposurePanel make_panel(std::vector<Eigen::MatrixXd> exposures, Eigen::VectorXd outcome) {
  ExposurePanel panel;
  panel.p = static_cast<Eigen::Index>(exposures.size());
  panel.n = outcome.size();
  panel.T = exposures.empty() ? 0 : exposures.front().cols();
  panel.q = 0;
  panel.exposures = std::move(exposures);
  panel.covariates.resize(panel.n, 0);
  panel.outcome = std::move(outcome);
  for (Eigen::Index j = 0; j < panel.p; ++j) panel.exposure_names.push_back(fmt::format("x{}", j + 1));
  panel.validate();
  return panel;
}

double signal_variance_main(const Eigen::MatrixXd& Xj, const Eigen::VectorXd& curve) {
  const Eigen::VectorXd signal = Xj * curve;
  const double mean = signal.mean();
  return (signal.array() - mean).square().sum() / static_cast<double>(signal.size() - 1);
}

double signal_variance_surface(const Eigen::MatrixXd& X1, const Eigen::MatrixXd& X2,
                               const Eigen::MatrixXd& grid) {
  const Eigen::VectorXd signal = ((X1 * grid).cwiseProduct(X2)).rowwise().sum();
  const double mean = signal.mean();
  return (signal.array() - mean).square().sum() / static_cast<double>(signal.size() - 1);
}

namespace {

// Regularized incomplete beta via Lentz's continued fraction.
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-14;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

double reg_inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(ln_front) * betacf(a, b, x) / a;
  return 1.0 - std::exp(ln_front) * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

double two_sided_t_pvalue(double t_stat, double df) {
  if (df <= 0.0) throw NumericalError("t-test requires positive degrees of freedom");
  return reg_inc_beta(0.5 * df, 0.5, df / (df + t_stat * t_stat));
}

ComparatorFit averaged_comparator(const ExposurePanel& panel) {
  const Eigen::Index n = panel.n;
  const Eigen::Index p = panel.p;
  const auto pairs = all_pairs(p);
  const Eigen::Index cols = 1 + p + static_cast<Eigen::Index>(pairs.size());
  if (n <= cols) throw DataError("averaged comparator: more columns than observations");

  Eigen::MatrixXd design(n, cols);
  design.col(0).setOnes();
  for (Eigen::Index j = 0; j < p; ++j)
    design.col(1 + j) = panel.exposures[static_cast<std::size_t>(j)].rowwise().mean();
  for (std::size_t k = 0; k < pairs.size(); ++k)
    design.col(1 + p + static_cast<Eigen::Index>(k)) =
        design.col(1 + pairs[k].first).cwiseProduct(design.col(1 + pairs[k].second));

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < cols) throw DataError("averaged comparator: rank-deficient design");
  const Eigen::VectorXd coef = qr.solve(panel.outcome);
  const Eigen::VectorXd resid = panel.outcome - design * coef;
  const double df = static_cast<double>(n - cols);
  const double s2 = resid.squaredNorm() / df;
  const Eigen::MatrixXd xtx_inv =
      (design.transpose() * design).ldlt().solve(Eigen::MatrixXd::Identity(cols, cols));

  ComparatorFit fit;
  fit.cumulative_main.resize(p);
  fit.pvalue_main.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double se = std::sqrt(s2 * xtx_inv(1 + j, 1 + j));
    fit.cumulative_main[j] = coef[1 + j];
    fit.pvalue_main[j] = two_sided_t_pvalue(coef[1 + j] / se, df);
  }
  fit.cumulative_int.resize(static_cast<Eigen::Index>(pairs.size()));
  fit.pvalue_int.resize(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const Eigen::Index c = 1 + p + static_cast<Eigen::Index>(k);
    const double se = std::sqrt(s2 * xtx_inv(c, c));
    fit.cumulative_int[static_cast<Eigen::Index>(k)] = coef[c];
    fit.pvalue_int[static_cast<Eigen::Index>(k)] = two_sided_t_pvalue(coef[c] / se, df);
  }
  return fit;
}

ReplicateScore score_replicate(const PosteriorSummary& summary, const Scenario& scenario) {
  ReplicateScore score;
  score.pip_main = summary.pip_main;
  score.pip_int = summary.pip_int;
  const Eigen::Index p = scenario.p;
  const Eigen::Index T = scenario.T;
  const auto pairs = all_pairs(p);

  score.cumulative_main.resize(p);
  for (Eigen::Index j = 0; j < p; ++j)
    score.cumulative_main[j] = summary.cumulative[static_cast<std::size_t>(j)].mean;
  score.cumulative_int.resize(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t k = 0; k < pairs.size(); ++k)
    score.cumulative_int[static_cast<Eigen::Index>(k)] = summary.cumulative_int[k].mean;

  for (Eigen::Index j = 0; j < p; ++j) {
    const auto& curve = scenario.main_curves[static_cast<std::size_t>(j)];
    const auto& fitted = summary.curves[static_cast<std::size_t>(j)];
    const bool active = scenario.main_active(j);
    for (Eigen::Index t = 0; t < T; ++t) {
      const double truth = curve[t];
      const double err = fitted.points[static_cast<std::size_t>(t)].mean - truth;
      score.mse_main_sum += err * err;
      ++score.mse_main_count;
      if (active) {
        score.cov_main_total += 1.0;
        if (truth >= fitted.points[static_cast<std::size_t>(t)].lo &&
            truth <= fitted.points[static_cast<std::size_t>(t)].hi)
          score.cov_main_hits += 1.0;
      }
    }
  }
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const Eigen::MatrixXd* truth_grid = scenario.surface_for(pairs[k].first, pairs[k].second);
    const auto& fitted = summary.surfaces[k];
    for (Eigen::Index t1 = 0; t1 < T; ++t1)
      for (Eigen::Index t2 = 0; t2 < T; ++t2) {
        const double truth = truth_grid ? (*truth_grid)(t1, t2) : 0.0;
        const double err = fitted.mean(t1, t2) - truth;
        score.mse_int_sum += err * err;
        ++score.mse_int_count;
        if (truth_grid) {
          score.cov_int_total += 1.0;
          if (truth >= fitted.lo(t1, t2) && truth <= fitted.hi(t1, t2)) score.cov_int_hits += 1.0;
        }
      }
  }
  return score;
}

MetricRow score(const std::string& mode_label, double sigma2,
                const std::vector<ReplicateScore>& fits,
                const std::vector<ComparatorFit>& comparators, const Scenario& scenario) {
  if (fits.empty()) throw DataError("score: no replicate fits");
  MetricRow row;
  row.mode = mode_label;
  row.sigma2 = sigma2;

  const Eigen::Index p = scenario.p;
  const auto pairs = all_pairs(p);
  std::vector<bool> pair_active(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k)
    pair_active[k] = scenario.surface_for(pairs[k].first, pairs[k].second) != nullptr;

  double power_main = 0, fd_main = 0, power_int = 0, fd_int = 0;
  double sig_main = 0, sig_int = 0;
  long active_main = 0, null_main = 0, active_int = 0, null_int = 0;
  double cov_main_hits = 0, cov_main_total = 0, cov_int_hits = 0, cov_int_total = 0;
  double mse_main = 0, mse_int = 0;
  long mse_main_count = 0, mse_int_count = 0;

  for (const auto& fit : fits) {
    for (Eigen::Index j = 0; j < p; ++j) {
      if (scenario.main_active(j)) {
        power_main += fit.pip_main[j];
        sig_main += fit.pip_main[j] > 0.5 ? 1.0 : 0.0;
        ++active_main;
      } else {
        fd_main += fit.pip_main[j];
        ++null_main;
      }
    }
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const double pip = fit.pip_int[static_cast<Eigen::Index>(k)];
      if (pair_active[k]) {
        power_int += pip;
        sig_int += pip > 0.5 ? 1.0 : 0.0;
        ++active_int;
      } else {
        fd_int += pip;
        ++null_int;
      }
    }
    cov_main_hits += fit.cov_main_hits;
    cov_main_total += fit.cov_main_total;
    cov_int_hits += fit.cov_int_hits;
    cov_int_total += fit.cov_int_total;
    mse_main += fit.mse_main_sum;
    mse_main_count += fit.mse_main_count;
    mse_int += fit.mse_int_sum;
    mse_int_count += fit.mse_int_count;
  }

  row.power_main = active_main ? power_main / static_cast<double>(active_main) : 0.0;
  row.fd_main = null_main ? fd_main / static_cast<double>(null_main) : 0.0;
  row.power_int = active_int ? power_int / static_cast<double>(active_int) : 0.0;
  row.fd_int = null_int ? fd_int / static_cast<double>(null_int) : 0.0;
  row.sig_power_main = active_main ? sig_main / static_cast<double>(active_main) : 0.0;
  row.sig_power_int = active_int ? sig_int / static_cast<double>(active_int) : 0.0;
  row.coverage_main = cov_main_total > 0 ? cov_main_hits / cov_main_total : 0.0;
  row.coverage_int = cov_int_total > 0 ? cov_int_hits / cov_int_total : 0.0;
  row.mse_main = mse_main_count ? mse_main / static_cast<double>(mse_main_count) : 0.0;
  row.mse_int = mse_int_count ? mse_int / static_cast<double>(mse_int_count) : 0.0;

  if (!comparators.empty()) {
    double cp_main = 0, cfd_main = 0, cp_int = 0, cfd_int = 0;
    long ca_main = 0, cn_main = 0, ca_int = 0, cn_int = 0;
    for (const auto& comp : comparators) {
      for (Eigen::Index j = 0; j < p; ++j) {
        const bool reject = comp.pvalue_main[j] < 0.05;
        if (scenario.main_active(j)) {
          cp_main += reject ? 1.0 : 0.0;
          ++ca_main;
        } else {
          cfd_main += reject ? 1.0 : 0.0;
          ++cn_main;
        }
      }
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        const bool reject = comp.pvalue_int[static_cast<Eigen::Index>(k)] < 0.05;
        if (pair_active[k]) {
          cp_int += reject ? 1.0 : 0.0;
          ++ca_int;
        } else {
          cfd_int += reject ? 1.0 : 0.0;
          ++cn_int;
        }
      }
    }
    row.comparator_power_main = ca_main ? cp_main / static_cast<double>(ca_main) : 0.0;
    row.comparator_fd_main = cn_main ? cfd_main / static_cast<double>(cn_main) : 0.0;
    row.comparator_power_int = ca_int ? cp_int / static_cast<double>(ca_int) : 0.0;
    row.comparator_fd_int = cn_int ? cfd_int / static_cast<double>(cn_int) : 0.0;
  }
  return row;
}

void write_metric_report(const std::vector<MetricRow>& rows, const std::filesystem::path& path) {
  csv::Writer w(path, {"mode", "sigma2", "power_main", "power_int", "fd_main", "fd_int",
                       "coverage_main", "coverage_int", "mse_main", "mse_int", "sig_power_main",
                       "sig_power_int", "comparator_power_main", "comparator_power_int",
                       "comparator_fd_main", "comparator_fd_int"});
  for (const auto& r : rows)
    w.write_row({r.mode}, {r.sigma2, r.power_main, r.power_int, r.fd_main, r.fd_int,
                           r.coverage_main, r.coverage_int, r.mse_main, r.mse_int,
                           r.sig_power_main, r.sig_power_int, r.comparator_power_main,
                           r.comparator_power_int, r.comparator_fd_main, r.comparator_fd_int});
}

SimulationResult run_simulation(const Scenario& scenario, const SimulationOptions& options) {
  scenario.validate();
  const std::size_t n_sigma = scenario.sigma2_grid.size();
  const std::size_t n_modes = scenario.modes.size();
  const auto reps = static_cast<std::size_t>(scenario.replicates);

  SimulationResult result;
  result.detail.assign(n_sigma, std::vector<std::vector<ReplicateScore>>(
                                    n_modes, std::vector<ReplicateScore>(reps)));
  result.comparators.assign(n_sigma, std::vector<ComparatorFit>(reps));

  const std::size_t total_tasks = n_sigma * n_modes * reps;
  parallel_for(total_tasks, options.threads, [&](std::size_t task) {
    const std::size_t rep = task % reps;
    const std::size_t mode_idx = (task / reps) % n_modes;
    const std::size_t sigma_idx = task / (reps * n_modes);

    // Exposures depend on the replicate only; outcomes add the sigma2 stream.
    RngStream root(options.fit.schedule.seed);
    RngStream exposure_stream = root.derive("replicate", rep, 0, 17);
    const auto exposures = gen_exposures(scenario, exposure_stream);
    RngStream outcome_stream = root.derive("replicate", rep, sigma_idx + 1, 29);
    Eigen::VectorXd y =
        gen_outcome(exposures, scenario, scenario.sigma2_grid[sigma_idx], outcome_stream);
    ExposurePanel panel = make_panel(exposures, std::move(y));

    FitOptions fit_options = options.fit;
    fit_options.prior.mode = scenario.modes[mode_idx];
    fit_options.threads = 1;  // replicates are already parallel
    fit_options.schedule.seed =
        splitmix64(options.fit.schedule.seed ^ splitmix64(task * 2654435769ull));
    const ArchiveBundle bundle = fit_panel(panel, fit_options);
    const PosteriorSummary summary = summarize(bundle);
    result.detail[sigma_idx][mode_idx][rep] = score_replicate(summary, scenario);

    if (mode_idx == 0) {
      const StandardizeResult centered = standardize(panel, ScaleMode::Center);
      result.comparators[sigma_idx][rep] = averaged_comparator(centered.panel);
    }
  });

  for (std::size_t s = 0; s < n_sigma; ++s)
    for (std::size_t m = 0; m < n_modes; ++m)
      result.metrics.push_back(score(mode_name(scenario.modes[m]), scenario.sigma2_grid[s],
                                     result.detail[s][m], result.comparators[s], scenario));
  if (!options.keep_replicate_detail) {
    result.detail.clear();
    result.comparators.clear();
  }
  return result;
}

void write_replicate_log(const SimulationResult& result, const Scenario& scenario,
                         const std::filesystem::path& path) {
  csv::Writer w(path, {"sigma2", "mode", "replicate", "block_type", "block", "pip",
                       "cumulative_mean", "comparator_cumulative", "comparator_pvalue"});
  const auto pairs = all_pairs(scenario.p);
  for (std::size_t s = 0; s < result.detail.size(); ++s) {
    for (std::size_t m = 0; m < result.detail[s].size(); ++m) {
      const std::string mode = mode_name(scenario.modes[m]);
      for (std::size_t r = 0; r < result.detail[s][m].size(); ++r) {
        const auto& score_row = result.detail[s][m][r];
        const auto& comp = result.comparators[s][r];
        for (Eigen::Index j = 0; j < scenario.p; ++j)
          w.write_row({csv::format_double(scenario.sigma2_grid[s]), mode, std::to_string(r),
                       "main", fmt::format("x{}", j + 1)},
                      {score_row.pip_main[j], score_row.cumulative_main[j],
                       comp.cumulative_main[j], comp.pvalue_main[j]});
        for (std::size_t k = 0; k < pairs.size(); ++k)
          w.write_row({csv::format_double(scenario.sigma2_grid[s]), mode, std::to_string(r),
                       "interaction",
                       fmt::format("x{}:x{}", pairs[k].first + 1, pairs[k].second + 1)},
                      {score_row.pip_int[static_cast<Eigen::Index>(k)],
                       score_row.cumulative_int[static_cast<Eigen::Index>(k)],
                       comp.cumulative_int[static_cast<Eigen::Index>(k)],
                       comp.pvalue_int[static_cast<Eigen::Index>(k)]});
      }
    }
  }
}

}  // namespace dlmix
