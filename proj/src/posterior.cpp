#include "dlmix/posterior.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "dlmix/csv.hpp"
#include "dlmix/error.hpp"

namespace dlmix {

namespace {

void check_basis(const ArchiveBundle& bundle) {
  if (basis_hash(bundle.basis) != bundle.meta.basis_hash)
    throw DataError("basis hash mismatch: archive was fit with a different basis");
}

double bayes_p_from_counts(long positive, long negative) {
  const long nonzero = positive + negative;
  if (nonzero == 0) return 0.5;  // every draw excluded: no directional evidence
  const double frac = static_cast<double>(std::max(positive, negative)) / static_cast<double>(nonzero);
  return 1.0 - frac;
}

}  // namespace

double sample_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto i = static_cast<std::size_t>(h);
  if (i + 1 >= values.size()) return values.back();
  return values[i] + (h - static_cast<double>(i)) * (values[i + 1] - values[i]);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> pips(const ArchiveBundle& bundle) {
  if (bundle.total_kept() == 0) throw DataError("empty archive");
  Eigen::VectorXd main = Eigen::VectorXd::Zero(bundle.meta.p);
  Eigen::VectorXd inter = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(bundle.pairs.size()));
  for (const auto& chain : bundle.chains) {
    for (long i = 0; i < chain.kept; ++i) {
      for (Eigen::Index j = 0; j < bundle.meta.p; ++j)
        main[j] += chain.gamma_main[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      for (std::size_t k = 0; k < bundle.pairs.size(); ++k)
        inter[static_cast<Eigen::Index>(k)] += chain.gamma_int[static_cast<std::size_t>(i)][k];
    }
  }
  const double total = static_cast<double>(bundle.total_kept());
  return {main / total, inter / total};
}

Eigen::MatrixXd curve_draws(const ArchiveBundle& bundle, Eigen::Index exposure) {
  const auto& F = bundle.basis.exposures[static_cast<std::size_t>(exposure)].F;
  Eigen::MatrixXd draws = Eigen::MatrixXd::Zero(bundle.total_kept(), bundle.meta.T);
  long row = 0;
  for (const auto& chain : bundle.chains) {
    for (long i = 0; i < chain.kept; ++i, ++row) {
      const auto& beta = chain.beta_main[static_cast<std::size_t>(i)][static_cast<std::size_t>(exposure)];
      if (beta.size() > 0) draws.row(row) = (F.transpose() * beta).transpose();
    }
  }
  return draws;
}

Eigen::VectorXd cumulative_draws_main(const ArchiveBundle& bundle, Eigen::Index exposure) {
  const auto& F = bundle.basis.exposures[static_cast<std::size_t>(exposure)].F;
  const Eigen::VectorXd row_sums = F.rowwise().sum();
  Eigen::VectorXd draws = Eigen::VectorXd::Zero(bundle.total_kept());
  long row = 0;
  for (const auto& chain : bundle.chains) {
    for (long i = 0; i < chain.kept; ++i, ++row) {
      const auto& beta = chain.beta_main[static_cast<std::size_t>(i)][static_cast<std::size_t>(exposure)];
      if (beta.size() > 0) draws[row] = row_sums.dot(beta);
    }
  }
  return draws;
}

Eigen::MatrixXd surface_draws(const ArchiveBundle& bundle, std::size_t pair) {
  const auto& info = bundle.pairs[pair];
  const auto& F1 = bundle.basis.exposures[static_cast<std::size_t>(info.j1)].F;
  const auto& F2 = bundle.basis.exposures[static_cast<std::size_t>(info.j2)].F;
  const Eigen::Index K1 = F1.rows();
  const Eigen::Index K2 = F2.rows();
  const Eigen::Index T = bundle.meta.T;
  Eigen::MatrixXd draws = Eigen::MatrixXd::Zero(bundle.total_kept(), T * T);
  long row = 0;
  for (const auto& chain : bundle.chains) {
    for (long i = 0; i < chain.kept; ++i, ++row) {
      const auto& beta = chain.beta_int[static_cast<std::size_t>(i)][pair];
      if (beta.size() == 0) continue;
      const Eigen::VectorXd tensor = info.rotation * beta;  // back to K1*K2 coefficients
      const Eigen::Map<const Eigen::MatrixXd> B(tensor.data(), K1, K2);
      const Eigen::MatrixXd grid = F1.transpose() * B * F2;  // T x T, t1 rows
      draws.row(row) = Eigen::Map<const Eigen::VectorXd>(grid.data(), T * T).transpose();
    }
  }
  return draws;
}

Eigen::VectorXd cumulative_draws_int(const ArchiveBundle& bundle, std::size_t pair) {
  const auto& info = bundle.pairs[pair];
  const auto& F1 = bundle.basis.exposures[static_cast<std::size_t>(info.j1)].F;
  const auto& F2 = bundle.basis.exposures[static_cast<std::size_t>(info.j2)].F;
  const Eigen::VectorXd s1 = F1.rowwise().sum();
  const Eigen::VectorXd s2 = F2.rowwise().sum();
  const Eigen::Index K1 = F1.rows();
  const Eigen::Index K2 = F2.rows();
  Eigen::VectorXd tensor_sums(K1 * K2);
  for (Eigen::Index k2 = 0; k2 < K2; ++k2)
    for (Eigen::Index k1 = 0; k1 < K1; ++k1) tensor_sums[k2 * K1 + k1] = s1[k1] * s2[k2];
  const Eigen::VectorXd reduced_sums = info.rotation.transpose() * tensor_sums;

  Eigen::VectorXd draws = Eigen::VectorXd::Zero(bundle.total_kept());
  long row = 0;
  for (const auto& chain : bundle.chains) {
    for (long i = 0; i < chain.kept; ++i, ++row) {
      const auto& beta = chain.beta_int[static_cast<std::size_t>(i)][pair];
      if (beta.size() > 0) draws[row] = reduced_sums.dot(beta);
    }
  }
  return draws;
}

std::vector<CurveSummary> lag_curves(const ArchiveBundle& bundle) {
  check_basis(bundle);
  const auto [pip_main, pip_int] = pips(bundle);
  (void)pip_int;
  std::vector<CurveSummary> curves;
  for (Eigen::Index j = 0; j < bundle.meta.p; ++j) {
    const Eigen::MatrixXd draws = curve_draws(bundle, j);
    CurveSummary summary;
    summary.points.resize(static_cast<std::size_t>(bundle.meta.T));
    for (Eigen::Index t = 0; t < bundle.meta.T; ++t) {
      auto& point = summary.points[static_cast<std::size_t>(t)];
      const auto col = draws.col(t);
      point.mean = col.mean();
      std::vector<double> values(col.data(), col.data() + col.size());
      point.lo = sample_quantile(values, 0.025);
      point.hi = sample_quantile(values, 0.975);
      long positive = 0;
      long negative = 0;
      for (double v : values) {
        if (v > 0.0) ++positive;
        else if (v < 0.0) ++negative;
      }
      point.bayes_p = bayes_p_from_counts(positive, negative);
      point.critical_window = point.bayes_p < 0.025 && pip_main[j] > 0.5;
    }
    curves.push_back(std::move(summary));
  }
  return curves;
}

std::pair<std::vector<CumulativeSummary>, std::vector<CumulativeSummary>> cumulative_effects(
    const ArchiveBundle& bundle) {
  check_basis(bundle);
  if (!bundle.meta.centered)
    throw ConfigError(
        "cumulative effects require a fit on centered exposures; refit with centering enabled "
        "so interaction terms vanish when other exposures sit at their means");
  const auto [pip_main, pip_int] = pips(bundle);

  const auto summarize_draws = [](const Eigen::VectorXd& draws, double pip) {
    CumulativeSummary s;
    s.mean = draws.mean();
    std::vector<double> values(draws.data(), draws.data() + draws.size());
    s.lo = sample_quantile(values, 0.025);
    s.hi = sample_quantile(values, 0.975);
    s.pip = pip;
    s.significant = pip > 0.5;
    return s;
  };

  std::vector<CumulativeSummary> main;
  for (Eigen::Index j = 0; j < bundle.meta.p; ++j)
    main.push_back(summarize_draws(cumulative_draws_main(bundle, j), pip_main[j]));
  std::vector<CumulativeSummary> inter;
  for (std::size_t k = 0; k < bundle.pairs.size(); ++k)
    inter.push_back(
        summarize_draws(cumulative_draws_int(bundle, k), pip_int[static_cast<Eigen::Index>(k)]));
  return {std::move(main), std::move(inter)};
}

std::vector<SurfaceSummary> interaction_surfaces(const ArchiveBundle& bundle) {
  check_basis(bundle);
  const Eigen::Index T = bundle.meta.T;
  std::vector<SurfaceSummary> out;
  for (std::size_t k = 0; k < bundle.pairs.size(); ++k) {
    const Eigen::MatrixXd draws = surface_draws(bundle, k);
    SurfaceSummary s;
    s.mean.resize(T, T);
    s.lo.resize(T, T);
    s.hi.resize(T, T);
    for (Eigen::Index cell = 0; cell < T * T; ++cell) {
      const auto col = draws.col(cell);
      std::vector<double> values(col.data(), col.data() + col.size());
      const Eigen::Index t1 = cell % T;
      const Eigen::Index t2 = cell / T;
      s.mean(t1, t2) = col.mean();
      s.lo(t1, t2) = sample_quantile(values, 0.025);
      s.hi(t1, t2) = sample_quantile(values, 0.975);
    }
    out.push_back(std::move(s));
  }
  return out;
}

PosteriorSummary summarize(const ArchiveBundle& bundle) {
  PosteriorSummary summary;
  std::tie(summary.pip_main, summary.pip_int) = pips(bundle);
  summary.curves = lag_curves(bundle);
  std::tie(summary.cumulative, summary.cumulative_int) = cumulative_effects(bundle);
  summary.surfaces = interaction_surfaces(bundle);
  return summary;
}

void write_summary(const PosteriorSummary& summary, const ArchiveBundle& bundle,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    csv::Writer w(dir / "pips.csv", {"block_type", "name", "pip", "significant"});
    for (Eigen::Index j = 0; j < bundle.meta.p; ++j)
      w.write_row({"main", bundle.meta.exposure_names[static_cast<std::size_t>(j)]},
                  {summary.pip_main[j], summary.pip_main[j] > 0.5 ? 1.0 : 0.0});
    for (std::size_t k = 0; k < bundle.pairs.size(); ++k)
      w.write_row({"interaction", bundle.pair_label(k)},
                  {summary.pip_int[static_cast<Eigen::Index>(k)],
                   summary.pip_int[static_cast<Eigen::Index>(k)] > 0.5 ? 1.0 : 0.0});
  }
  {
    csv::Writer w(dir / "main_curves.csv",
                  {"exposure", "time", "mean", "lo", "hi", "bayes_p", "critical_window"});
    for (Eigen::Index j = 0; j < bundle.meta.p; ++j) {
      const auto& curve = summary.curves[static_cast<std::size_t>(j)];
      for (std::size_t t = 0; t < curve.points.size(); ++t) {
        const auto& pt = curve.points[t];
        w.write_row({bundle.meta.exposure_names[static_cast<std::size_t>(j)]},
                    {static_cast<double>(t), pt.mean, pt.lo, pt.hi, pt.bayes_p,
                     pt.critical_window ? 1.0 : 0.0});
      }
    }
  }
  {
    csv::Writer w(dir / "cumulative.csv",
                  {"block_type", "name", "mean", "lo", "hi", "pip", "significant"});
    for (Eigen::Index j = 0; j < bundle.meta.p; ++j) {
      const auto& c = summary.cumulative[static_cast<std::size_t>(j)];
      w.write_row({"main", bundle.meta.exposure_names[static_cast<std::size_t>(j)]},
                  {c.mean, c.lo, c.hi, c.pip, c.significant ? 1.0 : 0.0});
    }
    for (std::size_t k = 0; k < bundle.pairs.size(); ++k) {
      const auto& c = summary.cumulative_int[k];
      w.write_row({"interaction", bundle.pair_label(k)},
                  {c.mean, c.lo, c.hi, c.pip, c.significant ? 1.0 : 0.0});
    }
  }
  {
    csv::Writer w(dir / "interaction_surfaces.csv", {"pair", "t1", "t2", "mean", "lo", "hi"});
    for (std::size_t k = 0; k < bundle.pairs.size(); ++k) {
      const auto& s = summary.surfaces[k];
      for (Eigen::Index t1 = 0; t1 < s.mean.rows(); ++t1)
        for (Eigen::Index t2 = 0; t2 < s.mean.cols(); ++t2)
          w.write_row({bundle.pair_label(k)}, {static_cast<double>(t1), static_cast<double>(t2),
                                               s.mean(t1, t2), s.lo(t1, t2), s.hi(t1, t2)});
    }
  }
  nlohmann::json manifest;
  manifest["files"] = {"pips.csv", "main_curves.csv", "cumulative.csv",
                       "interaction_surfaces.csv"};
  manifest["library_version"] = bundle.meta.library_version;
  manifest["basis_hash"] = fmt::format("{:016x}", bundle.meta.basis_hash);
  manifest["mode"] = mode_name(bundle.meta.mode);
  manifest["kept_draws"] = bundle.total_kept();
  std::ofstream out(dir / "summary.json");
  out << manifest.dump(2) << '\n';
}

namespace {

// Split-chain Rhat (each chain halved) and autocorrelation ESS with Geyer
// pairwise truncation.
std::pair<double, double> rhat_ess(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> halves;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    if (half < 2) continue;
    halves.emplace_back(c.begin(), c.begin() + static_cast<long>(half));
    halves.emplace_back(c.begin() + static_cast<long>(half), c.begin() + static_cast<long>(2 * half));
  }
  if (halves.empty()) return {1.0, 0.0};
  const std::size_t m = halves.size();
  const std::size_t len = halves.front().size();

  std::vector<double> means(m);
  std::vector<double> vars(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mean = 0.0;
    for (double v : halves[i]) mean += v;
    mean /= static_cast<double>(len);
    means[i] = mean;
    double var = 0.0;
    for (double v : halves[i]) var += (v - mean) * (v - mean);
    vars[i] = var / static_cast<double>(len - 1);
  }
  double grand = 0.0;
  for (double v : means) grand += v;
  grand /= static_cast<double>(m);
  double b = 0.0;
  for (double v : means) b += (v - grand) * (v - grand);
  b *= static_cast<double>(len) / std::max<double>(1.0, static_cast<double>(m - 1));
  double w = 0.0;
  for (double v : vars) w += v;
  w /= static_cast<double>(m);

  double rhat = 1.0;
  const double n = static_cast<double>(len);
  const double var_plus = (n - 1.0) / n * w + b / n;
  if (w > 0.0) rhat = std::sqrt(var_plus / w);

  // ESS from averaged autocorrelations.
  double ess = 0.0;
  if (var_plus > 0.0) {
    std::vector<double> rho(len, 0.0);
    for (std::size_t lag = 1; lag < len; ++lag) {
      double acov = 0.0;
      for (const auto& h : halves) {
        double c = 0.0;
        for (std::size_t i = 0; i + lag < len; ++i)
          c += (h[i] - grand) * (h[i + lag] - grand);
        acov += c / static_cast<double>(len);
      }
      acov /= static_cast<double>(m);
      rho[lag] = 1.0 - (w - acov) / var_plus;
    }
    double sum_rho = 0.0;
    for (std::size_t lag = 1; lag + 1 < len; lag += 2) {
      const double pair_sum = rho[lag] + rho[lag + 1];
      if (pair_sum < 0.0) break;
      sum_rho += pair_sum;
    }
    ess = static_cast<double>(m) * n / (1.0 + 2.0 * sum_rho);
  }
  return {rhat, ess};
}

}  // namespace

std::vector<DiagnosticRow> diagnostics(const ArchiveBundle& bundle) {
  std::vector<DiagnosticRow> rows;

  const auto add = [&rows](const std::string& name, const std::vector<std::vector<double>>& chains) {
    const auto [rhat, ess] = rhat_ess(chains);
    rows.push_back({name, rhat, ess});
  };

  std::vector<std::vector<double>> sigma2_chains;
  for (const auto& chain : bundle.chains) sigma2_chains.push_back(chain.sigma2);
  add("sigma2", sigma2_chains);

  for (Eigen::Index j = 0; j < bundle.meta.p; ++j) {
    std::vector<std::vector<double>> per_chain;
    long offset = 0;
    const Eigen::VectorXd all = cumulative_draws_main(bundle, j);
    for (const auto& chain : bundle.chains) {
      per_chain.emplace_back(all.data() + offset, all.data() + offset + chain.kept);
      offset += chain.kept;
    }
    add(fmt::format("cumulative_{}", bundle.meta.exposure_names[static_cast<std::size_t>(j)]),
        per_chain);
  }
  for (std::size_t k = 0; k < bundle.pairs.size(); ++k) {
    std::vector<std::vector<double>> per_chain;
    long offset = 0;
    const Eigen::VectorXd all = cumulative_draws_int(bundle, k);
    for (const auto& chain : bundle.chains) {
      per_chain.emplace_back(all.data() + offset, all.data() + offset + chain.kept);
      offset += chain.kept;
    }
    add(fmt::format("cumulative_{}", bundle.pair_label(k)), per_chain);
  }
  return rows;
}

void write_diagnostics(const std::vector<DiagnosticRow>& rows, const std::filesystem::path& path) {
  csv::Writer w(path, {"parameter", "rhat", "ess"});
  for (const auto& row : rows) w.write_row({row.parameter}, {row.rhat, row.ess});
}

std::vector<double> sensitivity_alpha_grid() {
  // Ten points equally spaced on log10 between 1e-5 and 0.25.
  std::vector<double> grid;
  const double lo = std::log10(1e-5);
  const double hi = std::log10(0.25);
  for (int i = 0; i < 10; ++i)
    grid.push_back(std::pow(10.0, lo + (hi - lo) * static_cast<double>(i) / 9.0));
  return grid;
}

void write_sensitivity(const ArchiveBundle& bundle, const std::filesystem::path& path) {
  const auto [pip_main, pip_int] = pips(bundle);
  csv::Writer w(path, {"alpha", "block_type", "name", "pip"});
  for (double alpha : sensitivity_alpha_grid()) {
    for (Eigen::Index j = 0; j < bundle.meta.p; ++j)
      w.write_row({csv::format_double(alpha), "main",
                   bundle.meta.exposure_names[static_cast<std::size_t>(j)]},
                  {pip_main[j]});
    for (std::size_t k = 0; k < bundle.pairs.size(); ++k)
      w.write_row({csv::format_double(alpha), "interaction", bundle.pair_label(k)},
                  {pip_int[static_cast<Eigen::Index>(k)]});
  }
}

}  // namespace dlmix
