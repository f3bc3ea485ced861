#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "dlmix/archive.hpp"

namespace dlmix {

struct CurvePoint {
  double mean = 0.0;
  double lo = 0.0;      // 2.5% quantile
  double hi = 0.0;      // 97.5% quantile
  double bayes_p = 0.5;
  bool critical_window = false;  // bayes_p < 0.025 and PIP > 0.5
};

struct CurveSummary {
  std::vector<CurvePoint> points;  // length T
};

struct CumulativeSummary {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double pip = 0.0;
  bool significant = false;  // PIP > 0.5
};

struct SurfaceSummary {
  Eigen::MatrixXd mean, lo, hi;  // T x T grids
};

struct PosteriorSummary {
  Eigen::VectorXd pip_main;                     // p
  Eigen::VectorXd pip_int;                      // C(p,2)
  std::vector<CurveSummary> curves;             // p
  std::vector<CumulativeSummary> cumulative;    // p
  std::vector<CumulativeSummary> cumulative_int;
  std::vector<SurfaceSummary> surfaces;         // C(p,2)
};

// Per-block inclusion frequencies pooled across chains.
std::pair<Eigen::VectorXd, Eigen::VectorXd> pips(const ArchiveBundle& bundle);

// Distributed-lag curve summaries (pointwise mean, 95% interval, Bayes-p and
// critical-window flags). Verifies the stored basis hash first.
std::vector<CurveSummary> lag_curves(const ArchiveBundle& bundle);

// Per-draw cumulative effects (sum of the lag curve over all lags). Requires
// a fit on centered exposures.
std::pair<std::vector<CumulativeSummary>, std::vector<CumulativeSummary>> cumulative_effects(
    const ArchiveBundle& bundle);

// Interaction surfaces reconstructed through the stored rotation.
std::vector<SurfaceSummary> interaction_surfaces(const ArchiveBundle& bundle);

PosteriorSummary summarize(const ArchiveBundle& bundle);

// Plot-contract files: pips.csv, main_curves.csv, cumulative.csv,
// interaction_surfaces.csv, interaction_cumulative.csv plus summary.json.
void write_summary(const PosteriorSummary& summary, const ArchiveBundle& bundle,
                   const std::filesystem::path& dir);

// The matrix of per-draw lag-curve values for one exposure (rows = kept draws
// pooled across chains, columns = lags). Zero rows correspond to excluded
// draws. Shared by summaries, scoring, and tests.
Eigen::MatrixXd curve_draws(const ArchiveBundle& bundle, Eigen::Index exposure);
Eigen::MatrixXd surface_draws(const ArchiveBundle& bundle, std::size_t pair);  // draws x T*T
Eigen::VectorXd cumulative_draws_main(const ArchiveBundle& bundle, Eigen::Index exposure);
Eigen::VectorXd cumulative_draws_int(const ArchiveBundle& bundle, std::size_t pair);

double sample_quantile(std::vector<double> values, double q);  // type-7

struct DiagnosticRow {
  std::string parameter;
  double rhat = 1.0;
  double ess = 0.0;
};

// Split-Rhat and autocorrelation ESS on sigma^2 and every cumulative effect.
std::vector<DiagnosticRow> diagnostics(const ArchiveBundle& bundle);
void write_diagnostics(const std::vector<DiagnosticRow>& rows, const std::filesystem::path& path);

// PIP-per-alpha table in the layout of the alpha-threshold sensitivity sweep:
// ten log10-spaced thresholds from 1e-5 to 0.25.
std::vector<double> sensitivity_alpha_grid();
void write_sensitivity(const ArchiveBundle& bundle, const std::filesystem::path& path);

}  // namespace dlmix
