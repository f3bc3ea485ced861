#include "dlmix/data_model.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "dlmix/csv.hpp"
#include "dlmix/error.hpp"

namespace dlmix {

void ExposurePanel::validate() const {
  if (static_cast<Eigen::Index>(exposures.size()) != p)
    throw DataError("panel: exposure count does not match p");
  for (Eigen::Index j = 0; j < p; ++j) {
    if (exposures[j].rows() != n || exposures[j].cols() != T)
      throw DataError(fmt::format("panel: exposure '{}' has shape {}x{}, expected {}x{}",
                                  exposure_names.empty() ? std::to_string(j) : exposure_names[j],
                                  exposures[j].rows(), exposures[j].cols(), n, T));
    if (!exposures[j].allFinite())
      throw DataError("panel: non-finite exposure values after ingestion");
  }
  if (covariates.rows() != n || covariates.cols() != q)
    throw DataError("panel: covariate matrix shape mismatch");
  if (outcome.size() != n) throw DataError("panel: outcome length mismatch");
  if (!covariates.allFinite() || !outcome.allFinite())
    throw DataError("panel: non-finite covariate or outcome values");
}

ExposurePanel load_panel(const std::filesystem::path& path, const PanelSchema& schema) {
  if (schema.outcome.empty()) throw ConfigError("schema: outcome column not named");
  if (schema.exposures.empty()) throw ConfigError("schema: no exposures named");
  const std::size_t T = schema.exposures.front().lag_columns.size();
  if (T == 0) throw ConfigError("schema: exposure with zero lag columns");
  for (const auto& e : schema.exposures) {
    if (e.lag_columns.size() != T)
      throw DataError(fmt::format("schema: exposure '{}' has {} lag columns, expected {}", e.name,
                                  e.lag_columns.size(), T));
  }

  const csv::Table table = csv::read_table(path);
  const std::size_t outcome_col = table.column(schema.outcome);
  std::vector<std::size_t> covariate_cols;
  for (const auto& name : schema.covariates) covariate_cols.push_back(table.column(name));
  std::vector<std::vector<std::size_t>> exposure_cols;
  for (const auto& e : schema.exposures) {
    std::vector<std::size_t> cols;
    for (const auto& name : e.lag_columns) cols.push_back(table.column(name));
    exposure_cols.push_back(std::move(cols));
  }

  // Complete-case filter, preserving row order.
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    bool complete = std::isfinite(row[outcome_col]);
    for (auto c : covariate_cols) complete = complete && std::isfinite(row[c]);
    for (const auto& cols : exposure_cols)
      for (auto c : cols) complete = complete && std::isfinite(row[c]);
    if (complete) keep.push_back(r);
  }

  ExposurePanel panel;
  panel.n = static_cast<Eigen::Index>(keep.size());
  panel.p = static_cast<Eigen::Index>(schema.exposures.size());
  panel.T = static_cast<Eigen::Index>(T);
  panel.q = static_cast<Eigen::Index>(schema.covariates.size());
  panel.dropped_rows = static_cast<long>(table.rows.size() - keep.size());
  panel.covariate_names = schema.covariates;
  for (const auto& e : schema.exposures) panel.exposure_names.push_back(e.name);

  panel.outcome.resize(panel.n);
  panel.covariates.resize(panel.n, panel.q);
  panel.exposures.assign(panel.p, Eigen::MatrixXd(panel.n, panel.T));
  for (Eigen::Index i = 0; i < panel.n; ++i) {
    const auto& row = table.rows[keep[static_cast<std::size_t>(i)]];
    panel.outcome[i] = row[outcome_col];
    for (Eigen::Index k = 0; k < panel.q; ++k)
      panel.covariates(i, k) = row[covariate_cols[static_cast<std::size_t>(k)]];
    for (Eigen::Index j = 0; j < panel.p; ++j)
      for (Eigen::Index t = 0; t < panel.T; ++t)
        panel.exposures[j](i, t) =
            row[exposure_cols[static_cast<std::size_t>(j)][static_cast<std::size_t>(t)]];
  }
  panel.validate();
  return panel;
}

double iqr(std::vector<double> values) {
  if (values.empty()) throw DataError("iqr of empty set");
  std::sort(values.begin(), values.end());
  const auto quantile = [&](double q) {
    const double h = q * static_cast<double>(values.size() - 1);
    const std::size_t i = static_cast<std::size_t>(h);
    if (i + 1 >= values.size()) return values.back();
    return values[i] + (h - static_cast<double>(i)) * (values[i + 1] - values[i]);
  };
  return quantile(0.75) - quantile(0.25);
}

StandardizeResult standardize(const ExposurePanel& panel, const std::vector<ScaleMode>& modes) {
  if (static_cast<Eigen::Index>(modes.size()) != panel.p)
    throw ConfigError("standardize: one mode per exposure required");

  StandardizeResult result{panel, {}};
  result.applied.mode = modes;
  result.applied.offsets.resize(modes.size());
  result.applied.scales.assign(modes.size(), 1.0);

  bool all_centered = true;
  for (Eigen::Index j = 0; j < panel.p; ++j) {
    auto& X = result.panel.exposures[j];
    const ScaleMode mode = modes[static_cast<std::size_t>(j)];
    if (mode == ScaleMode::None) {
      result.applied.offsets[static_cast<std::size_t>(j)] = Eigen::VectorXd::Zero(panel.T);
      all_centered = false;
      continue;
    }
    Eigen::VectorXd means = X.colwise().mean();
    X.rowwise() -= means.transpose();
    result.applied.offsets[static_cast<std::size_t>(j)] = means;
    if (mode == ScaleMode::CenterScaleIqr) {
      std::vector<double> pooled(X.data(), X.data() + X.size());
      const double scale = iqr(std::move(pooled));
      if (scale <= 0.0)
        throw DataError(fmt::format("exposure '{}' has zero IQR; cannot scale",
                                    panel.exposure_names[static_cast<std::size_t>(j)]));
      X /= scale;
      result.applied.scales[static_cast<std::size_t>(j)] = scale;
    }
  }
  result.panel.centered = all_centered;
  return result;
}

StandardizeResult standardize(const ExposurePanel& panel, ScaleMode mode_for_all) {
  return standardize(panel, std::vector<ScaleMode>(static_cast<std::size_t>(panel.p), mode_for_all));
}

ExposurePanel invert_standardize(const ExposurePanel& panel, const Standardization& applied) {
  ExposurePanel out = panel;
  for (Eigen::Index j = 0; j < panel.p; ++j) {
    auto& X = out.exposures[j];
    X *= applied.scales[static_cast<std::size_t>(j)];
    X.rowwise() += applied.offsets[static_cast<std::size_t>(j)].transpose();
  }
  out.centered = false;
  return out;
}

}  // namespace dlmix
