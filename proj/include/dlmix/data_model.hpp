#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

namespace dlmix {

// Column mapping for load_panel: one outcome column, q covariate columns and,
// per exposure, an ordered block of T lag columns.
struct PanelSchema {
  std::string outcome;
  std::vector<std::string> covariates;
  struct Exposure {
    std::string name;
    std::vector<std::string> lag_columns;  // ordered, size T
  };
  std::vector<Exposure> exposures;
};

// One analysis dataset: n subjects, p exposures over T lags, q covariates and
// a continuous outcome. Immutable after construction; chains share it freely.
struct ExposurePanel {
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  Eigen::Index T = 0;
  Eigen::Index q = 0;
  std::vector<Eigen::MatrixXd> exposures;  // p matrices, each n x T
  Eigen::MatrixXd covariates;              // n x q
  Eigen::VectorXd outcome;                 // n
  std::vector<std::string> exposure_names;
  std::vector<std::string> covariate_names;
  long dropped_rows = 0;   // incomplete cases removed at load time
  bool centered = false;   // set by standardize()

  void validate() const;  // shape and finiteness invariants
};

enum class ScaleMode { None, Center, CenterScaleIqr };

// Per-exposure centering offsets (one per lag column) and a pooled IQR scale.
// The transform is invertible; see invert().
struct Standardization {
  std::vector<ScaleMode> mode;            // size p
  std::vector<Eigen::VectorXd> offsets;   // size p, each length T (zero when mode None)
  std::vector<double> scales;             // size p, pooled IQR (1 when not scaling)
};

ExposurePanel load_panel(const std::filesystem::path& path, const PanelSchema& schema);

struct StandardizeResult {
  ExposurePanel panel;
  Standardization applied;
};

// Centers each exposure column and optionally scales by the exposure's pooled
// IQR over all n*T values. A zero IQR under CenterScaleIqr is a DataError.
StandardizeResult standardize(const ExposurePanel& panel, const std::vector<ScaleMode>& modes);
StandardizeResult standardize(const ExposurePanel& panel, ScaleMode mode_for_all);

ExposurePanel invert_standardize(const ExposurePanel& panel, const Standardization& applied);

double iqr(std::vector<double> values);  // linear-interpolation quartiles

}  // namespace dlmix
