#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dlmix/basis.hpp"
#include "dlmix/model.hpp"
#include "dlmix/sampler.hpp"

namespace dlmix {

inline constexpr int kArchiveFormatVersion = 1;
inline constexpr const char* kLibraryVersion = "0.1.0";

// Interaction metadata persisted alongside the chains; the rotation is needed
// to rebuild surfaces from reduced coefficients.
struct PairInfo {
  Eigen::Index j1 = 0, j2 = 0;
  Eigen::MatrixXd rotation;  // (K1*K2) x R
  double retained_variance = 1.0;
};

struct ArchiveMetadata {
  int format_version = kArchiveFormatVersion;
  std::string library_version = kLibraryVersion;
  Eigen::Index n = 0, p = 0, T = 0, q = 0;
  Mode mode = Mode::FDTau;
  Schedule schedule;
  int n_chains = 0;
  double alpha_main = 0.1, alpha_int = 0.05;
  int calibration_draws = 200;
  bool calibration_cache = true;
  double main_threshold = 0.95;
  double interaction_threshold = 0.999;
  double smoothing_penalty = 0.0;
  std::vector<std::string> exposure_names;
  std::vector<std::string> covariate_names;
  bool centered = false;
  std::vector<std::string> scale_modes;  // per exposure: none|center|center-iqr
  std::vector<double> scales;            // pooled IQR per exposure (1 when unscaled)
  std::uint64_t basis_hash = 0;
};

struct ArchiveBundle {
  ArchiveMetadata meta;
  BasisSet basis;
  std::vector<PairInfo> pairs;
  std::vector<ChainArchive> chains;

  long total_kept() const;
  std::string pair_label(std::size_t k) const;  // "<name1>:<name2>"
};

void save_archive(const std::filesystem::path& dir, const ArchiveBundle& bundle);
ArchiveBundle load_archive(const std::filesystem::path& dir);

}  // namespace dlmix
