#pragma once

#include <filesystem>

#include "dlmix/archive.hpp"
#include "dlmix/data_model.hpp"
#include "dlmix/model.hpp"

namespace dlmix {

struct FitOptions {
  PriorConfig prior;
  Schedule schedule;
  int chains = 2;
  int threads = 1;
  double main_threshold = 0.95;
  double interaction_threshold = 0.999;
  double smoothing_penalty = 0.0;
  ScaleMode standardize_mode = ScaleMode::Center;
};

// Full pipeline on a raw panel: standardize, build bases and designs, run the
// chains, and assemble the archive bundle. FB mode keeps the raw tensor
// interaction designs; the reduced modes rotate them at interaction_threshold.
ArchiveBundle fit_panel(const ExposurePanel& raw_panel, const FitOptions& options);

}  // namespace dlmix
