#include "dlmix/fit.hpp"

#include "dlmix/basis.hpp"
#include "dlmix/error.hpp"
#include "dlmix/sampler.hpp"

namespace dlmix {

namespace {
std::string scale_mode_name(ScaleMode mode) {
  switch (mode) {
    case ScaleMode::None: return "none";
    case ScaleMode::Center: return "center";
    case ScaleMode::CenterScaleIqr: return "center-iqr";
  }
  throw ConfigError("unknown scale mode");
}
}  // namespace

ArchiveBundle fit_panel(const ExposurePanel& raw_panel, const FitOptions& options) {
  options.prior.validate();
  options.schedule.validate();
  if (options.chains < 1) throw ConfigError("chains must be >= 1");

  const StandardizeResult standardized = standardize(raw_panel, options.standardize_mode);
  const ExposurePanel& panel = standardized.panel;

  BasisSet basis;
  for (Eigen::Index j = 0; j < panel.p; ++j)
    basis.exposures.push_back(
        fpca_basis(panel.exposures[static_cast<std::size_t>(j)], options.main_threshold,
                   options.smoothing_penalty));

  const bool reduce = options.prior.mode != Mode::FB;
  const DesignMatrices designs =
      DesignMatrices::build(panel, basis, reduce, options.interaction_threshold);

  ArchiveBundle bundle;
  bundle.meta.n = panel.n;
  bundle.meta.p = panel.p;
  bundle.meta.T = panel.T;
  bundle.meta.q = panel.q;
  bundle.meta.mode = options.prior.mode;
  bundle.meta.schedule = options.schedule;
  bundle.meta.n_chains = options.chains;
  bundle.meta.alpha_main = options.prior.alpha_main;
  bundle.meta.alpha_int = options.prior.alpha_int;
  bundle.meta.calibration_draws = options.prior.calibration_draws;
  bundle.meta.calibration_cache = options.prior.calibration_cache;
  bundle.meta.main_threshold = options.main_threshold;
  bundle.meta.interaction_threshold = options.interaction_threshold;
  bundle.meta.smoothing_penalty = options.smoothing_penalty;
  bundle.meta.exposure_names = panel.exposure_names;
  bundle.meta.covariate_names = panel.covariate_names;
  bundle.meta.centered = panel.centered;
  for (Eigen::Index j = 0; j < panel.p; ++j) {
    bundle.meta.scale_modes.push_back(
        scale_mode_name(standardized.applied.mode[static_cast<std::size_t>(j)]));
    bundle.meta.scales.push_back(standardized.applied.scales[static_cast<std::size_t>(j)]);
  }
  bundle.basis = basis;
  bundle.meta.basis_hash = basis_hash(basis);
  for (const auto& pd : designs.pairs)
    bundle.pairs.push_back({pd.j1, pd.j2, pd.rotation, pd.retained_variance});

  bundle.chains =
      run_chains(panel, designs, options.prior, options.schedule, options.chains, options.threads);
  return bundle;
}

}  // namespace dlmix
