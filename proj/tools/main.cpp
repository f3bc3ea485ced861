#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "dlmix/archive.hpp"
#include "dlmix/config.hpp"
#include "dlmix/csv.hpp"
#include "dlmix/error.hpp"
#include "dlmix/fit.hpp"
#include "dlmix/parallel.hpp"
#include "dlmix/posterior.hpp"
#include "dlmix/simulation.hpp"

namespace {

using namespace dlmix;

constexpr int kExitOk = 0;
constexpr int kExitUser = 2;
constexpr int kExitNumerical = 3;

struct CommonFlags {
  std::string config_file;
  std::string data_file;
  std::string mode;
  std::string out_dir;
  std::optional<double> alpha_main, alpha_int;
  std::optional<int> chains;
  std::optional<long> iters, burnin, thin;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_file, "JSON run configuration");
  cmd->add_option("--mode", flags.mode, "fb, fb-reduced or fd-tau");
  cmd->add_option("--alpha-main", flags.alpha_main, "target null inclusion for main effects");
  cmd->add_option("--alpha-int", flags.alpha_int, "target null inclusion for interactions");
  cmd->add_option("--chains", flags.chains, "number of MCMC chains");
  cmd->add_option("--iters", flags.iters, "iterations per chain");
  cmd->add_option("--burnin", flags.burnin, "burn-in iterations");
  cmd->add_option("--thin", flags.thin, "thinning interval");
  cmd->add_option("--seed", flags.seed, "random seed");
  cmd->add_option("--threads", flags.threads, "worker threads (default: DLMIX_THREADS or cores)");
  cmd->add_option("--out", flags.out_dir, "output directory");
}

RunConfig resolve_config(const CommonFlags& flags) {
  RunConfig config;
  config.fit.threads = default_threads();
  if (!flags.config_file.empty()) config = parse_run_config(flags.config_file);
  if (config.fit.threads < 1) config.fit.threads = default_threads();

  if (!flags.data_file.empty()) config.data_file = flags.data_file;
  if (!flags.mode.empty()) config.fit.prior.mode = mode_from_name(flags.mode);
  if (flags.alpha_main) config.fit.prior.alpha_main = *flags.alpha_main;
  if (flags.alpha_int) config.fit.prior.alpha_int = *flags.alpha_int;
  if (flags.chains) config.fit.chains = *flags.chains;
  if (flags.iters) config.fit.schedule.iterations = *flags.iters;
  if (flags.burnin) config.fit.schedule.burn_in = *flags.burnin;
  if (flags.thin) config.fit.schedule.thin = *flags.thin;
  if (flags.seed) config.fit.schedule.seed = *flags.seed;
  if (flags.threads) config.fit.threads = *flags.threads;
  if (!flags.out_dir.empty()) config.out_dir = flags.out_dir;
  config.validate();
  return config;
}

void write_fit_outputs(const ArchiveBundle& bundle, const RunConfig& config) {
  const auto& out = config.out_dir;
  save_archive(out / "archive", bundle);
  const PosteriorSummary summary = summarize(bundle);
  write_summary(summary, bundle, out / "summary");
  write_diagnostics(diagnostics(bundle), out / "summary" / "diagnostics.csv");
  if (config.fit.prior.calibration_trace) {
    csv::Writer w(out / "summary" / "calibration_trace.csv",
                  {"chain", "iteration", "block", "sigma2", "slab", "tau", "achieved", "cache_hit"});
    for (const auto& chain : bundle.chains)
      for (const auto& row : chain.calibration_trace)
        w.write_row({std::to_string(chain.chain_index), std::to_string(row.iteration), row.block},
                    {row.sigma2, row.slab, row.tau, row.achieved, row.cache_hit ? 1.0 : 0.0});
  }
  write_manifest(config, bundle.meta.basis_hash, out / "manifest.json");
}

int cmd_fit(const CommonFlags& flags) {
  RunConfig config = resolve_config(flags);
  if (config.data_file.empty()) throw ConfigError("fit requires --data or data.file in the config");
  if (config.schema.outcome.empty())
    throw ConfigError("fit requires a data schema (data.schema in the config)");

  const ExposurePanel panel = load_panel(config.data_file, config.schema);
  if (panel.dropped_rows > 0)
    std::cerr << fmt::format("note: dropped {} incomplete rows ({} complete cases remain)\n",
                             panel.dropped_rows, panel.n);

  const ArchiveBundle bundle = fit_panel(panel, config.fit);
  write_fit_outputs(bundle, config);
  if (config.export_basis)
    export_basis_csv(bundle.basis, bundle.meta.exposure_names, config.out_dir / "basis");

  if (config.sensitivity_sweep) {
    // FD-Tau calibration is in-loop, so each alpha threshold needs a refit.
    csv::Writer w(config.out_dir / "sensitivity.csv", {"alpha", "block_type", "name", "pip"});
    for (double alpha : sensitivity_alpha_grid()) {
      FitOptions refit = config.fit;
      refit.prior.alpha_main = alpha;
      refit.prior.alpha_int = alpha;
      const ArchiveBundle swept = fit_panel(panel, refit);
      const auto [pip_main, pip_int] = pips(swept);
      for (Eigen::Index j = 0; j < swept.meta.p; ++j)
        w.write_row({csv::format_double(alpha), "main",
                     swept.meta.exposure_names[static_cast<std::size_t>(j)]},
                    {pip_main[j]});
      for (std::size_t k = 0; k < swept.pairs.size(); ++k)
        w.write_row({csv::format_double(alpha), "interaction", swept.pair_label(k)},
                    {pip_int[static_cast<Eigen::Index>(k)]});
    }
  }
  std::cout << fmt::format("fit complete: {} chains x {} kept draws -> {}\n",
                           bundle.meta.n_chains, bundle.chains.front().kept,
                           config.out_dir.string());
  return kExitOk;
}

int cmd_simulate(const CommonFlags& flags, const std::string& scenario_name,
                 std::optional<int> replicates, const std::vector<double>& sigma2_values,
                 const std::vector<std::string>& mode_names) {
  RunConfig config = resolve_config(flags);

  Scenario scenario;
  if (scenario_name.ends_with(".json")) {
    scenario = scenario_from_json(scenario_name);
  } else {
    scenario = builtin_scenario(scenario_name);
  }
  if (replicates) scenario.replicates = *replicates;
  if (!sigma2_values.empty()) scenario.sigma2_grid = sigma2_values;
  if (!mode_names.empty()) {
    scenario.modes.clear();
    for (const auto& m : mode_names) scenario.modes.push_back(mode_from_name(m));
  }
  scenario.validate();

  SimulationOptions options;
  options.fit = config.fit;
  options.threads = config.fit.threads;
  const SimulationResult result = run_simulation(scenario, options);

  std::filesystem::create_directories(config.out_dir);
  write_metric_report(result.metrics, config.out_dir / "metrics.csv");
  write_replicate_log(result, scenario, config.out_dir / "replicates.csv");
  for (const auto& row : result.metrics)
    std::cout << fmt::format(
        "{} sigma2={}: power_main={:.3f} fd_main={:.3f} power_int={:.3f} fd_int={:.3f}\n",
        row.mode, row.sigma2, row.power_main, row.fd_main, row.power_int, row.fd_int);
  return kExitOk;
}

int cmd_summarize(const CommonFlags& flags, const std::string& archive_dir, bool sensitivity) {
  RunConfig config;
  config.fit.threads = default_threads();
  if (!flags.config_file.empty()) config = parse_run_config(flags.config_file);
  std::filesystem::path out = flags.out_dir.empty() ? std::filesystem::path(archive_dir) / ".." / "summary"
                                                    : std::filesystem::path(flags.out_dir);

  const ArchiveBundle bundle = load_archive(archive_dir);
  const PosteriorSummary summary = summarize(bundle);
  write_summary(summary, bundle, out);
  write_diagnostics(diagnostics(bundle), out / "diagnostics.csv");
  if (sensitivity) write_sensitivity(bundle, out / "sensitivity.csv");
  std::cout << fmt::format("summarized {} kept draws -> {}\n", bundle.total_kept(), out.string());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian distributed-lag mixture modeling"};
  app.require_subcommand(1);

  CommonFlags fit_flags;
  auto* fit = app.add_subcommand("fit", "fit the model to a CSV dataset");
  add_common_flags(fit, fit_flags);
  fit->add_option("--data", fit_flags.data_file, "CSV data file (overrides config)");

  CommonFlags sim_flags;
  std::string scenario = "paper-main";
  std::optional<int> replicates;
  std::vector<double> sigma2_values;
  std::vector<std::string> sim_modes;
  auto* sim = app.add_subcommand("simulate", "run the synthetic evaluation harness");
  add_common_flags(sim, sim_flags);
  sim->add_option("--scenario", scenario, "builtin name (paper-main, null, main-only) or JSON file");
  sim->add_option("--replicates", replicates, "replicates per cell");
  sim->add_option("--sigma2", sigma2_values, "residual variance grid");
  sim->add_option("--sim-modes", sim_modes, "subset of modes to run");

  CommonFlags sum_flags;
  std::string archive_dir;
  bool sensitivity = false;
  auto* sum = app.add_subcommand("summarize", "recompute summaries from a stored archive");
  add_common_flags(sum, sum_flags);
  sum->add_option("--archive", archive_dir, "archive directory")->required();
  sum->add_flag("--sensitivity", sensitivity, "emit PIP-per-alpha sensitivity table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUser;
  }

  try {
    if (fit->parsed()) return cmd_fit(fit_flags);
    if (sim->parsed()) return cmd_simulate(sim_flags, scenario, replicates, sigma2_values, sim_modes);
    if (sum->parsed()) return cmd_summarize(sum_flags, archive_dir, sensitivity);
    std::cerr << "no subcommand given\n";
    return kExitUser;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUser;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUser;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUser;
  }
}
