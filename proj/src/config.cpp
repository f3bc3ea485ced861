#include "dlmix/config.hpp"

#include <fmt/format.h>

#include <fstream>
#include <nlohmann/json.hpp>

#include "dlmix/archive.hpp"
#include "dlmix/error.hpp"

namespace dlmix {

using nlohmann::json;

namespace {

PanelSchema schema_from_json(const json& doc) {
  PanelSchema schema;
  schema.outcome = doc.at("outcome").get<std::string>();
  if (doc.contains("covariates"))
    schema.covariates = doc.at("covariates").get<std::vector<std::string>>();
  for (const auto& e : doc.at("exposures")) {
    PanelSchema::Exposure exposure;
    exposure.name = e.at("name").get<std::string>();
    if (e.contains("lag_columns")) {
      exposure.lag_columns = e.at("lag_columns").get<std::vector<std::string>>();
    } else if (e.contains("prefix")) {
      const auto prefix = e.at("prefix").get<std::string>();
      const int count = e.at("count").get<int>();
      for (int t = 1; t <= count; ++t) exposure.lag_columns.push_back(fmt::format("{}{}", prefix, t));
    } else {
      throw ConfigError(fmt::format("exposure '{}' needs lag_columns or prefix+count",
                                    exposure.name));
    }
    schema.exposures.push_back(std::move(exposure));
  }
  return schema;
}

ScaleMode scale_mode_from_name(const std::string& name) {
  if (name == "none") return ScaleMode::None;
  if (name == "center") return ScaleMode::Center;
  if (name == "center-iqr") return ScaleMode::CenterScaleIqr;
  throw ConfigError("standardize must be none, center or center-iqr");
}

std::string scale_mode_to_name(ScaleMode mode) {
  switch (mode) {
    case ScaleMode::None: return "none";
    case ScaleMode::Center: return "center";
    case ScaleMode::CenterScaleIqr: return "center-iqr";
  }
  throw ConfigError("unknown scale mode");
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  try {
    json doc;
    in >> doc;
    return doc;
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config file '{}': {}", path.string(), e.what()));
  }
}

}  // namespace

PanelSchema schema_from_json_file(const std::filesystem::path& json_path) {
  return schema_from_json(load_json(json_path));
}

void RunConfig::validate() const {
  fit.prior.validate();
  fit.schedule.validate();
  if (fit.chains < 1) throw ConfigError("chains must be >= 1");
  if (fit.threads < 1) throw ConfigError("threads must be >= 1");
  if (!(fit.main_threshold > 0.0 && fit.main_threshold <= 1.0))
    throw ConfigError("basis main threshold must be in (0,1]");
  if (!(fit.interaction_threshold > 0.0 && fit.interaction_threshold <= 1.0))
    throw ConfigError("interaction threshold must be in (0,1]");
  if (fit.smoothing_penalty < 0.0) throw ConfigError("smoothing penalty must be >= 0");
}

RunConfig parse_run_config(const std::filesystem::path& json_path) {
  const json doc = load_json(json_path);
  RunConfig config;
  try {
    if (doc.contains("data")) {
      const auto& data = doc.at("data");
      if (data.contains("file")) config.data_file = data.at("file").get<std::string>();
      if (data.contains("schema")) config.schema = schema_from_json(data.at("schema"));
    }
    if (doc.contains("mode")) config.fit.prior.mode = mode_from_name(doc.at("mode").get<std::string>());
    if (doc.contains("standardize"))
      config.fit.standardize_mode = scale_mode_from_name(doc.at("standardize").get<std::string>());
    if (doc.contains("basis")) {
      const auto& basis = doc.at("basis");
      config.fit.main_threshold = basis.value("main_threshold", config.fit.main_threshold);
      config.fit.interaction_threshold =
          basis.value("interaction_threshold", config.fit.interaction_threshold);
      config.fit.smoothing_penalty = basis.value("smoothing_penalty", config.fit.smoothing_penalty);
    }
    if (doc.contains("prior")) {
      const auto& prior = doc.at("prior");
      auto& pc = config.fit.prior;
      pc.a_tau_m = prior.value("a_tau_m", pc.a_tau_m);
      pc.b_tau_m = prior.value("b_tau_m", pc.b_tau_m);
      pc.a_tau_i = prior.value("a_tau_i", pc.a_tau_i);
      pc.b_tau_i = prior.value("b_tau_i", pc.b_tau_i);
      pc.a_sigma2 = prior.value("a_sigma2", pc.a_sigma2);
      pc.b_sigma2 = prior.value("b_sigma2", pc.b_sigma2);
      pc.a_slab_m = prior.value("a_slab_m", pc.a_slab_m);
      pc.b_slab_m = prior.value("b_slab_m", pc.b_slab_m);
      pc.a_slab_i = prior.value("a_slab_i", pc.a_slab_i);
      pc.b_slab_i = prior.value("b_slab_i", pc.b_slab_i);
      pc.v_c = prior.value("v_c", pc.v_c);
    }
    auto& pc = config.fit.prior;
    pc.alpha_main = doc.value("alpha_main", pc.alpha_main);
    pc.alpha_int = doc.value("alpha_int", pc.alpha_int);
    pc.calibration_draws = doc.value("calibration_draws", pc.calibration_draws);
    pc.calibration_cache = doc.value("calibration_cache", pc.calibration_cache);
    pc.calibration_trace = doc.value("calibration_trace", pc.calibration_trace);
    config.fit.chains = doc.value("chains", config.fit.chains);
    config.fit.schedule.iterations = doc.value("iterations", config.fit.schedule.iterations);
    config.fit.schedule.burn_in = doc.value("burn_in", config.fit.schedule.burn_in);
    config.fit.schedule.thin = doc.value("thin", config.fit.schedule.thin);
    config.fit.schedule.seed = doc.value("seed", config.fit.schedule.seed);
    if (doc.contains("threads")) config.fit.threads = doc.at("threads").get<int>();
    if (doc.contains("out")) config.out_dir = doc.at("out").get<std::string>();
    config.export_basis = doc.value("export_basis", config.export_basis);
    config.sensitivity_sweep = doc.value("sensitivity_sweep", config.sensitivity_sweep);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config file '{}': {}", json_path.string(), e.what()));
  }
  return config;
}

void write_manifest(const RunConfig& config, std::uint64_t basis_hash,
                    const std::filesystem::path& path) {
  json manifest;
  manifest["library_version"] = kLibraryVersion;
  manifest["archive_format_version"] = kArchiveFormatVersion;
  manifest["data_file"] = config.data_file.string();
  manifest["mode"] = mode_name(config.fit.prior.mode);
  manifest["standardize"] = scale_mode_to_name(config.fit.standardize_mode);
  manifest["basis"] = {{"main_threshold", config.fit.main_threshold},
                       {"interaction_threshold", config.fit.interaction_threshold},
                       {"smoothing_penalty", config.fit.smoothing_penalty},
                       {"hash", fmt::format("{:016x}", basis_hash)}};
  const auto& pc = config.fit.prior;
  manifest["prior"] = {{"a_tau_m", pc.a_tau_m}, {"b_tau_m", pc.b_tau_m},
                       {"a_tau_i", pc.a_tau_i}, {"b_tau_i", pc.b_tau_i},
                       {"a_sigma2", pc.a_sigma2}, {"b_sigma2", pc.b_sigma2},
                       {"a_slab_m", pc.a_slab_m}, {"b_slab_m", pc.b_slab_m},
                       {"a_slab_i", pc.a_slab_i}, {"b_slab_i", pc.b_slab_i},
                       {"v_c", pc.v_c}};
  manifest["alpha_main"] = pc.alpha_main;
  manifest["alpha_int"] = pc.alpha_int;
  manifest["calibration_draws"] = pc.calibration_draws;
  manifest["calibration_cache"] = pc.calibration_cache;
  manifest["chains"] = config.fit.chains;
  manifest["iterations"] = config.fit.schedule.iterations;
  manifest["burn_in"] = config.fit.schedule.burn_in;
  manifest["thin"] = config.fit.schedule.thin;
  manifest["seed"] = config.fit.schedule.seed;

  json schema;
  schema["outcome"] = config.schema.outcome;
  schema["covariates"] = config.schema.covariates;
  json exposures = json::array();
  for (const auto& e : config.schema.exposures)
    exposures.push_back({{"name", e.name}, {"lag_columns", e.lag_columns}});
  schema["exposures"] = exposures;
  manifest["schema"] = schema;

  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest '" + path.string() + "'");
  out << manifest.dump(2) << '\n';
}

}  // namespace dlmix
