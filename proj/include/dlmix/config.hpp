#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "dlmix/data_model.hpp"
#include "dlmix/fit.hpp"
#include "dlmix/model.hpp"

namespace dlmix {

// Resolved run configuration for the CLI. A JSON config file supplies values;
// command-line flags override individual fields. Everything is validated
// before any computation starts.
struct RunConfig {
  std::filesystem::path data_file;
  PanelSchema schema;
  FitOptions fit;
  std::filesystem::path out_dir = "dlmix-out";
  bool export_basis = false;
  bool sensitivity_sweep = false;  // fit-time alpha sweep (refits per alpha)

  void validate() const;
};

RunConfig parse_run_config(const std::filesystem::path& json_path);

// Schema may list lag columns explicitly or via {"prefix": "pm25_", "count": 37}
// which expands to pm25_1 .. pm25_37.
PanelSchema schema_from_json_file(const std::filesystem::path& json_path);

// Manifest: full resolved configuration + library and format versions. Two
// equal manifests imply byte-identical outputs.
void write_manifest(const RunConfig& config, std::uint64_t basis_hash,
                    const std::filesystem::path& path);

}  // namespace dlmix
