#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dlmix/archive.hpp"
#include "dlmix/error.hpp"
#include "dlmix/fit.hpp"
#include "dlmix/posterior.hpp"
#include "dlmix/rng.hpp"
#include "dlmix/simulation.hpp"

using namespace dlmix;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DLMIX_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string run_cli_stderr(const std::string& args) {
  const fs::path err = fs::temp_directory_path() / "dlmix_cli_stderr.txt";
  const std::string cmd =
      std::string(DLMIX_CLI_PATH) + " " + args + " >/dev/null 2>" + err.string();
  const int status = std::system(cmd.c_str());
  (void)status;
  std::ifstream in(err);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Small synthetic dataset + config for end-to-end CLI runs.
fs::path write_fixture(const fs::path& dir) {
  fs::create_directories(dir);
  Scenario s;
  s.name = "fixture";
  s.n = 60;
  s.p = 2;
  s.T = 3;
  s.var_coefficient = Eigen::MatrixXd::Identity(2, 2) * 0.7;
  s.innovation_cov = Eigen::MatrixXd::Identity(2, 2);
  s.main_curves = {flat_curve(3, 0.4), Eigen::VectorXd::Zero(3)};
  s.sigma2_grid = {1.0};
  s.modes = {Mode::FDTau};
  RngStream rng(999);
  const auto exposures = gen_exposures(s, rng);
  RngStream rng2(1000);
  const Eigen::VectorXd y = gen_outcome(exposures, s, 1.0, rng2);

  std::ofstream csv(dir / "data.csv");
  csv << "y,age";
  for (int j = 1; j <= 2; ++j)
    for (int t = 1; t <= 3; ++t) csv << ",x" << j << "_" << t;
  csv << "\n";
  csv.precision(17);
  RngStream rng3(1001);
  for (Eigen::Index i = 0; i < s.n; ++i) {
    csv << y[i] << "," << 30 + 10 * rng3.uniform();
    for (int j = 0; j < 2; ++j)
      for (int t = 0; t < 3; ++t) csv << "," << exposures[static_cast<std::size_t>(j)](i, t);
    csv << "\n";
  }

  std::ofstream config(dir / "config.json");
  config << R"({
    "data": {
      "file": ")" << (dir / "data.csv").string() << R"(",
      "schema": {
        "outcome": "y",
        "covariates": ["age"],
        "exposures": [
          {"name": "x1", "prefix": "x1_", "count": 3},
          {"name": "x2", "prefix": "x2_", "count": 3}
        ]
      }
    },
    "mode": "fd-tau",
    "iterations": 400,
    "burn_in": 200,
    "thin": 2,
    "chains": 2,
    "seed": 11,
    "calibration_draws": 50
  })";
  return dir / "config.json";
}

}  // namespace

TEST_CASE("archive save/load round trip preserves draws") {
  Scenario s;
  s.name = "roundtrip";
  s.n = 50;
  s.p = 2;
  s.T = 4;
  s.var_coefficient = Eigen::MatrixXd::Identity(2, 2) * 0.8;
  s.innovation_cov = Eigen::MatrixXd::Identity(2, 2);
  s.main_curves = {flat_curve(4, 0.3), Eigen::VectorXd::Zero(4)};
  s.sigma2_grid = {1.0};
  s.modes = {Mode::FDTau};
  RngStream rng(5);
  const auto exposures = gen_exposures(s, rng);
  RngStream rng2(6);
  const Eigen::VectorXd y = gen_outcome(exposures, s, 1.0, rng2);
  const ExposurePanel panel = make_panel(exposures, y);

  FitOptions options;
  options.prior.mode = Mode::FDTau;
  options.prior.calibration_draws = 50;
  options.schedule = {300, 100, 2, 42};
  options.chains = 2;
  const ArchiveBundle bundle = fit_panel(panel, options);

  const fs::path dir = fs::temp_directory_path() / "dlmix_archive_rt";
  fs::remove_all(dir);
  save_archive(dir, bundle);
  const ArchiveBundle loaded = load_archive(dir);

  CHECK(loaded.meta.p == bundle.meta.p);
  CHECK(loaded.meta.basis_hash == bundle.meta.basis_hash);
  CHECK(loaded.chains.size() == bundle.chains.size());
  for (std::size_t c = 0; c < bundle.chains.size(); ++c) {
    CHECK(loaded.chains[c].kept == bundle.chains[c].kept);
    CHECK(loaded.chains[c].sigma2 == bundle.chains[c].sigma2);
    CHECK(loaded.chains[c].gamma_main == bundle.chains[c].gamma_main);
    for (long i = 0; i < bundle.chains[c].kept; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        const auto& a = bundle.chains[c].beta_main[static_cast<std::size_t>(i)][j];
        const auto& b = loaded.chains[c].beta_main[static_cast<std::size_t>(i)][j];
        CHECK(a.size() == b.size());
        if (a.size() > 0) CHECK(a == b);
      }
  }

  // Summaries from the loaded archive are identical to in-memory ones.
  const PosteriorSummary from_memory = summarize(bundle);
  const PosteriorSummary from_disk = summarize(loaded);
  CHECK(from_memory.pip_main == from_disk.pip_main);
  CHECK(from_memory.cumulative[0].mean == from_disk.cumulative[0].mean);

  // Tampering with a chain file is reported as a data error naming the file.
  {
    std::ofstream patch(dir / "chain_0" / "gamma_main.csv", std::ios::trunc);
    patch << "iter,x1\n0,zzz\n";
  }
  CHECK_THROWS_WITH_AS(load_archive(dir), doctest::Contains("gamma_main.csv"), DataError);
}

TEST_CASE("version gate rejects unknown archive formats") {
  const fs::path dir = fs::temp_directory_path() / "dlmix_badversion";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream meta(dir / "metadata.json");
  meta << R"({"format_version": 99})";
  meta.close();
  CHECK_THROWS_AS(load_archive(dir), ConfigError);
}

TEST_CASE("cli fit writes outputs, is deterministic, and summarize matches byte for byte") {
  const fs::path dir = fs::temp_directory_path() / "dlmix_cli_fit";
  fs::remove_all(dir);
  const fs::path config = write_fixture(dir);

  const fs::path out1 = dir / "run1";
  const fs::path out2 = dir / "run2";
  REQUIRE(run_cli("fit --config " + config.string() + " --threads 1 --out " + out1.string()) == 0);
  REQUIRE(run_cli("fit --config " + config.string() + " --threads 8 --out " + out2.string()) == 0);

  for (const char* name : {"pips.csv", "main_curves.csv", "cumulative.csv",
                           "interaction_surfaces.csv"}) {
    CHECK(slurp(out1 / "summary" / name) == slurp(out2 / "summary" / name));
  }
  CHECK(slurp(out1 / "manifest.json") == slurp(out2 / "manifest.json"));
  CHECK(fs::exists(out1 / "archive" / "metadata.json"));
  CHECK(fs::exists(out1 / "summary" / "diagnostics.csv"));

  // summarize recomputes the same files from the stored archive.
  const fs::path resummary = dir / "resummary";
  REQUIRE(run_cli("summarize --archive " + (out1 / "archive").string() + " --out " +
                  resummary.string()) == 0);
  for (const char* name : {"pips.csv", "main_curves.csv", "cumulative.csv",
                           "interaction_surfaces.csv"}) {
    CHECK(slurp(out1 / "summary" / name) == slurp(resummary / name));
  }

  // Sensitivity table: ten rows per effect (2 mains + 1 pair -> 30 data rows).
  const fs::path sens_dir = dir / "sens";
  REQUIRE(run_cli("summarize --archive " + (out1 / "archive").string() + " --sensitivity --out " +
                  sens_dir.string()) == 0);
  std::ifstream sens(sens_dir / "sensitivity.csv");
  std::string line;
  long rows = 0;
  while (std::getline(sens, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 1 + 10 * 3);

  // Corrupting the archive makes summarize fail with a user error.
  {
    std::ofstream patch(out1 / "archive" / "chain_0" / "scalars.csv", std::ios::trunc);
    patch << "iter,beta0\n0,abc\n";
  }
  CHECK(run_cli("summarize --archive " + (out1 / "archive").string() + " --out " +
                (dir / "bad").string()) == 2);
}

TEST_CASE("cli reports config problems with exit code 2") {
  CHECK(run_cli("fit --config /nonexistent/config.json") == 2);
  CHECK(run_cli("fit") == 2);  // no data

  const fs::path dir = fs::temp_directory_path() / "dlmix_cli_badmode";
  fs::remove_all(dir);
  const fs::path config = write_fixture(dir);
  CHECK(run_cli("fit --config " + config.string() + " --mode bogus") == 2);
  CHECK(run_cli("fit --config " + config.string() + " --burnin 500 --iters 400") == 2);
}

TEST_CASE("cli simulate validates scenario names and lists builtins") {
  const std::string message = run_cli_stderr("simulate --scenario not-a-scenario");
  CHECK(message.find("paper-main") != std::string::npos);
  CHECK(message.find("null") != std::string::npos);
  CHECK(message.find("main-only") != std::string::npos);
  CHECK(run_cli("simulate --scenario not-a-scenario") == 2);
}

TEST_CASE("cli simulate runs a desk-scale cell and writes reports") {
  const fs::path dir = fs::temp_directory_path() / "dlmix_cli_sim";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path scenario = dir / "scenario.json";
  {
    std::ofstream out(scenario);
    out << R"({
      "name": "desk", "n": 60, "p": 2, "T": 4, "var_diagonal": 0.8,
      "innovation": "independent",
      "curves": [{"exposure": 0, "type": "flat", "level": 0.3}],
      "sigma2_grid": [1.0], "replicates": 2, "modes": ["fd-tau"]
    })";
  }
  const int status = run_cli("simulate --scenario " + scenario.string() +
                             " --iters 300 --burnin 100 --thin 2 --chains 1 --seed 3" +
                             " --threads 2 --out " + (dir / "out").string());
  REQUIRE(status == 0);
  CHECK(fs::exists(dir / "out" / "metrics.csv"));
  CHECK(fs::exists(dir / "out" / "replicates.csv"));
}
