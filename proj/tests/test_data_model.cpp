#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dlmix/data_model.hpp"
#include "dlmix/error.hpp"
#include "dlmix/rng.hpp"
#include "dlmix/simulation.hpp"

using namespace dlmix;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& contents) {
  const fs::path path = fs::temp_directory_path() / name;
  std::ofstream out(path);
  out << contents;
  return path;
}

PanelSchema tiny_schema() {
  PanelSchema schema;
  schema.outcome = "y";
  schema.covariates = {"age"};
  schema.exposures = {{"pm", {"pm_1", "pm_2", "pm_3"}}};
  return schema;
}

}  // namespace

TEST_CASE("load_panel maps a small csv onto the expected shapes") {
  const auto path = temp_file("dlmix_tiny.csv",
                              "y,age,pm_1,pm_2,pm_3\n"
                              "1.0,30,0.1,0.2,0.3\n"
                              "2.0,40,0.4,0.5,0.6\n"
                              "3.0,50,0.7,0.8,0.9\n"
                              "4.0,60,1.0,1.1,1.2\n"
                              "5.0,70,1.3,1.4,1.5\n");
  const ExposurePanel panel = load_panel(path, tiny_schema());
  CHECK(panel.n == 5);
  CHECK(panel.p == 1);
  CHECK(panel.T == 3);
  CHECK(panel.q == 1);
  CHECK(panel.dropped_rows == 0);
  CHECK(panel.outcome[4] == 5.0);
  CHECK(panel.exposures[0](1, 2) == 0.6);
  CHECK(panel.covariates(2, 0) == 50.0);
}

TEST_CASE("rows with missing cells are dropped, order preserved") {
  const auto path = temp_file("dlmix_missing.csv",
                              "y,age,pm_1,pm_2,pm_3\n"
                              "1.0,30,0.1,0.2,0.3\n"
                              "2.0,40,0.4,NA,0.6\n"
                              "3.0,50,0.7,0.8,0.9\n");
  const ExposurePanel panel = load_panel(path, tiny_schema());
  CHECK(panel.n == 2);
  CHECK(panel.dropped_rows == 1);
  CHECK(panel.outcome[0] == 1.0);
  CHECK(panel.outcome[1] == 3.0);  // retained rows keep their relative order
}

TEST_CASE("schema and parse errors are reported with context") {
  const auto path = temp_file("dlmix_bad.csv",
                              "y,age,pm_1,pm_2,pm_3\n"
                              "1.0,30,0.1,zzz,0.3\n");
  CHECK_THROWS_AS(load_panel(path, tiny_schema()), DataError);

  PanelSchema missing_col = tiny_schema();
  missing_col.outcome = "nope";
  const auto ok = temp_file("dlmix_ok.csv", "y,age,pm_1,pm_2,pm_3\n1.0,30,0.1,0.2,0.3\n");
  CHECK_THROWS_WITH_AS(load_panel(ok, missing_col), doctest::Contains("nope"), DataError);

  PanelSchema shape = tiny_schema();
  shape.exposures.push_back({"o3", {"pm_1", "pm_2"}});  // T mismatch across exposures
  CHECK_THROWS_AS(load_panel(ok, shape), DataError);
}

TEST_CASE("load_panel is deterministic") {
  const auto path = temp_file("dlmix_det.csv",
                              "y,age,pm_1,pm_2,pm_3\n"
                              "1.0,30,0.1,0.2,0.3\n"
                              "2.0,40,0.4,0.5,0.6\n");
  const ExposurePanel a = load_panel(path, tiny_schema());
  const ExposurePanel b = load_panel(path, tiny_schema());
  CHECK(a.outcome == b.outcome);
  CHECK(a.exposures[0] == b.exposures[0]);
}

TEST_CASE("center-only standardization of a simple column") {
  ExposurePanel panel;
  panel.n = 3;
  panel.p = 1;
  panel.T = 1;
  panel.q = 0;
  panel.exposures = {(Eigen::MatrixXd(3, 1) << 1.0, 2.0, 3.0).finished()};
  panel.covariates.resize(3, 0);
  panel.outcome = Eigen::VectorXd::Zero(3);
  panel.exposure_names = {"pm"};

  const auto result = standardize(panel, ScaleMode::Center);
  CHECK(result.panel.exposures[0](0, 0) == doctest::Approx(-1.0));
  CHECK(result.panel.exposures[0](1, 0) == doctest::Approx(0.0));
  CHECK(result.panel.exposures[0](2, 0) == doctest::Approx(1.0));
  CHECK(result.panel.centered);
}

TEST_CASE("constant column: centering gives zeros, IQR scaling errors") {
  ExposurePanel panel;
  panel.n = 3;
  panel.p = 1;
  panel.T = 1;
  panel.q = 0;
  panel.exposures = {Eigen::MatrixXd::Constant(3, 1, 5.0)};
  panel.covariates.resize(3, 0);
  panel.outcome = Eigen::VectorXd::Zero(3);
  panel.exposure_names = {"pm"};

  const auto centered = standardize(panel, ScaleMode::Center);
  CHECK(centered.panel.exposures[0].isZero(0.0));
  CHECK_THROWS_WITH_AS(standardize(panel, ScaleMode::CenterScaleIqr), doctest::Contains("pm"),
                       DataError);
}

TEST_CASE("post-standardization column means vanish on simulated data") {
  Scenario scenario = builtin_scenario("null");
  scenario.n = 80;
  RngStream rng(5);
  auto exposures = gen_exposures(scenario, rng);
  ExposurePanel panel = make_panel(std::move(exposures), Eigen::VectorXd::Zero(scenario.n));
  const auto result = standardize(panel, ScaleMode::Center);
  for (const auto& X : result.panel.exposures)
    CHECK(X.colwise().mean().cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("standardize then invert recovers the input") {
  Scenario scenario = builtin_scenario("null");
  scenario.n = 40;
  RngStream rng(9);
  auto exposures = gen_exposures(scenario, rng);
  ExposurePanel panel = make_panel(std::move(exposures), Eigen::VectorXd::Zero(scenario.n));

  for (ScaleMode mode : {ScaleMode::Center, ScaleMode::CenterScaleIqr}) {
    const auto result = standardize(panel, mode);
    const ExposurePanel back = invert_standardize(result.panel, result.applied);
    for (Eigen::Index j = 0; j < panel.p; ++j) {
      const double scale = panel.exposures[j].cwiseAbs().maxCoeff();
      CHECK((back.exposures[j] - panel.exposures[j]).cwiseAbs().maxCoeff() <= 1e-12 * scale);
    }
  }
}

TEST_CASE("simulation output round-trips through csv load") {
  Scenario scenario = builtin_scenario("null");
  scenario.n = 12;
  scenario.p = 2;
  scenario.T = 4;
  scenario.var_coefficient = Eigen::MatrixXd::Identity(2, 2) * 0.9;
  scenario.innovation_cov = Eigen::MatrixXd::Identity(2, 2);
  scenario.main_curves.assign(2, Eigen::VectorXd::Zero(4));
  RngStream rng(3);
  auto exposures = gen_exposures(scenario, rng);
  RngStream rng2(4);
  Eigen::VectorXd y = gen_outcome(exposures, scenario, 1.0, rng2);
  ExposurePanel panel = make_panel(exposures, y);

  // Write the panel out the same way the CLI would, then reload.
  const fs::path path = fs::temp_directory_path() / "dlmix_roundtrip.csv";
  {
    std::ofstream out(path);
    out << "y";
    for (int j = 1; j <= 2; ++j)
      for (int t = 1; t <= 4; ++t) out << ",x" << j << "_" << t;
    out << "\n";
    out.precision(17);
    for (Eigen::Index i = 0; i < panel.n; ++i) {
      out << panel.outcome[i];
      for (Eigen::Index j = 0; j < 2; ++j)
        for (Eigen::Index t = 0; t < 4; ++t) out << "," << panel.exposures[j](i, t);
      out << "\n";
    }
  }
  PanelSchema schema;
  schema.outcome = "y";
  schema.exposures = {{"x1", {"x1_1", "x1_2", "x1_3", "x1_4"}},
                      {"x2", {"x2_1", "x2_2", "x2_3", "x2_4"}}};
  const ExposurePanel reloaded = load_panel(path, schema);
  CHECK(reloaded.n == panel.n);
  for (Eigen::Index j = 0; j < 2; ++j)
    CHECK((reloaded.exposures[j] - panel.exposures[j]).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((reloaded.outcome - panel.outcome).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("iqr uses interpolated quartiles") {
  CHECK(iqr({1.0, 2.0, 3.0, 4.0}) == doctest::Approx(1.5));
  CHECK(iqr({5.0}) == doctest::Approx(0.0));
}
