#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "emdsm/harness/config.hpp"
#include "emdsm/harness/experiment.hpp"
#include "emdsm/harness/presets.hpp"
#include "emdsm/harness/verify.hpp"

using namespace emdsm;
using namespace emdsm::harness;

namespace {

const double kS = std::sqrt(0.5);

json minimal_json() {
  return json::parse(R"({
    "dimension": 2,
    "incidents": [{"direction": [0.7071067811865476, 0.7071067811865476],
                   "polarization": [0.7071067811865476, -0.7071067811865476]}],
    "shapes": [{"kind": "axis_square", "center": [-0.25, 0], "side": 0.3}],
    "surface": {"kind": "circle", "radius": 5, "count": 30}
  })");
}

std::string config_error_key(const json& j) {
  try {
    config_from_json(j);
  } catch (const ConfigError& e) {
    return e.key;
  }
  return "<accepted>";
}

// example1 on a coarse sampling lattice and forward mesh.
ExperimentConfig small_example1() {
  ExperimentConfig cfg = preset("example1");
  cfg.forward.h = 0.05;
  cfg.sampling.spacing = 0.1;
  return cfg;
}

const std::vector<IndexGrid<2>>& maps2(const ExperimentResult& r) { return std::get<std::vector<IndexGrid<2>>>(r.maps); }

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("emdsm_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, MinimalDocumentGetsDefaults) {
  const ExperimentConfig cfg = config_from_json(minimal_json());
  EXPECT_EQ(cfg.dimension, 2);
  EXPECT_DOUBLE_EQ(cfg.wavelength, 1.0);
  EXPECT_DOUBLE_EQ(cfg.forward.h, 0.02);
  EXPECT_EQ(cfg.forward.solver.kind, SolverKind::automatic);
  EXPECT_DOUBLE_EQ(cfg.sampling.spacing, 0.01);
  EXPECT_EQ(cfg.sampling.lo, (std::vector<double>{-2, -2}));
  EXPECT_EQ(cfg.sampling.hi, (std::vector<double>{2, 2}));
  EXPECT_DOUBLE_EQ(cfg.noise.epsilon, 0.0);
  EXPECT_TRUE(cfg.output.directory.empty());
  EXPECT_FALSE(cfg.diagnostic.has_value());
}

TEST(Config, ThreeDimensionalDefaults) {
  json j = minimal_json();
  j["dimension"] = 3;
  j["incidents"][0] = {{"direction", {0, 0, 1}}, {"polarization", {1, 0, 0}}};
  j["shapes"][0] = {{"kind", "axis_cube"}, {"center", {0, 0, 0}}, {"side", 0.2}};
  j["surface"] = {{"kind", "cube_faces"}, {"edge", 10}, {"per_face", 10}};
  const ExperimentConfig cfg = config_from_json(j);
  EXPECT_DOUBLE_EQ(cfg.forward.h, 0.04);
  EXPECT_DOUBLE_EQ(cfg.sampling.spacing, 0.05);
}

TEST(Config, ComplexContrast) {
  json j = minimal_json();
  j["shapes"][0]["eta"] = {1.0, 0.5};
  EXPECT_EQ(config_from_json(j).shapes[0].eta, cdouble(1.0, 0.5));
}

TEST(Config, UnknownKeysAreNamed) {
  json j = minimal_json();
  j["forward"] = {{"mesh", 0.02}};
  EXPECT_EQ(config_error_key(j), "forward.mesh");
  j = minimal_json();
  j["colour"] = "red";
  EXPECT_EQ(config_error_key(j), "colour");
  j = minimal_json();
  j["shapes"][0]["radius"] = 1;
  EXPECT_EQ(config_error_key(j), "shapes[0].radius");
}

TEST(Config, NonTransversePolarizationRejected) {
  json j = minimal_json();
  // d.p = 0.1 for unit vectors at angle acos(0.1)
  const double c = 0.1;
  j["incidents"][0] = {{"direction", {1, 0}}, {"polarization", {c, std::sqrt(1 - c * c)}}};
  EXPECT_EQ(config_error_key(j), "incidents[0]");
}

TEST(Config, InvalidValuesNameTheirKey) {
  json j = minimal_json();
  j["wavelength"] = -1;
  EXPECT_EQ(config_error_key(j), "wavelength");
  j = minimal_json();
  j["noise"] = {{"epsilon", -0.2}};
  EXPECT_EQ(config_error_key(j), "noise.epsilon");
  j = minimal_json();
  j["shapes"][0]["side"] = "wide";
  EXPECT_EQ(config_error_key(j), "shapes[0].side");
  j = minimal_json();
  j["shapes"][0]["center"] = {0, 0, 0};
  EXPECT_EQ(config_error_key(j), "shapes[0].center");
  j = minimal_json();
  j.erase("surface");
  EXPECT_EQ(config_error_key(j), "surface");
  j = minimal_json();
  j["forward"] = {{"solver", "cholesky"}};
  EXPECT_EQ(config_error_key(j), "forward.solver");
  j = minimal_json();
  j["shapes"] = json::array();
  EXPECT_EQ(config_error_key(j), "shapes");
}

TEST(Config, GeometryChecks) {
  json j = minimal_json();
  j["sampling"] = {{"lo", {-4, -4}}, {"hi", {4, 4}}};
  EXPECT_EQ(config_error_key(j), "sampling");
  j = minimal_json();
  j["surface"]["kind"] = "cube_faces";
  j["surface"] = {{"kind", "cube_faces"}, {"edge", 10}, {"per_face", 10}};
  EXPECT_EQ(config_error_key(j), "surface.kind");
  j = minimal_json();
  j["shapes"][0] = {{"kind", "axis_square"}, {"center", {5, 0}}, {"side", 0.3}};
  j["sampling"] = {{"lo", {-1, -1}}, {"hi", {1, 1}}};
  EXPECT_EQ(config_error_key(j), "surface");
  j = minimal_json();
  j["diagnostic"] = {{"kind", "fig3"}, {"point", {0, 0}}};
  EXPECT_EQ(config_error_key(j), "diagnostic.kind");
}

TEST(Config, JsonRoundTripForEveryPreset) {
  for (const auto& name : preset_names()) {
    const ExperimentConfig cfg = preset(name);
    EXPECT_EQ(to_json(config_from_json(to_json(cfg))).dump(), to_json(cfg).dump()) << name;
  }
}

TEST(Config, ShippedConfigsMatchPresets) {
  for (const auto& name : preset_names()) {
    const ExperimentConfig loaded = load_config(std::string(EMDSM_CONFIG_DIR) + "/" + name + ".json");
    EXPECT_EQ(to_json(loaded).dump(), to_json(preset(name)).dump()) << name;
  }
  EXPECT_THROW(load_config(std::string(EMDSM_CONFIG_DIR) + "/missing.json"), ConfigError);
}

TEST(Presets, PlanarIncidentsAndSurface) {
  for (const char* name : {"example1", "example2a", "example2b", "example3", "example4", "fig1", "fig2"}) {
    const ExperimentConfig cfg = preset(name);
    ASSERT_EQ(cfg.incidents.size(), 2u) << name;
    EXPECT_EQ(cfg.incidents[0].direction, (std::vector<double>{kS, kS}));
    EXPECT_EQ(cfg.incidents[0].polarization, (std::vector<double>{kS, -kS}));
    EXPECT_EQ(cfg.incidents[1].direction, (std::vector<double>{-kS, kS}));
    EXPECT_EQ(cfg.incidents[1].polarization, (std::vector<double>{kS, kS}));
    EXPECT_EQ(cfg.surface.kind, SurfaceKind::circle);
    EXPECT_DOUBLE_EQ(cfg.surface.size, 5.0);
    EXPECT_EQ(cfg.surface.count, 30);
    EXPECT_DOUBLE_EQ(cfg.sampling.spacing, 0.01);
    EXPECT_DOUBLE_EQ(cfg.wavelength, 1.0);
    for (const auto& s : cfg.shapes) EXPECT_EQ(s.eta, cdouble(1.0));
  }
}

TEST(Presets, ScattererGeometry) {
  struct Row {
    const char* name;
    std::vector<std::vector<double>> centers;
    double side;
  };
  const std::vector<Row> table{
      {"example1", {{-0.25, 0}}, 0.3},
      {"example2a", {{-0.8, -0.7}, {0.3, 0.8}}, 0.2},
      {"example2b", {{-0.45, -0.35}, {0.05, 0.15}}, 0.3},
      {"example3", {{-0.625, -0.625}, {-0.425, -0.425}, {-0.525, 0.125}}, 0.15},
      {"example3d", {{0.4, 0.3, 0.3}, {-0.4, 0.3, 0.3}}, 0.2},
  };
  for (const auto& row : table) {
    const ExperimentConfig cfg = preset(row.name);
    ASSERT_EQ(cfg.shapes.size(), row.centers.size()) << row.name;
    for (std::size_t s = 0; s < row.centers.size(); ++s) {
      for (std::size_t a = 0; a < row.centers[s].size(); ++a) EXPECT_NEAR(cfg.shapes[s].center[a], row.centers[s][a], 1e-15);
      EXPECT_DOUBLE_EQ(cfg.shapes[s].side, row.side);
    }
  }
  const ExperimentConfig ring = preset("example4");
  ASSERT_EQ(ring.shapes.size(), 1u);
  EXPECT_EQ(ring.shapes[0].kind, ShapeKind::square_ring);
  EXPECT_DOUBLE_EQ(ring.shapes[0].side, 0.6);
  EXPECT_DOUBLE_EQ(ring.shapes[0].inner_side, 0.4);
}

TEST(Presets, ThreeDimensionalSetup) {
  const ExperimentConfig cfg = preset("example3d");
  const double a = 1 / std::sqrt(3.0);
  const double b = 1 / std::sqrt(6.0);
  EXPECT_EQ(cfg.dimension, 3);
  EXPECT_EQ(cfg.incidents[0].direction, (std::vector<double>{a, a, a}));
  EXPECT_EQ(cfg.incidents[1].direction, (std::vector<double>{a, a, a}));
  EXPECT_EQ(cfg.incidents[0].polarization, (std::vector<double>{b, -2 * b, b}));
  EXPECT_EQ(cfg.incidents[1].polarization, (std::vector<double>{b, b, -2 * b}));
  EXPECT_EQ(cfg.surface.kind, SurfaceKind::cube_faces);
  EXPECT_DOUBLE_EQ(cfg.surface.size, 10.0);
  EXPECT_EQ(cfg.surface.count, 10);
  EXPECT_EQ(cfg.sampling.lo, (std::vector<double>{-2, -2, -2}));
  EXPECT_DOUBLE_EQ(cfg.sampling.spacing, 0.05);
}

TEST(Presets, DiagnosticsAndUnknownNames) {
  EXPECT_EQ(preset("fig1").diagnostic->kind, "fig1");
  EXPECT_EQ(preset("fig2").diagnostic->point, (std::vector<double>{-0.25, 0.0}));
  try {
    preset("example9");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key, "preset");
  }
}

TEST(Experiment, ReportDescribesRun) {
  const auto result = run_experiment(small_example1());
  const auto& r = result.report;
  ASSERT_EQ(r.forward.size(), 2u);
  EXPECT_EQ(r.forward[0].solver, "dense");
  EXPECT_GT(r.forward[0].unknowns, 0u);
  ASSERT_EQ(r.indices.size(), 3u);
  EXPECT_EQ(r.indices[0].label, "psi_1");
  EXPECT_EQ(r.indices[2].label, "psi_c");
  EXPECT_GT(r.index("psi_c").max_value, 0.0);
  EXPECT_LE(r.index("psi_c").max_value, 1.0);
  EXPECT_THROW(r.index("psi_9"), std::out_of_range);
  const auto& argmax = r.index("psi_c").argmax;
  EXPECT_LT(std::hypot(argmax[0] + 0.25, argmax[1]), 0.15);
  ASSERT_FALSE(r.index("psi_c").maxima.empty());
  EXPECT_DOUBLE_EQ(r.index("psi_c").maxima[0].value, 1.0);
  std::vector<std::string> stages;
  for (const auto& t : r.timings) stages.push_back(t.stage);
  EXPECT_EQ(stages, (std::vector<std::string>{"forward", "synthesis", "noise", "sweep"}));
  EXPECT_GE(r.threads, 1);
  for (const auto& map : maps2(result)) EXPECT_DOUBLE_EQ(map.max_value(), 1.0);
  const json j = to_json(r);
  EXPECT_TRUE(j.contains("config"));
  EXPECT_EQ(j["indices"].size(), 3u);
}

TEST(Experiment, Deterministic) {
  ExperimentConfig cfg = small_example1();
  cfg.noise = {0.2, 4};
  const auto a = run_experiment(cfg);
  const auto b = run_experiment(cfg);
  for (std::size_t i = 0; i < maps2(a).size(); ++i) EXPECT_EQ(maps2(a)[i].values, maps2(b)[i].values);
}

TEST(Experiment, SeedMattersOnlyWithNoise) {
  ExperimentConfig cfg = small_example1();
  cfg.noise = {0.0, 1};
  const auto a = run_experiment(cfg);
  cfg.noise.seed = 2;
  const auto b = run_experiment(cfg);
  EXPECT_EQ(maps2(a).back().values, maps2(b).back().values);
  cfg.noise = {0.2, 1};
  const auto c = run_experiment(cfg);
  cfg.noise.seed = 2;
  const auto d = run_experiment(cfg);
  EXPECT_NE(maps2(c).back().values, maps2(d).back().values);
}

TEST(Experiment, ForwardFailureIsLabelled) {
  ExperimentConfig cfg = small_example1();
  cfg.forward.solver.kind = SolverKind::gmres;
  cfg.forward.solver.tolerance = 1e-15;
  cfg.forward.solver.max_iterations = 1;
  try {
    run_experiment(cfg);
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage, "forward");
    EXPECT_EQ(std::string(e.what()).rfind("forward stage: ", 0), 0u);
  }
}

TEST(Experiment, InvalidConfigRejectedBeforeRunning) {
  ExperimentConfig cfg = small_example1();
  cfg.sampling.spacing = 0;
  EXPECT_THROW(run_experiment(cfg), ConfigError);
}

TEST(Experiment, WritesOutputFiles) {
  ExperimentConfig cfg = small_example1();
  const auto dir = scratch_dir("outputs");
  cfg.output.directory = dir.string();
  run_experiment(cfg);
  for (const char* f : {"samples_1.csv", "samples_2.csv", "psi_1.csv", "psi_2.csv", "psi_c.csv", "psi_1.pgm", "psi_c.pgm", "report.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  const json report = json::parse(slurp(dir / "report.json"));
  EXPECT_EQ(report["indices"][2]["label"], "psi_c");
  EXPECT_TRUE(report["timings"].contains("export"));
  const std::string csv = slurp(dir / "psi_c.csv");
  EXPECT_EQ(csv.substr(0, 12), "x1,x2,value\n");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 41 * 41 + 1);
  std::filesystem::remove_all(dir);
}

TEST(Experiment, FormatSelection) {
  ExperimentConfig cfg = small_example1();
  const auto dir = scratch_dir("formats");
  cfg.output.directory = dir.string();
  cfg.output.csv = false;
  cfg.output.json = false;
  run_experiment(cfg);
  EXPECT_TRUE(std::filesystem::exists(dir / "psi_c.pgm"));
  EXPECT_FALSE(std::filesystem::exists(dir / "psi_c.csv"));
  EXPECT_FALSE(std::filesystem::exists(dir / "report.json"));
  std::filesystem::remove_all(dir);
}

TEST(Experiment, CrossProductDiagnostics) {
  ExperimentConfig cfg = preset("fig1");
  cfg.sampling.spacing = 0.05;
  const auto fig1 = run_experiment(cfg).report;
  ASSERT_EQ(fig1.indices.size(), 4u);
  EXPECT_EQ(fig1.indices[3].label, "diagonal_sum");
  for (const auto& s : fig1.indices) ASSERT_TRUE(s.off_peak_ratio.has_value());
  EXPECT_LT(*fig1.index("diagonal_sum").off_peak_ratio, *fig1.index("phi11").off_peak_ratio);
  cfg = preset("fig2");
  cfg.sampling.spacing = 0.05;
  const auto fig2 = run_experiment(cfg).report;
  ASSERT_EQ(fig2.indices.size(), 3u);
  EXPECT_EQ(fig2.indices[2].label, "polarization_sum");
  EXPECT_LT(*fig2.index("polarization_sum").off_peak_ratio, *fig2.index("polarization_1").off_peak_ratio);
}

TEST(Verify, TraceCheckPasses) {
  const VerifyReport r = verify("trace");
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(to_json(r)["kind"], "trace");
  EXPECT_THROW(verify("nothing"), ConfigError);
}

TEST(Verify, SolverCrossCheckPasses) { EXPECT_TRUE(verify("solver_cross").pass); }
