#include "mcar/error.hpp"
#include "mcar/experiment.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace mcar;
using namespace mcar::experiment;
namespace fs = std::filesystem;

namespace {

ExperimentConfig synthetic_config(Method method, std::vector<std::uint64_t> seeds) {
  ExperimentConfig cfg;
  cfg.method = method;
  SyntheticSource src;
  src.hull = synth::ConvexHullSpec::uniform(3, 2, 10, 20, 0);
  src.ambiguity = {0.9, 1, 0.5, 0};
  cfg.synthetic = src;
  cfg.seeds = std::move(seeds);
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("mcar_exp_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("method names round-trip") {
  for (auto m : {Method::kMcar, Method::kWmcar, Method::kMcarIce, Method::kWmcarIce, Method::kGroupMcar,
                 Method::kGroupWmcar})
    CHECK(parse_method(to_string(m)) == m);
  CHECK_THROWS_AS(parse_method("svm"), InvalidInput);
}

TEST_CASE("mean and population standard deviation") {
  const std::vector<double> v{1.0, 3.0};
  const auto [mean, sd] = mean_std(v);
  CHECK(mean == 2.0);
  CHECK(sd == 1.0);
  const std::vector<double> one{0.25};
  CHECK(mean_std(one).second == 0.0);
}

TEST_CASE("forced identity weights reproduce the unweighted errors") {
  auto a = synthetic_config(Method::kMcar, {1, 2, 3});
  auto b = synthetic_config(Method::kWmcar, {1, 2, 3});
  b.options.identity_weights = true;
  const auto ra = run_experiment(a);
  const auto rb = run_experiment(b);
  for (std::size_t k = 0; k < ra.rows.size(); ++k) CHECK(ra.rows[k].error_rate == rb.rows[k].error_rate);
}

TEST_CASE("separable synthetic data is recovered across seeds") {
  ExperimentConfig cfg;
  cfg.method = Method::kMcar;
  SyntheticSource src;
  src.hull = synth::ConvexHullSpec::uniform(5, 2, 15, 30, 0);
  src.ambiguity = {0.9, 2, 0.25, 0};
  cfg.synthetic = src;
  cfg.seeds = {0, 1, 2, 3, 4};
  const auto report = run_experiment(cfg);
  CHECK(report.mean_error <= 0.02);
  CHECK(report.failures == 0);
}

TEST_CASE("aggregates are recomputable from the rows") {
  const auto report = run_experiment(synthetic_config(Method::kWmcarIce, {4, 5, 6}));
  std::vector<double> errors;
  for (const auto& r : report.rows) errors.push_back(*r.error_rate);
  const auto [mean, sd] = mean_std(errors);
  CHECK(report.mean_error == mean);
  CHECK(report.std_error == sd);
  for (const auto& r : report.rows) CHECK(r.outer_rounds <= 5);
}

TEST_CASE("reports are reproducible and independent of the job count") {
  auto cfg = synthetic_config(Method::kWmcar, {7, 8, 9, 10});
  const auto first = report_to_json(run_experiment(cfg), false).dump();
  const auto second = report_to_json(run_experiment(cfg), false).dump();
  CHECK(first == second);
  cfg.jobs = 3;
  CHECK(report_to_json(run_experiment(cfg), false).dump() == first);
}

TEST_CASE("sweeps produce one curve row per value") {
  auto cfg = synthetic_config(Method::kMcar, {1});
  cfg.sweep = Sweep{"fraction", {0.0, 0.5, 1.0}};
  const auto report = run_experiment(cfg);
  REQUIRE(report.curve.size() == 3);
  CHECK(report.curve[1].value == 0.5);
  for (const auto& c : report.curve) CHECK(c.std_error == 0.0);
  const auto csv = curve_csv(report);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.rfind("value,mean_error,std_error,runs,failures\n", 0) == 0);
}

TEST_CASE("invalid configurations are rejected") {
  auto cfg = synthetic_config(Method::kGroupMcar, {1});
  CHECK_THROWS_AS(run_experiment(cfg), InvalidInput);
  cfg = synthetic_config(Method::kMcar, {});
  CHECK_THROWS_AS(run_experiment(cfg), InvalidInput);
  cfg = synthetic_config(Method::kMcar, {1});
  cfg.sweep = Sweep{"bogus", {1.0}};
  CHECK_THROWS_AS(run_experiment(cfg), InvalidInput);
  ExperimentConfig empty;
  CHECK_THROWS_AS(run_experiment(empty), InvalidInput);
}

TEST_CASE("solver failures are recorded per seed") {
  TempDir dir;
  // Entries near the double range overflow the first ALM iterate.
  std::ofstream(dir.path / "x.csv") << "1e300,1e300\n-1e300,1e300\n1e300,1e300\n";
  std::ofstream(dir.path / "c.txt") << "1,2\n1\n2\n";
  ExperimentConfig cfg;
  FileSource src;
  src.paths.features = dir.path / "x.csv";
  src.paths.candidates = dir.path / "c.txt";
  cfg.files = src;
  cfg.seeds = {1, 2};
  const auto report = run_experiment(cfg);
  REQUIRE(report.rows.size() == 2);
  CHECK(report.failures == 2);
  for (const auto& r : report.rows) {
    REQUIRE(r.failure.has_value());
    CHECK(r.failure->find("non-finite") != std::string::npos);
  }
  const auto j = report_to_json(report);
  CHECK(j["runs"][0]["failure"].is_string());
  CHECK_THROWS_AS(emit_report(report, {std::nullopt, std::nullopt, dir.path / "p.csv"}), Error);
}

TEST_CASE("emitted files: report, curve and predictions") {
  TempDir dir;
  auto cfg = synthetic_config(Method::kMcar, {3});
  cfg.output = {dir.path / "r.json", dir.path / "curve.csv", dir.path / "pred.csv"};
  const auto report = run_experiment(cfg);
  emit_report(report, cfg.output);
  const auto j = nlohmann::json::parse(slurp(dir.path / "r.json"));
  CHECK(j["method"] == "mcar");
  CHECK(j["runs"].size() == 1);
  CHECK(j["aggregate"]["std_error"] == 0.0);
  const auto labels = io::read_labels(dir.path / "pred.csv");
  CHECK(labels == *report.predictions);
}

TEST_CASE("file-backed experiments with groups and truth") {
  TempDir dir;
  auto spec = synth::ConvexHullSpec::uniform(3, 1, 5, 6, 2);
  const auto data = synth::gen_convex_hull_data(spec);
  // Class 2 serves as the null class for the group methods.
  auto sets = synth::synthesize_ambiguity(data.ground_truth, 3, {0.4, 1, 0.5, 1});
  io::write_features_csv(dir.path / "x.csv", data.x);
  io::write_candidates(dir.path / "c.txt", sets);
  io::write_labels(dir.path / "t.txt", data.ground_truth);
  std::ofstream(dir.path / "g.txt") << "1,6\n2,7\n";

  ExperimentConfig cfg;
  cfg.method = Method::kGroupWmcar;
  FileSource src;
  src.paths = {dir.path / "x.csv", dir.path / "c.txt", dir.path / "g.txt", dir.path / "t.txt"};
  cfg.files = src;
  const auto report = run_experiment(cfg);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].error_rate.has_value());
  CHECK_FALSE(report.rows[0].failure.has_value());

  cfg.method = Method::kMcar;
  cfg.files->ambiguity = synth::AmbiguityParams{1.0, 1, 0.5, 0};
  cfg.seeds = {1, 2};
  const auto resynth = run_experiment(cfg);
  CHECK(resynth.rows.size() == 2);
}

TEST_CASE("config JSON round-trip") {
  auto cfg = synthetic_config(Method::kWmcarIce, {1, 2});
  cfg.options.solver.lambda = 0.1;
  cfg.options.elimination_factor = 0.25;
  cfg.sweep = Sweep{"epsilon", {0.2, 0.4}};
  const auto j = config_to_json(cfg);
  const auto back = config_from_json(j);
  CHECK(config_to_json(back) == j);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"method", "mcar"}, {"seeds", "x"}}), InvalidInput);
}
