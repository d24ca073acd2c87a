// mcar command line: solve, sweep, synth and eval subcommands.
//
// Exit codes: 0 success, 1 usage or parse error, 2 numeric failure.

#include "mcar/error.hpp"
#include "mcar/experiment.hpp"
#include "mcar/io.hpp"
#include "mcar/synth.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace mcar;
using experiment::ExperimentConfig;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kNumeric = 2;

struct CommonFlags {
  std::string method = "mcar";
  std::optional<double> lambda, gamma, tol;
  std::optional<std::size_t> max_iter;
  double fe = 0.5;
  std::size_t max_outer = 5;
  std::vector<std::uint64_t> seeds;
  bool identity_weights = false;
  bool repair = false;
  std::string config;
  std::string out;
  unsigned jobs = 1;
};

struct FileFlags {
  std::string features, candidates, groups, truth;
  bool normalize = false;
  std::optional<int> classes;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--method", f.method, "mcar, wmcar, mcar-ice, wmcar-ice, group-mcar or group-wmcar");
  cmd->add_option("--lambda", f.lambda, "Feature noise weight (default 1/sqrt(max(c+m, N)))");
  cmd->add_option("--gamma", f.gamma, "Label loss weight (default 2 * default lambda)");
  cmd->add_option("--fe", f.fe, "Elimination factor for ICE")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--max-outer", f.max_outer, "Maximum ICE rounds")->check(CLI::PositiveNumber);
  cmd->add_option("--tol", f.tol, "Solver tolerance");
  cmd->add_option("--max-iter", f.max_iter, "Solver iteration cap");
  cmd->add_option("--seed,--seeds", f.seeds, "One or more seeds");
  cmd->add_flag("--identity-weights", f.identity_weights, "Force W = I for weighted methods");
  cmd->add_flag("--repair", f.repair, "Repair group conflicts after solving");
  cmd->add_option("--config", f.config, "Experiment config (JSON); flags override it");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--jobs", f.jobs, "Seeds evaluated concurrently")->check(CLI::PositiveNumber);
}

void add_files(CLI::App* cmd, FileFlags& f) {
  cmd->add_option("--features", f.features, "Feature CSV, one row per instance");
  cmd->add_option("--candidates", f.candidates, "Candidate label sets, one line per instance");
  cmd->add_option("--groups", f.groups, "Groups file, one line per group");
  cmd->add_option("--truth", f.truth, "True labels for evaluation");
  cmd->add_flag("--normalize", f.normalize, "Rescale features to [0, 1]");
  cmd->add_option("--classes", f.classes, "Number of classes (default: largest label seen)");
}

ExperimentConfig build_config(const CommonFlags& c, const FileFlags& f, const CLI::App& cmd) {
  ExperimentConfig cfg;
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) throw ParseError(c.config, 0, "cannot open config");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& err) {
      throw ParseError(c.config, 0, err.what());
    }
    cfg = experiment::config_from_json(j);
  }
  if (!f.features.empty() || !f.candidates.empty()) {
    if (f.features.empty() || f.candidates.empty())
      throw InvalidInput("--features and --candidates must be given together");
    experiment::FileSource src;
    src.paths.features = f.features;
    src.paths.candidates = f.candidates;
    if (cfg.files) src.ambiguity = cfg.files->ambiguity;
    cfg.files = std::move(src);
    cfg.synthetic.reset();
  }
  if (cfg.files) {
    if (!f.groups.empty()) cfg.files->paths.groups = f.groups;
    if (!f.truth.empty()) cfg.files->paths.truth = f.truth;
    if (f.normalize) cfg.files->options.normalize = true;
    if (f.classes) cfg.files->options.num_classes = f.classes;
  }
  if (cmd.count("--method") || c.config.empty()) cfg.method = experiment::parse_method(c.method);
  auto& s = cfg.options.solver;
  if (c.lambda) s.lambda = c.lambda;
  if (c.gamma) s.gamma = c.gamma;
  if (c.tol) s.tol = c.tol;
  if (c.max_iter) s.max_iter = c.max_iter;
  if (cmd.count("--fe")) cfg.options.elimination_factor = c.fe;
  if (cmd.count("--max-outer")) cfg.options.max_outer = c.max_outer;
  if (c.identity_weights) cfg.options.identity_weights = true;
  if (c.repair) cfg.options.repair = true;
  if (!c.seeds.empty()) cfg.seeds = c.seeds;
  if (cmd.count("--jobs")) cfg.jobs = c.jobs;
  if (!c.out.empty()) {
    const fs::path dir = c.out;
    cfg.output.report = dir / "report.json";
    cfg.output.curve = dir / "curve.csv";
    cfg.output.predictions = dir / "predictions.csv";
  }
  return cfg;
}

void print_summary(const experiment::ExperimentReport& report) {
  for (const auto& r : report.rows) {
    std::cout << "seed " << r.seed;
    if (report.sweep_parameter) std::cout << "  " << *report.sweep_parameter << "=" << r.sweep_value;
    if (r.failure) {
      std::cout << "  FAILED: " << *r.failure << "\n";
      continue;
    }
    if (r.error_rate) std::cout << "  error " << *r.error_rate;
    std::cout << "  iterations " << r.iterations << (r.converged ? "" : " (not converged)") << "\n";
  }
  if (report.sweep_parameter) {
    std::cout << curve_csv(report);
  } else {
    std::cout << "mean error " << report.mean_error << "  std " << report.std_error << "\n";
  }
}

int run(const ExperimentConfig& cfg) {
  const auto report = experiment::run_experiment(cfg);
  experiment::emit_report(report, cfg.output);
  print_summary(report);
  return report.failures > 0 ? kNumeric : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disambiguation of ambiguously labeled data by low-rank matrix completion"};
  app.require_subcommand(1);

  CommonFlags solve_common;
  FileFlags solve_files;
  auto* solve = app.add_subcommand("solve", "Run one method on one dataset");
  add_common(solve, solve_common);
  add_files(solve, solve_files);

  CommonFlags sweep_common;
  FileFlags sweep_files;
  std::string sweep_param;
  std::vector<double> sweep_values;
  auto* sweep = app.add_subcommand("sweep", "Run a method over a parameter grid and seeds");
  add_common(sweep, sweep_common);
  add_files(sweep, sweep_files);
  sweep->add_option("--param", sweep_param, "Swept parameter");
  sweep->add_option("--values", sweep_values, "Grid values");

  synth::ConvexHullSpec hull;
  synth::AmbiguityParams ambiguity;
  int vertices = 2, samples = 10;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  std::optional<int> majority;
  double majority_fraction = 0.0;
  auto* gen = app.add_subcommand("synth", "Write a synthetic dataset to files");
  gen->add_option("--classes", hull.num_classes, "Number of classes")->check(CLI::PositiveNumber);
  gen->add_option("--vertices", vertices, "Hull vertices per class")->check(CLI::PositiveNumber);
  gen->add_option("--samples", samples, "Samples per class")->check(CLI::PositiveNumber);
  gen->add_option("--dim", hull.ambient_dim, "Feature dimension")->check(CLI::PositiveNumber);
  gen->add_option("--noise", hull.noise_level, "Gaussian noise std");
  gen->add_option("--fraction", ambiguity.fraction, "Fraction of ambiguous instances");
  gen->add_option("--extra", ambiguity.extra_count, "Extra labels per ambiguous instance");
  gen->add_option("--epsilon", ambiguity.epsilon, "Distractor co-occurrence probability");
  gen->add_option("--majority", majority, "1-based class added to many candidate sets");
  gen->add_option("--majority-fraction", majority_fraction, "Share of sets containing the majority class");
  gen->add_option("--seed", synth_seed, "Seed");
  gen->add_option("--out", synth_out, "Output directory")->required();

  std::string eval_predictions, eval_truth;
  auto* eval = app.add_subcommand("eval", "Score predictions against the true labels");
  eval->add_option("--predictions", eval_predictions, "Predictions CSV or label file")->required();
  eval->add_option("--truth", eval_truth, "True labels")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*solve) {
      auto cfg = build_config(solve_common, solve_files, *solve);
      if (cfg.sweep) throw InvalidInput("solve does not take a sweep; use the sweep subcommand");
      return run(cfg);
    }
    if (*sweep) {
      auto cfg = build_config(sweep_common, sweep_files, *sweep);
      if (!sweep_param.empty()) cfg.sweep = experiment::Sweep{sweep_param, sweep_values};
      if (!cfg.sweep) throw InvalidInput("sweep needs --param and --values or a sweep section in --config");
      return run(cfg);
    }
    if (*gen) {
      hull.vertices_per_class.assign(static_cast<std::size_t>(hull.num_classes), vertices);
      hull.samples_per_class.assign(static_cast<std::size_t>(hull.num_classes), samples);
      hull.seed = synth_seed;
      ambiguity.seed = synth_seed + 1;
      const auto data = synth::gen_convex_hull_data(hull);
      auto candidates = synth::synthesize_ambiguity(data.ground_truth, hull.num_classes, ambiguity);
      if (majority) {
        if (*majority < 1 || *majority > hull.num_classes) throw InvalidInput("--majority is out of range");
        candidates = synth::add_majority_label(std::move(candidates), data.ground_truth, *majority - 1,
                                               majority_fraction, synth_seed + 2);
      }
      const fs::path dir = synth_out;
      io::write_features_csv(dir / "features.csv", data.x);
      io::write_candidates(dir / "candidates.txt", candidates);
      io::write_labels(dir / "truth.txt", data.ground_truth);
      for (const auto& w : data.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "wrote " << data.x.cols() << " instances to " << dir.string() << "\n";
      return kOk;
    }
    if (*eval) {
      const auto predicted = io::read_labels(eval_predictions);
      const auto truth = io::read_labels(eval_truth);
      if (predicted.size() != truth.size())
        throw InvalidInput(std::to_string(predicted.size()) + " predictions for " + std::to_string(truth.size()) +
                           " true labels");
      std::cout << "error " << labeling_error_rate(predicted, truth) << "\n";
      return kOk;
    }
  } catch (const NumericError& err) {
    std::cerr << "numeric failure: " << err.what() << "\n";
    return kNumeric;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
