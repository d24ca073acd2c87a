#pragma once

// Experiment orchestration: one method over one or more seeds, optionally
// swept over a parameter grid, with per-seed and aggregate labeling error.

#include "mcar/group.hpp"
#include "mcar/ice.hpp"
#include "mcar/io.hpp"
#include "mcar/solver.hpp"
#include "mcar/synth.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mcar::experiment {

enum class Method { kMcar, kWmcar, kMcarIce, kWmcarIce, kGroupMcar, kGroupWmcar };

std::string to_string(Method method);
/// Throws InvalidInput on an unknown name.
Method parse_method(const std::string& name);
bool is_group_method(Method method);

/// Solver settings as given by the user; unset values fall back to the
/// data-dependent defaults when a dataset is known.
struct SolverSettings {
  std::optional<double> lambda;
  std::optional<double> gamma;
  std::optional<double> mu0;
  std::optional<double> rho;
  std::optional<double> mu_max;
  std::optional<double> tol;
  std::optional<std::size_t> max_iter;

  SolverConfig resolve(const AmbiguousDataset& data) const;
};

struct MethodOptions {
  SolverSettings solver;
  double elimination_factor = 0.5;
  std::size_t max_outer = 5;
  /// Replace the computed weights by W = I (weighted methods only).
  bool identity_weights = false;
  /// Greedy post-solve repair of group conflicts.
  bool repair = false;
};

struct MethodOutcome {
  std::vector<ClassIndex> labels;
  SolveResult solve;
  std::optional<ice::IceTrace> trace;
  /// Candidate sets used for prediction (reduced by elimination for ICE).
  CandidateSets candidates;
  std::size_t group_conflicts = 0;
};

/// Runs `method` on a dataset. Group methods require `groups`.
MethodOutcome run_method(Method method, const AmbiguousDataset& data,
                         const std::optional<group::GroupStructure>& groups, const MethodOptions& options);

struct SyntheticSource {
  synth::ConvexHullSpec hull;
  synth::AmbiguityParams ambiguity;
  /// Optional class forced into a share of all candidate sets.
  std::optional<ClassIndex> majority_label;
  double majority_fraction = 0.0;
};

struct FileSource {
  io::DatasetPaths paths;
  io::LoadOptions options;
  /// When set (truth required), candidate sets are re-synthesized per seed.
  std::optional<synth::AmbiguityParams> ambiguity;
};

struct Sweep {
  /// One of: fraction, extra_count, epsilon, lambda, gamma, elimination_factor,
  /// majority_fraction, noise_level.
  std::string parameter;
  std::vector<double> values;
};

struct OutputPaths {
  std::optional<std::filesystem::path> report;
  std::optional<std::filesystem::path> curve;
  std::optional<std::filesystem::path> predictions;
};

struct ExperimentConfig {
  Method method = Method::kMcar;
  std::optional<SyntheticSource> synthetic;
  std::optional<FileSource> files;
  MethodOptions options;
  std::vector<std::uint64_t> seeds{0};
  std::optional<Sweep> sweep;
  OutputPaths output;
  /// Seeds evaluated concurrently; results do not depend on it.
  unsigned jobs = 1;

  /// Throws InvalidInput when the source is missing or ambiguous, a group
  /// method has no groups file, or a sweep parameter is unknown.
  void validate() const;
};

struct SeedRow {
  double sweep_value = 0.0;
  std::uint64_t seed = 0;
  std::optional<double> error_rate;
  double imbalance = 1.0;
  std::size_t iterations = 0;
  std::size_t outer_rounds = 0;
  bool converged = false;
  double final_residual = 0.0;
  std::size_t group_conflicts = 0;
  double wall_seconds = 0.0;
  std::optional<std::string> failure;
};

struct CurveRow {
  double value = 0.0;
  double mean_error = 0.0;
  double std_error = 0.0;
  std::size_t runs = 0;
  std::size_t failures = 0;
};

struct ExperimentReport {
  std::string method;
  std::optional<std::string> sweep_parameter;
  std::vector<SeedRow> rows;
  std::vector<CurveRow> curve;
  double mean_error = 0.0;
  double std_error = 0.0;
  std::size_t failures = 0;
  double wall_seconds = 0.0;
  /// Predictions of the first successful run, for emission.
  std::optional<std::vector<ClassIndex>> predictions;
  std::optional<SoftLabelMatrix> scores;
};

/// Mean and population standard deviation.
std::pair<double, double> mean_std(std::span<const double> values);

/// Runs every (sweep value, seed) pair. Solver failures are recorded on their
/// row instead of aborting the experiment.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Report as JSON. Timing fields are omitted when `with_timing` is false.
nlohmann::json report_to_json(const ExperimentReport& report, bool with_timing = true);
/// "value,mean_error,std_error,runs,failures" rows.
std::string curve_csv(const ExperimentReport& report);

/// Writes whichever of report JSON, curve CSV and predictions CSV are set.
void emit_report(const ExperimentReport& report, const OutputPaths& paths);

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);

}  // namespace mcar::experiment
