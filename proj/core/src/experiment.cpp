#include "mcar/experiment.hpp"

#include "mcar/error.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <future>
#include <sstream>

namespace mcar::experiment {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr const char* kSweepParameters[] = {"fraction", "extra_count",        "epsilon",
                                            "lambda",   "gamma",              "elimination_factor",
                                            "majority_fraction", "noise_level"};

// Independent streams for the pieces of one synthetic run.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

template <typename T>
void read_opt(const json& j, const char* key, std::optional<T>& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

template <typename T>
void read_val(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

template <typename T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

struct Prepared {
  AmbiguousDataset data;
  std::optional<group::GroupStructure> groups;
};

// Shared state for file-backed experiments: the files are read once.
struct Loaded {
  std::optional<io::LoadedData> files;
};

struct Point {
  double value = 0.0;
  ExperimentConfig config;
};

void apply_sweep_value(ExperimentConfig& cfg, const std::string& parameter, double value) {
  auto ambiguity = [&]() -> synth::AmbiguityParams& {
    if (cfg.synthetic) return cfg.synthetic->ambiguity;
    if (cfg.files && cfg.files->ambiguity) return *cfg.files->ambiguity;
    throw InvalidInput("sweep over '" + parameter + "' needs synthesized ambiguity");
  };
  if (parameter == "fraction") {
    ambiguity().fraction = value;
  } else if (parameter == "extra_count") {
    ambiguity().extra_count = static_cast<int>(std::lround(value));
  } else if (parameter == "epsilon") {
    ambiguity().epsilon = value;
  } else if (parameter == "lambda") {
    cfg.options.solver.lambda = value;
  } else if (parameter == "gamma") {
    cfg.options.solver.gamma = value;
  } else if (parameter == "elimination_factor") {
    cfg.options.elimination_factor = value;
  } else if (parameter == "majority_fraction") {
    if (!cfg.synthetic || !cfg.synthetic->majority_label)
      throw InvalidInput("majority_fraction sweep needs a synthetic majority label");
    cfg.synthetic->majority_fraction = value;
  } else if (parameter == "noise_level") {
    if (!cfg.synthetic) throw InvalidInput("noise_level sweep needs synthetic data");
    cfg.synthetic->hull.noise_level = value;
  } else {
    throw InvalidInput("unknown sweep parameter '" + parameter + "'");
  }
}

Prepared prepare(const ExperimentConfig& cfg, const Loaded& loaded, std::uint64_t seed) {
  Prepared out;
  if (cfg.synthetic) {
    const auto& src = *cfg.synthetic;
    auto hull = src.hull;
    hull.seed = derive_seed(seed, 0);
    const auto generated = synth::gen_convex_hull_data(hull);
    auto ambiguity = src.ambiguity;
    ambiguity.seed = derive_seed(seed, 1);
    auto candidates = synth::synthesize_ambiguity(generated.ground_truth, hull.num_classes, ambiguity);
    if (src.majority_label)
      candidates = synth::add_majority_label(std::move(candidates), generated.ground_truth,
                                             *src.majority_label, src.majority_fraction,
                                             derive_seed(seed, 2));
    out.data = synth::make_dataset(generated, std::move(candidates), hull.num_classes);
    return out;
  }
  const auto& files = *loaded.files;
  out.data = files.dataset;
  out.groups = files.groups;
  if (cfg.files->ambiguity) {
    if (!files.truth) throw InvalidInput("synthesized ambiguity for file data needs a truth file");
    auto ambiguity = *cfg.files->ambiguity;
    ambiguity.seed = derive_seed(seed, 1);
    out.data.candidates = synth::synthesize_ambiguity(*files.truth, out.data.num_classes, ambiguity);
    out.data.ground_truth = files.truth;
  }
  return out;
}

struct RunResult {
  SeedRow row;
  std::optional<MethodOutcome> outcome;
};

RunResult run_one(const ExperimentConfig& cfg, const Loaded& loaded, double sweep_value,
                  std::uint64_t seed) {
  RunResult out;
  out.row.sweep_value = sweep_value;
  out.row.seed = seed;
  const auto start = Clock::now();
  try {
    const auto prepared = prepare(cfg, loaded, seed);
    out.row.imbalance = imbalance_factor(prepared.data.candidates, prepared.data.num_classes);
    auto outcome = run_method(cfg.method, prepared.data, prepared.groups, cfg.options);
    const auto& truth = prepared.data.ground_truth ? prepared.data.ground_truth
                                                   : (loaded.files ? loaded.files->truth : std::nullopt);
    if (truth) out.row.error_rate = labeling_error_rate(outcome.labels, *truth);
    out.row.iterations = outcome.solve.iterations;
    out.row.outer_rounds = outcome.trace ? outcome.trace->rounds.size() : 0;
    out.row.converged = outcome.solve.converged;
    out.row.final_residual = outcome.solve.final_residual;
    out.row.group_conflicts = outcome.group_conflicts;
    out.outcome = std::move(outcome);
  } catch (const NumericError& err) {
    out.row.failure = err.what();
  } catch (const GenerationFailure& err) {
    out.row.failure = err.what();
  }
  out.row.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return out;
}

}  // namespace

std::string to_string(Method method) {
  switch (method) {
    case Method::kMcar: return "mcar";
    case Method::kWmcar: return "wmcar";
    case Method::kMcarIce: return "mcar-ice";
    case Method::kWmcarIce: return "wmcar-ice";
    case Method::kGroupMcar: return "group-mcar";
    case Method::kGroupWmcar: return "group-wmcar";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (auto m : {Method::kMcar, Method::kWmcar, Method::kMcarIce, Method::kWmcarIce, Method::kGroupMcar,
                 Method::kGroupWmcar})
    if (to_string(m) == name) return m;
  throw InvalidInput("unknown method '" + name +
                     "' (expected mcar, wmcar, mcar-ice, wmcar-ice, group-mcar or group-wmcar)");
}

bool is_group_method(Method method) {
  return method == Method::kGroupMcar || method == Method::kGroupWmcar;
}

SolverConfig SolverSettings::resolve(const AmbiguousDataset& data) const {
  auto cfg = SolverConfig::defaults_for(data);
  const double lambda0 = cfg.lambda;
  if (lambda) cfg.lambda = *lambda;
  cfg.gamma = gamma.value_or(2.0 * lambda0);
  cfg.mu0 = mu0;
  cfg.mu_max = mu_max;
  if (rho) cfg.rho = *rho;
  if (tol) cfg.tol = *tol;
  if (max_iter) cfg.max_iter = *max_iter;
  return cfg;
}

MethodOutcome run_method(Method method, const AmbiguousDataset& data,
                         const std::optional<group::GroupStructure>& groups, const MethodOptions& options) {
  const SolverConfig solver = options.solver.resolve(data);
  const Index n = data.num_instances();
  MethodOutcome out;
  out.candidates = data.candidates;

  switch (method) {
    case Method::kMcar:
    case Method::kWmcar: {
      const auto p = init_soft_labels(data.candidates, data.num_classes);
      const bool weighted = method == Method::kWmcar && !options.identity_weights;
      const auto w = weighted ? weight_matrix(p) : WeightMatrix::identity(n);
      out.solve = wmcar_solve(data, p, w, solver);
      out.labels = predict_labels(out.solve.y, data.candidates);
      break;
    }
    case Method::kMcarIce:
    case Method::kWmcarIce: {
      ice::IceConfig cfg;
      cfg.elimination_factor = options.elimination_factor;
      cfg.max_outer = options.max_outer;
      cfg.solver = solver;
      cfg.unweighted = method == Method::kMcarIce || options.identity_weights;
      auto [solve, trace] = ice::wmcar_ice(data, cfg);
      out.solve = std::move(solve);
      out.candidates = trace.final_candidates;
      out.labels = predict_labels(out.solve.y, out.candidates);
      out.trace = std::move(trace);
      break;
    }
    case Method::kGroupMcar:
    case Method::kGroupWmcar: {
      if (!groups) throw InvalidInput(to_string(method) + " needs a group structure");
      const auto p = group::init_group_soft_labels(data.candidates, data.num_classes);
      std::optional<WeightMatrix> w;
      if (method == Method::kGroupWmcar && !options.identity_weights) w = weight_matrix(p);
      auto result = group::group_mcar_solve(data, p, *groups, solver, w, options.repair);
      out.solve = std::move(result.solve);
      out.labels = std::move(result.labels);
      out.group_conflicts = result.conflicts.size();
      break;
    }
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (synthetic.has_value() == files.has_value())
    throw InvalidInput("exactly one of a synthetic source or data files must be given");
  if (synthetic) {
    synthetic->hull.validate();
    synthetic->ambiguity.validate(synthetic->hull.num_classes);
  }
  if (is_group_method(method) && !(files && files->paths.groups))
    throw InvalidInput(to_string(method) + " requires a groups file");
  if (seeds.empty()) throw InvalidInput("at least one seed is required");
  if (sweep) {
    if (std::find(std::begin(kSweepParameters), std::end(kSweepParameters), sweep->parameter) ==
        std::end(kSweepParameters))
      throw InvalidInput("unknown sweep parameter '" + sweep->parameter + "'");
    if (sweep->values.empty()) throw InvalidInput("sweep needs at least one value");
  }
  if (options.elimination_factor < 0.0 || options.elimination_factor > 1.0)
    throw InvalidInput("elimination factor must lie in [0, 1]");
  if (options.max_outer == 0) throw InvalidInput("max_outer must be positive");
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return {mean, std::sqrt(var)};
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto start = Clock::now();

  Loaded loaded;
  if (config.files) loaded.files = io::load_dataset(config.files->paths, config.files->options);

  std::vector<Point> points;
  if (config.sweep) {
    for (double v : config.sweep->values) {
      Point pt{v, config};
      apply_sweep_value(pt.config, config.sweep->parameter, v);
      pt.config.validate();
      points.push_back(std::move(pt));
    }
  } else {
    points.push_back({0.0, config});
  }

  struct Task {
    std::size_t point;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (std::size_t p = 0; p < points.size(); ++p)
    for (auto seed : config.seeds) tasks.push_back({p, seed});

  std::vector<RunResult> results(tasks.size());
  const std::size_t jobs = std::max<std::size_t>(1, config.jobs);
  for (std::size_t begin = 0; begin < tasks.size(); begin += jobs) {
    const std::size_t end = std::min(tasks.size(), begin + jobs);
    std::vector<std::future<RunResult>> pending;
    for (std::size_t t = begin; t < end; ++t) {
      const auto& task = tasks[t];
      const auto& pt = points[task.point];
      pending.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred,
                                   [&pt, &loaded, seed = task.seed] {
                                     return run_one(pt.config, loaded, pt.value, seed);
                                   }));
    }
    for (std::size_t t = begin; t < end; ++t) results[t] = pending[t - begin].get();
  }

  ExperimentReport report;
  report.method = to_string(config.method);
  if (config.sweep) report.sweep_parameter = config.sweep->parameter;
  std::vector<double> all_errors;
  for (std::size_t p = 0; p < points.size(); ++p) {
    CurveRow row;
    row.value = points[p].value;
    std::vector<double> errors;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      if (tasks[t].point != p) continue;
      ++row.runs;
      const auto& r = results[t];
      if (r.row.failure) {
        ++row.failures;
        continue;
      }
      if (r.row.error_rate) errors.push_back(*r.row.error_rate);
      if (!report.predictions && r.outcome) {
        report.predictions = r.outcome->labels;
        report.scores = r.outcome->solve.y;
      }
    }
    std::tie(row.mean_error, row.std_error) = mean_std(errors);
    all_errors.insert(all_errors.end(), errors.begin(), errors.end());
    report.failures += row.failures;
    report.curve.push_back(row);
  }
  for (auto& r : results) report.rows.push_back(std::move(r.row));
  std::tie(report.mean_error, report.std_error) = mean_std(all_errors);
  report.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return report;
}

json report_to_json(const ExperimentReport& report, bool with_timing) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    json row = {{"seed", r.seed},
                {"error_rate", opt_json(r.error_rate)},
                {"imbalance_factor", std::isinf(r.imbalance) ? json("inf") : json(r.imbalance)},
                {"iterations", r.iterations},
                {"outer_rounds", r.outer_rounds},
                {"converged", r.converged},
                {"final_residual", r.final_residual},
                {"group_conflicts", r.group_conflicts},
                {"failure", opt_json(r.failure)}};
    if (report.sweep_parameter) row["sweep_value"] = r.sweep_value;
    if (with_timing) row["wall_seconds"] = r.wall_seconds;
    rows.push_back(std::move(row));
  }
  json curve = json::array();
  for (const auto& c : report.curve)
    curve.push_back({{"value", c.value},
                     {"mean_error", c.mean_error},
                     {"std_error", c.std_error},
                     {"runs", c.runs},
                     {"failures", c.failures}});
  json out = {{"method", report.method},
              {"sweep_parameter", opt_json(report.sweep_parameter)},
              {"aggregate",
               {{"mean_error", report.mean_error}, {"std_error", report.std_error}, {"failures", report.failures}}},
              {"runs", std::move(rows)},
              {"curve", std::move(curve)}};
  if (with_timing) out["wall_seconds"] = report.wall_seconds;
  return out;
}

std::string curve_csv(const ExperimentReport& report) {
  // Shortest text that reads back to the same double.
  auto num = [](double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
  };
  std::ostringstream out;
  out << "value,mean_error,std_error,runs,failures\n";
  for (const auto& c : report.curve)
    out << num(c.value) << ',' << num(c.mean_error) << ',' << num(c.std_error) << ',' << c.runs << ',' << c.failures
        << '\n';
  return out.str();
}

void emit_report(const ExperimentReport& report, const OutputPaths& paths) {
  if (paths.report) io::write_text(*paths.report, report_to_json(report).dump(2) + "\n");
  if (paths.curve) io::write_text(*paths.curve, curve_csv(report));
  if (paths.predictions) {
    if (!report.predictions || !report.scores)
      throw Error("no successful run to write predictions for");
    io::write_predictions(*paths.predictions, *report.predictions, *report.scores);
  }
}

ExperimentConfig config_from_json(const json& j) {
  try {
    ExperimentConfig cfg;
    cfg.method = parse_method(j.value("method", std::string("mcar")));

    auto read_ambiguity = [](const json& a) {
      synth::AmbiguityParams p;
      read_val(a, "fraction", p.fraction);
      read_val(a, "extra_count", p.extra_count);
      read_val(a, "epsilon", p.epsilon);
      return p;
    };

    if (j.contains("synthetic")) {
      const auto& s = j.at("synthetic");
      SyntheticSource src;
      auto& h = src.hull;
      read_val(s, "num_classes", h.num_classes);
      if (s.contains("vertices_per_class")) {
        const auto& v = s.at("vertices_per_class");
        h.vertices_per_class = v.is_array() ? v.get<std::vector<int>>()
                                            : std::vector<int>(static_cast<std::size_t>(h.num_classes), v.get<int>());
      } else {
        h.vertices_per_class.assign(static_cast<std::size_t>(h.num_classes), 2);
      }
      if (s.contains("samples_per_class")) {
        const auto& v = s.at("samples_per_class");
        h.samples_per_class = v.is_array() ? v.get<std::vector<int>>()
                                           : std::vector<int>(static_cast<std::size_t>(h.num_classes), v.get<int>());
      } else {
        h.samples_per_class.assign(static_cast<std::size_t>(h.num_classes), 10);
      }
      read_val(s, "ambient_dim", h.ambient_dim);
      read_val(s, "vertex_separation", h.vertex_separation);
      read_val(s, "vertex_spread", h.vertex_spread);
      read_val(s, "noise_level", h.noise_level);
      read_val(s, "sparse_fraction", h.sparse_fraction);
      read_val(s, "sparse_magnitude", h.sparse_magnitude);
      if (s.contains("ambiguity")) src.ambiguity = read_ambiguity(s.at("ambiguity"));
      read_opt(s, "majority_label", src.majority_label);
      read_val(s, "majority_fraction", src.majority_fraction);
      cfg.synthetic = std::move(src);
    }
    if (j.contains("files")) {
      const auto& f = j.at("files");
      FileSource src;
      src.paths.features = f.at("features").get<std::string>();
      src.paths.candidates = f.at("candidates").get<std::string>();
      if (f.contains("groups") && !f.at("groups").is_null()) src.paths.groups = f.at("groups").get<std::string>();
      if (f.contains("truth") && !f.at("truth").is_null()) src.paths.truth = f.at("truth").get<std::string>();
      read_val(f, "normalize", src.options.normalize);
      read_opt(f, "num_classes", src.options.num_classes);
      if (f.contains("ambiguity")) src.ambiguity = read_ambiguity(f.at("ambiguity"));
      cfg.files = std::move(src);
    }
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      auto& o = cfg.options.solver;
      read_opt(s, "lambda", o.lambda);
      read_opt(s, "gamma", o.gamma);
      read_opt(s, "mu0", o.mu0);
      read_opt(s, "rho", o.rho);
      read_opt(s, "mu_max", o.mu_max);
      read_opt(s, "tol", o.tol);
      read_opt(s, "max_iter", o.max_iter);
    }
    if (j.contains("ice")) {
      read_val(j.at("ice"), "elimination_factor", cfg.options.elimination_factor);
      read_val(j.at("ice"), "max_outer", cfg.options.max_outer);
    }
    read_val(j, "identity_weights", cfg.options.identity_weights);
    read_val(j, "repair", cfg.options.repair);
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("sweep") && !j.at("sweep").is_null())
      cfg.sweep = Sweep{j.at("sweep").at("parameter").get<std::string>(),
                        j.at("sweep").at("values").get<std::vector<double>>()};
    if (j.contains("output")) {
      const auto& o = j.at("output");
      if (o.contains("report")) cfg.output.report = o.at("report").get<std::string>();
      if (o.contains("curve")) cfg.output.curve = o.at("curve").get<std::string>();
      if (o.contains("predictions")) cfg.output.predictions = o.at("predictions").get<std::string>();
    }
    read_val(j, "jobs", cfg.jobs);
    return cfg;
  } catch (const json::exception& err) {
    throw InvalidInput(std::string("bad experiment config: ") + err.what());
  }
}

json config_to_json(const ExperimentConfig& config) {
  json j;
  j["method"] = to_string(config.method);
  auto ambiguity_json = [](const synth::AmbiguityParams& a) {
    return json{{"fraction", a.fraction}, {"extra_count", a.extra_count}, {"epsilon", a.epsilon}};
  };
  if (config.synthetic) {
    const auto& s = *config.synthetic;
    const auto& h = s.hull;
    j["synthetic"] = {{"num_classes", h.num_classes},
                      {"vertices_per_class", h.vertices_per_class},
                      {"samples_per_class", h.samples_per_class},
                      {"ambient_dim", h.ambient_dim},
                      {"vertex_separation", h.vertex_separation},
                      {"vertex_spread", h.vertex_spread},
                      {"noise_level", h.noise_level},
                      {"sparse_fraction", h.sparse_fraction},
                      {"sparse_magnitude", h.sparse_magnitude},
                      {"ambiguity", ambiguity_json(s.ambiguity)},
                      {"majority_label", opt_json(s.majority_label)},
                      {"majority_fraction", s.majority_fraction}};
  }
  if (config.files) {
    const auto& f = *config.files;
    j["files"] = {{"features", f.paths.features.string()},
                  {"candidates", f.paths.candidates.string()},
                  {"groups", f.paths.groups ? json(f.paths.groups->string()) : json(nullptr)},
                  {"truth", f.paths.truth ? json(f.paths.truth->string()) : json(nullptr)},
                  {"normalize", f.options.normalize},
                  {"num_classes", opt_json(f.options.num_classes)}};
    if (f.ambiguity) j["files"]["ambiguity"] = ambiguity_json(*f.ambiguity);
  }
  const auto& o = config.options.solver;
  j["solver"] = {{"lambda", opt_json(o.lambda)}, {"gamma", opt_json(o.gamma)}, {"mu0", opt_json(o.mu0)},
                 {"rho", opt_json(o.rho)},       {"mu_max", opt_json(o.mu_max)}, {"tol", opt_json(o.tol)},
                 {"max_iter", opt_json(o.max_iter)}};
  j["ice"] = {{"elimination_factor", config.options.elimination_factor}, {"max_outer", config.options.max_outer}};
  j["identity_weights"] = config.options.identity_weights;
  j["repair"] = config.options.repair;
  j["seeds"] = config.seeds;
  if (config.sweep) j["sweep"] = {{"parameter", config.sweep->parameter}, {"values", config.sweep->values}};
  j["jobs"] = config.jobs;
  return j;
}

}  // namespace mcar::experiment
