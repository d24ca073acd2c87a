#include "mcar/ice.hpp"

#include "mcar/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mcar::ice {

namespace {

std::size_t total_size(const CandidateSets& sets) {
  return std::accumulate(sets.begin(), sets.end(), std::size_t{0},
                         [](std::size_t acc, const CandidateLabelSet& s) { return acc + s.size(); });
}

std::vector<Index> ambiguous_instances(const CandidateSets& sets) {
  std::vector<Index> out;
  for (std::size_t j = 0; j < sets.size(); ++j)
    if (sets[j].size() > 1) out.push_back(static_cast<Index>(j));
  return out;
}

}  // namespace

void IceConfig::validate() const {
  if (!(elimination_factor >= 0.0 && elimination_factor <= 1.0))
    throw InvalidInput("elimination factor must lie in [0, 1]");
  if (max_outer == 0) throw InvalidInput("max_outer must be positive");
  solver.validate();
}

std::pair<ClassIndex, double> least_likely_candidate(const SoftLabelMatrix& y,
                                                     const CandidateLabelSet& candidates, Index j) {
  if (candidates.empty()) throw InvalidInput("candidate set must not be empty");
  if (j < 0 || j >= y.cols() || candidates.max() >= y.rows())
    throw InvalidInput("instance or candidate index outside the label matrix");
  ClassIndex worst = candidates.labels().front();
  double worst_score = y(worst, j);
  for (ClassIndex i : candidates) {
    if (y(i, j) < worst_score) {
      worst = i;
      worst_score = y(i, j);
    }
  }
  return {worst, worst_score};
}

std::vector<Index> select_elimination_set(std::vector<std::pair<Index, double>> scores,
                                          double elimination_factor) {
  if (!(elimination_factor >= 0.0 && elimination_factor <= 1.0))
    throw InvalidInput("elimination factor must lie in [0, 1]");
  const auto count = static_cast<std::size_t>(
      std::ceil(elimination_factor * static_cast<double>(scores.size()) - 1e-12));
  std::sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  std::vector<Index> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count && k < scores.size(); ++k) out.push_back(scores[k].first);
  std::sort(out.begin(), out.end());
  return out;
}

std::pair<SolveResult, IceTrace> wmcar_ice(const AmbiguousDataset& data, const IceConfig& config) {
  config.validate();
  data.validate();

  AmbiguousDataset working = data;
  // Eliminations may drop a true label; the truth is only used for the trace.
  working.ground_truth.reset();
  SoftLabelMatrix p = init_soft_labels(working.candidates, working.num_classes);
  IceTrace trace;

  SolveResult last;
  last.y = p;
  last.z = data.features;
  last.e_p = Matrix::Zero(p.rows(), p.cols());
  last.e_x = Matrix::Zero(data.features.rows(), data.features.cols());
  last.converged = true;

  for (std::size_t round = 1; round <= config.max_outer; ++round) {
    const auto ambiguous = ambiguous_instances(working.candidates);
    if (ambiguous.empty()) break;

    IceRound record;
    record.round = round;
    record.ambiguous = ambiguous.size();
    record.total_candidates_before = total_size(working.candidates);

    const WeightMatrix w =
        config.unweighted ? WeightMatrix::identity(p.cols()) : weight_matrix(p);
    try {
      last = wmcar_solve(working, p, w, config.solver);
    } catch (const NumericError& err) {
      throw NumericError(std::string(err.what()) + " during elimination round " + std::to_string(round),
                         err.iteration());
    }

    std::vector<std::pair<Index, double>> scores;
    std::vector<ClassIndex> least(static_cast<std::size_t>(p.cols()), -1);
    scores.reserve(ambiguous.size());
    for (Index j : ambiguous) {
      const auto [label, score] =
          least_likely_candidate(last.y, working.candidates[static_cast<std::size_t>(j)], j);
      least[static_cast<std::size_t>(j)] = label;
      scores.emplace_back(j, score);
    }
    for (Index j : select_elimination_set(scores, config.elimination_factor)) {
      auto& set = working.candidates[static_cast<std::size_t>(j)];
      const ClassIndex label = least[static_cast<std::size_t>(j)];
      record.eliminated.push_back({j, label, last.y(label, j)});
      set = set.without(label);
    }

    p = project_to_candidate_simplex(last.y, working.candidates);
    last.y = p;

    record.total_candidates_after = total_size(working.candidates);
    record.set_sizes.reserve(working.candidates.size());
    for (const auto& set : working.candidates) record.set_sizes.push_back(set.size());
    if (data.ground_truth) {
      const auto pred = predict_labels(p, working.candidates);
      record.error_rate = labeling_error_rate(pred, *data.ground_truth);
    }
    record.solver_iterations = last.iterations;
    record.solver_residual = last.final_residual;
    record.solver_converged = last.converged;
    trace.rounds.push_back(std::move(record));
  }

  trace.final_candidates = std::move(working.candidates);
  return {std::move(last), std::move(trace)};
}

std::pair<SolveResult, IceTrace> mcar_ice(const AmbiguousDataset& data, IceConfig config) {
  config.unweighted = true;
  return wmcar_ice(data, config);
}

}  // namespace mcar::ice
