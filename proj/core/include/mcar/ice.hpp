#pragma once

// Iterative candidate elimination: alternate a (weighted) solve with the
// removal of the least likely candidate from the least confident ambiguous
// instances. Eliminations are never undone.

#include "mcar/label_model.hpp"
#include "mcar/solver.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace mcar::ice {

struct IceConfig {
  /// Portion of still-ambiguous instances that lose a candidate per round.
  double elimination_factor = 0.5;
  std::size_t max_outer = 5;
  SolverConfig solver;
  /// false: W recomputed from P every round. true: W = I (the unweighted variant).
  bool unweighted = false;

  void validate() const;
};

struct Elimination {
  Index instance;
  ClassIndex label;
  double score;
};

struct IceRound {
  std::size_t round = 0;       // 1-based
  std::size_t ambiguous = 0;   // |A| at the start of the round
  std::size_t total_candidates_before = 0;
  std::size_t total_candidates_after = 0;
  std::vector<std::size_t> set_sizes;  // |L_j| after the round
  std::vector<Elimination> eliminated;
  std::optional<double> error_rate;    // against ground truth, when known
  std::size_t solver_iterations = 0;
  double solver_residual = 0.0;
  bool solver_converged = false;
};

struct IceTrace {
  std::vector<IceRound> rounds;
  CandidateSets final_candidates;
};

/// Least likely candidate m(j) and its score; ties go to the lowest class.
std::pair<ClassIndex, double> least_likely_candidate(const SoftLabelMatrix& y,
                                                     const CandidateLabelSet& candidates, Index j);

/// The ceil(f_e * |A|) entries of `scores` with the smallest score, ties at the
/// cutoff broken by lowest instance index. Result is sorted by instance.
std::vector<Index> select_elimination_set(std::vector<std::pair<Index, double>> scores,
                                          double elimination_factor);

/// Runs the elimination loop. The returned SolveResult is the last solve with
/// its Y re-projected onto the final candidate sets; the dataset's candidate
/// sets are left untouched (see IceTrace::final_candidates).
std::pair<SolveResult, IceTrace> wmcar_ice(const AmbiguousDataset& data, const IceConfig& config);

/// Same loop with W = I.
std::pair<SolveResult, IceTrace> mcar_ice(const AmbiguousDataset& data, IceConfig config);

}  // namespace mcar::ice
