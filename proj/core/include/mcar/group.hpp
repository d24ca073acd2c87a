#pragma once

// Group-constrained ambiguity resolution. Instances are partitioned into
// groups (e.g. faces in one photo); within a group each non-null identity is
// used at most once and, unless every candidate in the group is the null
// class, at least one instance carries a non-null identity. The null class is
// the last class index, c - 1, and is never removed by candidate masking.

#include "mcar/label_model.hpp"
#include "mcar/solver.hpp"

#include <optional>
#include <vector>

namespace mcar::group {

class GroupStructure {
 public:
  GroupStructure() = default;
  /// Validates that `groups` are disjoint, non-empty and within [0, N). Any
  /// instance not mentioned is placed in its own singleton group.
  GroupStructure(std::vector<std::vector<Index>> groups, Index num_instances);

  static GroupStructure singletons(Index num_instances);

  std::size_t size() const { return groups_.size(); }
  const std::vector<Index>& operator[](std::size_t k) const { return groups_[k]; }
  auto begin() const { return groups_.begin(); }
  auto end() const { return groups_.end(); }
  Index num_instances() const { return num_instances_; }
  /// Group containing instance j.
  std::size_t group_of(Index j) const { return owner_[static_cast<std::size_t>(j)]; }

 private:
  std::vector<std::vector<Index>> groups_;
  std::vector<std::size_t> owner_;
  Index num_instances_ = 0;
};

inline ClassIndex null_class(int num_classes) { return num_classes - 1; }

/// Candidate sets with the null class added to each.
CandidateSets with_null(std::span<const CandidateLabelSet> candidates, int num_classes);

/// Uniform initial labels over L_j plus the null class.
SoftLabelMatrix init_group_soft_labels(std::span<const CandidateLabelSet> candidates, int num_classes);

// Individual projection sub-steps. None of them renormalizes unless its name
// says so; `normalize_columns` maps every column back onto the simplex.

/// Clamps negatives and zeroes non-null rows outside L_j. The null row is kept.
Matrix clamp_and_mask(const Matrix& y, std::span<const CandidateLabelSet> candidates);

/// l1-normalizes each column to 1; a column without mass becomes uniform over
/// L_j plus the null class.
Matrix normalize_columns(const Matrix& y, std::span<const CandidateLabelSet> candidates);

/// Divides the non-null entries of each eligible group by
/// min(total non-null group mass, 1). Groups whose candidates are all null
/// are skipped; eligible groups with zero non-null mass are left unchanged and
/// appended to `degenerate` when given.
Matrix scale_nonnull_mass(const Matrix& y, std::span<const CandidateLabelSet> candidates,
                          const GroupStructure& groups, std::vector<std::size_t>* degenerate = nullptr);

/// Divides y_ij (non-null i, j in G_k) by max(sum_{g in G_k} y_ig, 1).
Matrix scale_unique(const Matrix& y, const GroupStructure& groups);

struct GroupProjection {
  Matrix y;
  std::vector<std::size_t> degenerate_groups;
};

/// Full projection: clamp/mask/normalize, non-null mass scaling/normalize,
/// uniqueness scaling/normalize.
GroupProjection project_group_constraints(const Matrix& y, std::span<const CandidateLabelSet> candidates,
                                          const GroupStructure& groups);

struct Conflict {
  std::size_t group;
  ClassIndex label;
  std::vector<Index> instances;
};

/// Non-null labels used more than once inside a group.
std::vector<Conflict> find_conflicts(std::span<const ClassIndex> labels, const GroupStructure& groups,
                                     int num_classes);

/// Argmax over L_j plus the null class.
std::vector<ClassIndex> predict_group_labels(const SoftLabelMatrix& y,
                                             std::span<const CandidateLabelSet> candidates,
                                             int num_classes);

/// Greedy repair: each contested non-null class stays with its highest-scoring
/// instance, the others fall back to their best unused candidate or null.
std::vector<ClassIndex> repair_conflicts(const SoftLabelMatrix& y,
                                         std::span<const CandidateLabelSet> candidates,
                                         const GroupStructure& groups, int num_classes);

struct GroupSolveResult {
  SolveResult solve;
  std::vector<ClassIndex> labels;
  /// Conflicts in `labels` (after repair when requested).
  std::vector<Conflict> conflicts;
  /// Eligible groups with no non-null mass at the last projection.
  std::vector<std::size_t> degenerate_groups;
  /// Largest per-group per-non-null-class soft sum of the returned Y.
  double max_group_class_mass = 0.0;
};

/// ALM solve with the group projection in place of the candidate simplex
/// projection. With weights the projection runs on Y = (YW) W^{-1} and the
/// result is scaled back.
GroupSolveResult group_mcar_solve(const AmbiguousDataset& data, const SoftLabelMatrix& p,
                                  const GroupStructure& groups, const SolverConfig& config,
                                  const std::optional<WeightMatrix>& w = std::nullopt,
                                  bool repair = false);

}  // namespace mcar::group
