#pragma once

// Domain types for ambiguously labeled data: candidate label sets, soft
// labeling matrices, instance weights and the evaluation metrics used on them.
//
// Class indices are 0-based everywhere inside the library. Column j of every
// c x N matrix describes instance j.

#include <Eigen/Dense>

#include <initializer_list>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace mcar {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// 0-based class label.
using ClassIndex = int;

/// Column-stochastic c x N matrix (P, P0, Y) or its column-scaled form YW.
using SoftLabelMatrix = Matrix;

/// Sorted, duplicate-free, non-empty set of candidate classes for one instance.
class CandidateLabelSet {
 public:
  CandidateLabelSet() = default;
  /// Sorts and validates; throws InvalidInput on empty input, duplicates or
  /// negative indices.
  explicit CandidateLabelSet(std::vector<ClassIndex> labels);
  CandidateLabelSet(std::initializer_list<ClassIndex> labels);

  bool contains(ClassIndex label) const;
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  ClassIndex max() const { return labels_.back(); }

  /// Copy with `label` removed. Removing the last label is an error.
  CandidateLabelSet without(ClassIndex label) const;
  /// Copy with `label` added (no-op when already present).
  CandidateLabelSet with(ClassIndex label) const;

  auto begin() const { return labels_.begin(); }
  auto end() const { return labels_.end(); }
  const std::vector<ClassIndex>& labels() const { return labels_; }

  friend bool operator==(const CandidateLabelSet&, const CandidateLabelSet&) = default;

 private:
  std::vector<ClassIndex> labels_;
};

using CandidateSets = std::vector<CandidateLabelSet>;

/// Features (m x N, column j = x_j) with per-instance candidate sets.
struct AmbiguousDataset {
  Matrix features;
  CandidateSets candidates;
  int num_classes = 0;
  /// Evaluation only; never consulted by the solvers.
  std::optional<std::vector<ClassIndex>> ground_truth;

  Index num_instances() const { return features.cols(); }
  Index feature_dim() const { return features.rows(); }

  /// Throws InvalidInput when shapes disagree, features are non-finite, a
  /// candidate index is out of range or the ground truth lies outside its set.
  void validate() const;
};

/// Diagonal N x N weighting stored as its diagonal w_jj = sqrt(eta_j).
class WeightMatrix {
 public:
  WeightMatrix() = default;
  /// Throws InvalidInput unless every entry is finite and strictly positive.
  explicit WeightMatrix(Vector diag);

  static WeightMatrix identity(Index n) { return WeightMatrix(Vector::Ones(n)); }
  static WeightMatrix uniform(Index n, double s) { return WeightMatrix(Vector::Constant(n, s)); }

  Index size() const { return diag_.size(); }
  double operator[](Index j) const { return diag_[j]; }
  const Vector& diag() const { return diag_; }

  /// A * W (column scaling).
  Matrix apply(const Matrix& a) const;
  /// A * W^{-1}.
  Matrix apply_inverse(const Matrix& a) const;

 private:
  Vector diag_;
};

/// Sentinel returned by imbalance_factor when some class never occurs.
inline constexpr double kInfiniteImbalance = std::numeric_limits<double>::infinity();

/// Uniform 1/|L_j| over each candidate set. Throws InvalidInput on an empty
/// set or an index >= c.
SoftLabelMatrix init_soft_labels(std::span<const CandidateLabelSet> candidates, int num_classes);

/// Per column, the candidate with the largest score. Ties go to the lowest
/// class index.
std::vector<ClassIndex> predict_labels(const SoftLabelMatrix& y,
                                       std::span<const CandidateLabelSet> candidates);

/// N_hat_i = sum_j p_ij.
Vector estimated_class_counts(const SoftLabelMatrix& p);

/// w_jj = 1 / sqrt(sum_i p_ij N_hat_i), denominator floored at 1e-12.
WeightMatrix weight_matrix(const SoftLabelMatrix& p);

/// Masks to the candidate set, clamps negatives, then rescales to sum to
/// `target_sum`. A column with no remaining mass becomes uniform over the mask.
Vector project_column_to_candidate_simplex(const Vector& v, const CandidateLabelSet& mask,
                                           double target_sum);

/// Applies project_column_to_candidate_simplex to every column with the
/// matching target sum (all ones when `targets` is empty).
SoftLabelMatrix project_to_candidate_simplex(const Matrix& y,
                                             std::span<const CandidateLabelSet> candidates,
                                             const Vector& targets = Vector());

/// Fraction of mismatching entries.
double labeling_error_rate(std::span<const ClassIndex> predicted, std::span<const ClassIndex> truth);

/// Occurrences of each class across all candidate sets.
std::vector<std::size_t> label_occurrences(std::span<const CandidateLabelSet> candidates,
                                           int num_classes);

/// max / min of label_occurrences; kInfiniteImbalance if a class is absent.
double imbalance_factor(std::span<const CandidateLabelSet> candidates, int num_classes);

/// Checks non-negativity, support and column sums (1 when `targets` is empty).
/// `unmasked_class`, when set, is exempt from the support check.
bool is_valid_soft_labels(const SoftLabelMatrix& y, std::span<const CandidateLabelSet> candidates,
                          double tol = 1e-9, const Vector& targets = Vector(),
                          std::optional<ClassIndex> unmasked_class = std::nullopt);

}  // namespace mcar
