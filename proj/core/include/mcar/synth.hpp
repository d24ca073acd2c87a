#pragma once

// Synthetic data under the convex-hull class model: every noiseless instance
// of class k is a convex combination of the n_k vertices D_k of that class,
// so [P0; X0] = [T; D] Q has rank at most sum_k n_k.

#include "mcar/label_model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mcar::synth {

struct ConvexHullSpec {
  int num_classes = 3;
  std::vector<int> vertices_per_class{2, 2, 2};
  Index ambient_dim = 20;
  std::vector<int> samples_per_class{10, 10, 10};
  /// Minimum distance between any two class centroids.
  double vertex_separation = 0.5;
  /// Side of the box around each class center the vertices are drawn from.
  double vertex_spread = 0.5;
  /// Std of dense Gaussian noise added to X0.
  double noise_level = 0.0;
  /// Fraction of entries of X hit by sparse +-sparse_magnitude corruption.
  double sparse_fraction = 0.0;
  double sparse_magnitude = 0.0;
  std::uint64_t seed = 0;

  /// Same shape for every class.
  static ConvexHullSpec uniform(int num_classes, int vertices, int samples, Index dim,
                                std::uint64_t seed);
  void validate() const;
  int total_vertices() const;
  Index total_samples() const;
};

struct SynthResult {
  Matrix x;                   // m x N observed
  Matrix x0;                  // m x N noiseless, equals d * q
  std::vector<ClassIndex> ground_truth;
  Matrix d;                   // m x sum(n_k) vertices
  Matrix q;                   // sum(n_k) x N hull coefficients
  Matrix t;                   // c x sum(n_k) accumulation matrix, t * q = P0
  std::vector<std::string> warnings;

  friend bool operator==(const SynthResult&, const SynthResult&) = default;
};

/// Throws GenerationFailure when the centroid separation cannot be met
/// within 100 attempts.
SynthResult gen_convex_hull_data(const ConvexHullSpec& spec);

/// One-hot c x N matrix of the labels.
SoftLabelMatrix one_hot(std::span<const ClassIndex> labels, int num_classes);

struct AmbiguityParams {
  /// Portion of instances that receive extra labels.
  double fraction = 0.0;
  /// Number of extra labels per ambiguous instance.
  int extra_count = 0;
  /// Probability that the designated distractor (l + 1) mod c co-occurs with l.
  double epsilon = 1.0;
  std::uint64_t seed = 0;

  void validate(int num_classes) const;
};

/// The class that accompanies `label` with probability epsilon.
inline ClassIndex distractor(ClassIndex label, int num_classes) { return (label + 1) % num_classes; }

/// Candidate sets under the controlled ambiguity model. Exactly
/// ceil(fraction * N) instances get 1 + extra_count candidates, the rest keep
/// only their true label.
CandidateSets synthesize_ambiguity(std::span<const ClassIndex> truth, int num_classes,
                                   const AmbiguityParams& params);

/// Adds `majority` to randomly chosen candidate sets (instances of other
/// classes) until at least ceil(target_fraction * N) sets contain it.
CandidateSets add_majority_label(CandidateSets candidates, std::span<const ClassIndex> truth,
                                 ClassIndex majority, double target_fraction, std::uint64_t seed);

/// Number of singular values of [P0; X0] above tol * sigma_max.
Index rank_check(const Matrix& p0, const Matrix& x0, double tol);

/// Numerical rank of a single matrix, same convention as rank_check.
Index numerical_rank(const Matrix& a, double tol);

/// Builds a dataset from generated features and candidate sets.
AmbiguousDataset make_dataset(const SynthResult& data, CandidateSets candidates, int num_classes);

}  // namespace mcar::synth
