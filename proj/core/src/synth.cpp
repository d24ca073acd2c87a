#include "mcar/synth.hpp"

#include "mcar/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace mcar::synth {

namespace {

constexpr int kMaxSeparationAttempts = 100;

using Rng = std::mt19937_64;

// Uniform point on the probability simplex.
Vector dirichlet_ones(Rng& rng, int n) {
  std::exponential_distribution<double> expo(1.0);
  Vector a(n);
  for (int i = 0; i < n; ++i) a[i] = expo(rng);
  return a / a.sum();
}

std::vector<Index> sample_without_replacement(Rng& rng, Index population, Index count) {
  std::vector<Index> idx(static_cast<std::size_t>(population));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(count));
  return idx;
}

}  // namespace

ConvexHullSpec ConvexHullSpec::uniform(int num_classes, int vertices, int samples, Index dim,
                                       std::uint64_t seed) {
  ConvexHullSpec spec;
  spec.num_classes = num_classes;
  spec.vertices_per_class.assign(static_cast<std::size_t>(num_classes), vertices);
  spec.samples_per_class.assign(static_cast<std::size_t>(num_classes), samples);
  spec.ambient_dim = dim;
  spec.seed = seed;
  return spec;
}

void ConvexHullSpec::validate() const {
  if (num_classes < 1) throw InvalidInput("need at least one class");
  if (vertices_per_class.size() != static_cast<std::size_t>(num_classes) ||
      samples_per_class.size() != static_cast<std::size_t>(num_classes))
    throw InvalidInput("per-class vectors must have one entry per class");
  for (int n : vertices_per_class)
    if (n < 1) throw InvalidInput("every class needs at least one vertex");
  for (int n : samples_per_class)
    if (n < 1) throw InvalidInput("every class needs at least one sample");
  if (ambient_dim < 1) throw InvalidInput("ambient dimension must be positive");
  if (vertex_separation < 0.0 || vertex_spread < 0.0 || noise_level < 0.0 || sparse_magnitude < 0.0)
    throw InvalidInput("separation, spread, noise and magnitude must be non-negative");
  if (sparse_fraction < 0.0 || sparse_fraction >= 1.0)
    throw InvalidInput("sparse fraction must lie in [0, 1)");
}

int ConvexHullSpec::total_vertices() const {
  return std::accumulate(vertices_per_class.begin(), vertices_per_class.end(), 0);
}

Index ConvexHullSpec::total_samples() const {
  return std::accumulate(samples_per_class.begin(), samples_per_class.end(), Index{0});
}

SynthResult gen_convex_hull_data(const ConvexHullSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int c = spec.num_classes;
  const Index m = spec.ambient_dim;
  const int total_v = spec.total_vertices();
  const Index n = spec.total_samples();

  SynthResult out;
  if (total_v > m)
    out.warnings.push_back("sum of vertices (" + std::to_string(total_v) +
                           ") exceeds ambient dimension; hulls may not be separable");

  std::vector<int> offset(static_cast<std::size_t>(c) + 1, 0);
  for (int k = 0; k < c; ++k)
    offset[static_cast<std::size_t>(k) + 1] = offset[static_cast<std::size_t>(k)] +
                                              spec.vertices_per_class[static_cast<std::size_t>(k)];

  bool separated = false;
  for (int attempt = 0; attempt < kMaxSeparationAttempts && !separated; ++attempt) {
    Matrix centers(m, c);
    for (Index r = 0; r < m; ++r)
      for (int k = 0; k < c; ++k) centers(r, k) = unit(rng);
    out.d.resize(m, total_v);
    for (int k = 0; k < c; ++k)
      for (int v = offset[static_cast<std::size_t>(k)]; v < offset[static_cast<std::size_t>(k) + 1]; ++v)
        for (Index r = 0; r < m; ++r)
          out.d(r, v) = centers(r, k) + spec.vertex_spread * (unit(rng) - 0.5);

    separated = true;
    Matrix centroids(m, c);
    for (int k = 0; k < c; ++k)
      centroids.col(k) = out.d.middleCols(offset[static_cast<std::size_t>(k)],
                                          spec.vertices_per_class[static_cast<std::size_t>(k)])
                             .rowwise()
                             .mean();
    for (int a = 0; a < c && separated; ++a)
      for (int b = a + 1; b < c && separated; ++b)
        separated = (centroids.col(a) - centroids.col(b)).norm() >= spec.vertex_separation;
  }
  if (!separated)
    throw GenerationFailure("could not reach class centroid separation " +
                            std::to_string(spec.vertex_separation) + " in " +
                            std::to_string(kMaxSeparationAttempts) + " attempts");

  out.q = Matrix::Zero(total_v, n);
  out.t = Matrix::Zero(c, total_v);
  out.ground_truth.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < c; ++k)
    out.t.block(k, offset[static_cast<std::size_t>(k)], 1,
                spec.vertices_per_class[static_cast<std::size_t>(k)])
        .setOnes();

  Index col = 0;
  for (int k = 0; k < c; ++k) {
    const int nk = spec.vertices_per_class[static_cast<std::size_t>(k)];
    for (int s = 0; s < spec.samples_per_class[static_cast<std::size_t>(k)]; ++s, ++col) {
      out.q.block(offset[static_cast<std::size_t>(k)], col, nk, 1) = dirichlet_ones(rng, nk);
      out.ground_truth.push_back(k);
    }
  }
  out.x0 = out.d * out.q;
  out.x = out.x0;

  if (spec.noise_level > 0.0) {
    std::normal_distribution<double> gauss(0.0, spec.noise_level);
    for (Index j = 0; j < n; ++j)
      for (Index r = 0; r < m; ++r) out.x(r, j) += gauss(rng);
  }
  if (spec.sparse_fraction > 0.0 && spec.sparse_magnitude > 0.0) {
    const Index entries = m * n;
    const auto hits = static_cast<Index>(std::ceil(spec.sparse_fraction * static_cast<double>(entries)));
    std::bernoulli_distribution coin(0.5);
    for (Index flat : sample_without_replacement(rng, entries, hits))
      out.x(flat % m, flat / m) += coin(rng) ? spec.sparse_magnitude : -spec.sparse_magnitude;
  }
  return out;
}

SoftLabelMatrix one_hot(std::span<const ClassIndex> labels, int num_classes) {
  SoftLabelMatrix p = SoftLabelMatrix::Zero(num_classes, static_cast<Index>(labels.size()));
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] < 0 || labels[j] >= num_classes) throw InvalidInput("label out of range");
    p(labels[j], static_cast<Index>(j)) = 1.0;
  }
  return p;
}

void AmbiguityParams::validate(int num_classes) const {
  if (fraction < 0.0 || fraction > 1.0) throw InvalidInput("ambiguous fraction must lie in [0, 1]");
  if (extra_count < 0) throw InvalidInput("extra label count must be non-negative");
  if (extra_count > num_classes - 1)
    throw InvalidInput("extra label count " + std::to_string(extra_count) + " exceeds c - 1 = " +
                       std::to_string(num_classes - 1));
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw InvalidInput("epsilon must lie in (0, 1]");
}

CandidateSets synthesize_ambiguity(std::span<const ClassIndex> truth, int num_classes,
                                   const AmbiguityParams& params) {
  params.validate(num_classes);
  Rng rng(params.seed);
  const auto n = static_cast<Index>(truth.size());

  CandidateSets out;
  out.reserve(truth.size());
  for (ClassIndex l : truth) {
    if (l < 0 || l >= num_classes) throw InvalidInput("true label out of range");
    out.emplace_back(std::vector<ClassIndex>{l});
  }
  if (params.extra_count == 0) return out;

  const auto ambiguous =
      static_cast<Index>(std::ceil(params.fraction * static_cast<double>(n) - 1e-12));
  std::bernoulli_distribution pick_distractor(params.epsilon);
  for (Index j : sample_without_replacement(rng, n, std::min(ambiguous, n))) {
    const ClassIndex l = truth[static_cast<std::size_t>(j)];
    const ClassIndex d = distractor(l, num_classes);
    std::vector<ClassIndex> labels{l};
    std::vector<ClassIndex> pool;
    for (ClassIndex i = 0; i < num_classes; ++i)
      if (i != l && i != d) pool.push_back(i);
    std::shuffle(pool.begin(), pool.end(), rng);

    int needed = params.extra_count;
    if (pick_distractor(rng)) {
      labels.push_back(d);
      --needed;
    }
    for (ClassIndex i : pool) {
      if (needed == 0) break;
      labels.push_back(i);
      --needed;
    }
    // The pool is exhausted only when every other class is required.
    if (needed > 0 && d != l) labels.push_back(d);
    out[static_cast<std::size_t>(j)] = CandidateLabelSet(std::move(labels));
  }
  return out;
}

CandidateSets add_majority_label(CandidateSets candidates, std::span<const ClassIndex> truth,
                                 ClassIndex majority, double target_fraction, std::uint64_t seed) {
  if (candidates.size() != truth.size()) throw InvalidInput("candidate and truth lengths differ");
  if (target_fraction < 0.0 || target_fraction > 1.0)
    throw InvalidInput("target fraction must lie in [0, 1]");
  Rng rng(seed);
  const auto n = static_cast<Index>(candidates.size());
  const auto target = static_cast<Index>(std::ceil(target_fraction * static_cast<double>(n) - 1e-12));

  Index have = 0;
  std::vector<Index> eligible;
  for (Index j = 0; j < n; ++j) {
    if (candidates[static_cast<std::size_t>(j)].contains(majority))
      ++have;
    else
      eligible.push_back(j);
  }
  std::shuffle(eligible.begin(), eligible.end(), rng);
  for (Index j : eligible) {
    if (have >= target) break;
    auto& set = candidates[static_cast<std::size_t>(j)];
    set = set.with(majority);
    ++have;
  }
  return candidates;
}

Index numerical_rank(const Matrix& a, double tol) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(a);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  const double cutoff = tol * s[0];
  return static_cast<Index>((s.array() > cutoff).count());
}

Index rank_check(const Matrix& p0, const Matrix& x0, double tol) {
  if (p0.cols() != x0.cols()) throw InvalidInput("P0 and X0 must have the same number of columns");
  Matrix h(p0.rows() + x0.rows(), p0.cols());
  h << p0, x0;
  return numerical_rank(h, tol);
}

AmbiguousDataset make_dataset(const SynthResult& data, CandidateSets candidates, int num_classes) {
  AmbiguousDataset ds;
  ds.features = data.x;
  ds.candidates = std::move(candidates);
  ds.num_classes = num_classes;
  ds.ground_truth = data.ground_truth;
  ds.validate();
  return ds;
}

}  // namespace mcar::synth
