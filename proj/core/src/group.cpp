#include "mcar/group.hpp"

#include "mcar/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

namespace mcar::group {

namespace {

void check_columns(const Matrix& y, std::span<const CandidateLabelSet> candidates) {
  if (static_cast<Index>(candidates.size()) != y.cols())
    throw InvalidInput("candidate count does not match label matrix columns");
  if (y.rows() < 2) throw InvalidInput("group mode needs at least one non-null class and the null class");
}

bool has_nonnull_candidate(const GroupStructure& groups, std::size_t k,
                           std::span<const CandidateLabelSet> candidates, ClassIndex null) {
  for (Index j : groups[k])
    for (ClassIndex i : candidates[static_cast<std::size_t>(j)])
      if (i != null) return true;
  return false;
}

}  // namespace

GroupStructure::GroupStructure(std::vector<std::vector<Index>> groups, Index num_instances)
    : num_instances_(num_instances) {
  constexpr auto kUnassigned = std::numeric_limits<std::size_t>::max();
  owner_.assign(static_cast<std::size_t>(num_instances), kUnassigned);
  for (auto& g : groups) {
    if (g.empty()) throw InvalidInput("groups must not be empty");
    std::sort(g.begin(), g.end());
    for (Index j : g) {
      if (j < 0 || j >= num_instances)
        throw InvalidInput("group member " + std::to_string(j) + " is out of range");
      auto& owner = owner_[static_cast<std::size_t>(j)];
      if (owner != kUnassigned)
        throw InvalidInput("instance " + std::to_string(j) + " appears in more than one group");
      owner = groups_.size();
    }
    groups_.push_back(std::move(g));
  }
  for (Index j = 0; j < num_instances; ++j) {
    if (owner_[static_cast<std::size_t>(j)] == kUnassigned) {
      owner_[static_cast<std::size_t>(j)] = groups_.size();
      groups_.push_back({j});
    }
  }
}

GroupStructure GroupStructure::singletons(Index num_instances) { return GroupStructure({}, num_instances); }

CandidateSets with_null(std::span<const CandidateLabelSet> candidates, int num_classes) {
  CandidateSets out;
  out.reserve(candidates.size());
  for (const auto& set : candidates) out.push_back(set.with(null_class(num_classes)));
  return out;
}

SoftLabelMatrix init_group_soft_labels(std::span<const CandidateLabelSet> candidates, int num_classes) {
  const auto augmented = with_null(candidates, num_classes);
  return init_soft_labels(augmented, num_classes);
}

Matrix clamp_and_mask(const Matrix& y, std::span<const CandidateLabelSet> candidates) {
  check_columns(y, candidates);
  const Index null = y.rows() - 1;
  Matrix out = y.cwiseMax(0.0);
  for (Index j = 0; j < y.cols(); ++j) {
    const auto& set = candidates[static_cast<std::size_t>(j)];
    for (Index i = 0; i < null; ++i)
      if (!set.contains(static_cast<ClassIndex>(i))) out(i, j) = 0.0;
  }
  return out;
}

Matrix normalize_columns(const Matrix& y, std::span<const CandidateLabelSet> candidates) {
  check_columns(y, candidates);
  const auto null = static_cast<ClassIndex>(y.rows() - 1);
  Matrix out = y;
  for (Index j = 0; j < y.cols(); ++j) {
    const double mass = out.col(j).sum();
    if (mass > 0.0 && std::isfinite(mass)) {
      out.col(j) /= mass;
    } else {
      const auto allowed = candidates[static_cast<std::size_t>(j)].with(null);
      out.col(j).setZero();
      for (ClassIndex i : allowed) out(i, j) = 1.0 / static_cast<double>(allowed.size());
    }
  }
  return out;
}

Matrix scale_nonnull_mass(const Matrix& y, std::span<const CandidateLabelSet> candidates,
                          const GroupStructure& groups, std::vector<std::size_t>* degenerate) {
  check_columns(y, candidates);
  const Index nonnull = y.rows() - 1;
  const auto null = static_cast<ClassIndex>(nonnull);
  Matrix out = y;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    if (!has_nonnull_candidate(groups, k, candidates, null)) continue;
    double mass = 0.0;
    for (Index j : groups[k]) mass += out.col(j).head(nonnull).sum();
    if (!(mass > 0.0)) {
      if (degenerate) degenerate->push_back(k);
      continue;
    }
    const double divisor = std::min(mass, 1.0);
    for (Index j : groups[k]) out.col(j).head(nonnull) /= divisor;
  }
  return out;
}

Matrix scale_unique(const Matrix& y, const GroupStructure& groups) {
  if (y.cols() != groups.num_instances()) throw InvalidInput("group structure does not match label matrix");
  const Index nonnull = y.rows() - 1;
  Matrix out = y;
  for (const auto& members : groups) {
    for (Index i = 0; i < nonnull; ++i) {
      double mass = 0.0;
      for (Index j : members) mass += out(i, j);
      const double divisor = std::max(mass, 1.0);
      for (Index j : members) out(i, j) /= divisor;
    }
  }
  return out;
}

GroupProjection project_group_constraints(const Matrix& y, std::span<const CandidateLabelSet> candidates,
                                          const GroupStructure& groups) {
  if (y.cols() != groups.num_instances()) throw InvalidInput("group structure does not match label matrix");
  GroupProjection out;
  out.y = normalize_columns(clamp_and_mask(y, candidates), candidates);
  out.y = normalize_columns(scale_nonnull_mass(out.y, candidates, groups, &out.degenerate_groups), candidates);
  out.y = normalize_columns(scale_unique(out.y, groups), candidates);
  return out;
}

std::vector<Conflict> find_conflicts(std::span<const ClassIndex> labels, const GroupStructure& groups,
                                     int num_classes) {
  if (static_cast<Index>(labels.size()) != groups.num_instances())
    throw InvalidInput("label count does not match group structure");
  const ClassIndex null = null_class(num_classes);
  std::vector<Conflict> out;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    std::map<ClassIndex, std::vector<Index>> users;
    for (Index j : groups[k]) {
      const ClassIndex l = labels[static_cast<std::size_t>(j)];
      if (l != null) users[l].push_back(j);
    }
    for (auto& [label, members] : users)
      if (members.size() > 1) out.push_back({k, label, std::move(members)});
  }
  return out;
}

std::vector<ClassIndex> predict_group_labels(const SoftLabelMatrix& y,
                                             std::span<const CandidateLabelSet> candidates,
                                             int num_classes) {
  const auto augmented = with_null(candidates, num_classes);
  return predict_labels(y, augmented);
}

std::vector<ClassIndex> repair_conflicts(const SoftLabelMatrix& y,
                                         std::span<const CandidateLabelSet> candidates,
                                         const GroupStructure& groups, int num_classes) {
  const ClassIndex null = null_class(num_classes);
  auto labels = predict_group_labels(y, candidates, num_classes);

  for (const auto& members : groups) {
    // Most confident instances choose first, so a contested class stays with
    // its highest-scoring claimant.
    std::vector<Index> order(members.begin(), members.end());
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
      return y(labels[static_cast<std::size_t>(a)], a) > y(labels[static_cast<std::size_t>(b)], b);
    });
    std::vector<bool> taken(static_cast<std::size_t>(num_classes), false);
    for (Index j : order) {
      auto& label = labels[static_cast<std::size_t>(j)];
      if (label == null) continue;
      std::vector<ClassIndex> ranked(candidates[static_cast<std::size_t>(j)].with(null).labels());
      std::stable_sort(ranked.begin(), ranked.end(),
                       [&](ClassIndex a, ClassIndex b) { return y(a, j) > y(b, j); });
      for (ClassIndex option : ranked) {
        if (option == null || !taken[static_cast<std::size_t>(option)]) {
          label = option;
          if (option != null) taken[static_cast<std::size_t>(option)] = true;
          break;
        }
      }
    }
  }
  return labels;
}

GroupSolveResult group_mcar_solve(const AmbiguousDataset& data, const SoftLabelMatrix& p,
                                  const GroupStructure& groups, const SolverConfig& config,
                                  const std::optional<WeightMatrix>& w, bool repair) {
  data.validate();
  const int c = data.num_classes;
  if (c < 2) throw InvalidInput("group mode needs a null class plus at least one identity");
  if (p.rows() != c || p.cols() != data.num_instances())
    throw InvalidInput("label matrix shape does not match the dataset");
  if (groups.num_instances() != data.num_instances())
    throw InvalidInput("group structure does not cover the dataset");
  if (!is_valid_soft_labels(p, data.candidates, 1e-9, Vector(), null_class(c)))
    throw InvalidInput("initial label matrix violates the group simplex constraints");

  const WeightMatrix weights = w.value_or(WeightMatrix::identity(data.num_instances()));
  const auto& candidates = data.candidates;
  std::vector<std::size_t> degenerate;

  auto project = [&](const Matrix& y_scaled, const Vector& targets) {
    const Matrix y = y_scaled * targets.cwiseInverse().asDiagonal();
    auto projected = project_group_constraints(y, candidates, groups);
    degenerate = std::move(projected.degenerate_groups);
    return Matrix(projected.y * targets.asDiagonal());
  };

  GroupSolveResult out;
  out.solve = alm_solve(data.features, p, weights, config, project);
  out.degenerate_groups = std::move(degenerate);
  out.labels = repair ? repair_conflicts(out.solve.y, candidates, groups, c)
                      : predict_group_labels(out.solve.y, candidates, c);
  out.conflicts = find_conflicts(out.labels, groups, c);
  for (const auto& members : groups)
    for (Index i = 0; i + 1 < c; ++i) {
      double mass = 0.0;
      for (Index j : members) mass += out.solve.y(i, j);
      out.max_group_class_mass = std::max(out.max_group_class_mass, mass);
    }
  return out;
}

}  // namespace mcar::group
