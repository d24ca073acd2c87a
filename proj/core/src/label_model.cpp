#include "mcar/label_model.hpp"

#include "mcar/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mcar {

namespace {

constexpr double kWeightFloor = 1e-12;

void check_candidates(std::span<const CandidateLabelSet> candidates, int num_classes) {
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    if (candidates[j].empty())
      throw InvalidInput("empty candidate set for instance " + std::to_string(j));
    if (candidates[j].max() >= num_classes)
      throw InvalidInput("candidate label " + std::to_string(candidates[j].max()) +
                         " out of range for instance " + std::to_string(j));
  }
}

}  // namespace

CandidateLabelSet::CandidateLabelSet(std::vector<ClassIndex> labels) : labels_(std::move(labels)) {
  if (labels_.empty()) throw InvalidInput("candidate label set must not be empty");
  std::sort(labels_.begin(), labels_.end());
  if (std::adjacent_find(labels_.begin(), labels_.end()) != labels_.end())
    throw InvalidInput("duplicate label in candidate set");
  if (labels_.front() < 0) throw InvalidInput("negative class index in candidate set");
}

CandidateLabelSet::CandidateLabelSet(std::initializer_list<ClassIndex> labels)
    : CandidateLabelSet(std::vector<ClassIndex>(labels)) {}

bool CandidateLabelSet::contains(ClassIndex label) const {
  return std::binary_search(labels_.begin(), labels_.end(), label);
}

CandidateLabelSet CandidateLabelSet::without(ClassIndex label) const {
  std::vector<ClassIndex> rest;
  rest.reserve(labels_.size());
  std::copy_if(labels_.begin(), labels_.end(), std::back_inserter(rest),
               [label](ClassIndex l) { return l != label; });
  return CandidateLabelSet(std::move(rest));
}

CandidateLabelSet CandidateLabelSet::with(ClassIndex label) const {
  if (contains(label)) return *this;
  auto more = labels_;
  more.push_back(label);
  return CandidateLabelSet(std::move(more));
}

void AmbiguousDataset::validate() const {
  if (num_classes < 1) throw InvalidInput("dataset needs at least one class");
  if (static_cast<Index>(candidates.size()) != features.cols())
    throw InvalidInput("candidate count " + std::to_string(candidates.size()) +
                       " does not match instance count " + std::to_string(features.cols()));
  if (!features.allFinite()) throw InvalidInput("feature matrix has non-finite entries");
  check_candidates(candidates, num_classes);
  if (ground_truth) {
    if (ground_truth->size() != candidates.size())
      throw InvalidInput("ground truth length does not match instance count");
    for (std::size_t j = 0; j < candidates.size(); ++j)
      if (!candidates[j].contains((*ground_truth)[j]))
        throw InvalidInput("ground truth of instance " + std::to_string(j) +
                           " is not among its candidates");
  }
}

WeightMatrix::WeightMatrix(Vector diag) : diag_(std::move(diag)) {
  if (!diag_.allFinite() || (diag_.size() > 0 && diag_.minCoeff() <= 0.0))
    throw InvalidInput("weights must be finite and strictly positive");
}

Matrix WeightMatrix::apply(const Matrix& a) const { return a * diag_.asDiagonal(); }

Matrix WeightMatrix::apply_inverse(const Matrix& a) const {
  return a * diag_.cwiseInverse().asDiagonal();
}

SoftLabelMatrix init_soft_labels(std::span<const CandidateLabelSet> candidates, int num_classes) {
  if (num_classes < 1) throw InvalidInput("number of classes must be positive");
  check_candidates(candidates, num_classes);
  SoftLabelMatrix p = SoftLabelMatrix::Zero(num_classes, static_cast<Index>(candidates.size()));
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    const double share = 1.0 / static_cast<double>(candidates[j].size());
    for (ClassIndex i : candidates[j]) p(i, static_cast<Index>(j)) = share;
  }
  return p;
}

std::vector<ClassIndex> predict_labels(const SoftLabelMatrix& y,
                                       std::span<const CandidateLabelSet> candidates) {
  if (static_cast<Index>(candidates.size()) != y.cols())
    throw InvalidInput("label matrix has " + std::to_string(y.cols()) + " columns, expected " +
                       std::to_string(candidates.size()));
  std::vector<ClassIndex> out(candidates.size());
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    const Index col = static_cast<Index>(j);
    ClassIndex best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (ClassIndex i : candidates[j]) {
      if (i >= y.rows()) throw InvalidInput("candidate label exceeds label matrix rows");
      if (y(i, col) > best_score) {
        best = i;
        best_score = y(i, col);
      }
    }
    out[j] = best;
  }
  return out;
}

Vector estimated_class_counts(const SoftLabelMatrix& p) { return p.rowwise().sum(); }

WeightMatrix weight_matrix(const SoftLabelMatrix& p) {
  const Vector counts = estimated_class_counts(p);
  Vector w(p.cols());
  for (Index j = 0; j < p.cols(); ++j) {
    const double denom = std::max(p.col(j).dot(counts), kWeightFloor);
    w[j] = 1.0 / std::sqrt(denom);
  }
  return WeightMatrix(std::move(w));
}

Vector project_column_to_candidate_simplex(const Vector& v, const CandidateLabelSet& mask,
                                           double target_sum) {
  if (mask.empty()) throw InvalidInput("projection mask must not be empty");
  if (!(target_sum > 0.0)) throw InvalidInput("projection target sum must be positive");
  if (mask.max() >= v.size()) throw InvalidInput("projection mask exceeds vector length");
  Vector out = Vector::Zero(v.size());
  double mass = 0.0;
  for (ClassIndex i : mask) {
    out[i] = std::max(v[i], 0.0);
    mass += out[i];
  }
  if (mass > 0.0 && std::isfinite(mass)) {
    // Divide first so a singleton mask lands on target_sum exactly.
    out = out / mass * target_sum;
  } else {
    const double share = target_sum / static_cast<double>(mask.size());
    out.setZero();
    for (ClassIndex i : mask) out[i] = share;
  }
  return out;
}

SoftLabelMatrix project_to_candidate_simplex(const Matrix& y,
                                             std::span<const CandidateLabelSet> candidates,
                                             const Vector& targets) {
  if (static_cast<Index>(candidates.size()) != y.cols())
    throw InvalidInput("candidate count does not match label matrix columns");
  SoftLabelMatrix out(y.rows(), y.cols());
  for (Index j = 0; j < y.cols(); ++j) {
    const double target = targets.size() ? targets[j] : 1.0;
    out.col(j) = project_column_to_candidate_simplex(y.col(j), candidates[static_cast<std::size_t>(j)],
                                                     target);
  }
  return out;
}

double labeling_error_rate(std::span<const ClassIndex> predicted, std::span<const ClassIndex> truth) {
  if (predicted.size() != truth.size())
    throw InvalidInput("prediction and truth lengths differ");
  if (predicted.empty()) throw InvalidInput("cannot score an empty labeling");
  std::size_t wrong = 0;
  for (std::size_t j = 0; j < predicted.size(); ++j) wrong += predicted[j] != truth[j];
  return static_cast<double>(wrong) / static_cast<double>(predicted.size());
}

std::vector<std::size_t> label_occurrences(std::span<const CandidateLabelSet> candidates,
                                           int num_classes) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (const auto& set : candidates)
    for (ClassIndex i : set) {
      if (i >= num_classes) throw InvalidInput("candidate label out of range");
      ++counts[static_cast<std::size_t>(i)];
    }
  return counts;
}

double imbalance_factor(std::span<const CandidateLabelSet> candidates, int num_classes) {
  const auto counts = label_occurrences(candidates, num_classes);
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  if (lo == counts.end() || *lo == 0) return kInfiniteImbalance;
  return static_cast<double>(*hi) / static_cast<double>(*lo);
}

bool is_valid_soft_labels(const SoftLabelMatrix& y, std::span<const CandidateLabelSet> candidates,
                          double tol, const Vector& targets,
                          std::optional<ClassIndex> unmasked_class) {
  if (static_cast<Index>(candidates.size()) != y.cols() || !y.allFinite()) return false;
  for (Index j = 0; j < y.cols(); ++j) {
    const auto& set = candidates[static_cast<std::size_t>(j)];
    for (Index i = 0; i < y.rows(); ++i) {
      if (y(i, j) < 0.0) return false;
      const bool allowed = set.contains(static_cast<ClassIndex>(i)) ||
                           (unmasked_class && *unmasked_class == i);
      if (!allowed && y(i, j) != 0.0) return false;
    }
    const double target = targets.size() ? targets[j] : 1.0;
    if (std::abs(y.col(j).sum() - target) > tol * std::max(1.0, target)) return false;
  }
  return true;
}

}  // namespace mcar
