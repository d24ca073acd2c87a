#pragma once

// File formats. External class and instance indices are 1-based; everything
// is converted to 0-based on load and back on write.
//
//   features    CSV, one row per instance, m numeric columns
//   candidates  line j: comma-separated class indices of instance j
//   groups      line k: comma-separated instance indices of group k
//   truth       one class index per line, or a predictions CSV
//   predictions CSV with header "instance,label,score_1,...,score_c"

#include "mcar/group.hpp"
#include "mcar/label_model.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mcar::io {

struct DatasetPaths {
  std::filesystem::path features;
  std::filesystem::path candidates;
  std::optional<std::filesystem::path> groups;
  std::optional<std::filesystem::path> truth;
};

struct LoadOptions {
  /// Rescale all features to [0, 1] using the global min and max.
  bool normalize = false;
  /// Number of classes; inferred from the largest label seen when unset.
  std::optional<int> num_classes;
};

struct LoadedData {
  AmbiguousDataset dataset;
  std::optional<group::GroupStructure> groups;
  /// Truth as read, even when some labels fall outside their candidate sets.
  std::optional<std::vector<ClassIndex>> truth;
  std::vector<std::string> warnings;
};

/// Throws ParseError (with the offending line) on ragged rows, non-numeric
/// cells, empty candidate lines, out-of-range indices or an instance listed
/// in two groups.
LoadedData load_dataset(const DatasetPaths& paths, const LoadOptions& options = {});

Matrix read_features_csv(const std::filesystem::path& path);
CandidateSets read_candidates(const std::filesystem::path& path);
std::vector<std::vector<Index>> read_groups(const std::filesystem::path& path, Index num_instances);
std::vector<ClassIndex> read_labels(const std::filesystem::path& path);

/// Features are written one instance per row with round-trip precision.
void write_features_csv(const std::filesystem::path& path, const Matrix& features);
void write_candidates(const std::filesystem::path& path, std::span<const CandidateLabelSet> candidates);
void write_groups(const std::filesystem::path& path, const group::GroupStructure& groups);
void write_labels(const std::filesystem::path& path, std::span<const ClassIndex> labels);
void write_predictions(const std::filesystem::path& path, std::span<const ClassIndex> labels,
                       const SoftLabelMatrix& scores);

/// Writes `contents` to `path`, creating parent directories. Throws Error
/// naming the path on failure.
void write_text(const std::filesystem::path& path, const std::string& contents);

/// In-place min/max rescale to [0, 1]; a constant matrix becomes all zeros.
void normalize_unit_range(Matrix& features);

}  // namespace mcar::io
