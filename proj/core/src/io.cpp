#include "mcar/io.hpp"

#include "mcar/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace mcar::io {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Lines of the file with trailing blank lines dropped.
std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view cell, const fs::path& path, std::size_t line) {
  double value = 0.0;
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (cell.empty() || ec != std::errc() || ptr != end)
    throw ParseError(path.string(), line, "non-numeric cell '" + std::string(cell) + "'");
  return value;
}

long parse_index(std::string_view cell, const fs::path& path, std::size_t line) {
  long value = 0;
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (cell.empty() || ec != std::errc() || ptr != end)
    throw ParseError(path.string(), line, "expected an integer index, got '" + std::string(cell) + "'");
  if (value < 1) throw ParseError(path.string(), line, "indices are 1-based, got " + std::to_string(value));
  return value;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

template <typename Range>
std::string join_one_based(const Range& values) {
  std::string out;
  bool first = true;
  for (auto v : values) {
    if (!first) out += ',';
    out += std::to_string(v + 1);
    first = false;
  }
  return out;
}

}  // namespace

Matrix read_features_csv(const fs::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ParseError(path.string(), 0, "no feature rows");
  std::vector<std::vector<double>> rows;
  rows.reserve(lines.size());
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const auto cells = split(lines[k]);
    std::vector<double> row;
    row.reserve(cells.size());
    for (auto cell : cells) row.push_back(parse_double(cell, path, k + 1));
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(path.string(), k + 1,
                       "expected " + std::to_string(rows.front().size()) + " columns, got " +
                           std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  const auto m = static_cast<Index>(rows.front().size());
  Matrix x(m, static_cast<Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (Index r = 0; r < m; ++r) x(r, static_cast<Index>(j)) = rows[j][static_cast<std::size_t>(r)];
  if (!x.allFinite()) throw ParseError(path.string(), 0, "features contain non-finite values");
  return x;
}

CandidateSets read_candidates(const fs::path& path) {
  const auto lines = read_lines(path);
  CandidateSets out;
  out.reserve(lines.size());
  for (std::size_t k = 0; k < lines.size(); ++k) {
    if (trim(lines[k]).empty()) throw ParseError(path.string(), k + 1, "empty candidate set");
    std::vector<ClassIndex> labels;
    for (auto cell : split(lines[k])) labels.push_back(static_cast<ClassIndex>(parse_index(cell, path, k + 1) - 1));
    try {
      out.emplace_back(std::move(labels));
    } catch (const InvalidInput& err) {
      throw ParseError(path.string(), k + 1, err.what());
    }
  }
  return out;
}

std::vector<std::vector<Index>> read_groups(const fs::path& path, Index num_instances) {
  const auto lines = read_lines(path);
  std::vector<std::vector<Index>> groups;
  std::vector<std::size_t> seen_on(static_cast<std::size_t>(num_instances), 0);
  for (std::size_t k = 0; k < lines.size(); ++k) {
    if (trim(lines[k]).empty()) throw ParseError(path.string(), k + 1, "empty group");
    std::vector<Index> members;
    for (auto cell : split(lines[k])) {
      const long idx = parse_index(cell, path, k + 1);
      if (idx > num_instances)
        throw ParseError(path.string(), k + 1,
                         "instance " + std::to_string(idx) + " exceeds instance count " +
                             std::to_string(num_instances));
      auto& seen = seen_on[static_cast<std::size_t>(idx - 1)];
      if (seen)
        throw ParseError(path.string(), k + 1,
                         "instance " + std::to_string(idx) + " already belongs to the group on line " +
                             std::to_string(seen));
      seen = k + 1;
      members.push_back(idx - 1);
    }
    groups.push_back(std::move(members));
  }
  return groups;
}

std::vector<ClassIndex> read_labels(const fs::path& path) {
  const auto lines = read_lines(path);
  std::vector<ClassIndex> out;
  const bool predictions = !lines.empty() && trim(lines.front()).starts_with("instance");
  for (std::size_t k = predictions ? 1 : 0; k < lines.size(); ++k) {
    const auto cells = split(lines[k]);
    if (predictions) {
      if (cells.size() < 2) throw ParseError(path.string(), k + 1, "prediction row needs instance and label");
      const long instance = parse_index(cells[0], path, k + 1);
      if (instance != static_cast<long>(out.size()) + 1)
        throw ParseError(path.string(), k + 1, "prediction rows must be in instance order");
      out.push_back(static_cast<ClassIndex>(parse_index(cells[1], path, k + 1) - 1));
    } else {
      if (cells.size() != 1) throw ParseError(path.string(), k + 1, "expected exactly one label per line");
      out.push_back(static_cast<ClassIndex>(parse_index(cells[0], path, k + 1) - 1));
    }
  }
  return out;
}

void normalize_unit_range(Matrix& features) {
  if (features.size() == 0) return;
  const double lo = features.minCoeff();
  const double span = features.maxCoeff() - lo;
  if (span > 0.0)
    features = (features.array() - lo) / span;
  else
    features.setZero();
}

LoadedData load_dataset(const DatasetPaths& paths, const LoadOptions& options) {
  LoadedData out;
  auto& ds = out.dataset;
  ds.features = read_features_csv(paths.features);
  ds.candidates = read_candidates(paths.candidates);
  if (static_cast<Index>(ds.candidates.size()) != ds.features.cols())
    throw ParseError(paths.candidates.string(), 0,
                     std::to_string(ds.candidates.size()) + " candidate lines for " +
                         std::to_string(ds.features.cols()) + " feature rows");
  if (options.normalize) normalize_unit_range(ds.features);

  int max_label = 0;
  for (const auto& set : ds.candidates) max_label = std::max(max_label, set.max() + 1);
  if (paths.truth) {
    out.truth = read_labels(*paths.truth);
    if (out.truth->size() != ds.candidates.size())
      throw ParseError(paths.truth->string(), 0,
                       std::to_string(out.truth->size()) + " labels for " +
                           std::to_string(ds.candidates.size()) + " instances");
    for (ClassIndex l : *out.truth) max_label = std::max(max_label, l + 1);
  }
  ds.num_classes = options.num_classes.value_or(max_label);
  for (std::size_t j = 0; j < ds.candidates.size(); ++j)
    if (ds.candidates[j].max() >= ds.num_classes)
      throw ParseError(paths.candidates.string(), j + 1,
                       "label " + std::to_string(ds.candidates[j].max() + 1) + " exceeds class count " +
                           std::to_string(ds.num_classes));

  if (out.truth) {
    bool consistent = true;
    for (std::size_t j = 0; j < out.truth->size(); ++j) {
      const ClassIndex l = (*out.truth)[j];
      if (l >= ds.num_classes)
        throw ParseError(paths.truth->string(), j + 1, "label exceeds class count");
      if (!ds.candidates[j].contains(l)) {
        consistent = false;
        out.warnings.push_back(paths.truth->string() + ":" + std::to_string(j + 1) + ": true label " +
                               std::to_string(l + 1) + " is not among the candidates");
      }
    }
    if (consistent) ds.ground_truth = out.truth;
  }

  if (paths.groups)
    out.groups = group::GroupStructure(read_groups(*paths.groups, ds.features.cols()), ds.features.cols());
  ds.validate();
  return out;
}

void write_text(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << contents;
  if (!out) throw Error("failed writing " + path.string());
}

void write_features_csv(const fs::path& path, const Matrix& features) {
  std::string text;
  for (Index j = 0; j < features.cols(); ++j) {
    for (Index r = 0; r < features.rows(); ++r) {
      if (r) text += ',';
      text += format_double(features(r, j));
    }
    text += '\n';
  }
  write_text(path, text);
}

void write_candidates(const fs::path& path, std::span<const CandidateLabelSet> candidates) {
  std::string text;
  for (const auto& set : candidates) text += join_one_based(set.labels()) + '\n';
  write_text(path, text);
}

void write_groups(const fs::path& path, const group::GroupStructure& groups) {
  std::string text;
  for (const auto& members : groups) text += join_one_based(members) + '\n';
  write_text(path, text);
}

void write_labels(const fs::path& path, std::span<const ClassIndex> labels) {
  std::string text;
  for (ClassIndex l : labels) text += std::to_string(l + 1) + '\n';
  write_text(path, text);
}

void write_predictions(const fs::path& path, std::span<const ClassIndex> labels,
                       const SoftLabelMatrix& scores) {
  if (scores.cols() != static_cast<Index>(labels.size()))
    throw InvalidInput("score matrix does not match the number of predictions");
  std::string text = "instance,label";
  for (Index i = 0; i < scores.rows(); ++i) text += ",score_" + std::to_string(i + 1);
  text += '\n';
  for (std::size_t j = 0; j < labels.size(); ++j) {
    text += std::to_string(j + 1) + ',' + std::to_string(labels[j] + 1);
    for (Index i = 0; i < scores.rows(); ++i) text += ',' + format_double(scores(i, static_cast<Index>(j)));
    text += '\n';
  }
  write_text(path, text);
}

}  // namespace mcar::io
