#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace driftscope {

using SourceId = std::string;
using EpochSeconds = std::int64_t;
using SegmentIndex = std::int64_t;

/// One timestamped observation from a single source.
struct DataRecord {
  SourceId source_id;
  EpochSeconds timestamp = 0;
  std::vector<double> x;
  int y = 0;

  bool operator==(const DataRecord&) const = default;
};

/// All records of one source that fall into one unit time segment.
struct Batch {
  SourceId source_id;
  SegmentIndex segment_index = 0;
  std::vector<DataRecord> records;
  double drift_level = 0.0;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
};

struct SourceInfo {
  SourceId id;
  std::string name;

  bool operator==(const SourceInfo&) const = default;
};

enum class CompareOp { kGreater, kGreaterEqual, kLess, kLessEqual };

/// Maps a raw numeric column to the binary label, e.g. `aqi > 100`.
struct LabelPredicate {
  std::string column;
  CompareOp op = CompareOp::kGreater;
  double threshold = 0.0;

  bool apply(double value) const noexcept;
  bool operator==(const LabelPredicate&) const = default;
};

struct DatasetSchema {
  std::vector<std::string> attribute_names;
  std::string label_name = "label";
  std::vector<SourceInfo> sources;
  EpochSeconds unit = 86400;
  EpochSeconds span_start = 0;
  EpochSeconds span_end = 0;  // exclusive
  std::optional<LabelPredicate> label_predicate;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

  std::size_t attribute_count() const noexcept { return attribute_names.size(); }
  SegmentIndex segment_count() const noexcept;
  EpochSeconds segment_start(SegmentIndex index) const noexcept { return span_start + index * unit; }
  /// Segment containing `t`; not clamped to the span.
  SegmentIndex segment_of(EpochSeconds t) const noexcept;
  std::optional<std::size_t> source_index(const SourceId& id) const noexcept;
  std::optional<std::size_t> attribute_index(const std::string& name) const noexcept;

  bool operator==(const DatasetSchema&) const = default;
};

/// Streaming min/max/mean/variance of one attribute (Welford).
struct RunningStats {
  std::size_t count = 0;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void observe(double v) noexcept;
  double variance() const noexcept { return count > 1 ? m2 / static_cast<double>(count) : 0.0; }
};

struct NormalizationStats {
  std::vector<RunningStats> attributes;

  NormalizationStats() = default;
  explicit NormalizationStats(std::size_t dims) : attributes(dims) {}

  void observe(const std::vector<double>& x);
};

}  // namespace driftscope
