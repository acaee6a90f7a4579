#include "driftscope/core/types.hpp"

#include <algorithm>
#include <set>

#include "driftscope/errors.hpp"

namespace driftscope {

bool LabelPredicate::apply(double value) const noexcept {
  switch (op) {
    case CompareOp::kGreater: return value > threshold;
    case CompareOp::kGreaterEqual: return value >= threshold;
    case CompareOp::kLess: return value < threshold;
    case CompareOp::kLessEqual: return value <= threshold;
  }
  return false;
}

void DatasetSchema::validate() const {
  if (attribute_names.empty()) throw ConfigError("schema declares no attributes");
  std::set<std::string> seen;
  for (const auto& name : attribute_names) {
    if (name.empty()) throw ConfigError("empty attribute name");
    if (!seen.insert(name).second) throw ConfigError("duplicate attribute name: " + name);
  }
  if (sources.empty()) throw ConfigError("schema declares no sources");
  std::set<SourceId> ids;
  for (const auto& s : sources) {
    if (s.id.empty()) throw ConfigError("empty source id");
    if (!ids.insert(s.id).second) throw ConfigError("duplicate source id: " + s.id);
  }
  if (unit <= 0) throw ConfigError("unit must be positive");
  if (span_end <= span_start) throw ConfigError("time span is empty");
}

SegmentIndex DatasetSchema::segment_count() const noexcept {
  if (unit <= 0 || span_end <= span_start) return 0;
  return (span_end - span_start + unit - 1) / unit;
}

SegmentIndex DatasetSchema::segment_of(EpochSeconds t) const noexcept {
  const EpochSeconds offset = t - span_start;
  // floor division for timestamps before the span
  return offset >= 0 ? offset / unit : -((-offset + unit - 1) / unit);
}

std::optional<std::size_t> DatasetSchema::source_index(const SourceId& id) const noexcept {
  auto it = std::find_if(sources.begin(), sources.end(), [&](const SourceInfo& s) { return s.id == id; });
  if (it == sources.end()) return std::nullopt;
  return static_cast<std::size_t>(it - sources.begin());
}

std::optional<std::size_t> DatasetSchema::attribute_index(const std::string& name) const noexcept {
  auto it = std::find(attribute_names.begin(), attribute_names.end(), name);
  if (it == attribute_names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - attribute_names.begin());
}

void RunningStats::observe(double v) noexcept {
  if (count == 0) {
    min = max = v;
  } else {
    min = std::min(min, v);
    max = std::max(max, v);
  }
  ++count;
  const double delta = v - mean;
  mean += delta / static_cast<double>(count);
  m2 += delta * (v - mean);
  // rounding can push the mean a hair outside [min, max]
  mean = std::clamp(mean, min, max);
}

void NormalizationStats::observe(const std::vector<double>& x) {
  if (x.size() != attributes.size()) {
    throw DimensionMismatch("normalization stats track " + std::to_string(attributes.size()) +
                            " attributes, got " + std::to_string(x.size()));
  }
  for (std::size_t k = 0; k < x.size(); ++k) attributes[k].observe(x[k]);
}

}  // namespace driftscope
