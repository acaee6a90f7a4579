#include "driftscope/core/batching.hpp"

#include <algorithm>

#include "driftscope/core/ingest.hpp"
#include "driftscope/errors.hpp"

namespace driftscope {

std::vector<SourceBatches> batchify(std::span<const DataRecord> records, const DatasetSchema& schema) {
  const SegmentIndex segments = schema.segment_count();
  std::vector<SourceBatches> out;
  out.reserve(schema.sources.size());
  for (const auto& source : schema.sources) {
    SourceBatches sb;
    sb.source_id = source.id;
    sb.batches.resize(static_cast<std::size_t>(segments));
    for (SegmentIndex t = 0; t < segments; ++t) {
      sb.batches[static_cast<std::size_t>(t)].source_id = source.id;
      sb.batches[static_cast<std::size_t>(t)].segment_index = t;
    }
    out.push_back(std::move(sb));
  }

  for (const auto& record : records) {
    if (record.timestamp < schema.span_start || record.timestamp >= schema.span_end) {
      throw TimestampOutOfSpan("record of source " + record.source_id + " at " +
                               format_timestamp(record.timestamp) + " lies outside the dataset span");
    }
    const auto source = schema.source_index(record.source_id);
    if (!source) throw InvalidArgument("record from undeclared source " + record.source_id);
    const auto t = static_cast<std::size_t>(schema.segment_of(record.timestamp));
    out[*source].batches[t].records.push_back(record);
  }

  for (auto& sb : out) {
    for (auto& batch : sb.batches) {
      std::stable_sort(batch.records.begin(), batch.records.end(),
                       [](const DataRecord& a, const DataRecord& b) { return a.timestamp < b.timestamp; });
    }
  }
  return out;
}

std::vector<double> normalize(std::span<const double> x, const NormalizationStats& stats) {
  if (x.size() != stats.attributes.size()) {
    throw DimensionMismatch("cannot normalize a " + std::to_string(x.size()) + "-vector with " +
                            std::to_string(stats.attributes.size()) + "-attribute stats");
  }
  std::vector<double> u(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const auto& s = stats.attributes[k];
    if (s.max == s.min) {
      u[k] = 0.5;
    } else {
      u[k] = std::clamp((x[k] - s.min) / (s.max - s.min), 0.0, 1.0);
    }
  }
  return u;
}

std::vector<double> denormalize(std::span<const double> u, const NormalizationStats& stats) {
  if (u.size() != stats.attributes.size()) {
    throw DimensionMismatch("cannot denormalize a " + std::to_string(u.size()) + "-vector with " +
                            std::to_string(stats.attributes.size()) + "-attribute stats");
  }
  std::vector<double> x(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    const auto& s = stats.attributes[k];
    x[k] = s.min + u[k] * (s.max - s.min);
  }
  return x;
}

}  // namespace driftscope
