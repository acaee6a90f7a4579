#pragma once

#include <span>
#include <vector>

#include "driftscope/core/types.hpp"

namespace driftscope {

struct SourceBatches {
  SourceId source_id;
  std::vector<Batch> batches;  // one per grid segment, index == segment_index
};

/// Groups records onto the schema's unit grid. Every schema source gets the
/// full grid, with size-0 placeholders for empty segments, in schema order.
/// Throws TimestampOutOfSpan for records outside [span_start, span_end).
std::vector<SourceBatches> batchify(std::span<const DataRecord> records, const DatasetSchema& schema);

/// Component-wise min-max scaling into [0,1]; constant attributes map to 0.5.
std::vector<double> normalize(std::span<const double> x, const NormalizationStats& stats);

/// Inverse of `normalize` for u in [0,1].
std::vector<double> denormalize(std::span<const double> u, const NormalizationStats& stats);

}  // namespace driftscope
