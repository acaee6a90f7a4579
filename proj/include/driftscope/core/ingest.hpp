#pragma once

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "driftscope/core/types.hpp"

namespace driftscope {

/// A rejected CSV row. `row` is 1-based and counts data rows only.
struct RowError {
  std::string file;
  std::size_t row = 0;
  std::string reason;

  bool operator==(const RowError&) const = default;
};

struct IngestResult {
  std::vector<DataRecord> records;  // sorted by (source_id, timestamp)
  std::vector<RowError> rejects;
  std::size_t rows_read = 0;
};

/// Parses ISO-8601 (`2015-03-17`, `2015-03-17T08:00:00Z`, `2015-03-17 08:00:00+08:00`)
/// or integer epoch seconds. Fractional seconds are truncated.
std::optional<EpochSeconds> parse_timestamp(std::string_view text);

std::string format_timestamp(EpochSeconds t);

/// Splits one CSV line, honouring double-quoted fields.
std::vector<std::string> split_csv_line(std::string_view line);

/// Reads `timestamp,source,label,<attributes...>` rows. Bad rows are
/// collected into `rejects`; the whole ingest throws IngestError only when
/// more than half of the rows are rejected. Missing attribute cells take the
/// running mean of earlier rows from the same source.
IngestResult ingest_csv(std::istream& in, const DatasetSchema& schema, const std::string& file_name = {});

}  // namespace driftscope
