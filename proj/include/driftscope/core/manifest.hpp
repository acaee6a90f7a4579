#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "driftscope/core/types.hpp"

namespace driftscope {

/// Dataset manifest: the schema plus the CSV files holding its records.
///
/// ```json
/// {
///   "attributes": ["pm25", "temp"],
///   "label": "label",
///   "sources": [{"id": "s1", "name": "Guanyuan"}],
///   "unit": "1d",
///   "span": {"start": "2015-01-01", "end": "2015-06-01"},
///   "label_predicate": {"column": "label", "op": ">", "threshold": 100},
///   "files": ["air.csv"],
///   "windows": {"s1": 100}
/// }
/// ```
/// `unit` accepts integer seconds or a `<n>{s,m,h,d}` string. Relative file
/// paths resolve against the manifest's directory.
struct DatasetManifest {
  DatasetSchema schema;
  std::vector<std::filesystem::path> files;
  std::map<SourceId, std::size_t> windows;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(const nlohmann::json& doc, const std::filesystem::path& base_dir);
nlohmann::json manifest_to_json(const DatasetManifest& manifest);

/// Parses `3600`, `"90s"`, `"15m"`, `"1h"`, `"1d"`.
EpochSeconds parse_duration(const nlohmann::json& value);

void to_json(nlohmann::json& j, const DatasetSchema& schema);
void from_json(const nlohmann::json& j, DatasetSchema& schema);
void to_json(nlohmann::json& j, const NormalizationStats& stats);
void from_json(const nlohmann::json& j, NormalizationStats& stats);

}  // namespace driftscope
