#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>

#include "driftscope/concept/concept.hpp"
#include "driftscope/core/types.hpp"

namespace driftscope {

struct PipelineConfig {
  std::filesystem::path manifest;
  std::filesystem::path output;  // bundle file; empty = don't persist
  std::optional<EpochSeconds> unit;  // overrides the manifest's unit
  std::size_t window = 500;
  std::map<SourceId, std::size_t> windows;  // per-source overrides
  double warning_level = 2.0;
  double confirm_level = 3.0;
  int delta_t = 1;
  double c = 0.7;
  std::size_t capacity = 5;
  double learning_rate = 0.05;
  std::size_t bins = kDefaultBins;
  std::size_t attribute_cap = kDefaultAttributeCap;
  std::uint64_t seed = 0;
  bool parallel = true;

  /// Throws ConfigError.
  void validate() const;
};

/// Reads a YAML config. Keys mirror the struct fields; relative paths
/// resolve against the config file's directory.
PipelineConfig load_config(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const PipelineConfig& config);

}  // namespace driftscope
