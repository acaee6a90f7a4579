#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "driftscope/consistency/judge.hpp"
#include "driftscope/core/batching.hpp"
#include "driftscope/core/ingest.hpp"
#include "driftscope/core/manifest.hpp"
#include "driftscope/drift/detector.hpp"
#include "driftscope/learner/ensemble.hpp"
#include "driftscope/projection/pca.hpp"
#include "driftscope/service/config.hpp"

namespace driftscope {

/// Everything the learn + detect stages produce for one source.
struct SourceAnalysis {
  SourceId source_id;
  std::size_t window = 500;
  std::vector<Batch> batches;                  // raw records, drift_level filled
  std::vector<std::optional<double>> accuracy;  // output-model accuracy per segment; empty segments unset
  std::vector<DriftEvent> events;
  std::vector<ParameterSnapshot> snapshots;    // one per segment
  NormalizationStats normalization;

  std::vector<SegmentIndex> confirmation_segments() const;  // sorted, unique
};

struct ConsistencyAtThreshold {
  double c = 0.0;
  std::vector<ConsistencyResult> results;
};

struct StageTiming {
  std::string stage;
  double milliseconds = 0.0;
};

struct AnalysisBundle {
  std::filesystem::path manifest_path;
  DatasetSchema schema;
  PipelineConfig config;
  std::vector<RowError> rejects;
  std::vector<SourceAnalysis> sources;
  DriftLevelGrid grid;
  std::vector<double> c_grid;
  std::vector<ConsistencyAtThreshold> consistency;  // empty for a single source
  ProjectionBasis basis;
  std::vector<std::vector<TrajectoryPoint>> trajectories;  // per source
  std::vector<StageTiming> timings;                        // not persisted

  const SourceAnalysis* find_source(const SourceId& id) const;
  std::vector<SourceBatches> source_batches() const;
  /// Results for `c` when it lies on the grid (within 1e-9).
  const ConsistencyAtThreshold* consistency_at(double c) const;
};

/// {0.5, 0.55, ..., 0.95}, plus `c` when it is not already on it.
std::vector<double> consistency_grid(double c);

/// Learn + detect for one source's batch grid.
SourceAnalysis analyze_source(const SourceId& source, const std::vector<Batch>& batches, std::size_t dims,
                              const PipelineConfig& config, std::size_t window);

/// Runs manifest -> ingest -> batchify -> learn/detect -> judge -> project.
/// Persists the bundle to `config.output` when set (written atomically, so a
/// failed run leaves no partial bundle). Failures surface as StageError.
AnalysisBundle run_pipeline(const PipelineConfig& config);

/// Ingests and batchifies a manifest's data files.
struct LoadedData {
  DatasetManifest manifest;
  std::vector<DataRecord> records;
  std::vector<RowError> rejects;
  std::vector<SourceBatches> batches;
};
LoadedData load_data(const std::filesystem::path& manifest_path, std::optional<EpochSeconds> unit_override = std::nullopt);

nlohmann::json bundle_to_json(const AnalysisBundle& bundle);
std::string serialize_bundle(const AnalysisBundle& bundle);
void save_bundle(const AnalysisBundle& bundle, const std::filesystem::path& path);
/// Reads a bundle and re-attaches the raw records from its manifest.
AnalysisBundle load_bundle(const std::filesystem::path& path);

// Export formats.
std::string snapshots_jsonl(const AnalysisBundle& bundle);
std::string drift_events_jsonl(const AnalysisBundle& bundle);
nlohmann::json consistency_json(const AnalysisBundle& bundle, double c);
nlohmann::json trajectories_json(const AnalysisBundle& bundle, std::optional<SegmentIndex> from = std::nullopt,
                                 std::optional<SegmentIndex> to = std::nullopt);

void to_json(nlohmann::json& j, const DriftEvent& e);
void from_json(const nlohmann::json& j, DriftEvent& e);

}  // namespace driftscope
