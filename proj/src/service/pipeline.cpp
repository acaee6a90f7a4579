#include "driftscope/service/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "driftscope/errors.hpp"

namespace driftscope {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// Runs `fn` and rethrows failures as StageError.
template <typename Fn>
auto in_stage(const std::string& stage, const std::string& source, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, source, e.what(), e.code());
  } catch (const std::exception& e) {
    throw StageError(stage, source, e.what());
  }
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  c.window = j.at("window").get<std::size_t>();
  c.windows = j.at("windows").get<std::map<SourceId, std::size_t>>();
  c.warning_level = j.at("warning_level").get<double>();
  c.confirm_level = j.at("confirm_level").get<double>();
  c.delta_t = j.at("delta_t").get<int>();
  c.c = j.at("c").get<double>();
  c.capacity = j.at("capacity").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.bins = j.at("bins").get<std::size_t>();
  c.attribute_cap = j.at("attribute_cap").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("unit")) c.unit = j.at("unit").get<EpochSeconds>();
  return c;
}

nlohmann::json segments_json(const std::vector<SegmentInterval>& segments) {
  auto out = nlohmann::json::array();
  for (const auto& s : segments) out.push_back({s.start, s.end});
  return out;
}

nlohmann::json verdicts_json(const std::vector<DriftVerdict>& verdicts) {
  auto out = nlohmann::json::array();
  for (const auto& v : verdicts) out.push_back({{"segment", v.segment}, {"consistent", v.consistent}});
  return out;
}

}  // namespace

void to_json(nlohmann::json& j, const DriftEvent& e) {
  j = {{"source", e.source_id}, {"segment", e.segment},          {"record_index", e.record_index},
       {"timestamp", e.timestamp}, {"kind", to_string(e.kind)}, {"level", e.level}};
}

void from_json(const nlohmann::json& j, DriftEvent& e) {
  e.source_id = j.at("source").get<SourceId>();
  e.segment = j.at("segment").get<SegmentIndex>();
  e.record_index = j.at("record_index").get<std::size_t>();
  e.timestamp = j.at("timestamp").get<EpochSeconds>();
  e.kind = drift_kind_from_string(j.at("kind").get<std::string>());
  e.level = j.at("level").get<double>();
}

std::vector<SegmentIndex> SourceAnalysis::confirmation_segments() const {
  std::set<SegmentIndex> segments;
  for (const auto& e : events) {
    if (e.kind == DriftKind::kConfirmed) segments.insert(e.segment);
  }
  return {segments.begin(), segments.end()};
}

const SourceAnalysis* AnalysisBundle::find_source(const SourceId& id) const {
  for (const auto& s : sources) {
    if (s.source_id == id) return &s;
  }
  return nullptr;
}

std::vector<SourceBatches> AnalysisBundle::source_batches() const {
  std::vector<SourceBatches> out;
  out.reserve(sources.size());
  for (const auto& s : sources) out.push_back({s.source_id, s.batches});
  return out;
}

const ConsistencyAtThreshold* AnalysisBundle::consistency_at(double c) const {
  for (const auto& entry : consistency) {
    if (std::abs(entry.c - c) <= 1e-9) return &entry;
  }
  return nullptr;
}

std::vector<double> consistency_grid(double c) {
  std::vector<double> grid;
  for (int k = 10; k <= 19; ++k) grid.push_back(k / 20.0);
  const bool on_grid = std::any_of(grid.begin(), grid.end(), [&](double g) { return std::abs(g - c) <= 1e-9; });
  if (!on_grid) {
    grid.push_back(c);
    std::sort(grid.begin(), grid.end());
  }
  return grid;
}

SourceAnalysis analyze_source(const SourceId& source, const std::vector<Batch>& batches, std::size_t dims,
                              const PipelineConfig& config, std::size_t window) {
  const DetectorConfig detector_config{window, config.warning_level, config.confirm_level};
  detector_config.validate();
  const EnsembleConfig ensemble_config{config.capacity, config.learning_rate};

  SourceAnalysis out;
  out.source_id = source;
  out.window = window;
  out.batches = batches;
  out.normalization = NormalizationStats(dims);

  EnsembleState ensemble = EnsembleState::initial(source, dims, batches.empty() ? 0 : batches.front().segment_index);
  DetectorState detector;
  std::size_t stream_position = 0;
  bool in_warning = false;

  for (auto& batch : out.batches) {
    Batch normalized;
    normalized.source_id = batch.source_id;
    normalized.segment_index = batch.segment_index;
    normalized.records.reserve(batch.size());
    for (const auto& record : batch.records) {
      out.normalization.observe(record.x);
      normalized.records.push_back({record.source_id, record.timestamp, normalize(record.x, out.normalization), record.y});
    }

    auto observer = [&](std::size_t i, bool correct) {
      const auto obs = observe(detector, detector_config, correct);
      const auto& record = batch.records[i];
      const double level = std::min(obs.level, kMaxReportedLevel);
      if (obs.status == DriftStatus::kConfirmed) {
        out.events.push_back(
            {source, batch.segment_index, stream_position + i, record.timestamp, DriftKind::kConfirmed, level});
        in_warning = false;
        return true;
      }
      if (obs.status == DriftStatus::kWarning) {
        if (!in_warning) {
          out.events.push_back(
              {source, batch.segment_index, stream_position + i, record.timestamp, DriftKind::kWarning, level});
        }
        in_warning = true;
      } else {
        in_warning = false;
      }
      return false;
    };

    auto step = ensemble_step(std::move(ensemble), normalized, ensemble_config, observer);
    ensemble = std::move(step.state);
    stream_position += batch.size();

    batch.drift_level = take_segment_level(detector);
    out.accuracy.push_back(batch.empty() ? std::nullopt : std::optional<double>(step.accuracy()));
    out.snapshots.push_back(std::move(step.snapshot));
  }
  return out;
}

LoadedData load_data(const std::filesystem::path& manifest_path, std::optional<EpochSeconds> unit_override) {
  LoadedData data;
  data.manifest = in_stage("manifest", "", [&] { return load_manifest(manifest_path); });
  if (unit_override) {
    data.manifest.schema.unit = *unit_override;
    data.manifest.schema.validate();
  }
  const auto& schema = data.manifest.schema;

  in_stage("ingest", "", [&] {
    if (data.manifest.files.empty()) throw IngestError("manifest " + manifest_path.string() + " lists no data files");
    for (const auto& file : data.manifest.files) {
      std::ifstream in(file);
      if (!in) throw IngestError("cannot read data file " + file.string());
      auto result = ingest_csv(in, schema, file.string());
      data.records.insert(data.records.end(), std::make_move_iterator(result.records.begin()),
                          std::make_move_iterator(result.records.end()));
      data.rejects.insert(data.rejects.end(), result.rejects.begin(), result.rejects.end());
    }
    std::stable_sort(data.records.begin(), data.records.end(), [](const DataRecord& a, const DataRecord& b) {
      if (a.source_id != b.source_id) return a.source_id < b.source_id;
      return a.timestamp < b.timestamp;
    });
    return 0;
  });

  data.batches = in_stage("batchify", "", [&] { return batchify(data.records, schema); });
  return data;
}

AnalysisBundle run_pipeline(const PipelineConfig& config) {
  in_stage("config", "", [&] {
    config.validate();
    return 0;
  });

  AnalysisBundle bundle;
  bundle.config = config;
  bundle.manifest_path = std::filesystem::absolute(config.manifest).lexically_normal();

  auto started = Clock::now();
  LoadedData data = load_data(bundle.manifest_path, config.unit);
  bundle.timings.push_back({"ingest", elapsed_ms(started)});
  bundle.schema = data.manifest.schema;
  bundle.rejects = std::move(data.rejects);
  for (const auto& [source, n] : data.manifest.windows) {
    if (!bundle.config.windows.contains(source)) bundle.config.windows[source] = n;
  }

  const std::size_t dims = bundle.schema.attribute_count();
  started = Clock::now();
  {
    std::vector<std::future<SourceAnalysis>> jobs;
    for (const auto& sb : data.batches) {
      const auto it = bundle.config.windows.find(sb.source_id);
      const std::size_t window = it != bundle.config.windows.end() ? it->second : config.window;
      auto job = [&bundle, &sb, dims, window] {
        return in_stage("learn", sb.source_id,
                        [&] { return analyze_source(sb.source_id, sb.batches, dims, bundle.config, window); });
      };
      jobs.push_back(std::async(config.parallel ? std::launch::async : std::launch::deferred, job));
    }
    for (auto& job : jobs) bundle.sources.push_back(job.get());
  }
  bundle.timings.push_back({"learn+detect", elapsed_ms(started)});

  for (const auto& s : bundle.sources) {
    bundle.grid.sources.push_back(s.source_id);
    std::vector<double> row;
    for (const auto& b : s.batches) row.push_back(b.drift_level);
    bundle.grid.levels.push_back(std::move(row));
  }

  started = Clock::now();
  bundle.c_grid = consistency_grid(config.c);
  if (bundle.sources.size() >= 2 && bundle.grid.segment_count() > 0) {
    in_stage("consistency", "", [&] {
      const auto model = fit_consistency(bundle.grid, config.delta_t, config.confirm_level);
      std::vector<std::vector<SegmentIndex>> drifts;
      for (const auto& s : bundle.sources) drifts.push_back(s.confirmation_segments());
      for (double c : bundle.c_grid) {
        bundle.consistency.push_back({c, evaluate_consistency(model, drifts, c, config.delta_t)});
      }
      return 0;
    });
  }
  bundle.timings.push_back({"consistency", elapsed_ms(started)});

  started = Clock::now();
  in_stage("projection", "", [&] {
    std::vector<ParameterSnapshot> all;
    for (const auto& s : bundle.sources) all.insert(all.end(), s.snapshots.begin(), s.snapshots.end());
    bundle.basis = fit_basis(all);
    for (const auto& s : bundle.sources) {
      std::vector<TrajectoryPoint> points;
      for (const auto& snap : s.snapshots) points.push_back(project(bundle.basis, snap));
      bundle.trajectories.push_back(std::move(points));
    }
    return 0;
  });
  bundle.timings.push_back({"projection", elapsed_ms(started)});

  std::size_t records = 0;
  for (const auto& s : bundle.sources) {
    for (const auto& b : s.batches) records += b.size();
  }
  for (const auto& t : bundle.timings) {
    spdlog::info("stage {:<13} {:>10.1f} ms ({:.4f} ms/record)", t.stage, t.milliseconds,
                 records ? t.milliseconds / static_cast<double>(records) : 0.0);
  }
  if (!bundle.rejects.empty()) spdlog::warn("{} rows rejected during ingest", bundle.rejects.size());

  if (!config.output.empty()) {
    in_stage("persist", "", [&] {
      save_bundle(bundle, config.output);
      return 0;
    });
  }
  return bundle;
}

nlohmann::json bundle_to_json(const AnalysisBundle& bundle) {
  nlohmann::json j;
  j["format"] = "driftscope-bundle/1";
  j["manifest"] = bundle.manifest_path.string();
  j["schema"] = bundle.schema;
  j["config"] = bundle.config;

  auto rejects = nlohmann::json::array();
  for (const auto& r : bundle.rejects) rejects.push_back({{"file", r.file}, {"row", r.row}, {"reason", r.reason}});
  j["rejects"] = std::move(rejects);

  auto sources = nlohmann::json::array();
  for (const auto& s : bundle.sources) {
    auto batches = nlohmann::json::array();
    for (std::size_t t = 0; t < s.batches.size(); ++t) {
      batches.push_back({{"segment", s.batches[t].segment_index},
                         {"size", s.batches[t].size()},
                         {"drift_level", s.batches[t].drift_level},
                         {"accuracy", optional_json(s.accuracy[t])}});
    }
    auto snapshots = nlohmann::json::array();
    for (const auto& snap : s.snapshots) snapshots.push_back(snap.params);
    sources.push_back({{"source", s.source_id},
                       {"window", s.window},
                       {"normalization", s.normalization},
                       {"batches", std::move(batches)},
                       {"events", s.events},
                       {"snapshots", std::move(snapshots)}});
  }
  j["sources"] = std::move(sources);

  nlohmann::json consistency = {{"c_grid", bundle.c_grid}};
  auto curves = nlohmann::json::array();
  auto thresholds = nlohmann::json::array();
  if (!bundle.consistency.empty()) {
    for (const auto& r : bundle.consistency.front().results) curves.push_back({{"source", r.source_id}, {"curve", r.curve}});
    for (const auto& entry : bundle.consistency) {
      auto per_source = nlohmann::json::array();
      for (const auto& r : entry.results) {
        per_source.push_back(
            {{"source", r.source_id}, {"segments", segments_json(r.segments)}, {"verdicts", verdicts_json(r.verdicts)}});
      }
      thresholds.push_back({{"c", entry.c}, {"sources", std::move(per_source)}});
    }
  }
  consistency["curves"] = std::move(curves);
  consistency["thresholds"] = std::move(thresholds);
  j["consistency"] = std::move(consistency);

  j["projection"] = {{"basis",
                      {{"mean", bundle.basis.mean},
                       {"components", bundle.basis.components},
                       {"singular_values", bundle.basis.singular_values}}},
                     {"trajectories", trajectories_json(bundle)}};
  return j;
}

std::string serialize_bundle(const AnalysisBundle& bundle) { return bundle_to_json(bundle).dump(1) + "\n"; }

void save_bundle(const AnalysisBundle& bundle, const std::filesystem::path& path) {
  const std::string text = serialize_bundle(bundle);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageFailure("cannot write bundle " + tmp.string());
    out << text;
    if (!out) throw StorageFailure("cannot write bundle " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw StorageFailure("cannot move bundle into place at " + path.string() + ": " + ec.message());
}

AnalysisBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw StorageFailure("cannot read bundle " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw StorageFailure("bundle " + path.string() + " is not valid JSON: " + e.what());
  }

  AnalysisBundle bundle;
  try {
    bundle.manifest_path = j.at("manifest").get<std::string>();
    bundle.schema = j.at("schema").get<DatasetSchema>();
    bundle.config = config_from_json(j.at("config"));
    bundle.config.manifest = bundle.manifest_path;
    for (const auto& r : j.at("rejects")) {
      bundle.rejects.push_back({r.at("file").get<std::string>(), r.at("row").get<std::size_t>(),
                                r.at("reason").get<std::string>()});
    }

    LoadedData data = load_data(bundle.manifest_path, bundle.config.unit);
    if (!(data.manifest.schema == bundle.schema)) {
      throw SchemaMismatch("bundle schema differs from manifest " + bundle.manifest_path.string());
    }

    const auto& sources = j.at("sources");
    if (sources.size() != data.batches.size()) throw SchemaMismatch("bundle and data disagree on the source set");
    for (std::size_t i = 0; i < sources.size(); ++i) {
      const auto& js = sources[i];
      SourceAnalysis s;
      s.source_id = js.at("source").get<SourceId>();
      s.window = js.at("window").get<std::size_t>();
      s.normalization = js.at("normalization").get<NormalizationStats>();
      if (data.batches[i].source_id != s.source_id) throw SchemaMismatch("bundle source order differs from data");
      s.batches = std::move(data.batches[i].batches);
      const auto& jb = js.at("batches");
      if (jb.size() != s.batches.size()) throw SchemaMismatch("bundle grid differs from data for " + s.source_id);
      for (std::size_t t = 0; t < jb.size(); ++t) {
        if (jb[t].at("size").get<std::size_t>() != s.batches[t].size()) {
          throw SchemaMismatch("batch sizes of " + s.source_id + " differ from the data on disk");
        }
        s.batches[t].drift_level = jb[t].at("drift_level").get<double>();
        const auto& acc = jb[t].at("accuracy");
        s.accuracy.push_back(acc.is_null() ? std::nullopt : std::optional<double>(acc.get<double>()));
      }
      s.events = js.at("events").get<std::vector<DriftEvent>>();
      const auto& snaps = js.at("snapshots");
      for (std::size_t t = 0; t < snaps.size(); ++t) {
        s.snapshots.push_back({s.source_id, s.batches.at(t).segment_index, snaps[t].get<std::vector<double>>()});
      }
      bundle.grid.sources.push_back(s.source_id);
      std::vector<double> row;
      for (const auto& b : s.batches) row.push_back(b.drift_level);
      bundle.grid.levels.push_back(std::move(row));
      bundle.sources.push_back(std::move(s));
    }

    const auto& jc = j.at("consistency");
    bundle.c_grid = jc.at("c_grid").get<std::vector<double>>();
    std::map<SourceId, std::vector<double>> curves;
    for (const auto& c : jc.at("curves")) curves[c.at("source").get<SourceId>()] = c.at("curve").get<std::vector<double>>();
    for (const auto& entry : jc.at("thresholds")) {
      ConsistencyAtThreshold at{entry.at("c").get<double>(), {}};
      for (const auto& r : entry.at("sources")) {
        ConsistencyResult result;
        result.source_id = r.at("source").get<SourceId>();
        result.curve = curves.at(result.source_id);
        for (const auto& seg : r.at("segments")) result.segments.push_back({seg.at(0).get<SegmentIndex>(), seg.at(1).get<SegmentIndex>()});
        for (const auto& v : r.at("verdicts")) {
          result.verdicts.push_back({v.at("segment").get<SegmentIndex>(), v.at("consistent").get<bool>()});
        }
        at.results.push_back(std::move(result));
      }
      bundle.consistency.push_back(std::move(at));
    }

    const auto& jp = j.at("projection");
    bundle.basis.mean = jp.at("basis").at("mean").get<std::vector<double>>();
    bundle.basis.components = jp.at("basis").at("components").get<std::array<std::vector<double>, 2>>();
    bundle.basis.singular_values = jp.at("basis").at("singular_values").get<std::array<double, 2>>();
    for (const auto& s : bundle.sources) {
      std::vector<TrajectoryPoint> points;
      for (const auto& snap : s.snapshots) points.push_back(project(bundle.basis, snap));
      bundle.trajectories.push_back(std::move(points));
    }
  } catch (const nlohmann::json::exception& e) {
    throw StorageFailure("bundle " + path.string() + " is malformed: " + e.what());
  }
  return bundle;
}

std::string snapshots_jsonl(const AnalysisBundle& bundle) {
  std::string out;
  for (const auto& s : bundle.sources) {
    for (const auto& snap : s.snapshots) {
      out += nlohmann::json{{"source", snap.source_id}, {"segment", snap.segment_index}, {"params", snap.params}}.dump();
      out += '\n';
    }
  }
  return out;
}

std::string drift_events_jsonl(const AnalysisBundle& bundle) {
  std::string out;
  for (const auto& s : bundle.sources) {
    for (const auto& e : s.events) {
      out += nlohmann::json{{"source", e.source_id},
                            {"segment", e.segment},
                            {"record_index", e.record_index},
                            {"kind", to_string(e.kind)},
                            {"level", e.level}}
                 .dump();
      out += '\n';
    }
  }
  return out;
}

nlohmann::json consistency_json(const AnalysisBundle& bundle, double c) {
  if (bundle.sources.size() < 2) throw SingleSource("consistency is undefined for a single source");
  const auto* at = bundle.consistency_at(c);
  if (!at) throw InvalidArgument("c is not on the precomputed grid");
  auto sources = nlohmann::json::array();
  for (const auto& r : at->results) {
    sources.push_back({{"source", r.source_id},
                       {"curve", r.curve},
                       {"segments", segments_json(r.segments)},
                       {"verdicts", verdicts_json(r.verdicts)},
                       {"inconsistent", r.inconsistent()}});
  }
  return {{"c", at->c}, {"c_grid", bundle.c_grid}, {"delta_t", bundle.config.delta_t}, {"sources", std::move(sources)}};
}

nlohmann::json trajectories_json(const AnalysisBundle& bundle, std::optional<SegmentIndex> from,
                                 std::optional<SegmentIndex> to) {
  auto bounds_json = [](const std::optional<Bounds>& b) -> nlohmann::json {
    if (!b) return nullptr;
    return {{"min_x", b->min_x}, {"min_y", b->min_y}, {"max_x", b->max_x}, {"max_y", b->max_y}};
  };
  std::vector<TrajectoryPoint> all;
  auto sources = nlohmann::json::array();
  for (std::size_t i = 0; i < bundle.trajectories.size(); ++i) {
    auto points = nlohmann::json::array();
    for (const auto& p : bundle.trajectories[i]) {
      points.push_back({p.xy[0], p.xy[1], p.segment_index});
      all.push_back(p);
    }
    sources.push_back({{"source", bundle.sources[i].source_id}, {"points", std::move(points)}});
  }
  nlohmann::json j = {{"bounds", bounds_json(bounding_box(all))}, {"sources", std::move(sources)}};
  if (from || to) j["window_bounds"] = bounds_json(bounding_box(all, from, to));
  return j;
}

}  // namespace driftscope
