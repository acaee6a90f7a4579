// Command-line entry point: run the offline pipeline, serve a bundle,
// generate synthetic streams, export bundle artifacts.

#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "driftscope/errors.hpp"
#include "driftscope/service/api.hpp"
#include "driftscope/service/pipeline.hpp"
#include "driftscope/service/synth.hpp"

namespace {

using namespace driftscope;

struct RunOptions {
  std::string config_file;
  std::string manifest;
  std::string output;
  std::string unit;
  std::vector<std::string> window_for;
  std::optional<std::size_t> window;
  std::optional<double> warning_level;
  std::optional<double> confirm_level;
  std::optional<int> delta_t;
  std::optional<double> c;
  std::optional<std::size_t> capacity;
  std::optional<double> learning_rate;
  std::optional<std::size_t> bins;
  std::optional<std::size_t> attribute_cap;
  std::optional<std::uint64_t> seed;
  bool serial = false;
};

PipelineConfig resolve_config(const RunOptions& o) {
  PipelineConfig cfg = o.config_file.empty() ? PipelineConfig{} : load_config(o.config_file);
  if (!o.manifest.empty()) cfg.manifest = o.manifest;
  if (!o.output.empty()) cfg.output = o.output;
  if (!o.unit.empty()) {
    const bool digits = o.unit.find_first_not_of("0123456789") == std::string::npos;
    cfg.unit = parse_duration(digits ? nlohmann::json(std::stoll(o.unit)) : nlohmann::json(o.unit));
  }
  for (const auto& entry : o.window_for) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) throw ConfigError("--window-for expects SOURCE=N, got '" + entry + "'");
    cfg.windows[entry.substr(0, eq)] = std::stoul(entry.substr(eq + 1));
  }
  if (o.window) cfg.window = *o.window;
  if (o.warning_level) cfg.warning_level = *o.warning_level;
  if (o.confirm_level) cfg.confirm_level = *o.confirm_level;
  if (o.delta_t) cfg.delta_t = *o.delta_t;
  if (o.c) cfg.c = *o.c;
  if (o.capacity) cfg.capacity = *o.capacity;
  if (o.learning_rate) cfg.learning_rate = *o.learning_rate;
  if (o.bins) cfg.bins = *o.bins;
  if (o.attribute_cap) cfg.attribute_cap = *o.attribute_cap;
  if (o.seed) cfg.seed = *o.seed;
  if (o.serial) cfg.parallel = false;
  if (cfg.manifest.empty()) throw ConfigError("no manifest given (use --manifest or a config file)");
  cfg.validate();
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StorageFailure("cannot write " + path);
  out << text;
}

HttpServer* active_server = nullptr;

void on_signal(int) {
  if (active_server) active_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"driftscope: multi-source concept drift analysis"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run the offline pipeline and write a bundle");
  run_cmd->add_option("--config", run.config_file, "YAML config file")->check(CLI::ExistingFile);
  run_cmd->add_option("-m,--manifest", run.manifest, "Dataset manifest (JSON)");
  run_cmd->add_option("-o,--output", run.output, "Bundle output path");
  run_cmd->add_option("--unit", run.unit, "Segment length, seconds or 15m/1h/1d");
  run_cmd->add_option("--window", run.window, "Detector window size n");
  run_cmd->add_option("--window-for", run.window_for, "Per-source window, SOURCE=N");
  run_cmd->add_option("--warning-level", run.warning_level, "Warning threshold");
  run_cmd->add_option("--confirm-level", run.confirm_level, "Confirmation threshold");
  run_cmd->add_option("--delta-t", run.delta_t, "Consistency tolerance in segments");
  run_cmd->add_option("-c,--c", run.c, "Default consistency threshold");
  run_cmd->add_option("--capacity", run.capacity, "Ensemble size K");
  run_cmd->add_option("--learning-rate", run.learning_rate, "SGD learning rate");
  run_cmd->add_option("--bins", run.bins, "Matrix bins per attribute");
  run_cmd->add_option("--attribute-cap", run.attribute_cap, "Maximum ranked attributes");
  run_cmd->add_option("--seed", run.seed, "Seed recorded in the bundle");
  run_cmd->add_flag("--serial", run.serial, "Process sources sequentially");

  std::string bundle_path;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string concepts_path;
  auto* serve_cmd = app.add_subcommand("serve", "Serve a bundle over the JSON API");
  serve_cmd->add_option("-b,--bundle", bundle_path, "Bundle file")->required()->check(CLI::ExistingFile);
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("-p,--port", port, "Port");
  serve_cmd->add_option("--concepts", concepts_path, "Concept store (JSON lines); in-memory when omitted");

  SynthSpec spec;
  std::string synth_dir;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic stream with planted drifts");
  synth_cmd->add_option("-d,--out-dir", synth_dir, "Directory for data.csv and manifest.json")->required();
  synth_cmd->add_option("--sources", spec.sources, "Number of sources");
  synth_cmd->add_option("--dims", spec.dims, "Number of attributes");
  synth_cmd->add_option("--records", spec.records_per_source, "Records per source");
  synth_cmd->add_option("--per-segment", spec.records_per_segment, "Records per segment");
  synth_cmd->add_option("--switch", spec.switches, "Record index of a concept switch (repeatable)");
  synth_cmd->add_option("--lag", spec.lags, "Per-source lag in segments (repeatable, in source order)");
  synth_cmd->add_option("--noise", spec.noise, "Label flip probability");
  synth_cmd->add_option("--margin", spec.margin, "Minimum distance of a point to the labelling hyperplane");
  synth_cmd->add_option("--seed", spec.seed, "Generator seed");
  synth_cmd->add_option("--unit", spec.unit, "Segment length in seconds");

  std::string export_what;
  std::string export_out;
  std::optional<double> export_c;
  std::optional<SegmentIndex> export_from;
  std::optional<SegmentIndex> export_to;
  auto* export_cmd = app.add_subcommand("export", "Export artifacts from a bundle");
  export_cmd->add_option("-b,--bundle", bundle_path, "Bundle file")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("what", export_what, "snapshots | events | consistency | trajectories")
      ->required()
      ->check(CLI::IsMember({"snapshots", "events", "consistency", "trajectories"}));
  export_cmd->add_option("-o,--output", export_out, "Output file (stdout when omitted)");
  export_cmd->add_option("-c,--c", export_c, "Consistency threshold");
  export_cmd->add_option("--from", export_from, "First segment (trajectories)");
  export_cmd->add_option("--to", export_to, "Last segment (trajectories)");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*run_cmd) {
      const auto cfg = resolve_config(run);
      const auto bundle = run_pipeline(cfg);
      std::size_t confirmations = 0;
      for (const auto& s : bundle.sources) confirmations += s.confirmation_segments().size();
      spdlog::info("{} sources, {} segments, {} confirmed drift segments{}", bundle.sources.size(),
                   bundle.schema.segment_count(), confirmations,
                   cfg.output.empty() ? "" : ", bundle written to " + cfg.output.string());
    } else if (*serve_cmd) {
      const auto bundle = load_bundle(bundle_path);
      ConceptStore store = concepts_path.empty() ? ConceptStore() : ConceptStore(concepts_path);
      ApiService service(bundle, store);
      HttpServer server(service);
      active_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      spdlog::info("serving {} on http://{}:{}", bundle_path, host, port);
      server.listen(host, port);
      active_server = nullptr;
    } else if (*synth_cmd) {
      auto stream = synth_stream(spec);
      const std::filesystem::path dir = synth_dir;
      std::filesystem::create_directories(dir);
      write_text((dir / "data.csv").string(), stream.csv);
      stream.manifest.files = {"data.csv"};
      write_text((dir / "manifest.json").string(), manifest_to_json(stream.manifest).dump(2) + "\n");
      spdlog::info("wrote {} sources x {} records to {}", spec.sources, spec.records_per_source, dir.string());
    } else if (*export_cmd) {
      const auto bundle = load_bundle(bundle_path);
      std::string text;
      if (export_what == "snapshots") {
        text = snapshots_jsonl(bundle);
      } else if (export_what == "events") {
        text = drift_events_jsonl(bundle);
      } else if (export_what == "consistency") {
        text = consistency_json(bundle, export_c.value_or(bundle.config.c)).dump(1) + "\n";
      } else {
        text = trajectories_json(bundle, export_from, export_to).dump(1) + "\n";
      }
      write_text(export_out, text);
    }
  } catch (const Error& e) {
    spdlog::error("{} ({})", e.what(), e.code());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
