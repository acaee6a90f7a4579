#include "driftscope/core/manifest.hpp"

#include <fstream>

#include "driftscope/core/ingest.hpp"
#include "driftscope/errors.hpp"

namespace driftscope {
namespace {

EpochSeconds parse_instant(const nlohmann::json& value, const char* what) {
  if (value.is_number_integer()) return value.get<EpochSeconds>();
  if (value.is_string()) {
    if (auto t = parse_timestamp(value.get<std::string>())) return *t;
  }
  throw ConfigError(std::string("manifest: cannot parse ") + what + " instant " + value.dump());
}

CompareOp parse_op(const std::string& op) {
  if (op == ">") return CompareOp::kGreater;
  if (op == ">=") return CompareOp::kGreaterEqual;
  if (op == "<") return CompareOp::kLess;
  if (op == "<=") return CompareOp::kLessEqual;
  throw ConfigError("manifest: unknown label predicate operator `" + op + "`");
}

const char* op_string(CompareOp op) {
  switch (op) {
    case CompareOp::kGreater: return ">";
    case CompareOp::kGreaterEqual: return ">=";
    case CompareOp::kLess: return "<";
    case CompareOp::kLessEqual: return "<=";
  }
  return ">";
}

}  // namespace

EpochSeconds parse_duration(const nlohmann::json& value) {
  if (value.is_number_integer()) return value.get<EpochSeconds>();
  if (value.is_string()) {
    const auto s = value.get<std::string>();
    if (s.size() >= 2) {
      const char suffix = s.back();
      EpochSeconds scale = 0;
      switch (suffix) {
        case 's': scale = 1; break;
        case 'm': scale = 60; break;
        case 'h': scale = 3600; break;
        case 'd': scale = 86400; break;
        default: break;
      }
      if (scale > 0) {
        try {
          std::size_t used = 0;
          const long long n = std::stoll(s.substr(0, s.size() - 1), &used);
          if (used == s.size() - 1) return n * scale;
        } catch (const std::exception&) {
        }
      }
    }
  }
  throw ConfigError("cannot parse duration " + value.dump());
}

void to_json(nlohmann::json& j, const DatasetSchema& schema) {
  j = nlohmann::json::object();
  j["attributes"] = schema.attribute_names;
  j["label"] = schema.label_name;
  auto sources = nlohmann::json::array();
  for (const auto& s : schema.sources) sources.push_back({{"id", s.id}, {"name", s.name}});
  j["sources"] = std::move(sources);
  j["unit"] = schema.unit;
  j["span"] = {{"start", schema.span_start}, {"end", schema.span_end}};
  if (schema.label_predicate) {
    j["label_predicate"] = {{"column", schema.label_predicate->column},
                            {"op", op_string(schema.label_predicate->op)},
                            {"threshold", schema.label_predicate->threshold}};
  }
}

void from_json(const nlohmann::json& j, DatasetSchema& schema) {
  try {
    schema = DatasetSchema{};
    schema.attribute_names = j.at("attributes").get<std::vector<std::string>>();
    schema.label_name = j.value("label", std::string("label"));
    for (const auto& s : j.at("sources")) {
      if (s.is_string()) {
        schema.sources.push_back({s.get<std::string>(), s.get<std::string>()});
      } else {
        const auto id = s.at("id").get<std::string>();
        schema.sources.push_back({id, s.value("name", id)});
      }
    }
    schema.unit = parse_duration(j.at("unit"));
    schema.span_start = parse_instant(j.at("span").at("start"), "span start");
    schema.span_end = parse_instant(j.at("span").at("end"), "span end");
    if (j.contains("label_predicate") && !j.at("label_predicate").is_null()) {
      const auto& p = j.at("label_predicate");
      schema.label_predicate = LabelPredicate{p.value("column", std::string("label")),
                                              parse_op(p.value("op", std::string(">"))),
                                              p.at("threshold").get<double>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid schema: ") + e.what());
  }
  schema.validate();
}

void to_json(nlohmann::json& j, const NormalizationStats& stats) {
  j = nlohmann::json::array();
  for (const auto& a : stats.attributes) {
    j.push_back({{"count", a.count}, {"min", a.min}, {"max", a.max}, {"mean", a.mean}, {"variance", a.variance()}});
  }
}

void from_json(const nlohmann::json& j, NormalizationStats& stats) {
  stats.attributes.clear();
  for (const auto& a : j) {
    RunningStats s;
    s.count = a.at("count").get<std::size_t>();
    s.min = a.at("min").get<double>();
    s.max = a.at("max").get<double>();
    s.mean = a.at("mean").get<double>();
    s.m2 = a.at("variance").get<double>() * static_cast<double>(s.count);
    stats.attributes.push_back(s);
  }
}

DatasetManifest parse_manifest(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  DatasetManifest manifest;
  manifest.schema = doc.get<DatasetSchema>();
  try {
    if (doc.contains("files")) {
      for (const auto& f : doc.at("files")) {
        std::filesystem::path p = f.get<std::string>();
        manifest.files.push_back(p.is_absolute() ? p : base_dir / p);
      }
    }
    if (doc.contains("windows")) {
      for (const auto& [source, n] : doc.at("windows").items()) {
        if (!manifest.schema.source_index(source)) throw ConfigError("window declared for unknown source " + source);
        const auto w = n.get<long long>();
        if (w <= 0) throw ConfigError("window for " + source + " must be positive");
        manifest.windows[source] = static_cast<std::size_t>(w);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid manifest: ") + e.what());
  }
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot read manifest " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_manifest(doc, path.parent_path());
}

nlohmann::json manifest_to_json(const DatasetManifest& manifest) {
  nlohmann::json j = manifest.schema;
  auto files = nlohmann::json::array();
  for (const auto& f : manifest.files) files.push_back(f.string());
  j["files"] = std::move(files);
  if (!manifest.windows.empty()) j["windows"] = manifest.windows;
  return j;
}

}  // namespace driftscope
