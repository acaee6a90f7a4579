#include "driftscope/service/config.hpp"

#include <yaml-cpp/yaml.h>

#include "driftscope/core/manifest.hpp"
#include "driftscope/errors.hpp"

namespace driftscope {

void PipelineConfig::validate() const {
  if (window == 0) throw ConfigError("window must be positive");
  for (const auto& [source, n] : windows) {
    if (n == 0) throw ConfigError("window for " + source + " must be positive");
  }
  if (unit && *unit <= 0) throw ConfigError("unit must be positive");
  if (!(warning_level < confirm_level)) throw ConfigError("warning level must be below the confirmation level");
  if (delta_t < 0) throw ConfigError("delta_t must be non-negative");
  if (!(c > 0.0 && c < 1.0)) throw ConfigError("c must lie in (0, 1)");
  if (capacity == 0) throw ConfigError("ensemble capacity must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (bins == 0) throw ConfigError("bin count must be positive");
  if (attribute_cap == 0) throw ConfigError("attribute cap must be positive");
}

PipelineConfig load_config(const std::filesystem::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError("cannot read config " + path.string() + ": " + e.what());
  }
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp = p;
    return fp.is_absolute() ? fp : base / fp;
  };

  PipelineConfig cfg;
  try {
    if (auto n = root["manifest"]) cfg.manifest = resolve(n.as<std::string>());
    if (auto n = root["output"]) cfg.output = resolve(n.as<std::string>());
    if (auto n = root["unit"]) {
      const auto text = n.as<std::string>();
      const bool digits = !text.empty() && text.find_first_not_of("0123456789") == std::string::npos;
      cfg.unit = parse_duration(digits ? nlohmann::json(std::stoll(text)) : nlohmann::json(text));
    }
    if (auto n = root["window"]) cfg.window = n.as<std::size_t>();
    if (auto n = root["windows"]) {
      for (const auto& kv : n) cfg.windows[kv.first.as<std::string>()] = kv.second.as<std::size_t>();
    }
    if (auto n = root["warning_level"]) cfg.warning_level = n.as<double>();
    if (auto n = root["confirm_level"]) cfg.confirm_level = n.as<double>();
    if (auto n = root["delta_t"]) cfg.delta_t = n.as<int>();
    if (auto n = root["c"]) cfg.c = n.as<double>();
    if (auto n = root["capacity"]) cfg.capacity = n.as<std::size_t>();
    if (auto n = root["learning_rate"]) cfg.learning_rate = n.as<double>();
    if (auto n = root["bins"]) cfg.bins = n.as<std::size_t>();
    if (auto n = root["attribute_cap"]) cfg.attribute_cap = n.as<std::size_t>();
    if (auto n = root["seed"]) cfg.seed = n.as<std::uint64_t>();
    if (auto n = root["parallel"]) cfg.parallel = n.as<bool>();
  } catch (const YAML::Exception& e) {
    throw ConfigError("invalid config " + path.string() + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

void to_json(nlohmann::json& j, const PipelineConfig& config) {
  j = {{"window", config.window},
       {"windows", config.windows},
       {"warning_level", config.warning_level},
       {"confirm_level", config.confirm_level},
       {"delta_t", config.delta_t},
       {"c", config.c},
       {"capacity", config.capacity},
       {"learning_rate", config.learning_rate},
       {"bins", config.bins},
       {"attribute_cap", config.attribute_cap},
       {"seed", config.seed}};
  if (config.unit) j["unit"] = *config.unit;
}

}  // namespace driftscope
