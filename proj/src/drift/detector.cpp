#include "driftscope/drift/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "driftscope/errors.hpp"

namespace driftscope {

std::string to_string(DriftStatus status) {
  switch (status) {
    case DriftStatus::kStable: return "stable";
    case DriftStatus::kWarning: return "warning";
    case DriftStatus::kConfirmed: return "confirmed";
  }
  return "stable";
}

std::string to_string(DriftKind kind) { return kind == DriftKind::kWarning ? "warning" : "confirmed"; }

DriftKind drift_kind_from_string(const std::string& text) {
  if (text == "warning") return DriftKind::kWarning;
  if (text == "confirmed") return DriftKind::kConfirmed;
  throw InvalidArgument("unknown drift kind `" + text + "`");
}

void DetectorConfig::validate() const {
  if (window == 0) throw ConfigError("detector window must be positive");
  if (!(warning_level < confirm_level)) throw ConfigError("warning level must be below the confirmation level");
}

double drift_level(double p, double s, double p_min, double s_min) noexcept {
  if (s_min == 0.0) {
    return p + s <= p_min ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return (p + s - p_min) / s_min;
}

Observation observe(DetectorState& state, const DetectorConfig& config, bool correct) {
  state.window.push_back(!correct);
  if (!correct) ++state.errors;
  if (state.window.size() > config.window) {
    if (state.window.front()) --state.errors;
    state.window.pop_front();
  }
  ++state.observed;

  const auto n = static_cast<double>(state.window.size());
  state.p = static_cast<double>(state.errors) / n;
  state.s = std::sqrt(state.p * (1.0 - state.p) / n);

  Observation obs;
  if (state.window.size() >= config.warmup()) {
    if (state.p + state.s < state.p_min + state.s_min) {
      state.p_min = state.p;
      state.s_min = state.s;
    }
    obs.level = drift_level(state.p, state.s, state.p_min, state.s_min);
    if (obs.level >= config.confirm_level) {
      obs.status = DriftStatus::kConfirmed;
      state.p_min = state.p;
      state.s_min = state.s;
    } else if (obs.level >= config.warning_level) {
      obs.status = DriftStatus::kWarning;
    }
  }

  state.level_sum += std::min(obs.level, kMaxReportedLevel);
  ++state.level_count;
  return obs;
}

double batch_drift_level(std::span<const double> levels) noexcept {
  if (levels.empty()) return 0.0;
  return std::accumulate(levels.begin(), levels.end(), 0.0) / static_cast<double>(levels.size());
}

double take_segment_level(DetectorState& state) noexcept {
  const double level = state.level_count == 0 ? 0.0 : state.level_sum / static_cast<double>(state.level_count);
  state.level_sum = 0.0;
  state.level_count = 0;
  return level;
}

}  // namespace driftscope
