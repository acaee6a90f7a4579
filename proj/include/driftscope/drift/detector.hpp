#pragma once

#include <cstddef>
#include <deque>
#include <limits>
#include <span>
#include <string>

#include "driftscope/core/types.hpp"

namespace driftscope {

enum class DriftStatus { kStable, kWarning, kConfirmed };
enum class DriftKind { kWarning, kConfirmed };

std::string to_string(DriftStatus status);
std::string to_string(DriftKind kind);
DriftKind drift_kind_from_string(const std::string& text);

struct DetectorConfig {
  std::size_t window = 500;
  double warning_level = 2.0;
  double confirm_level = 3.0;

  /// Window occupancy needed before levels are reported.
  std::size_t warmup() const noexcept { return window / 5 > 0 ? window / 5 : 1; }
  void validate() const;
};

/// Levels above this are reported as this value so that batch averages and
/// exports stay finite (the error-free-history guard yields +inf).
inline constexpr double kMaxReportedLevel = 1000.0;

/// Sliding-window error statistics for one source.
struct DetectorState {
  std::deque<bool> window;  // true = prediction error
  std::size_t errors = 0;
  double p = 0.0;
  double s = 0.0;
  double p_min = std::numeric_limits<double>::infinity();
  double s_min = std::numeric_limits<double>::infinity();
  std::size_t observed = 0;

  // accumulators for the current segment's average level
  double level_sum = 0.0;
  std::size_t level_count = 0;

  bool has_minima() const noexcept { return p_min != std::numeric_limits<double>::infinity(); }
};

struct Observation {
  double level = 0.0;  // may be +inf under the zero-variance guard
  DriftStatus status = DriftStatus::kStable;
};

/// r = (p + s - p_min) / s_min. With s_min == 0 the level is 0 when
/// p + s <= p_min and +inf otherwise.
double drift_level(double p, double s, double p_min, double s_min) noexcept;

/// Pushes one correctness bit and returns the resulting level and status.
/// Confirmation resets the stored minima to the current (p, s); the window
/// itself is kept.
Observation observe(DetectorState& state, const DetectorConfig& config, bool correct);

/// Arithmetic mean; 0 for an empty list.
double batch_drift_level(std::span<const double> levels) noexcept;

/// Mean of the levels accumulated since the last call; resets the accumulator.
double take_segment_level(DetectorState& state) noexcept;

struct DriftEvent {
  SourceId source_id;
  SegmentIndex segment = 0;
  std::size_t record_index = 0;  // position in the source's record stream
  EpochSeconds timestamp = 0;
  DriftKind kind = DriftKind::kConfirmed;
  double level = 0.0;

  bool operator==(const DriftEvent&) const = default;
};

}  // namespace driftscope
