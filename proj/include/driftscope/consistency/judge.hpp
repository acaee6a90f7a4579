#pragma once

#include <optional>
#include <span>
#include <vector>

#include "driftscope/core/types.hpp"

namespace driftscope {

/// Batch drift levels r_i^t of m sources on a common segment grid.
struct DriftLevelGrid {
  std::vector<SourceId> sources;
  std::vector<std::vector<double>> levels;  // [source][segment]

  std::size_t source_count() const noexcept { return sources.size(); }
  std::size_t segment_count() const noexcept { return levels.empty() ? 0 : levels.front().size(); }
  void validate() const;
};

/// y_i^t = 1 iff some r_i over segments [t - delta_t, t + delta_t] reaches the
/// confirmation level.
std::vector<int> drift_labels(const DriftLevelGrid& grid, std::size_t source, int delta_t, double confirm_level = 3.0);

struct FeatureSet {
  std::vector<std::vector<double>> features;  // one row per segment, m - 1 peer levels
  std::vector<int> labels;
};

/// Peer drift levels (leaving source i out) paired with i's drift labels.
/// Throws SingleSource when the grid has fewer than two sources.
FeatureSet build_features(const DriftLevelGrid& grid, std::size_t source, int delta_t, double confirm_level = 3.0);

inline constexpr double kVarianceFloor = 1e-6;

struct GaussianFeature {
  double mean = 0.0;
  double variance = 1.0;
};

/// Gaussian naive Bayes over peer drift levels.
struct NBModel {
  double prior_yes = 0.5;
  double prior_no = 0.5;
  std::vector<GaussianFeature> yes;
  std::vector<GaussianFeature> no;

  /// P(yes | x).
  double posterior(std::span<const double> x) const;
};

/// Maximum-likelihood Gaussians per class with variances floored at
/// kVarianceFloor, and add-one smoothed priors. A class with no samples
/// borrows the pooled statistics so its posterior stays at the prior.
NBModel fit_nb(const std::vector<std::vector<double>>& features, std::span<const int> labels);

std::vector<double> probability_curve(const NBModel& model, const std::vector<std::vector<double>>& features);

/// Inclusive segment interval.
struct SegmentInterval {
  SegmentIndex start = 0;
  SegmentIndex end = 0;

  bool operator==(const SegmentInterval&) const = default;
};

/// Maximal runs of the curve at or above `c`.
std::vector<SegmentInterval> infer_segments(std::span<const double> curve, double c);

struct DriftVerdict {
  SegmentIndex segment = 0;
  bool consistent = false;

  bool operator==(const DriftVerdict&) const = default;
};

/// A drift at t is consistent iff t lies in [start - delta_t, end + delta_t]
/// for some inferred segment.
std::vector<DriftVerdict> judge(std::span<const SegmentIndex> drift_segments, std::span<const SegmentInterval> segments,
                                int delta_t);

/// Verdict of the latest confirmation at or before t; empty before the first.
std::optional<bool> verdict_at(std::span<const DriftVerdict> verdicts, SegmentIndex t);

struct ConsistencyResult {
  SourceId source_id;
  std::vector<double> curve;
  std::vector<SegmentInterval> segments;
  std::vector<DriftVerdict> verdicts;

  /// True when any of the source's confirmations falls outside the inferred segments.
  bool inconsistent() const noexcept;
};

struct ConsistencyConfig {
  double c = 0.7;
  int delta_t = 1;
  double confirm_level = 3.0;
};

/// Fitted per-source curves; independent of the threshold c.
struct ConsistencyModel {
  std::vector<SourceId> sources;
  std::vector<NBModel> models;
  std::vector<std::vector<double>> curves;
};

ConsistencyModel fit_consistency(const DriftLevelGrid& grid, int delta_t, double confirm_level = 3.0);

/// `drift_segments[i]` lists source i's confirmation segments.
std::vector<ConsistencyResult> evaluate_consistency(const ConsistencyModel& model,
                                                    const std::vector<std::vector<SegmentIndex>>& drift_segments,
                                                    double c, int delta_t);

}  // namespace driftscope
