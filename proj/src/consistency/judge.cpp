#include "driftscope/consistency/judge.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "driftscope/errors.hpp"

namespace driftscope {
namespace {

double log_gaussian(double x, const GaussianFeature& g) {
  const double d = x - g.mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * g.variance) - d * d / (2.0 * g.variance);
}

std::vector<GaussianFeature> gaussian_fit(const std::vector<std::vector<double>>& features, std::span<const int> labels,
                                          std::optional<int> cls, std::size_t dims) {
  std::vector<GaussianFeature> out(dims);
  std::size_t n = 0;
  std::vector<double> sum(dims, 0.0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (cls && labels[i] != *cls) continue;
    ++n;
    for (std::size_t k = 0; k < dims; ++k) sum[k] += features[i][k];
  }
  if (n == 0) return out;
  for (std::size_t k = 0; k < dims; ++k) out[k].mean = sum[k] / static_cast<double>(n);
  std::vector<double> sq(dims, 0.0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (cls && labels[i] != *cls) continue;
    for (std::size_t k = 0; k < dims; ++k) {
      const double d = features[i][k] - out[k].mean;
      sq[k] += d * d;
    }
  }
  for (std::size_t k = 0; k < dims; ++k) {
    out[k].variance = std::max(sq[k] / static_cast<double>(n), kVarianceFloor);
  }
  return out;
}

}  // namespace

void DriftLevelGrid::validate() const {
  if (levels.size() != sources.size()) throw InvalidArgument("drift-level grid rows do not match its sources");
  for (const auto& row : levels) {
    if (row.size() != segment_count()) throw InvalidArgument("drift-level grid rows differ in length");
    for (double r : row) {
      if (!(r >= 0.0) || !std::isfinite(r)) throw InvalidArgument("drift levels must be finite and non-negative");
    }
  }
}

std::vector<int> drift_labels(const DriftLevelGrid& grid, std::size_t source, int delta_t, double confirm_level) {
  if (source >= grid.source_count()) throw InvalidArgument("source index out of range");
  if (delta_t < 0) throw InvalidArgument("delta_t must be non-negative");
  const auto& row = grid.levels[source];
  const auto T = static_cast<std::ptrdiff_t>(row.size());
  std::vector<int> labels(row.size(), 0);
  for (std::ptrdiff_t t = 0; t < T; ++t) {
    const auto lo = std::max<std::ptrdiff_t>(0, t - delta_t);
    const auto hi = std::min<std::ptrdiff_t>(T - 1, t + delta_t);
    for (auto u = lo; u <= hi; ++u) {
      if (row[static_cast<std::size_t>(u)] >= confirm_level) {
        labels[static_cast<std::size_t>(t)] = 1;
        break;
      }
    }
  }
  return labels;
}

FeatureSet build_features(const DriftLevelGrid& grid, std::size_t source, int delta_t, double confirm_level) {
  if (grid.source_count() < 2) throw SingleSource("consistency is undefined for a single source");
  grid.validate();
  FeatureSet fs;
  fs.labels = drift_labels(grid, source, delta_t, confirm_level);
  fs.features.resize(grid.segment_count());
  for (std::size_t t = 0; t < grid.segment_count(); ++t) {
    auto& row = fs.features[t];
    row.reserve(grid.source_count() - 1);
    for (std::size_t j = 0; j < grid.source_count(); ++j) {
      if (j != source) row.push_back(grid.levels[j][t]);
    }
  }
  return fs;
}

double NBModel::posterior(std::span<const double> x) const {
  if (x.size() != yes.size() || x.size() != no.size()) {
    throw DimensionMismatch("naive Bayes model expects " + std::to_string(yes.size()) + " features");
  }
  double log_yes = std::log(prior_yes);
  double log_no = std::log(prior_no);
  for (std::size_t k = 0; k < x.size(); ++k) {
    log_yes += log_gaussian(x[k], yes[k]);
    log_no += log_gaussian(x[k], no[k]);
  }
  // 1 / (1 + exp(log_no - log_yes)) without overflow
  const double d = log_no - log_yes;
  if (d > 0) {
    const double e = std::exp(-d);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(d));
}

NBModel fit_nb(const std::vector<std::vector<double>>& features, std::span<const int> labels) {
  if (features.empty()) throw InsufficientData("naive Bayes needs at least one sample");
  if (features.size() != labels.size()) throw DimensionMismatch("features and labels differ in length");
  const std::size_t dims = features.front().size();
  for (const auto& row : features) {
    if (row.size() != dims) throw DimensionMismatch("feature rows differ in length");
  }

  const auto n = static_cast<double>(features.size());
  const auto n_yes = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  NBModel model;
  model.prior_yes = (n_yes + 1.0) / (n + 2.0);
  model.prior_no = 1.0 - model.prior_yes;

  const bool has_yes = n_yes > 0;
  const bool has_no = n_yes < n;
  const auto pooled = gaussian_fit(features, labels, std::nullopt, dims);
  model.yes = has_yes ? gaussian_fit(features, labels, 1, dims) : pooled;
  model.no = has_no ? gaussian_fit(features, labels, 0, dims) : pooled;
  return model;
}

std::vector<double> probability_curve(const NBModel& model, const std::vector<std::vector<double>>& features) {
  std::vector<double> curve;
  curve.reserve(features.size());
  for (const auto& x : features) curve.push_back(model.posterior(x));
  return curve;
}

std::vector<SegmentInterval> infer_segments(std::span<const double> curve, double c) {
  std::vector<SegmentInterval> out;
  std::optional<SegmentIndex> open;
  for (std::size_t t = 0; t < curve.size(); ++t) {
    const bool above = curve[t] >= c;
    if (above && !open) open = static_cast<SegmentIndex>(t);
    if (!above && open) {
      out.push_back({*open, static_cast<SegmentIndex>(t) - 1});
      open.reset();
    }
  }
  if (open) out.push_back({*open, static_cast<SegmentIndex>(curve.size()) - 1});
  return out;
}

std::vector<DriftVerdict> judge(std::span<const SegmentIndex> drift_segments, std::span<const SegmentInterval> segments,
                                int delta_t) {
  std::vector<DriftVerdict> verdicts;
  verdicts.reserve(drift_segments.size());
  for (SegmentIndex t : drift_segments) {
    const bool inside = std::any_of(segments.begin(), segments.end(), [&](const SegmentInterval& s) {
      return t >= s.start - delta_t && t <= s.end + delta_t;
    });
    verdicts.push_back({t, inside});
  }
  return verdicts;
}

std::optional<bool> verdict_at(std::span<const DriftVerdict> verdicts, SegmentIndex t) {
  std::optional<bool> latest;
  SegmentIndex latest_segment = 0;
  for (const auto& v : verdicts) {
    if (v.segment <= t && (!latest || v.segment >= latest_segment)) {
      latest = v.consistent;
      latest_segment = v.segment;
    }
  }
  return latest;
}

bool ConsistencyResult::inconsistent() const noexcept {
  return std::any_of(verdicts.begin(), verdicts.end(), [](const DriftVerdict& v) { return !v.consistent; });
}

ConsistencyModel fit_consistency(const DriftLevelGrid& grid, int delta_t, double confirm_level) {
  if (grid.source_count() < 2) throw SingleSource("consistency is undefined for a single source");
  ConsistencyModel model;
  model.sources = grid.sources;
  for (std::size_t i = 0; i < grid.source_count(); ++i) {
    const auto fs = build_features(grid, i, delta_t, confirm_level);
    if (fs.features.empty()) throw InsufficientData("drift-level grid has no segments");
    model.models.push_back(fit_nb(fs.features, fs.labels));
    model.curves.push_back(probability_curve(model.models.back(), fs.features));
  }
  return model;
}

std::vector<ConsistencyResult> evaluate_consistency(const ConsistencyModel& model,
                                                    const std::vector<std::vector<SegmentIndex>>& drift_segments,
                                                    double c, int delta_t) {
  if (!(c > 0.0 && c < 1.0)) throw InvalidArgument("probability threshold c must lie in (0, 1)");
  if (drift_segments.size() != model.sources.size()) throw InvalidArgument("one drift list per source expected");
  std::vector<ConsistencyResult> out;
  for (std::size_t i = 0; i < model.sources.size(); ++i) {
    ConsistencyResult r;
    r.source_id = model.sources[i];
    r.curve = model.curves[i];
    r.segments = infer_segments(r.curve, c);
    r.verdicts = judge(drift_segments[i], r.segments, delta_t);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace driftscope
