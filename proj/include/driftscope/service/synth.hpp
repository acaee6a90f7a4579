#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "driftscope/core/manifest.hpp"

namespace driftscope {

/// Synthetic multi-source stream with planted concept switches.
///
/// Attributes are uniform on [0,1]^dims. Phase k labels records with
/// `y = 1 iff w_k . x + b_k > 0`, the hyperplane passing through the cube's
/// centre; consecutive phases use orthogonal normals so a switch flips about
/// half of the labels. Points closer than `margin` to the active hyperplane
/// are redrawn, which keeps each phase learnable by a linear model within a
/// few thousand records. Each label is then flipped with probability `noise`.
/// Source s enters phase k at record `switches[k-1] + lags[s] * records_per_segment`.
struct SynthSpec {
  std::size_t sources = 2;
  std::size_t dims = 5;
  std::size_t records_per_source = 5000;
  std::size_t records_per_segment = 100;
  std::vector<std::size_t> switches;
  std::vector<std::size_t> lags;  // in segments; missing entries mean 0
  double noise = 0.0;
  double margin = 0.1;  // distance to the unit-normal hyperplane
  std::uint64_t seed = 1;
  EpochSeconds start = 1420070400;  // 2015-01-01T00:00:00Z
  EpochSeconds unit = 3600;

  void validate() const;
  std::size_t lag_of(std::size_t source) const noexcept { return source < lags.size() ? lags[source] : 0; }
};

struct SynthStream {
  std::string csv;
  DatasetManifest manifest;  // schema only; `files` left empty
  std::vector<std::vector<double>> phase_weights;
  std::vector<double> phase_biases;
};

SynthStream synth_stream(const SynthSpec& spec);

/// Phase index of record `index` for source `source`.
std::size_t synth_phase(const SynthSpec& spec, std::size_t source, std::size_t index) noexcept;

std::string synth_source_id(std::size_t source);

}  // namespace driftscope
