#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "driftscope/learner/ensemble.hpp"

namespace driftscope {

/// Shared 2-D PCA plane for parameter snapshots.
struct ProjectionBasis {
  std::vector<double> mean;
  std::array<std::vector<double>, 2> components;  // orthonormal
  std::array<double, 2> singular_values{0.0, 0.0};

  std::size_t dimension() const noexcept { return mean.size(); }
};

struct TrajectoryPoint {
  SourceId source_id;
  SegmentIndex segment_index = 0;
  std::array<double, 2> xy{0.0, 0.0};
};

struct Bounds {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;
};

/// Centres the snapshots and keeps the top two right singular vectors. Rank
/// deficient data is completed with standard-basis vectors (Gram-Schmidt)
/// carrying singular value 0. Each component's largest-magnitude loading is
/// made positive. Throws InsufficientData for fewer than two snapshots.
ProjectionBasis fit_basis(std::span<const ParameterSnapshot> snapshots);

TrajectoryPoint project(const ProjectionBasis& basis, const ParameterSnapshot& snapshot);

/// Bounding box of the points, optionally restricted to segments [from, to].
std::optional<Bounds> bounding_box(std::span<const TrajectoryPoint> points,
                                   std::optional<SegmentIndex> from = std::nullopt,
                                   std::optional<SegmentIndex> to = std::nullopt);

}  // namespace driftscope
