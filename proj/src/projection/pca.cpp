#include "driftscope/projection/pca.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

#include "driftscope/errors.hpp"

namespace driftscope {
namespace {

// Relative cut-off below which a singular value counts as zero.
constexpr double kRankTolerance = 1e-12;

void fix_sign(Eigen::VectorXd& v) {
  Eigen::Index arg = 0;
  for (Eigen::Index k = 1; k < v.size(); ++k) {
    if (std::abs(v[k]) > std::abs(v[arg])) arg = k;
  }
  if (v[arg] < 0) v = -v;
}

// First standard-basis vector not spanned by `taken`, orthonormalised against it.
Eigen::VectorXd complete(const std::vector<Eigen::VectorXd>& taken, Eigen::Index dims) {
  for (Eigen::Index k = 0; k < dims; ++k) {
    Eigen::VectorXd v = Eigen::VectorXd::Unit(dims, k);
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& u : taken) v -= u.dot(v) * u;
    }
    if (v.norm() > 1e-6) return v.normalized();
  }
  return Eigen::VectorXd::Unit(dims, 0);
}

}  // namespace

ProjectionBasis fit_basis(std::span<const ParameterSnapshot> snapshots) {
  if (snapshots.size() < 2) throw InsufficientData("projection needs at least two snapshots");
  const auto dims = static_cast<Eigen::Index>(snapshots.front().params.size());
  if (dims < 2) throw DimensionMismatch("snapshots need at least two parameters");
  const auto rows = static_cast<Eigen::Index>(snapshots.size());

  Eigen::MatrixXd data(rows, dims);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& p = snapshots[static_cast<std::size_t>(i)].params;
    if (static_cast<Eigen::Index>(p.size()) != dims) throw DimensionMismatch("snapshots differ in dimension");
    for (Eigen::Index k = 0; k < dims; ++k) data(i, k) = p[static_cast<std::size_t>(k)];
  }
  const Eigen::RowVectorXd mean = data.colwise().mean();
  data.rowwise() -= mean;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(data, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double scale = sv.size() > 0 ? std::max(sv[0], 1.0) : 1.0;

  ProjectionBasis basis;
  basis.mean.assign(mean.data(), mean.data() + dims);
  std::vector<Eigen::VectorXd> taken;
  for (int c = 0; c < 2; ++c) {
    Eigen::VectorXd v;
    double sigma = 0.0;
    if (c < sv.size() && sv[c] > kRankTolerance * scale) {
      v = svd.matrixV().col(c);
      sigma = sv[c];
    } else {
      v = complete(taken, dims);
    }
    fix_sign(v);
    taken.push_back(v);
    basis.components[static_cast<std::size_t>(c)].assign(v.data(), v.data() + dims);
    basis.singular_values[static_cast<std::size_t>(c)] = sigma;
  }
  return basis;
}

TrajectoryPoint project(const ProjectionBasis& basis, const ParameterSnapshot& snapshot) {
  if (snapshot.params.size() != basis.dimension()) {
    throw DimensionMismatch("snapshot has " + std::to_string(snapshot.params.size()) + " parameters, basis expects " +
                            std::to_string(basis.dimension()));
  }
  TrajectoryPoint point{snapshot.source_id, snapshot.segment_index, {0.0, 0.0}};
  for (std::size_t c = 0; c < 2; ++c) {
    double acc = 0.0;
    for (std::size_t k = 0; k < basis.dimension(); ++k) {
      acc += basis.components[c][k] * (snapshot.params[k] - basis.mean[k]);
    }
    point.xy[c] = acc;
  }
  return point;
}

std::optional<Bounds> bounding_box(std::span<const TrajectoryPoint> points, std::optional<SegmentIndex> from,
                                   std::optional<SegmentIndex> to) {
  std::optional<Bounds> box;
  for (const auto& p : points) {
    if (from && p.segment_index < *from) continue;
    if (to && p.segment_index > *to) continue;
    if (!box) {
      box = Bounds{p.xy[0], p.xy[1], p.xy[0], p.xy[1]};
    } else {
      box->min_x = std::min(box->min_x, p.xy[0]);
      box->min_y = std::min(box->min_y, p.xy[1]);
      box->max_x = std::max(box->max_x, p.xy[0]);
      box->max_y = std::max(box->max_y, p.xy[1]);
    }
  }
  return box;
}

}  // namespace driftscope
