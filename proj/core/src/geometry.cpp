#include "nsdf/geometry.hpp"

#include "nsdf/morton.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace nsdf {

bool RigidTransform::is_valid(double tol) const {
  const Mat3 rtr = rotation.transpose() * rotation;
  if (((rtr - Mat3::Identity()).cwiseAbs().maxCoeff()) > tol) return false;
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

RigidTransform RigidTransform::orthonormalized() const {
  RigidTransform out;
  out.rotation = Eigen::Quaterniond(rotation).normalized().toRotationMatrix();
  out.translation = translation;
  return out;
}

bool PointCloud::all_finite() const {
  for (const auto& p : points) {
    if (!p.allFinite()) return false;
  }
  return true;
}

Mat3 axis_angle_to_rotation(const AxisAngle& theta) {
  const double angle = theta.theta.norm();
  Mat3 skew;
  skew << 0, -theta.theta.z(), theta.theta.y(),
      theta.theta.z(), 0, -theta.theta.x(),
      -theta.theta.y(), theta.theta.x(), 0;
  double a, b;  // R = I + a*K + b*K^2
  if (angle < 1e-8) {
    const double a2 = angle * angle;
    a = 1.0 - a2 / 6.0;
    b = 0.5 - a2 / 24.0;
  } else {
    a = std::sin(angle) / angle;
    b = (1.0 - std::cos(angle)) / (angle * angle);
  }
  return Mat3::Identity() + a * skew + b * (skew * skew);
}

AxisAngle rotation_to_axis_angle(const Mat3& r) {
  const double cos_angle = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double angle = std::acos(cos_angle);
  Vec3 vee(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  if (angle < 1e-7) {
    return {0.5 * vee};
  }
  if (angle > M_PI - 1e-5) {
    // Near pi the skew part vanishes; recover the axis from R + I.
    const Mat3 m = 0.5 * (r + Mat3::Identity());
    int k;
    m.diagonal().maxCoeff(&k);
    Vec3 axis = m.col(k) / std::sqrt(m(k, k));
    // Sign of the axis is fixed by the (small but nonzero) skew part.
    if (axis.dot(vee) < 0.0) axis = -axis;
    return {angle * axis.normalized()};
  }
  return {(angle / (2.0 * std::sin(angle))) * vee};
}

PointCloud apply_transform(const RigidTransform& t, const PointCloud& cloud) {
  PointCloud out;
  out.frame = cloud.frame;
  out.points.reserve(cloud.points.size());
  for (const auto& p : cloud.points) out.points.push_back(t * p);
  return out;
}

PointCloud to_world(const RigidTransform& world_from_sensor, const PointCloud& sensor_cloud) {
  PointCloud out = apply_transform(world_from_sensor, sensor_cloud);
  out.frame = Frame::World;
  return out;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size) {
  if (!(voxel_size > 0.0)) {
    throw std::invalid_argument("voxel_downsample: voxel_size must be > 0");
  }
  struct Acc {
    Vec3 sum = Vec3::Zero();
    std::size_t n = 0;
  };
  // Bias voxel indices into the non-negative Morton range for the sort key.
  constexpr std::int64_t kBias = 1 << 20;
  std::unordered_map<std::uint64_t, Acc> cells;
  cells.reserve(cloud.points.size());
  for (const auto& p : cloud.points) {
    const std::int64_t ix = static_cast<std::int64_t>(std::floor(p.x() / voxel_size)) + kBias;
    const std::int64_t iy = static_cast<std::int64_t>(std::floor(p.y() / voxel_size)) + kBias;
    const std::int64_t iz = static_cast<std::int64_t>(std::floor(p.z() / voxel_size)) + kBias;
    if (!morton_encodable(ix, iy, iz)) {
      throw std::invalid_argument("voxel_downsample: voxel index exceeds Morton range");
    }
    const std::uint64_t key = morton_encode(static_cast<std::uint32_t>(ix),
                                            static_cast<std::uint32_t>(iy),
                                            static_cast<std::uint32_t>(iz));
    auto& acc = cells[key];
    acc.sum += p;
    acc.n += 1;
  }
  std::vector<std::pair<std::uint64_t, Vec3>> reps;
  reps.reserve(cells.size());
  for (const auto& [key, acc] : cells) {
    reps.emplace_back(key, acc.sum / static_cast<double>(acc.n));
  }
  std::sort(reps.begin(), reps.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  PointCloud out;
  out.frame = cloud.frame;
  out.points.reserve(reps.size());
  for (const auto& [key, centroid] : reps) out.points.push_back(centroid);
  return out;
}

PointCloud trim_by_range(const PointCloud& cloud, double max_range) {
  PointCloud out;
  out.frame = cloud.frame;
  out.points.reserve(cloud.points.size());
  for (const auto& p : cloud.points) {
    if (p.norm() <= max_range) out.points.push_back(p);
  }
  return out;
}

}  // namespace nsdf
