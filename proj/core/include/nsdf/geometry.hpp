#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <vector>

namespace nsdf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rotation vector (angle * unit axis), canonical range ||theta|| <= pi.
struct AxisAngle {
  Vec3 theta = Vec3::Zero();
};

/// SE(3) pose. Rotation is kept orthonormal; use is_valid() to audit.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  RigidTransform inverse() const {
    RigidTransform out;
    out.rotation = rotation.transpose();
    out.translation = -(out.rotation * translation);
    return out;
  }

  Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }

  /// Orthonormality and det(R)=1 within tol (per-element / absolute).
  bool is_valid(double tol = 1e-9) const;

  /// Nearest rotation (quaternion round trip). Pose chains that repeatedly
  /// compose with transposed inverses amplify infinitesimal skew
  /// exponentially, so long pipelines renormalize at frame boundaries.
  RigidTransform orthonormalized() const;
};

enum class Frame : std::uint8_t { Sensor, World };

struct PointCloud {
  std::vector<Vec3> points;
  Frame frame = Frame::Sensor;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool all_finite() const;
};

/// Rodrigues exponential map. Zero vector maps to the identity.
Mat3 axis_angle_to_rotation(const AxisAngle& theta);

/// Log map, inverse of axis_angle_to_rotation; result has ||theta|| <= pi.
AxisAngle rotation_to_axis_angle(const Mat3& rotation);

/// Applies T point-wise; preserves the input frame tag.
PointCloud apply_transform(const RigidTransform& t, const PointCloud& cloud);

/// apply_transform for a sensor-frame cloud with a world-from-sensor pose.
PointCloud to_world(const RigidTransform& world_from_sensor, const PointCloud& sensor_cloud);

/// Matrix product: the result applies b first, then a.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

/// One centroid per occupied voxel, output sorted by voxel Morton key.
/// Throws std::invalid_argument for voxel_size <= 0.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size);

/// Drops points with range (norm) above max_range. Sensor-frame clouds only.
PointCloud trim_by_range(const PointCloud& cloud, double max_range);

}  // namespace nsdf
