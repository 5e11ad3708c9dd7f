#pragma once

#include "nsdf/sdf_field.hpp"

#include <vector>

namespace nsdf {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using MatX6 = Eigen::Matrix<double, Eigen::Dynamic, 6>;

struct LmConfig {
  int max_iterations = 100;
  double initial_damping = 1e-4;
  double damping_up = 10.0;
  double damping_down = 0.1;
  double step_tolerance = 1e-6;
  int min_inliers = 10;
  double support_fraction = 0.9;  // trial poses may not shed more inliers
  double max_rotation_step = 0.5;     // radians; larger steps are damped away
  double max_translation_step = 2.0;  // meters
  int max_damping_escalations = 5;
  int divergence_limit = 5;
};

enum class RegistrationStatus { Ok, Infeasible, Diverged, StepFailed };

struct PoseEstimate {
  RigidTransform pose;
  int iterations = 0;
  double mean_sq_residual = 0.0;
  int inliers = 0;
  RegistrationStatus status = RegistrationStatus::Ok;
};

/// Constant-motion prediction: prev * (prev2^-1 * prev).
RigidTransform predict_initial_pose(const RigidTransform& prev, const RigidTransform& prev2);

/// Identity rotation with translation 0.01 * bbox_extent along direction.
/// Throws std::invalid_argument for a degenerate extent or direction.
RigidTransform second_scan_init(double bbox_extent, const Vec3& direction);

struct ResidualData {
  Eigen::VectorXd residual;       // metric SDF value per inlier point
  MatX6 jacobian;                 // rows [p_world x grad_metric, grad_metric]
  std::vector<std::uint32_t> inlier_index;  // into the scan
  std::size_t outside = 0;
};

/// Evaluates residual and Jacobian rows at the given pose. Points that leave
/// the mapped region are masked out (excluded from both r and J).
ResidualData residual_and_jacobian(const PointCloud& scan_sensor, const RigidTransform& pose,
                                   const HierarchicalFeatureVolume& volume,
                                   const SdfDecoder& decoder);

/// Solves (J^T J + lambda diag(J^T J)) dh = -J^T r. Returns false when the
/// damped system has no usable solution.
bool lm_step(const MatX6& jacobian, const Eigen::VectorXd& residual, double lambda, Vec6& dh);

/// Applies the increment consistent with the Jacobian rows: the rotation part
/// spins the whole current pose about the world origin.
RigidTransform apply_increment(const RigidTransform& pose, const Vec6& dh);

/// Scan-to-implicit-map registration by damped Gauss-Newton with an
/// accept/reject rule on the mean squared residual. Returns the best pose
/// seen; status reports infeasibility (too few in-map points), divergence, or
/// a step failure after repeated damping escalations.
PoseEstimate register_scan(const PointCloud& scan_sensor, const HierarchicalFeatureVolume& volume,
                           const SdfDecoder& decoder, const RigidTransform& init_pose,
                           const LmConfig& config);

}  // namespace nsdf
