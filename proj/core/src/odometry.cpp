#include "nsdf/odometry.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nsdf {

RigidTransform predict_initial_pose(const RigidTransform& prev, const RigidTransform& prev2) {
  return compose(prev, compose(prev2.inverse(), prev)).orthonormalized();
}

RigidTransform second_scan_init(double bbox_extent, const Vec3& direction) {
  if (!(bbox_extent > 0.0)) {
    throw std::invalid_argument("second_scan_init: bbox_extent must be > 0");
  }
  const double norm = direction.norm();
  if (norm < 1e-12) {
    throw std::invalid_argument("second_scan_init: direction must be nonzero");
  }
  RigidTransform t;
  t.translation = 0.01 * bbox_extent * (direction / norm);
  return t;
}

ResidualData residual_and_jacobian(const PointCloud& scan_sensor, const RigidTransform& pose,
                                   const HierarchicalFeatureVolume& volume,
                                   const SdfDecoder& decoder) {
  ResidualData out;
  const std::size_t n = scan_sensor.points.size();
  std::vector<double> r;
  std::vector<Vec6> rows;
  r.reserve(n);
  rows.reserve(n);
  out.inlier_index.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const Vec3 p_world = pose * scan_sensor.points[i];
    const auto field = sample_field_world(volume, decoder, p_world);
    if (!field) {
      ++out.outside;
      continue;
    }
    const Vec3 grad_metric = volume.scale() * field->grad_scaled;
    Vec6 row;
    row.head<3>() = p_world.cross(grad_metric);
    row.tail<3>() = grad_metric;
    r.push_back(field->value);
    rows.push_back(row);
    out.inlier_index.push_back(i);
  }
  out.residual = Eigen::Map<Eigen::VectorXd>(r.data(), long(r.size()));
  out.jacobian.resize(long(rows.size()), 6);
  for (std::size_t i = 0; i < rows.size(); ++i) out.jacobian.row(long(i)) = rows[i];
  return out;
}

bool lm_step(const MatX6& jacobian, const Eigen::VectorXd& residual, double lambda, Vec6& dh) {
  using Mat6 = Eigen::Matrix<double, 6, 6>;
  const Mat6 h = jacobian.transpose() * jacobian;
  const Vec6 g = -jacobian.transpose() * residual;
  Mat6 damped = h;
  damped.diagonal() += lambda * h.diagonal();
  // Minimum-norm solve: unobservable pose directions (rank-deficient H, e.g.
  // a single planar surface) must receive a zero step, not noise blow-up.
  Eigen::CompleteOrthogonalDecomposition<Mat6> cod(damped);
  cod.setThreshold(1e-10);
  dh = cod.solve(g);
  return dh.allFinite();
}

RigidTransform apply_increment(const RigidTransform& pose, const Vec6& dh) {
  const Mat3 rot = axis_angle_to_rotation({dh.head<3>()});
  RigidTransform out;
  out.rotation = rot * pose.rotation;
  out.translation = rot * pose.translation + dh.tail<3>();
  return out;
}

PoseEstimate register_scan(const PointCloud& scan_sensor, const HierarchicalFeatureVolume& volume,
                           const SdfDecoder& decoder, const RigidTransform& init_pose,
                           const LmConfig& config) {
  PoseEstimate best;
  best.pose = init_pose;

  ResidualData cur = residual_and_jacobian(scan_sensor, init_pose, volume, decoder);
  if (int(cur.inlier_index.size()) < config.min_inliers) {
    best.status = RegistrationStatus::Infeasible;
    best.inliers = int(cur.inlier_index.size());
    return best;
  }
  RigidTransform pose = init_pose;
  double mse = cur.residual.squaredNorm() / double(cur.residual.size());
  best.mean_sq_residual = mse;
  best.inliers = int(cur.inlier_index.size());
  double best_mse = mse;
  double lambda = config.initial_damping;
  int growth_streak = 0;
  // Dropping out-of-map points makes a shrinking inlier set look like an
  // improving fit; demand the trial keeps most of the initial support.
  const std::size_t min_support = std::max<std::size_t>(
      std::size_t(config.min_inliers),
      std::size_t(config.support_fraction * double(cur.inlier_index.size())));

  int it = 0;
  for (; it < config.max_iterations; ++it) {
    Vec6 dh;
    bool solved = false;
    for (int esc = 0; esc <= config.max_damping_escalations; ++esc) {
      if (lm_step(cur.jacobian, cur.residual, lambda, dh)) {
        solved = true;
        break;
      }
      lambda *= config.damping_up;
    }
    if (!solved) {
      best.status = RegistrationStatus::StepFailed;
      best.iterations = it;
      return best;
    }
    if (dh.head<3>().norm() > config.max_rotation_step ||
        dh.tail<3>().norm() > config.max_translation_step) {
      // Wild steps out of a flat or noisy region; damp instead of trusting
      // the local model that far.
      lambda *= config.damping_up;
      if (lambda > 1e14) break;
      continue;
    }

    const RigidTransform trial_pose = apply_increment(pose, dh);
    ResidualData trial = residual_and_jacobian(scan_sensor, trial_pose, volume, decoder);
    if (trial.inlier_index.size() < min_support) {
      lambda *= config.damping_up;  // step walked off the map; damp and retry
      if (lambda > 1e14) break;
      continue;
    }
    const double trial_mse = trial.residual.squaredNorm() / double(trial.residual.size());

    // Judge the step on the points in-map at both poses; comparing different
    // subsets rewards sliding badly-fit points off the map instead of
    // reducing their residuals.
    double cur_common = 0.0, trial_common = 0.0;
    {
      std::size_t i = 0, j = 0, n_common = 0;
      while (i < cur.inlier_index.size() && j < trial.inlier_index.size()) {
        if (cur.inlier_index[i] < trial.inlier_index[j]) {
          ++i;
        } else if (cur.inlier_index[i] > trial.inlier_index[j]) {
          ++j;
        } else {
          cur_common += cur.residual[long(i)] * cur.residual[long(i)];
          trial_common += trial.residual[long(j)] * trial.residual[long(j)];
          ++i;
          ++j;
          ++n_common;
        }
      }
      if (n_common < std::size_t(config.min_inliers)) {
        lambda *= config.damping_up;
        if (lambda > 1e14) break;
        continue;
      }
    }

    if (trial_common < cur_common) {
      // Inlier churn can still raise the full-set mean on an accepted step;
      // only a sustained climb counts as divergence.
      growth_streak = trial_mse > mse ? growth_streak + 1 : 0;
      pose = trial_pose;
      cur = std::move(trial);
      mse = trial_mse;
      lambda = std::max(lambda * config.damping_down, 1e-12);
      if (mse < best_mse) {
        best_mse = mse;
        best.pose = pose;
        best.mean_sq_residual = mse;
        best.inliers = int(cur.inlier_index.size());
      }
      if (growth_streak >= config.divergence_limit) {
        best.status = RegistrationStatus::Diverged;
        best.iterations = it + 1;
        return best;
      }
      if (dh.norm() < config.step_tolerance) {
        ++it;
        break;
      }
    } else {
      lambda *= config.damping_up;
      if (lambda > 1e14) break;
    }
  }
  best.iterations = it;
  best.status = RegistrationStatus::Ok;
  return best;
}

}  // namespace nsdf
