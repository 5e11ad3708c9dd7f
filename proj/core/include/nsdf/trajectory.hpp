#pragma once

#include "nsdf/geometry.hpp"

#include <string>
#include <vector>

namespace nsdf {

struct TrajectoryRecord {
  std::int64_t index = 0;  // frame index, doubles as the TUM timestamp
  RigidTransform pose;
};

using Trajectory = std::vector<TrajectoryRecord>;

/// Throws std::invalid_argument unless indices strictly increase.
void validate_trajectory(const Trajectory& trajectory);

enum class TrajectoryFormat { Kitti, Tum };

/// KITTI: 12 numbers per line, row-major [R|t]. TUM: index tx ty tz qx qy qz qw.
/// Values are written with enough digits for a < 1e-9 read-back error.
void write_trajectory(const Trajectory& trajectory, TrajectoryFormat format,
                      const std::string& path);
Trajectory read_trajectory(TrajectoryFormat format, const std::string& path);

std::string trajectory_to_string(const Trajectory& trajectory, TrajectoryFormat format);

/// RMSE of translation residuals after closed-form SE(3) alignment (no scale).
/// Throws std::invalid_argument on length or index mismatch.
double evaluate_ate(const Trajectory& estimated, const Trajectory& ground_truth);

/// KITTI-style average relative translational error in percent over the given
/// segment lengths, evaluated from every start frame.
/// Throws std::invalid_argument when the trajectory is shorter than the
/// smallest segment.
double evaluate_relative_drift(const Trajectory& estimated, const Trajectory& ground_truth,
                               const std::vector<double>& segment_lengths);

}  // namespace nsdf
