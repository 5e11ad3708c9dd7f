#pragma once

#include "nsdf/geometry.hpp"

#include <optional>
#include <string>
#include <vector>

namespace nsdf {

// Analytic primitives. Signed distances are positive in observable free
// space, matching the training sign convention.

struct PlanePrimitive {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();  // free space on the normal side
};

struct SpherePrimitive {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
};

struct BoxPrimitive {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Ones();
  bool hollow = false;  // true: room walls seen from inside
};

struct SynthScene {
  std::vector<PlanePrimitive> planes;
  std::vector<SpherePrimitive> spheres;
  std::vector<BoxPrimitive> boxes;

  bool empty() const { return planes.empty() && spheres.empty() && boxes.empty(); }

  /// First hit distance along origin + t * dir, t in (t_min, max_range].
  std::optional<double> ray_cast(const Vec3& origin, const Vec3& dir, double max_range,
                                 double t_min = 1e-6) const;

  /// Distance to the nearest surface, positive in free space.
  double signed_distance(const Vec3& p) const;
};

struct LidarModel {
  int channels = 32;
  int azimuth_steps = 512;
  double elev_min_deg = -25.0;
  double elev_max_deg = 25.0;
  double max_range = 60.0;
};

/// One ray per (channel, azimuth) on a regular grid; misses are omitted.
/// Returns the sensor-frame cloud of first hits.
PointCloud synth_scan(const SynthScene& scene, const RigidTransform& pose,
                      const LidarModel& lidar);

/// Built-in scenes: "box" (small closed room) and "room" (large room with
/// interior obstacles). Throws std::invalid_argument for unknown names.
SynthScene make_scene(const std::string& name);

/// Scripted trajectory inside the named scene: straight +x run, then a flat
/// arc (translation + yaw). step_length is the per-frame path advance.
std::vector<RigidTransform> make_trajectory(const std::string& scene, int frames,
                                            double step_length = 0.3);

}  // namespace nsdf
