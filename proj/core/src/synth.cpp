#include "nsdf/synth.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace nsdf {

namespace {

std::optional<double> plane_hit(const PlanePrimitive& pl, const Vec3& o, const Vec3& d,
                                double t_min) {
  const double denom = d.dot(pl.normal);
  if (std::abs(denom) < 1e-12) return std::nullopt;
  const double t = (pl.point - o).dot(pl.normal) / denom;
  if (t <= t_min) return std::nullopt;
  return t;
}

std::optional<double> sphere_hit(const SpherePrimitive& sp, const Vec3& o, const Vec3& d,
                                 double t_min) {
  const Vec3 oc = o - sp.center;
  const double b = oc.dot(d);
  const double c = oc.squaredNorm() - sp.radius * sp.radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double s = std::sqrt(disc);
  const double t0 = -b - s;
  if (t0 > t_min) return t0;
  const double t1 = -b + s;
  if (t1 > t_min) return t1;
  return std::nullopt;
}

std::optional<double> box_hit(const BoxPrimitive& bx, const Vec3& o, const Vec3& d,
                              double t_min) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (o[a] < bx.min[a] || o[a] > bx.max[a]) return std::nullopt;
      continue;
    }
    double t0 = (bx.min[a] - o[a]) / d[a];
    double t1 = (bx.max[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
  }
  if (t_near > t_far) return std::nullopt;
  if (t_near > t_min) return t_near;  // outside looking in
  if (t_far > t_min) return t_far;    // inside looking out (interior wall)
  return std::nullopt;
}

double box_sdf_solid(const BoxPrimitive& bx, const Vec3& p) {
  const Vec3 center = 0.5 * (bx.min + bx.max);
  const Vec3 half = 0.5 * (bx.max - bx.min);
  const Vec3 q = (p - center).cwiseAbs() - half;
  const double outside = q.cwiseMax(0.0).norm();
  const double inside = std::min(q.maxCoeff(), 0.0);
  return outside + inside;
}

}  // namespace

std::optional<double> SynthScene::ray_cast(const Vec3& origin, const Vec3& dir, double max_range,
                                           double t_min) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& pl : planes) {
    if (auto t = plane_hit(pl, origin, dir, t_min)) best = std::min(best, *t);
  }
  for (const auto& sp : spheres) {
    if (auto t = sphere_hit(sp, origin, dir, t_min)) best = std::min(best, *t);
  }
  for (const auto& bx : boxes) {
    if (auto t = box_hit(bx, origin, dir, t_min)) best = std::min(best, *t);
  }
  if (!std::isfinite(best) || best > max_range) return std::nullopt;
  return best;
}

double SynthScene::signed_distance(const Vec3& p) const {
  double sd = std::numeric_limits<double>::infinity();
  for (const auto& pl : planes) sd = std::min(sd, (p - pl.point).dot(pl.normal));
  for (const auto& sp : spheres) sd = std::min(sd, (p - sp.center).norm() - sp.radius);
  for (const auto& bx : boxes) {
    const double s = box_sdf_solid(bx, p);
    sd = std::min(sd, bx.hollow ? -s : s);
  }
  return sd;
}

PointCloud synth_scan(const SynthScene& scene, const RigidTransform& pose,
                      const LidarModel& lidar) {
  if (scene.empty()) throw std::invalid_argument("synth_scan: empty scene");
  PointCloud cloud;
  cloud.frame = Frame::Sensor;
  cloud.points.reserve(std::size_t(lidar.channels) * lidar.azimuth_steps);
  const double deg = M_PI / 180.0;
  for (int ch = 0; ch < lidar.channels; ++ch) {
    const double f = lidar.channels > 1 ? double(ch) / double(lidar.channels - 1) : 0.5;
    const double elev = (lidar.elev_min_deg + f * (lidar.elev_max_deg - lidar.elev_min_deg)) * deg;
    for (int az = 0; az < lidar.azimuth_steps; ++az) {
      const double a = 2.0 * M_PI * double(az) / double(lidar.azimuth_steps);
      const Vec3 dir_sensor(std::cos(elev) * std::cos(a), std::cos(elev) * std::sin(a),
                            std::sin(elev));
      const Vec3 dir_world = pose.rotation * dir_sensor;
      const auto t = scene.ray_cast(pose.translation, dir_world, lidar.max_range);
      if (t) cloud.points.push_back(*t * dir_sensor);
    }
  }
  return cloud;
}

SynthScene make_scene(const std::string& name) {
  SynthScene scene;
  if (name == "box") {
    BoxPrimitive room;
    room.min = Vec3(-5.0, -4.0, 0.0);
    room.max = Vec3(5.0, 4.0, 4.0);
    room.hollow = true;
    scene.boxes.push_back(room);
    scene.spheres.push_back({Vec3(2.5, 1.5, 1.0), 0.8});
    BoxPrimitive pillar;
    pillar.min = Vec3(-3.0, -2.5, 0.0);
    pillar.max = Vec3(-2.2, -1.7, 2.5);
    scene.boxes.push_back(pillar);
    return scene;
  }
  if (name == "room") {
    BoxPrimitive room;
    room.min = Vec3(-8.0, -8.0, 0.0);
    room.max = Vec3(28.0, 20.0, 6.0);
    room.hollow = true;
    scene.boxes.push_back(room);
    BoxPrimitive crate;
    crate.min = Vec3(10.0, -4.5, 0.0);
    crate.max = Vec3(12.0, -2.5, 2.0);
    scene.boxes.push_back(crate);
    BoxPrimitive shelf;
    shelf.min = Vec3(-4.0, 9.0, 0.0);
    shelf.max = Vec3(-1.5, 10.5, 3.0);
    scene.boxes.push_back(shelf);
    scene.spheres.push_back({Vec3(16.0, 9.0, 1.2), 1.0});
    scene.spheres.push_back({Vec3(2.0, -5.0, 1.5), 0.9});
    return scene;
  }
  throw std::invalid_argument("make_scene: unknown scene '" + name + "'");
}

std::vector<RigidTransform> make_trajectory(const std::string& scene, int frames,
                                            double step_length) {
  if (scene != "box" && scene != "room") {
    throw std::invalid_argument("make_trajectory: unknown scene '" + scene + "'");
  }
  std::vector<RigidTransform> poses;
  poses.reserve(frames);
  const double z = 1.5;

  if (scene == "box") {
    // Slow yaw-only sweep near the room center.
    for (int i = 0; i < frames; ++i) {
      RigidTransform t;
      const double yaw = 0.05 * i;
      t.rotation = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
      t.translation = Vec3(0.4 * std::cos(0.13 * i), 0.3 * std::sin(0.11 * i), z);
      poses.push_back(t);
    }
    return poses;
  }

  // "room": straight run along +x, then a constant-rate left arc. The first
  // step is exactly +x so the fixed second-frame initialization is exact.
  const int straight_frames = 20;
  const double yaw_rate = 2.4 * M_PI / 180.0;  // per frame, on the arc
  const double radius = step_length / yaw_rate;
  double x = 0.0, y = 0.0, heading = 0.0;
  for (int i = 0; i < frames; ++i) {
    RigidTransform t;
    t.rotation = Eigen::AngleAxisd(heading, Vec3::UnitZ()).toRotationMatrix();
    t.translation = Vec3(x, y, z);
    poses.push_back(t);
    if (i < straight_frames) {
      x += step_length;
    } else {
      // Advance along the arc of the current heading.
      x += radius * (std::sin(heading + yaw_rate) - std::sin(heading));
      y -= radius * (std::cos(heading + yaw_rate) - std::cos(heading));
      heading += yaw_rate;
    }
  }
  return poses;
}

}  // namespace nsdf
