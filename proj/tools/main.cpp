#include "nsdf/kitti_io.hpp"
#include "nsdf/mesh.hpp"
#include "nsdf/pipeline.hpp"
#include "nsdf/snapshot.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace nsdf;

namespace {

TrajectoryFormat parse_traj_format(const std::string& name) {
  if (name == "kitti") return TrajectoryFormat::Kitti;
  if (name == "tum") return TrajectoryFormat::Tum;
  throw CLI::ValidationError("format", "expected kitti|tum");
}

SequenceConfig load_config(const std::string& config_path,
                           const std::vector<std::string>& overrides) {
  SequenceConfig config =
      config_path.empty() ? SequenceConfig{} : parse_config_file(config_path);
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw CLI::ValidationError("--set", "expected key=value, got '" + kv + "'");
    }
    apply_config_entry(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return config;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides) {
  SequenceConfig config = load_config(config_path, overrides);
  config.validate();
  if (config.dataset.empty()) {
    std::cerr << "run: config needs a dataset directory\n";
    return 1;
  }
  FileScanSource source(config.dataset, config.format);

  std::vector<RigidTransform> gt_poses;
  if (!config.gt_poses.empty()) {
    for (const auto& rec : read_trajectory(TrajectoryFormat::Kitti, config.gt_poses)) {
      gt_poses.push_back(rec.pose);
    }
  }
  if (config.use_gt_poses && gt_poses.size() < source.size()) {
    std::cerr << "run: use_gt_poses needs gt_poses covering every scan\n";
    return 1;
  }

  fs::create_directories(config.out_dir);
  const SequenceResult result =
      run_sequence(config, source, gt_poses.empty() ? nullptr : &gt_poses);

  const std::string traj_path = config.out_dir + "/trajectory.txt";
  write_trajectory(result.trajectory, parse_traj_format(config.traj_format), traj_path);
  save_snapshot(result.global_volume, result.decoder, config.out_dir + "/snapshot.bin");
  write_timings_csv(result.frames, config.out_dir + "/timings.csv");
  if (config.verbose) write_loss_csv(result.traces, config.out_dir + "/losses.csv");

  double odo = 0.0, map = 0.0;
  for (const auto& f : result.frames) {
    odo += f.odometry_seconds;
    map += f.mapping_seconds;
  }
  std::cout << "frames:       " << result.trajectory.size() << "\n"
            << "odometry:     " << odo << " s\n"
            << "mapping:      " << map << " s\n"
            << "fallbacks:    " << result.fallback_count << "\n"
            << "submap merges " << result.merge_count << "\n"
            << "features:     " << result.global_volume.features().size() << "\n"
            << "trajectory:   " << traj_path << "\n";
  return 0;
}

int cmd_mesh(const std::string& snapshot_path, const std::string& out_path, double resolution,
             bool normals) {
  const Snapshot snap = load_snapshot(snapshot_path);
  const TriangleMesh mesh = extract_mesh(snap.volume, snap.decoder, resolution, normals);
  if (mesh.vertices.empty()) {
    std::cerr << "mesh: the map is empty\n";
    return 1;
  }
  write_ply(mesh, out_path);
  std::cout << "vertices:  " << mesh.vertices.size() << "\n"
            << "triangles: " << mesh.triangles.size() << "\n"
            << "mesh:      " << out_path << "\n";
  return 0;
}

int cmd_eval_ate(const std::string& est, const std::string& gt, const std::string& format) {
  const auto f = parse_traj_format(format);
  const double rmse = evaluate_ate(read_trajectory(f, est), read_trajectory(f, gt));
  std::cout << "ATE RMSE: " << rmse << " m\n";
  return 0;
}

int cmd_eval_drift(const std::string& est, const std::string& gt, const std::string& format,
                   std::vector<double> segments) {
  const auto f = parse_traj_format(format);
  if (segments.empty()) segments = {5, 10, 20, 40};
  const double drift =
      evaluate_relative_drift(read_trajectory(f, est), read_trajectory(f, gt), segments);
  std::cout << "relative drift: " << drift << " %\n";
  return 0;
}

int cmd_synth(const std::string& scene_name, int frames, const std::string& out_dir,
              double step, const std::vector<std::string>& overrides) {
  SequenceConfig config = load_config("", overrides);
  const SynthScene scene = make_scene(scene_name);
  const auto poses = make_trajectory(scene_name, frames, step);
  LidarModel lidar{config.channels, config.azimuth_steps, config.elev_min_deg,
                   config.elev_max_deg, config.max_range};

  fs::create_directories(out_dir);
  Trajectory gt;
  for (int i = 0; i < frames; ++i) {
    const PointCloud cloud = synth_scan(scene, poses[i], lidar);
    char name[32];
    std::snprintf(name, sizeof(name), "%06d.bin", i);
    write_kitti_scan(cloud, out_dir + "/" + name);
    gt.push_back({i, poses[i]});
  }
  write_trajectory(gt, TrajectoryFormat::Kitti, out_dir + "/poses_gt.txt");

  config.dataset = out_dir;
  config.format = "kitti";
  config.gt_poses = out_dir + "/poses_gt.txt";
  config.out_dir = out_dir + "/run";
  std::ofstream cfg(out_dir + "/sequence.cfg");
  cfg << config_to_string(config);

  std::cout << "scans:  " << frames << " -> " << out_dir << "\n"
            << "poses:  " << out_dir << "/poses_gt.txt\n"
            << "config: " << out_dir << "/sequence.cfg\n";
  return 0;
}

int cmd_snapshot(const std::string& in_path, const std::string& copy_path) {
  const Snapshot snap = load_snapshot(in_path);
  std::cout << "levels:         " << snap.volume.levels() << "\n"
            << "active levels:  " << snap.volume.active_levels() << "\n"
            << "leaf size:      " << snap.volume.leaf_size() << " m\n"
            << "scale:          " << snap.volume.scale() << " 1/m\n"
            << "origin:         " << snap.volume.origin().transpose() << "\n"
            << "nodes:          " << snap.volume.node_count() << "\n"
            << "corners:        " << snap.volume.corner_count() << "\n"
            << "features:       " << snap.volume.features().size() << "\n"
            << "integrity:      " << (snap.volume.audit() ? "ok" : "BROKEN") << "\n";
  if (!copy_path.empty()) {
    save_snapshot(snap.volume, snap.decoder, copy_path);
    std::cout << "copy:           " << copy_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR odometry and mapping on a neural signed distance field"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", snapshot_path, out_path;
  std::string est_path, gt_path, traj_format = "kitti";
  std::string scene_name = "room";
  std::vector<std::string> overrides;
  std::vector<double> segments;
  double resolution = 0.1, step = 0.3;
  int frames = 100;
  bool normals = false;

  auto* run = app.add_subcommand("run", "Run odometry and mapping over a scan directory");
  run->add_option("-c,--config", config_path, "Config file (key = value lines)");
  run->add_option("--set", overrides, "Override config entries, key=value")->take_all();

  auto* mesh = app.add_subcommand("mesh", "Extract a triangle mesh from a snapshot");
  mesh->add_option("-s,--snapshot", snapshot_path, "Snapshot file")->required();
  mesh->add_option("-o,--out", out_path, "Output PLY")->required();
  mesh->add_option("-r,--resolution", resolution, "Grid resolution, meters");
  mesh->add_flag("-n,--normals", normals, "Write per-vertex normals");

  auto* ate = app.add_subcommand("eval-ate", "Trajectory ATE RMSE after rigid alignment");
  ate->add_option("--est", est_path, "Estimated trajectory")->required();
  ate->add_option("--gt", gt_path, "Ground-truth trajectory")->required();
  ate->add_option("--format", traj_format, "kitti|tum");

  auto* drift = app.add_subcommand("eval-drift", "KITTI-style relative translational drift");
  drift->add_option("--est", est_path, "Estimated trajectory")->required();
  drift->add_option("--gt", gt_path, "Ground-truth trajectory")->required();
  drift->add_option("--format", traj_format, "kitti|tum");
  drift->add_option("--segments", segments, "Segment lengths, meters")->take_all();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic scan sequence");
  synth->add_option("--scene", scene_name, "box|room");
  synth->add_option("--frames", frames, "Frame count");
  synth->add_option("--step", step, "Path step per frame, meters");
  synth->add_option("-o,--out", out_dir, "Output directory")->required();
  synth->add_option("--set", overrides, "Sensor overrides, key=value")->take_all();

  auto* snap = app.add_subcommand("snapshot", "Inspect or round-trip a snapshot file");
  snap->add_option("-i,--in", snapshot_path, "Snapshot file")->required();
  snap->add_option("--copy", out_path, "Re-save to this path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, overrides);
    if (mesh->parsed()) return cmd_mesh(snapshot_path, out_path, resolution, normals);
    if (ate->parsed()) return cmd_eval_ate(est_path, gt_path, traj_format);
    if (drift->parsed()) return cmd_eval_drift(est_path, gt_path, traj_format, segments);
    if (synth->parsed()) return cmd_synth(scene_name, frames, out_dir, step, overrides);
    if (snap->parsed()) return cmd_snapshot(snapshot_path, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
