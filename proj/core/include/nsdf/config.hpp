#pragma once

#include "nsdf/geometry.hpp"

#include <map>
#include <string>

namespace nsdf {

/// Full pipeline configuration. File format is flat `key = value` text with
/// '#' comments; CLI flags override file values. See README for the key list.
struct SequenceConfig {
  // Input
  std::string dataset;           // scan directory (kitti .bin / ascii .xyz)
  std::string format = "kitti";  // kitti | xyz
  std::string gt_poses;          // optional ground-truth file (KITTI layout)
  bool use_gt_poses = false;     // mapping-only mode: skip registration
  std::string out_dir = "out";

  // Volume
  int levels = 10;          // octree depth L, in [8, 21]
  double leaf_size = 0.2;   // meters
  int feature_levels = 3;   // active finest levels, 1..3

  // Schedule
  int submap_every = 50;    // merge submap into the global map every s scans
  int pool_window = 20;     // replay window, scans
  double mix_ratio = 0.5;   // current-scan share of each training batch
  int batch_size = 1024;

  // Ray sampling
  int surface_samples = 4;
  int free_samples = 2;
  double band = 0.3;        // near-surface half width, meters
  double min_ray_range = 0.5;
  int normal_neighbors = 20;

  // Losses / optimizer
  double lambda1 = 0.1;
  double lambda2 = 0.1;
  double alpha = 0.08;
  double lr = 1e-4;
  int map_iterations = 100;
  int lm_iterations = 100;
  int warmup_factor = 5;  // extra training on the two predefined-pose frames

  // Clouds
  double map_voxel = 0.1;
  double odom_voxel = 0.2;
  double trim_radius = 15.0;
  Vec3 init_direction = Vec3::UnitX();

  // Output / reproducibility
  std::uint64_t seed = 1;
  std::string traj_format = "kitti";  // kitti | tum
  double mesh_resolution = 0.1;
  bool verbose = false;
  std::string on_failure = "fallback";  // fallback | halt

  // Synthetic sensor (synth subcommand and tests)
  int channels = 32;
  int azimuth_steps = 512;
  double elev_min_deg = -25.0;
  double elev_max_deg = 25.0;
  double max_range = 60.0;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

SequenceConfig parse_config_file(const std::string& path);

/// Applies one `key=value` assignment; throws on unknown keys or bad values.
void apply_config_entry(SequenceConfig& config, const std::string& key,
                        const std::string& value);

std::string config_to_string(const SequenceConfig& config);

}  // namespace nsdf
