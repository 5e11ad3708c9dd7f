#include "nsdf/pipeline.hpp"

#include "nsdf/kitti_io.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace nsdf {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t frame, std::uint64_t purpose) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (frame + 1) + (purpose << 32);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

FileScanSource::FileScanSource(const std::string& directory, const std::string& format) {
  kitti_ = format == "kitti";
  files_ = list_scan_files(directory, kitti_ ? ".bin" : ".xyz");
  if (files_.empty()) {
    throw std::runtime_error("FileScanSource: no scans found in " + directory);
  }
}

PointCloud FileScanSource::scan(std::size_t index) {
  return kitti_ ? read_kitti_scan(files_.at(index)) : read_xyz_scan(files_.at(index));
}

SequenceResult run_sequence(const SequenceConfig& config, ScanSource& source) {
  return run_sequence(config, source, nullptr);
}

SequenceResult run_sequence(const SequenceConfig& config, ScanSource& source,
                            const std::vector<RigidTransform>* gt) {
  config.validate();
  if (source.size() < 2) throw std::invalid_argument("run_sequence: need at least 2 scans");
  if (config.use_gt_poses && (gt == nullptr || gt->size() < source.size())) {
    throw std::invalid_argument("run_sequence: use_gt_poses set but poses missing");
  }

  SequenceResult result;
  SdfDecoder decoder = SdfDecoder::init(config.seed);
  HierarchicalFeatureVolume global;  // origin fixed at frame 0
  HierarchicalFeatureVolume submap;
  MappingOptimizer optimizer;
  ReplayPool pool(std::size_t(config.pool_window));

  RaySamplerConfig sampler;
  sampler.surface_samples = config.surface_samples;
  sampler.free_samples = config.free_samples;
  sampler.band = config.band;
  sampler.min_range = config.min_ray_range;

  LossWeights weights{config.lambda1, config.lambda2, config.alpha};
  AdamConfig adam;
  adam.lr = config.lr;
  LmConfig lm;
  lm.max_iterations = config.lm_iterations;

  const std::size_t n_frames = source.size();
  RigidTransform pose_prev, pose_prev2;

  for (std::size_t t = 0; t < n_frames; ++t) {
    FrameDiagnostics diag;
    diag.frame = int(t);

    PointCloud raw = source.scan(t);
    raw = trim_by_range(raw, config.trim_radius);
    const PointCloud odom_cloud = voxel_downsample(raw, config.odom_voxel);
    const PointCloud map_cloud = voxel_downsample(raw, config.map_voxel);

    // --- Pose ---
    RigidTransform pose;
    const auto odo_start = std::chrono::steady_clock::now();
    if (config.use_gt_poses) {
      pose = (*gt)[t];
    } else if (t == 0) {
      pose = RigidTransform::identity();
    } else if (t == 1) {
      pose = compose(pose_prev,
                     second_scan_init(2.0 * config.trim_radius, config.init_direction));
    } else {
      const RigidTransform predicted = predict_initial_pose(pose_prev, pose_prev2);
      const PoseEstimate est = register_scan(odom_cloud, submap, decoder, predicted, lm);
      diag.status = est.status;
      diag.lm_iterations = est.iterations;
      diag.mean_sq_residual = est.mean_sq_residual;
      if (est.status == RegistrationStatus::Ok) {
        pose = est.pose;
      } else if (config.on_failure == "halt") {
        throw std::runtime_error("run_sequence: registration failed at frame " +
                                 std::to_string(t));
      } else {
        pose = predicted;  // constant-motion fallback
        diag.used_fallback = true;
        ++result.fallback_count;
      }
    }
    diag.odometry_seconds = seconds_since(odo_start);

    if (t == 0) {
      global = HierarchicalFeatureVolume(config.levels, config.leaf_size, pose.translation,
                                         config.feature_levels);
      submap = HierarchicalFeatureVolume(config.levels, config.leaf_size, pose.translation,
                                         config.feature_levels);
    }
    pose = pose.orthonormalized();
    result.trajectory.push_back({std::int64_t(t), pose});

    // --- Submap rollover before this frame's insertions ---
    if (t > 0 && config.submap_every > 0 && t % std::size_t(config.submap_every) == 0) {
      global.merge_from(submap);
      optimizer.feature_state.reset();
      ++result.merge_count;
    }

    // --- Mapping ---
    const auto map_start = std::chrono::steady_clock::now();
    const PointCloud endpoints_world = to_world(pose, map_cloud);
    const auto normals =
        int(endpoints_world.size()) >= config.normal_neighbors
            ? estimate_normals(endpoints_world, config.normal_neighbors, pose.translation)
            : std::vector<std::optional<Vec3>>(endpoints_world.size(), std::nullopt);

    std::vector<LabeledSample> samples;
    samples.reserve(endpoints_world.size() *
                    std::size_t(config.surface_samples + config.free_samples));
    std::mt19937_64 ray_rng(mix_seed(config.seed, t, 0));
    for (std::size_t i = 0; i < endpoints_world.size(); ++i) {
      sample_ray(pose.translation, endpoints_world.points[i], sampler, ray_rng, samples,
                 normals[i]);
    }
    if (samples.empty()) {
      throw std::runtime_error("run_sequence: no usable rays at frame " + std::to_string(t));
    }

    PointCloud sample_positions;
    sample_positions.frame = Frame::World;
    sample_positions.points.reserve(samples.size());
    for (const auto& s : samples) sample_positions.points.push_back(s.position);
    const InsertStats ins = submap.insert_points(sample_positions, mix_seed(config.seed, t, 1));
    diag.out_of_volume_points = ins.points_skipped;

    // The first two scans carry predefined poses; giving them a longer
    // optimization warms the decoder up before registration starts at t = 2.
    const int iterations =
        t < 2 ? config.map_iterations * config.warmup_factor : config.map_iterations;
    std::mt19937_64 batch_rng(mix_seed(config.seed, t, 2));
    std::vector<std::vector<LabeledSample>> batches;
    batches.reserve(iterations);
    for (int it = 0; it < iterations; ++it) {
      batches.push_back(assemble_training_batch(pool, samples, std::size_t(config.batch_size),
                                                config.mix_ratio, batch_rng));
    }
    TrainTrace trace =
        train_frame(submap, decoder, batches, iterations, weights, adam, optimizer);
    diag.final_loss = trace.iterations.back().total;
    if (config.verbose) result.traces.push_back(std::move(trace));
    pool.push_scan(std::move(samples));
    diag.mapping_seconds = seconds_since(map_start);

    result.frames.push_back(diag);
    pose_prev2 = pose_prev;
    pose_prev = pose;
  }

  global.merge_from(submap);
  ++result.merge_count;
  result.global_volume = std::move(global);
  result.decoder = decoder;
  return result;
}

void write_timings_csv(const std::vector<FrameDiagnostics>& frames, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_timings_csv: cannot open " + path);
  out << "frame,odometry_s,mapping_s,status,fallback\n";
  for (const auto& f : frames) {
    const char* status = "ok";
    switch (f.status) {
      case RegistrationStatus::Ok: status = "ok"; break;
      case RegistrationStatus::Infeasible: status = "infeasible"; break;
      case RegistrationStatus::Diverged: status = "diverged"; break;
      case RegistrationStatus::StepFailed: status = "step_failed"; break;
    }
    out << f.frame << ',' << f.odometry_seconds << ',' << f.mapping_seconds << ',' << status
        << ',' << (f.used_fallback ? 1 : 0) << '\n';
  }
}

void write_loss_csv(const std::vector<TrainTrace>& traces, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_loss_csv: cannot open " + path);
  out << "frame,iteration,bce,eikonal,direction,total\n";
  for (std::size_t f = 0; f < traces.size(); ++f) {
    for (std::size_t i = 0; i < traces[f].iterations.size(); ++i) {
      const auto& l = traces[f].iterations[i];
      out << f << ',' << i << ',' << l.bce << ',' << l.eikonal << ',' << l.direction << ','
          << l.total << '\n';
    }
  }
}

}  // namespace nsdf
