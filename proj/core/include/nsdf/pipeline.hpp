#pragma once

#include "nsdf/config.hpp"
#include "nsdf/odometry.hpp"
#include "nsdf/sampling.hpp"
#include "nsdf/synth.hpp"
#include "nsdf/trainer.hpp"
#include "nsdf/trajectory.hpp"

#include <memory>

namespace nsdf {

/// Sequential scan provider.
class ScanSource {
 public:
  virtual ~ScanSource() = default;
  virtual std::size_t size() const = 0;
  virtual PointCloud scan(std::size_t index) = 0;
};

/// Directory of .bin (KITTI layout) or .xyz scans, sorted by filename.
class FileScanSource final : public ScanSource {
 public:
  FileScanSource(const std::string& directory, const std::string& format);
  std::size_t size() const override { return files_.size(); }
  PointCloud scan(std::size_t index) override;

 private:
  std::vector<std::string> files_;
  bool kitti_ = true;
};

/// Scans rendered on demand from an analytic scene along scripted poses.
class SynthScanSource final : public ScanSource {
 public:
  SynthScanSource(SynthScene scene, std::vector<RigidTransform> poses, LidarModel lidar)
      : scene_(std::move(scene)), poses_(std::move(poses)), lidar_(lidar) {}
  std::size_t size() const override { return poses_.size(); }
  PointCloud scan(std::size_t index) override {
    return synth_scan(scene_, poses_.at(index), lidar_);
  }
  const std::vector<RigidTransform>& poses() const { return poses_; }

 private:
  SynthScene scene_;
  std::vector<RigidTransform> poses_;
  LidarModel lidar_;
};

struct FrameDiagnostics {
  int frame = 0;
  double odometry_seconds = 0.0;
  double mapping_seconds = 0.0;
  RegistrationStatus status = RegistrationStatus::Ok;
  bool used_fallback = false;
  int lm_iterations = 0;
  double mean_sq_residual = 0.0;
  std::size_t out_of_volume_points = 0;
  double final_loss = 0.0;
};

struct SequenceResult {
  Trajectory trajectory;
  HierarchicalFeatureVolume global_volume;
  SdfDecoder decoder;
  std::vector<FrameDiagnostics> frames;
  std::vector<TrainTrace> traces;  // populated when config.verbose
  std::size_t fallback_count = 0;
  std::size_t merge_count = 0;
};

/// The full per-frame loop: predict, register against the current submap,
/// transform, sample rays, insert, train, and merge the submap into the
/// global map on schedule. Needs at least 2 scans.
SequenceResult run_sequence(const SequenceConfig& config, ScanSource& source);

/// Frame 0/1 fixed poses plus registration from frame 2 on; with
/// config.use_gt_poses every pose is taken from `gt` and odometry is skipped.
SequenceResult run_sequence(const SequenceConfig& config, ScanSource& source,
                            const std::vector<RigidTransform>* gt);

/// Per-frame timing CSV: frame,odometry_s,mapping_s,status,fallback.
void write_timings_csv(const std::vector<FrameDiagnostics>& frames, const std::string& path);

/// Loss trace CSV: frame,iteration,bce,eikonal,direction,total.
void write_loss_csv(const std::vector<TrainTrace>& traces, const std::string& path);

}  // namespace nsdf
