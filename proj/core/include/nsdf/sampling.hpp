#pragma once

#include "nsdf/geometry.hpp"

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <vector>

namespace nsdf {

/// One self-supervised training point. gt_sdf is the ray-projective signed
/// distance to the ray endpoint: positive on the sensor side, negative beyond.
struct LabeledSample {
  Vec3 position = Vec3::Zero();  // world meters
  double gt_sdf = 0.0;           // meters
  bool surface_band = false;
  std::optional<Vec3> normal;    // unit, endpoint normal; surface samples only
};

struct RaySamplerConfig {
  int surface_samples = 4;
  int free_samples = 2;
  double band = 0.3;       // half-width of the near-surface zone, meters
  double min_range = 0.5;  // rays shorter than this are skipped
};

/// Samples one ray. Draw order: surface offsets first, then free-space
/// ranges. Returns the number of samples appended (0 for a skipped ray).
/// Free-space samples are omitted when the ray is too short to hold the
/// (min_range, range - band) interval.
int sample_ray(const Vec3& origin, const Vec3& endpoint, const RaySamplerConfig& cfg,
               std::mt19937_64& rng, std::vector<LabeledSample>& out,
               const std::optional<Vec3>& endpoint_normal = std::nullopt);

/// PCA normals from the k nearest neighbors, oriented toward the sensor.
/// Degenerate neighborhoods (rank < 2) yield nullopt entries.
std::vector<std::optional<Vec3>> estimate_normals(const PointCloud& cloud, int k,
                                                  const Vec3& sensor_origin);

/// FIFO window of per-scan sample batches.
class ReplayPool {
 public:
  explicit ReplayPool(std::size_t window = 20) : window_(window) {}

  void push_scan(std::vector<LabeledSample> samples);
  std::size_t scan_count() const { return scans_.size(); }
  std::size_t total_samples() const { return total_; }
  bool empty() const { return total_ == 0; }
  std::size_t window() const { return window_; }

  /// Flat index across retained scans, oldest first.
  const LabeledSample& sample(std::size_t flat_index) const;

 private:
  std::size_t window_;
  std::size_t total_ = 0;
  std::deque<std::vector<LabeledSample>> scans_;
};

/// ceil(mix_ratio * batch_size) current-scan samples, remainder uniform from
/// the pool; an empty pool yields an all-current batch. Sampling is with
/// replacement and reproducible for a fixed rng state.
std::vector<LabeledSample> assemble_training_batch(const ReplayPool& pool,
                                                   const std::vector<LabeledSample>& current,
                                                   std::size_t batch_size, double mix_ratio,
                                                   std::mt19937_64& rng);

}  // namespace nsdf
