#include "nsdf/sampling.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace nsdf {

int sample_ray(const Vec3& origin, const Vec3& endpoint, const RaySamplerConfig& cfg,
               std::mt19937_64& rng, std::vector<LabeledSample>& out,
               const std::optional<Vec3>& endpoint_normal) {
  const Vec3 delta = endpoint - origin;
  const double range = delta.norm();
  if (range <= cfg.min_range) return 0;
  const Vec3 dir = delta / range;

  int added = 0;
  std::uniform_real_distribution<double> band_dist(-cfg.band, cfg.band);
  for (int i = 0; i < cfg.surface_samples; ++i) {
    const double u = band_dist(rng);
    LabeledSample s;
    s.position = endpoint + u * dir;
    s.gt_sdf = -u;  // sensor side (u < 0) is positive
    s.surface_band = true;
    s.normal = endpoint_normal;
    out.push_back(s);
    ++added;
  }
  const double free_max = range - cfg.band;
  if (free_max > cfg.min_range) {
    std::uniform_real_distribution<double> free_dist(cfg.min_range, free_max);
    for (int i = 0; i < cfg.free_samples; ++i) {
      const double v = free_dist(rng);
      LabeledSample s;
      s.position = origin + v * dir;
      s.gt_sdf = range - v;
      s.surface_band = false;
      out.push_back(s);
      ++added;
    }
  }
  return added;
}

namespace {

struct CellKey {
  int x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::size_t h = std::size_t(k.x) * 73856093u;
    h ^= std::size_t(k.y) * 19349669u;
    h ^= std::size_t(k.z) * 83492791u;
    return h;
  }
};

}  // namespace

std::vector<std::optional<Vec3>> estimate_normals(const PointCloud& cloud, int k,
                                                  const Vec3& sensor_origin) {
  const std::size_t n = cloud.points.size();
  std::vector<std::optional<Vec3>> normals(n);
  if (int(n) < k || k < 3) {
    throw std::invalid_argument("estimate_normals: need at least k >= 3 points");
  }

  // Hash-grid cell sized so a cell holds O(k) points even for degenerate
  // (planar or collinear) clouds.
  Vec3 lo = cloud.points.front(), hi = cloud.points.front();
  for (const auto& p : cloud.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double diag = std::max((hi - lo).norm(), 1e-6);
  const double cell = std::max(diag * std::cbrt(double(k) / double(n)), 1e-4);
  const int max_ring = int(std::ceil(diag / cell)) + 2;

  std::unordered_map<CellKey, std::vector<std::uint32_t>, CellKeyHash> grid;
  grid.reserve(n);
  auto key_of = [&](const Vec3& p) {
    return CellKey{int(std::floor(p.x() / cell)), int(std::floor(p.y() / cell)),
                   int(std::floor(p.z() / cell))};
  };
  for (std::size_t i = 0; i < n; ++i) grid[key_of(cloud.points[i])].push_back(std::uint32_t(i));

  std::vector<std::pair<double, std::uint32_t>> cand;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& p = cloud.points[i];
    const CellKey ck = key_of(p);
    cand.clear();
    // Expand cube shells until the kth distance is safely inside the ring.
    for (int ring = 0; ring <= max_ring; ++ring) {
      for (int dx = -ring; dx <= ring; ++dx) {
        for (int dy = -ring; dy <= ring; ++dy) {
          for (int dz = -ring; dz <= ring; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
            auto it = grid.find(CellKey{ck.x + dx, ck.y + dy, ck.z + dz});
            if (it == grid.end()) continue;
            for (std::uint32_t j : it->second) {
              cand.emplace_back((cloud.points[j] - p).squaredNorm(), j);
            }
          }
        }
      }
      if (int(cand.size()) >= k) {
        std::nth_element(cand.begin(), cand.begin() + (k - 1), cand.end());
        const double kth = std::sqrt(cand[k - 1].first);
        if (kth <= double(ring) * cell) break;  // ring guarantees completeness
      }
      if (cand.size() == n) break;
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());

    Vec3 mean = Vec3::Zero();
    for (int j = 0; j < k; ++j) mean += cloud.points[cand[j].second];
    mean /= double(k);
    Mat3 cov = Mat3::Zero();
    for (int j = 0; j < k; ++j) {
      const Vec3 d = cloud.points[cand[j].second] - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Vec3 evals = eig.eigenvalues();  // ascending
    if (evals[2] <= 0.0 || evals[1] < 1e-10 * evals[2]) {
      normals[i] = std::nullopt;  // rank < 2 neighborhood
      continue;
    }
    Vec3 normal = eig.eigenvectors().col(0);
    if (normal.dot(sensor_origin - p) < 0.0) normal = -normal;
    normals[i] = normal;
  }
  return normals;
}

void ReplayPool::push_scan(std::vector<LabeledSample> samples) {
  total_ += samples.size();
  scans_.push_back(std::move(samples));
  while (scans_.size() > window_) {
    total_ -= scans_.front().size();
    scans_.pop_front();
  }
}

const LabeledSample& ReplayPool::sample(std::size_t flat_index) const {
  for (const auto& scan : scans_) {
    if (flat_index < scan.size()) return scan[flat_index];
    flat_index -= scan.size();
  }
  throw std::out_of_range("ReplayPool::sample");
}

std::vector<LabeledSample> assemble_training_batch(const ReplayPool& pool,
                                                   const std::vector<LabeledSample>& current,
                                                   std::size_t batch_size, double mix_ratio,
                                                   std::mt19937_64& rng) {
  if (current.empty()) throw std::invalid_argument("assemble_training_batch: no current samples");
  std::vector<LabeledSample> batch;
  batch.reserve(batch_size);
  const std::size_t n_current =
      pool.empty() ? batch_size
                   : std::min<std::size_t>(
                         batch_size, std::size_t(std::ceil(mix_ratio * double(batch_size))));
  std::uniform_int_distribution<std::size_t> cur_dist(0, current.size() - 1);
  for (std::size_t i = 0; i < n_current; ++i) batch.push_back(current[cur_dist(rng)]);
  if (!pool.empty() && n_current < batch_size) {
    std::uniform_int_distribution<std::size_t> pool_dist(0, pool.total_samples() - 1);
    for (std::size_t i = n_current; i < batch_size; ++i) {
      batch.push_back(pool.sample(pool_dist(rng)));
    }
  }
  return batch;
}

}  // namespace nsdf
