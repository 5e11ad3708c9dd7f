#include "nsdf/feature_volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace nsdf {

HierarchicalFeatureVolume::HierarchicalFeatureVolume(int levels, double leaf_size,
                                                     const Vec3& origin, int active_levels)
    : levels_(levels),
      active_levels_(active_levels),
      leaf_size_(leaf_size),
      origin_(origin) {
  if (levels < 3 || levels > 21) {
    throw std::invalid_argument("HierarchicalFeatureVolume: levels must be in [3, 21]");
  }
  if (active_levels < 1 || active_levels > 3 || active_levels > levels) {
    throw std::invalid_argument("HierarchicalFeatureVolume: active_levels must be in [1, 3]");
  }
  if (!(leaf_size > 0.0)) {
    throw std::invalid_argument("HierarchicalFeatureVolume: leaf_size must be > 0");
  }
  scale_ = 1.0 / (leaf_size * double(1ull << (levels - 1)));
}

std::optional<Vec3> HierarchicalFeatureVolume::scale_to_unit(const Vec3& p_world) const {
  const Vec3 p = (p_world - origin_) * scale_;
  if (p.cwiseAbs().maxCoeff() > 1.0) return std::nullopt;
  return p;
}

bool HierarchicalFeatureVolume::locate(int slot, const Vec3& p_scaled, Eigen::Vector3i& cell,
                                       Vec3& frac) const {
  const int level = slot_level(slot);
  const std::int64_t cells_per_edge = std::int64_t(1) << (level + 1);
  for (int a = 0; a < 3; ++a) {
    const double g = std::ldexp(p_scaled[a] + 1.0, level);  // (p+1) * 2^level
    const double f = std::floor(g);
    const std::int64_t i = static_cast<std::int64_t>(f);
    if (i < 0 || i >= cells_per_edge) return false;
    cell[a] = static_cast<int>(i);
    frac[a] = g - f;
  }
  return true;
}

InsertStats HierarchicalFeatureVolume::insert_points(const PointCloud& cloud_world,
                                                     std::uint64_t seed) {
  InsertStats stats;
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> gauss(0.0f, feature_init_std);

  for (const auto& p_world : cloud_world.points) {
    const auto scaled = scale_to_unit(p_world);
    Eigen::Vector3i finest_cell;
    Vec3 frac;
    // Corner coordinates reach cell+1 at the finest level; require the whole
    // corner stencil to be Morton-encodable before touching any table.
    if (!scaled || !locate(active_levels_ - 1, *scaled, finest_cell, frac) ||
        !morton_encodable(finest_cell.x() + 1, finest_cell.y() + 1, finest_cell.z() + 1)) {
      ++stats.points_skipped;
      continue;
    }
    for (int slot = 0; slot < active_levels_; ++slot) {
      Eigen::Vector3i cell;
      locate(slot, *scaled, cell, frac);
      const std::uint64_t node_key = morton_encode(cell.x(), cell.y(), cell.z());
      auto& tables = tables_[slot];
      if (tables.nodes.contains(node_key)) continue;
      NodeEntry entry;
      for (int c = 0; c < 8; ++c) {
        const std::uint32_t cx = cell.x() + (c & 1);
        const std::uint32_t cy = cell.y() + ((c >> 1) & 1);
        const std::uint32_t cz = cell.z() + ((c >> 2) & 1);
        const std::uint64_t corner_key = morton_encode(cx, cy, cz);
        entry.corner_keys[c] = corner_key;
        auto [it, inserted] =
            tables.corners.try_emplace(corner_key, std::uint32_t(features_.size()));
        if (inserted) {
          Vec12f f;
          for (int i = 0; i < 12; ++i) f[i] = gauss(rng);
          features_.push_back(f);
          stats.new_feature_indices.push_back(it->second);
        }
      }
      tables.nodes.emplace(node_key, entry);
    }
    ++stats.points_inserted;
  }
  return stats;
}

std::optional<VolumeQuery> HierarchicalFeatureVolume::query_combined_feature(
    const Vec3& p_scaled) const {
  if (!p_scaled.allFinite()) return std::nullopt;
  VolumeQuery q;
  q.combined.setZero();
  for (int slot = 0; slot < active_levels_; ++slot) {
    Eigen::Vector3i cell;
    Vec3 frac;
    if (!locate(slot, p_scaled, cell, frac)) return std::nullopt;
    const auto& tables = tables_[slot];
    const auto node_it = tables.nodes.find(morton_encode(cell.x(), cell.y(), cell.z()));
    if (node_it == tables.nodes.end()) return std::nullopt;

    LevelLookup& lk = q.levels[q.level_count];
    lk.level = slot_level(slot);
    const double dg = std::ldexp(1.0, lk.level);  // d(grid)/d(p_scaled)
    const double wx[2] = {1.0 - frac.x(), frac.x()};
    const double wy[2] = {1.0 - frac.y(), frac.y()};
    const double wz[2] = {1.0 - frac.z(), frac.z()};
    Vec12f level_sum = Vec12f::Zero();
    for (int c = 0; c < 8; ++c) {
      const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
      const auto corner_it = tables.corners.find(node_it->second.corner_keys[c]);
      const std::uint32_t fi = corner_it->second;
      const double w = wx[dx] * wy[dy] * wz[dz];
      lk.feature_index[c] = fi;
      lk.weight[c] = w;
      lk.weight_grad[c] = Vec3((dx ? 1.0 : -1.0) * wy[dy] * wz[dz],
                               (dy ? 1.0 : -1.0) * wx[dx] * wz[dz],
                               (dz ? 1.0 : -1.0) * wx[dx] * wy[dy]) *
                          dg;
      level_sum += static_cast<float>(w) * features_[fi];
    }
    q.combined += level_sum;
    ++q.level_count;
  }
  return q;
}

void HierarchicalFeatureVolume::merge_from(HierarchicalFeatureVolume& submap) {
  if (submap.levels_ != levels_ || submap.active_levels_ != active_levels_ ||
      submap.leaf_size_ != leaf_size_ || submap.origin_ != origin_) {
    throw std::invalid_argument("merge_from: volume parameters differ");
  }
  for (int slot = 0; slot < active_levels_; ++slot) {
    auto& dst = tables_[slot];
    auto& src = submap.tables_[slot];

    std::vector<std::uint64_t> node_keys;
    node_keys.reserve(src.nodes.size());
    for (const auto& [key, entry] : src.nodes) node_keys.push_back(key);
    std::sort(node_keys.begin(), node_keys.end());
    for (const std::uint64_t key : node_keys) {
      if (!dst.nodes.contains(key)) dst.nodes.emplace(key, src.nodes.at(key));
    }

    std::vector<std::uint64_t> corner_keys;
    corner_keys.reserve(src.corners.size());
    for (const auto& [key, idx] : src.corners) corner_keys.push_back(key);
    std::sort(corner_keys.begin(), corner_keys.end());
    for (const std::uint64_t key : corner_keys) {
      if (dst.corners.contains(key)) continue;
      dst.corners.emplace(key, std::uint32_t(features_.size()));
      features_.push_back(submap.features_[src.corners.at(key)]);
    }
  }
  for (auto& t : submap.tables_) {
    t.nodes.clear();
    t.corners.clear();
  }
  submap.features_.clear();
}

void HierarchicalFeatureVolume::clear() {
  for (auto& t : tables_) {
    t.nodes.clear();
    t.corners.clear();
  }
  features_.clear();
}

std::size_t HierarchicalFeatureVolume::node_count() const {
  std::size_t n = 0;
  for (const auto& t : tables_) n += t.nodes.size();
  return n;
}

std::size_t HierarchicalFeatureVolume::corner_count() const {
  std::size_t n = 0;
  for (const auto& t : tables_) n += t.corners.size();
  return n;
}

bool HierarchicalFeatureVolume::audit() const {
  for (int slot = 0; slot < active_levels_; ++slot) {
    const auto& t = tables_[slot];
    for (const auto& [key, entry] : t.nodes) {
      for (const std::uint64_t ck : entry.corner_keys) {
        if (!t.corners.contains(ck)) return false;
      }
    }
    for (const auto& [key, idx] : t.corners) {
      if (idx >= features_.size()) return false;
      if (!features_[idx].allFinite()) return false;
    }
  }
  return true;
}

std::optional<HierarchicalFeatureVolume::LeafBounds> HierarchicalFeatureVolume::leaf_bounds()
    const {
  const auto& leaves = tables_[active_levels_ - 1].nodes;
  if (leaves.empty()) return std::nullopt;
  LeafBounds b;
  b.min_cell = Eigen::Vector3i::Constant(std::numeric_limits<int>::max());
  b.max_cell = Eigen::Vector3i::Constant(std::numeric_limits<int>::min());
  for (const auto& [key, entry] : leaves) {
    const auto [ix, iy, iz] = morton_decode(key);
    const Eigen::Vector3i c{int(ix), int(iy), int(iz)};
    b.min_cell = b.min_cell.cwiseMin(c);
    b.max_cell = b.max_cell.cwiseMax(c);
  }
  return b;
}

Vec3 HierarchicalFeatureVolume::cell_min_world(int level, const Eigen::Vector3i& cell) const {
  const double size_scaled = std::ldexp(1.0, -level);  // 2 / 2^(level+1)
  const Vec3 p_scaled = Vec3(cell.x(), cell.y(), cell.z()) * size_scaled - Vec3::Ones();
  return unscale(p_scaled);
}

}  // namespace nsdf
