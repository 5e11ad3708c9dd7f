#pragma once

#include "nsdf/geometry.hpp"
#include "nsdf/morton.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

namespace nsdf {

using Vec12f = Eigen::Matrix<float, 12, 1>;

/// Hash mix for Morton keys (interleaved bits cluster badly otherwise).
struct MortonHash {
  std::size_t operator()(std::uint64_t k) const noexcept {
    k += 0x9e3779b97f4a7c15ull;
    k = (k ^ (k >> 30)) * 0xbf58476d1ce4e5b9ull;
    k = (k ^ (k >> 27)) * 0x94d049bb133111ebull;
    return static_cast<std::size_t>(k ^ (k >> 31));
  }
};

/// Node entry: Morton keys of the node's 8 corners, index c = dx + 2*dy + 4*dz.
struct NodeEntry {
  std::array<std::uint64_t, 8> corner_keys;
  bool operator==(const NodeEntry&) const = default;
};

struct LevelTables {
  std::unordered_map<std::uint64_t, NodeEntry, MortonHash> nodes;
  std::unordered_map<std::uint64_t, std::uint32_t, MortonHash> corners;
};

/// One level's share of a feature lookup: the 8 corner feature rows, their
/// trilinear weights, and the weight gradients w.r.t. the scaled point.
struct LevelLookup {
  int level = 0;  // octree level (0 = root scale)
  std::array<std::uint32_t, 8> feature_index;
  std::array<double, 8> weight;
  std::array<Vec3, 8> weight_grad;
};

struct VolumeQuery {
  Vec12f combined;  // per-level trilinear results summed
  std::array<LevelLookup, 3> levels;
  int level_count = 0;
};

struct InsertStats {
  std::vector<std::uint32_t> new_feature_indices;
  std::size_t points_inserted = 0;
  std::size_t points_skipped = 0;
};

/// Sparse octree latent store over the scaled cube [-1,1]^3.
///
/// Only the finest `active_levels` (at most 3) octree levels carry tables.
/// Per level: a node table keyed by node Morton code holding the 8 corner
/// keys, and a corner table keyed by corner Morton code holding an index
/// into the flat feature matrix. Corners are shared between sibling nodes
/// by key, so interpolated values are continuous across node boundaries.
class HierarchicalFeatureVolume {
 public:
  HierarchicalFeatureVolume() = default;
  HierarchicalFeatureVolume(int levels, double leaf_size, const Vec3& origin,
                            int active_levels = 3);

  int levels() const { return levels_; }
  int active_levels() const { return active_levels_; }
  double leaf_size() const { return leaf_size_; }
  double scale() const { return scale_; }  // 1 / (leaf_size * 2^(levels-1))
  const Vec3& origin() const { return origin_; }

  /// Octree level of active slot a (ascending, slot active_levels-1 = finest).
  int slot_level(int slot) const { return levels_ - active_levels_ + slot; }

  /// (p - origin) * scale; nullopt when any component leaves [-1, 1].
  std::optional<Vec3> scale_to_unit(const Vec3& p_world) const;
  Vec3 unscale(const Vec3& p_scaled) const { return p_scaled / scale_ + origin_; }

  /// Creates nodes/corners/features covering the given world points.
  /// New features are drawn from N(0, feature_init_std^2) with `seed`.
  InsertStats insert_points(const PointCloud& cloud_world, std::uint64_t seed);

  /// Trilinear lookup at a scaled point; nullopt when the containing node is
  /// missing at any active level (outside the mapped region).
  std::optional<VolumeQuery> query_combined_feature(const Vec3& p_scaled) const;

  /// Inserts every submap node/corner/feature absent from this volume, keeps
  /// existing entries untouched, then clears the submap's tables.
  /// Throws std::invalid_argument when the volumes' parameters differ.
  void merge_from(HierarchicalFeatureVolume& submap);

  void clear();

  std::vector<Vec12f>& features() { return features_; }
  const std::vector<Vec12f>& features() const { return features_; }
  const LevelTables& tables(int slot) const { return tables_[slot]; }

  std::size_t node_count() const;
  std::size_t corner_count() const;

  /// Referential integrity: every node corner key resolves in the corner
  /// table and every corner index lies within the feature matrix.
  bool audit() const;

  /// Grid bounds (inclusive min, exclusive max cell index) of occupied nodes
  /// at the finest level; nullopt for an empty volume.
  struct LeafBounds {
    Eigen::Vector3i min_cell;
    Eigen::Vector3i max_cell;  // inclusive
  };
  std::optional<LeafBounds> leaf_bounds() const;

  /// World-space center/size helpers for a node at `level`.
  double node_size_world(int level) const { return leaf_size_ * double(1ull << (levels_ - 1 - level)); }
  Vec3 cell_min_world(int level, const Eigen::Vector3i& cell) const;

  float feature_init_std = 0.01f;

 private:
  friend class VolumeSnapshotAccess;

  bool locate(int slot, const Vec3& p_scaled, Eigen::Vector3i& cell, Vec3& frac) const;

  int levels_ = 0;
  int active_levels_ = 0;
  double leaf_size_ = 0.0;
  double scale_ = 0.0;
  Vec3 origin_ = Vec3::Zero();
  std::array<LevelTables, 3> tables_;
  std::vector<Vec12f> features_;
};

}  // namespace nsdf
