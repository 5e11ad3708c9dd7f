#pragma once

#include "nsdf/sdf_field.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nsdf {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Eigen::Vector3i> triangles;
  std::vector<Vec3> normals;  // per-vertex, empty when not requested

  bool indices_valid() const;
};

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
  bool contains(const Vec3& p, double tol = 0.0) const {
    return (p.array() >= min.array() - tol).all() && (p.array() <= max.array() + tol).all();
  }
};

/// Tight bounds of the occupied finest-level nodes padded by one leaf;
/// nullopt for an empty volume.
std::optional<Aabb> compute_map_bounds(const HierarchicalFeatureVolume& volume);

/// Scalar field for grid extraction; nullopt marks an unmapped location.
using FieldFn = std::function<std::optional<double>(const Vec3&)>;

/// Iso-level-0 Marching Cubes over a regular grid of the given resolution.
/// Cells with any unmapped corner are skipped, leaving open boundaries.
TriangleMesh extract_mesh_from_field(const FieldFn& field, const Aabb& bounds, double resolution,
                                     bool with_normals = false);

/// Convenience wrapper: queries the implicit map over compute_map_bounds.
/// Requested normals come from normalized metric field gradients.
TriangleMesh extract_mesh(const HierarchicalFeatureVolume& volume, const SdfDecoder& decoder,
                          double resolution, bool with_normals = false);

/// Binary little-endian PLY (float32 positions/normals, int32 face indices).
void write_ply(const TriangleMesh& mesh, const std::string& path);
TriangleMesh read_ply(const std::string& path);

}  // namespace nsdf
