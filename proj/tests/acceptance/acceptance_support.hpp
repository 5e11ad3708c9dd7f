#pragma once

// Helpers for the acceptance suite: exact point-to-mesh distance with a
// uniform-grid accelerator and a PLY structure validator.

#include "nsdf/mesh.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>
#include <vector>

namespace nsdf::acceptance {

inline double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b,
                                      const Vec3& c) {
  // Ericson, Real-Time Collision Detection: closest point on triangle.
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return (p - a).norm();
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return (p - b).norm();
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return (p - (a + v * ab)).norm();
  }
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return (p - c).norm();
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return (p - (a + w * ac)).norm();
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return (p - (b + w * (c - b))).norm();
  }
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return (p - (a + v * ab + w * ac)).norm();
}

/// Uniform-grid index over mesh triangles for nearest-surface queries.
class MeshDistanceIndex {
 public:
  explicit MeshDistanceIndex(const TriangleMesh& mesh, double cell = 0.4)
      : mesh_(mesh), cell_(cell) {
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
      const auto& tri = mesh.triangles[t];
      Vec3 lo = mesh.vertices[tri[0]].cwiseMin(mesh.vertices[tri[1]])
                    .cwiseMin(mesh.vertices[tri[2]]);
      Vec3 hi = mesh.vertices[tri[0]].cwiseMax(mesh.vertices[tri[1]])
                    .cwiseMax(mesh.vertices[tri[2]]);
      const Eigen::Vector3i lo_c = cell_of(lo), hi_c = cell_of(hi);
      for (int x = lo_c.x(); x <= hi_c.x(); ++x) {
        for (int y = lo_c.y(); y <= hi_c.y(); ++y) {
          for (int z = lo_c.z(); z <= hi_c.z(); ++z) {
            grid_[key(x, y, z)].push_back(std::uint32_t(t));
          }
        }
      }
    }
  }

  double distance(const Vec3& p, double max_search = 8.0) const {
    const Eigen::Vector3i c = cell_of(p);
    double best = std::numeric_limits<double>::infinity();
    const int max_ring = int(std::ceil(max_search / cell_)) + 1;
    for (int ring = 0; ring <= max_ring; ++ring) {
      if (best <= (double(ring) - 1.0) * cell_) break;  // ring cannot improve
      for (int dx = -ring; dx <= ring; ++dx) {
        for (int dy = -ring; dy <= ring; ++dy) {
          for (int dz = -ring; dz <= ring; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
            const auto it = grid_.find(key(c.x() + dx, c.y() + dy, c.z() + dz));
            if (it == grid_.end()) continue;
            for (const std::uint32_t t : it->second) {
              const auto& tri = mesh_.triangles[t];
              best = std::min(best, point_triangle_distance(p, mesh_.vertices[tri[0]],
                                                            mesh_.vertices[tri[1]],
                                                            mesh_.vertices[tri[2]]));
            }
          }
        }
      }
    }
    return best;
  }

 private:
  Eigen::Vector3i cell_of(const Vec3& p) const {
    return {int(std::floor(p.x() / cell_)), int(std::floor(p.y() / cell_)),
            int(std::floor(p.z() / cell_))};
  }
  static std::uint64_t key(int x, int y, int z) {
    const auto u = [](int v) { return std::uint64_t(std::uint32_t(v + (1 << 20))); };
    return (u(x) << 42) ^ (u(y) << 21) ^ u(z);
  }

  const TriangleMesh& mesh_;
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> grid_;
};

/// Checks a binary little-endian PLY against its own header: element counts,
/// property layout, body size, and face index bounds.
inline bool validate_ply_structure(const std::string& path, std::string& why) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    why = "cannot open " + path;
    return false;
  }
  std::string line;
  std::getline(in, line);
  if (line != "ply") {
    why = "missing ply magic";
    return false;
  }
  std::getline(in, line);
  if (line != "format binary_little_endian 1.0") {
    why = "unexpected format line: " + line;
    return false;
  }
  std::size_t n_vertex = 0, n_face = 0;
  int vertex_floats = 0;
  bool in_vertex = false, got_list = false;
  while (std::getline(in, line)) {
    if (line.rfind("element vertex ", 0) == 0) {
      n_vertex = std::stoull(line.substr(15));
      in_vertex = true;
    } else if (line.rfind("element face ", 0) == 0) {
      n_face = std::stoull(line.substr(13));
      in_vertex = false;
    } else if (line.rfind("property float ", 0) == 0 && in_vertex) {
      ++vertex_floats;
    } else if (line == "property list uchar int vertex_indices") {
      got_list = true;
    } else if (line == "end_header") {
      break;
    } else if (line.rfind("property", 0) == 0) {
      why = "unsupported property: " + line;
      return false;
    }
  }
  if (vertex_floats != 3 && vertex_floats != 6) {
    why = "expected 3 or 6 vertex floats, got " + std::to_string(vertex_floats);
    return false;
  }
  if (n_face > 0 && !got_list) {
    why = "face element without a vertex_indices list";
    return false;
  }
  for (std::size_t i = 0; i < n_vertex; ++i) {
    float v[6];
    in.read(reinterpret_cast<char*>(v), vertex_floats * sizeof(float));
    if (!in) {
      why = "vertex body truncated at " + std::to_string(i);
      return false;
    }
    for (int k = 0; k < vertex_floats; ++k) {
      if (!std::isfinite(v[k])) {
        why = "non-finite vertex value";
        return false;
      }
    }
  }
  for (std::size_t i = 0; i < n_face; ++i) {
    std::uint8_t count;
    in.read(reinterpret_cast<char*>(&count), 1);
    if (!in || count != 3) {
      why = "face " + std::to_string(i) + " is not a triangle";
      return false;
    }
    std::int32_t idx[3];
    in.read(reinterpret_cast<char*>(idx), sizeof(idx));
    if (!in) {
      why = "face body truncated";
      return false;
    }
    for (const std::int32_t k : idx) {
      if (k < 0 || std::size_t(k) >= n_vertex) {
        why = "face index out of range";
        return false;
      }
    }
  }
  in.peek();
  if (!in.eof()) {
    why = "trailing bytes after face data";
    return false;
  }
  return true;
}

}  // namespace nsdf::acceptance
