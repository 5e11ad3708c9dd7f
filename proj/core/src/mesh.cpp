#include "nsdf/mesh.hpp"

#include "nsdf/mc_tables.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace nsdf {

bool TriangleMesh::indices_valid() const {
  const int n = int(vertices.size());
  for (const auto& t : triangles) {
    for (int i = 0; i < 3; ++i) {
      if (t[i] < 0 || t[i] >= n) return false;
    }
  }
  return true;
}

std::optional<Aabb> compute_map_bounds(const HierarchicalFeatureVolume& volume) {
  const auto bounds = volume.leaf_bounds();
  if (!bounds) return std::nullopt;
  const int finest = volume.levels() - 1;
  const double leaf = volume.node_size_world(finest);
  Aabb box;
  box.min = volume.cell_min_world(finest, bounds->min_cell) - Vec3::Constant(leaf);
  box.max = volume.cell_min_world(finest, bounds->max_cell) + Vec3::Constant(2.0 * leaf);
  return box;
}

namespace {

struct EdgeKey {
  // Grid vertex id of the edge's low corner plus the edge axis.
  std::uint64_t vertex;
  std::uint8_t axis;
  bool operator==(const EdgeKey&) const = default;
};

struct EdgeKeyHash {
  std::size_t operator()(const EdgeKey& k) const noexcept {
    return std::hash<std::uint64_t>()(k.vertex * 3 + k.axis);
  }
};

}  // namespace

TriangleMesh extract_mesh_from_field(const FieldFn& field, const Aabb& bounds, double resolution,
                                     bool with_normals) {
  if (!(resolution > 0.0)) {
    throw std::invalid_argument("extract_mesh_from_field: resolution must be > 0");
  }
  const Vec3 extent = bounds.max - bounds.min;
  const int nx = std::max(1, int(std::ceil(extent.x() / resolution))) + 1;
  const int ny = std::max(1, int(std::ceil(extent.y() / resolution))) + 1;
  const int nz = std::max(1, int(std::ceil(extent.z() / resolution))) + 1;

  auto grid_point = [&](int i, int j, int k) {
    return Vec3(bounds.min.x() + i * resolution, bounds.min.y() + j * resolution,
                bounds.min.z() + k * resolution);
  };

  // Sampled values; NaN marks unmapped grid vertices.
  std::vector<float> values(std::size_t(nx) * ny * nz);
  auto vid = [&](int i, int j, int k) {
    return std::size_t(k) * nx * ny + std::size_t(j) * nx + i;
  };
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const auto v = field(grid_point(i, j, k));
        values[vid(i, j, k)] = v ? float(*v) : std::numeric_limits<float>::quiet_NaN();
      }
    }
  }

  TriangleMesh mesh;
  std::unordered_map<EdgeKey, int, EdgeKeyHash> edge_vertex;

  auto edge_axis = [](int e) -> std::uint8_t {
    // Axis of each cube edge in the corner numbering of mc::kEdgeCorners.
    constexpr std::uint8_t axis[12] = {0, 1, 0, 1, 0, 1, 0, 1, 2, 2, 2, 2};
    return axis[e];
  };

  for (int k = 0; k + 1 < nz; ++k) {
    for (int j = 0; j + 1 < ny; ++j) {
      for (int i = 0; i + 1 < nx; ++i) {
        float corner_value[8];
        std::uint64_t corner_id[8];
        bool usable = true;
        for (int c = 0; c < 8; ++c) {
          const int ci = i + mc::kCornerOffset[c][0];
          const int cj = j + mc::kCornerOffset[c][1];
          const int ck = k + mc::kCornerOffset[c][2];
          corner_id[c] = vid(ci, cj, ck);
          corner_value[c] = values[corner_id[c]];
          if (std::isnan(corner_value[c])) {
            usable = false;
            break;
          }
        }
        if (!usable) continue;

        int case_index = 0;
        for (int c = 0; c < 8; ++c) {
          if (corner_value[c] < 0.0f) case_index |= 1 << c;
        }
        const std::uint16_t edges = mc::kEdgeTable[case_index];
        if (edges == 0) continue;

        int edge_vid[12];
        for (int e = 0; e < 12; ++e) {
          if (!(edges & (1 << e))) continue;
          const int c0 = mc::kEdgeCorners[e][0];
          const int c1 = mc::kEdgeCorners[e][1];
          const EdgeKey key{std::min(corner_id[c0], corner_id[c1]), edge_axis(e)};
          auto it = edge_vertex.find(key);
          if (it != edge_vertex.end()) {
            edge_vid[e] = it->second;
            continue;
          }
          const double v0 = corner_value[c0];
          const double v1 = corner_value[c1];
          double t = 0.5;
          if (std::abs(v1 - v0) > 1e-12) t = v0 / (v0 - v1);
          // Keep crossings strictly inside the edge; a crossing exactly on a
          // grid corner would alias vertices and break watertightness.
          t = std::clamp(t, 1e-4, 1.0 - 1e-4);
          const Vec3 p0 = grid_point(i + mc::kCornerOffset[c0][0], j + mc::kCornerOffset[c0][1],
                                     k + mc::kCornerOffset[c0][2]);
          const Vec3 p1 = grid_point(i + mc::kCornerOffset[c1][0], j + mc::kCornerOffset[c1][1],
                                     k + mc::kCornerOffset[c1][2]);
          edge_vid[e] = int(mesh.vertices.size());
          mesh.vertices.push_back(p0 + t * (p1 - p0));
          edge_vertex.emplace(key, edge_vid[e]);
        }

        const auto& tris = mc::kTriTable[case_index];
        for (int t = 0; tris[t] != -1; t += 3) {
          const int a = edge_vid[tris[t]];
          const int b = edge_vid[tris[t + 1]];
          const int c = edge_vid[tris[t + 2]];
          if (a == b || b == c || a == c) continue;
          const Vec3 cross =
              (mesh.vertices[b] - mesh.vertices[a]).cross(mesh.vertices[c] - mesh.vertices[a]);
          if (cross.squaredNorm() < 4e-24) continue;  // area below 1e-12
          mesh.triangles.emplace_back(a, b, c);
        }
      }
    }
  }

  if (with_normals) {
    // Central differences of the field; fall back to +z when unavailable.
    mesh.normals.resize(mesh.vertices.size(), Vec3::UnitZ());
    const double h = 0.5 * resolution;
    for (std::size_t vi = 0; vi < mesh.vertices.size(); ++vi) {
      Vec3 g = Vec3::Zero();
      bool ok = true;
      for (int a = 0; a < 3 && ok; ++a) {
        Vec3 lo = mesh.vertices[vi], hi = mesh.vertices[vi];
        lo[a] -= h;
        hi[a] += h;
        const auto flo = field(lo), fhi = field(hi);
        if (!flo || !fhi) {
          ok = false;
          break;
        }
        g[a] = (*fhi - *flo) / (2.0 * h);
      }
      if (ok && g.norm() > 1e-12) mesh.normals[vi] = g.normalized();
    }
  }
  return mesh;
}

TriangleMesh extract_mesh(const HierarchicalFeatureVolume& volume, const SdfDecoder& decoder,
                          double resolution, bool with_normals) {
  const auto bounds = compute_map_bounds(volume);
  if (!bounds) return {};
  FieldFn field = [&](const Vec3& p) -> std::optional<double> {
    const auto s = sample_field_world(volume, decoder, p);
    if (!s) return std::nullopt;
    return s->value;
  };
  return extract_mesh_from_field(field, *bounds, resolution, with_normals);
}

void write_ply(const TriangleMesh& mesh, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_ply: cannot open " + path);
  const bool with_normals = mesh.normals.size() == mesh.vertices.size() && !mesh.normals.empty();
  out << "ply\nformat binary_little_endian 1.0\n";
  out << "element vertex " << mesh.vertices.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (with_normals) out << "property float nx\nproperty float ny\nproperty float nz\n";
  out << "element face " << mesh.triangles.size() << "\n";
  out << "property list uchar int vertex_indices\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    float v[6];
    v[0] = float(mesh.vertices[i].x());
    v[1] = float(mesh.vertices[i].y());
    v[2] = float(mesh.vertices[i].z());
    int n = 3;
    if (with_normals) {
      v[3] = float(mesh.normals[i].x());
      v[4] = float(mesh.normals[i].y());
      v[5] = float(mesh.normals[i].z());
      n = 6;
    }
    out.write(reinterpret_cast<const char*>(v), n * sizeof(float));
  }
  for (const auto& t : mesh.triangles) {
    const std::uint8_t count = 3;
    std::int32_t idx[3] = {t[0], t[1], t[2]};
    out.write(reinterpret_cast<const char*>(&count), 1);
    out.write(reinterpret_cast<const char*>(idx), sizeof(idx));
  }
  if (!out) throw std::runtime_error("write_ply: write failed for " + path);
}

TriangleMesh read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_ply: cannot open " + path);
  std::string line;
  std::size_t n_vertices = 0, n_faces = 0;
  bool with_normals = false;
  bool header_done = false;
  std::getline(in, line);
  if (line != "ply") throw std::runtime_error("read_ply: missing ply magic");
  while (std::getline(in, line)) {
    if (line.rfind("element vertex ", 0) == 0) {
      n_vertices = std::stoull(line.substr(15));
    } else if (line.rfind("element face ", 0) == 0) {
      n_faces = std::stoull(line.substr(13));
    } else if (line == "property float nx") {
      with_normals = true;
    } else if (line == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw std::runtime_error("read_ply: truncated header");
  TriangleMesh mesh;
  mesh.vertices.resize(n_vertices);
  if (with_normals) mesh.normals.resize(n_vertices);
  for (std::size_t i = 0; i < n_vertices; ++i) {
    float v[6];
    in.read(reinterpret_cast<char*>(v), (with_normals ? 6 : 3) * sizeof(float));
    mesh.vertices[i] = Vec3(v[0], v[1], v[2]);
    if (with_normals) mesh.normals[i] = Vec3(v[3], v[4], v[5]);
  }
  mesh.triangles.resize(n_faces);
  for (std::size_t i = 0; i < n_faces; ++i) {
    std::uint8_t count = 0;
    in.read(reinterpret_cast<char*>(&count), 1);
    if (count != 3) throw std::runtime_error("read_ply: non-triangle face");
    std::int32_t idx[3];
    in.read(reinterpret_cast<char*>(idx), sizeof(idx));
    mesh.triangles[i] = Eigen::Vector3i(idx[0], idx[1], idx[2]);
  }
  if (!in) throw std::runtime_error("read_ply: truncated body");
  return mesh;
}

}  // namespace nsdf
