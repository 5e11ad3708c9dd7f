#include "nsdf/snapshot.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace nsdf {

class VolumeSnapshotAccess {
 public:
  static std::array<LevelTables, 3>& tables(HierarchicalFeatureVolume& v) { return v.tables_; }
  static const std::array<LevelTables, 3>& tables(const HierarchicalFeatureVolume& v) {
    return v.tables_;
  }
};

namespace {

constexpr char kMagic[8] = {'N', 'S', 'D', 'F', 'S', 'N', 'A', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("snapshot: truncated stream");
  return v;
}

}  // namespace

void save_snapshot(const HierarchicalFeatureVolume& volume, const SdfDecoder& decoder,
                   std::ostream& out) {
  out.write(kMagic, sizeof(kMagic));
  put(out, kVersion);
  put(out, std::int32_t(volume.levels()));
  put(out, std::int32_t(volume.active_levels()));
  put(out, volume.leaf_size());
  for (int a = 0; a < 3; ++a) put(out, volume.origin()[a]);

  const auto& tables = VolumeSnapshotAccess::tables(volume);
  for (int slot = 0; slot < volume.active_levels(); ++slot) {
    const auto& t = tables[slot];
    std::vector<std::uint64_t> node_keys;
    node_keys.reserve(t.nodes.size());
    for (const auto& [key, entry] : t.nodes) node_keys.push_back(key);
    std::sort(node_keys.begin(), node_keys.end());
    put(out, std::uint64_t(node_keys.size()));
    for (const std::uint64_t key : node_keys) {
      put(out, key);
      for (const std::uint64_t ck : t.nodes.at(key).corner_keys) put(out, ck);
    }
    std::vector<std::uint64_t> corner_keys;
    corner_keys.reserve(t.corners.size());
    for (const auto& [key, idx] : t.corners) corner_keys.push_back(key);
    std::sort(corner_keys.begin(), corner_keys.end());
    put(out, std::uint64_t(corner_keys.size()));
    for (const std::uint64_t key : corner_keys) {
      put(out, key);
      put(out, t.corners.at(key));
    }
  }

  put(out, std::uint64_t(volume.features().size()));
  for (const auto& f : volume.features()) {
    out.write(reinterpret_cast<const char*>(f.data()), 12 * sizeof(float));
  }

  for (const std::uint32_t w : {12u, 32u, 32u, 1u}) put(out, w);
  out.write(reinterpret_cast<const char*>(decoder.w1.data()), decoder.w1.size() * sizeof(float));
  out.write(reinterpret_cast<const char*>(decoder.b1.data()), decoder.b1.size() * sizeof(float));
  out.write(reinterpret_cast<const char*>(decoder.w2.data()), decoder.w2.size() * sizeof(float));
  out.write(reinterpret_cast<const char*>(decoder.b2.data()), decoder.b2.size() * sizeof(float));
  out.write(reinterpret_cast<const char*>(decoder.w3.data()), decoder.w3.size() * sizeof(float));
  put(out, decoder.b3);
  if (!out) throw std::runtime_error("snapshot: write failed");
}

Snapshot load_snapshot(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("snapshot: bad magic");
  }
  if (get<std::uint32_t>(in) != kVersion) throw std::runtime_error("snapshot: unknown version");
  const std::int32_t levels = get<std::int32_t>(in);
  const std::int32_t active = get<std::int32_t>(in);
  const double leaf = get<double>(in);
  Vec3 origin;
  for (int a = 0; a < 3; ++a) origin[a] = get<double>(in);

  Snapshot snap{HierarchicalFeatureVolume(levels, leaf, origin, active), SdfDecoder::zero()};
  auto& tables = VolumeSnapshotAccess::tables(snap.volume);
  for (int slot = 0; slot < active; ++slot) {
    const std::uint64_t n_nodes = get<std::uint64_t>(in);
    tables[slot].nodes.reserve(n_nodes);
    for (std::uint64_t i = 0; i < n_nodes; ++i) {
      const std::uint64_t key = get<std::uint64_t>(in);
      NodeEntry entry;
      for (auto& ck : entry.corner_keys) ck = get<std::uint64_t>(in);
      tables[slot].nodes.emplace(key, entry);
    }
    const std::uint64_t n_corners = get<std::uint64_t>(in);
    tables[slot].corners.reserve(n_corners);
    for (std::uint64_t i = 0; i < n_corners; ++i) {
      const std::uint64_t key = get<std::uint64_t>(in);
      tables[slot].corners.emplace(key, get<std::uint32_t>(in));
    }
  }

  const std::uint64_t n_features = get<std::uint64_t>(in);
  snap.volume.features().resize(n_features);
  for (auto& f : snap.volume.features()) {
    in.read(reinterpret_cast<char*>(f.data()), 12 * sizeof(float));
  }

  for (const std::uint32_t expect : {12u, 32u, 32u, 1u}) {
    if (get<std::uint32_t>(in) != expect) {
      throw std::runtime_error("snapshot: unexpected decoder widths");
    }
  }
  in.read(reinterpret_cast<char*>(snap.decoder.w1.data()), snap.decoder.w1.size() * sizeof(float));
  in.read(reinterpret_cast<char*>(snap.decoder.b1.data()), snap.decoder.b1.size() * sizeof(float));
  in.read(reinterpret_cast<char*>(snap.decoder.w2.data()), snap.decoder.w2.size() * sizeof(float));
  in.read(reinterpret_cast<char*>(snap.decoder.b2.data()), snap.decoder.b2.size() * sizeof(float));
  in.read(reinterpret_cast<char*>(snap.decoder.w3.data()), snap.decoder.w3.size() * sizeof(float));
  snap.decoder.b3 = get<float>(in);
  if (!in) throw std::runtime_error("snapshot: truncated stream");
  if (!snap.volume.audit()) throw std::runtime_error("snapshot: referential integrity failed");
  return snap;
}

void save_snapshot(const HierarchicalFeatureVolume& volume, const SdfDecoder& decoder,
                   const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("snapshot: cannot open " + path);
  save_snapshot(volume, decoder, out);
}

Snapshot load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("snapshot: cannot open " + path);
  return load_snapshot(in);
}

}  // namespace nsdf
