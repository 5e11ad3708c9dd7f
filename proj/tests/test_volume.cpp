#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nsdf/feature_volume.hpp"
#include "nsdf/morton.hpp"

#include <cstring>
#include <random>
#include <set>

using namespace nsdf;

namespace {

bool bits_equal(const Vec12f& a, const Vec12f& b) {
  return std::memcmp(a.data(), b.data(), sizeof(float) * 12) == 0;
}

}  // namespace

TEST_CASE("morton encode pins the x-lowest interleave") {
  CHECK(morton_encode(0, 0, 0) == 0);
  CHECK(morton_encode(1, 1, 1) == 7);
  CHECK(morton_encode(1, 0, 0) == 1);
  CHECK(morton_encode(0, 1, 0) == 2);
  CHECK(morton_encode(0, 0, 1) == 4);
  CHECK(morton_encode(3, 0, 0) == 0b1001);
}

TEST_CASE("morton encode rejects out-of-range coordinates") {
  CHECK_THROWS_AS(morton_encode(1u << 21, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(morton_encode(0, 1u << 21, 0), std::invalid_argument);
  CHECK_THROWS_AS(morton_encode(0, 0, 1u << 21), std::invalid_argument);
}

TEST_CASE("morton roundtrip on random triples") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::uint32_t> u(0, (1u << 21) - 1);
  for (int i = 0; i < 100000; ++i) {
    const std::uint32_t x = u(rng), y = u(rng), z = u(rng);
    const auto [dx, dy, dz] = morton_decode(morton_encode(x, y, z));
    REQUIRE(dx == x);
    REQUIRE(dy == y);
    REQUIRE(dz == z);
  }
}

namespace {

HierarchicalFeatureVolume small_volume(int active = 3) {
  // levels=8, leaf 0.2 m: cube spans +-25.6 m.
  return HierarchicalFeatureVolume(8, 0.2, Vec3::Zero(), active);
}

PointCloud one_point(const Vec3& p) {
  PointCloud c;
  c.frame = Frame::World;
  c.points = {p};
  return c;
}

}  // namespace

TEST_CASE("scale matches 1/(leaf * 2^(L-1))") {
  HierarchicalFeatureVolume v(10, 0.2, Vec3::Zero());
  CHECK(v.scale() == 1.0 / 102.4);
  CHECK(v.scale() == doctest::Approx(0.009765625));
}

TEST_CASE("scale_to_unit maps origin and boundary") {
  HierarchicalFeatureVolume v(10, 0.2, Vec3(3.0, -2.0, 1.0));
  const auto at_origin = v.scale_to_unit(Vec3(3.0, -2.0, 1.0));
  REQUIRE(at_origin.has_value());
  CHECK(at_origin->norm() == doctest::Approx(0.0));

  const auto at_edge = v.scale_to_unit(Vec3(3.0 + 102.4, -2.0, 1.0));
  REQUIRE(at_edge.has_value());
  CHECK((*at_edge - Vec3(1, 0, 0)).norm() == doctest::Approx(0.0));

  CHECK_FALSE(v.scale_to_unit(Vec3(3.0 + 102.5, -2.0, 1.0)).has_value());
}

TEST_CASE("insert creates one node per active level for a fresh point") {
  auto v = small_volume();
  const auto stats = v.insert_points(one_point(Vec3(1.23, -0.57, 0.84)), 42);
  CHECK(stats.points_inserted == 1);
  CHECK(v.node_count() == 3);
  CHECK(v.corner_count() <= 24);
  CHECK(v.features().size() == v.corner_count());
  CHECK(stats.new_feature_indices.size() == v.features().size());
  CHECK(v.audit());
}

TEST_CASE("re-inserting the same point adds nothing") {
  auto v = small_volume();
  v.insert_points(one_point(Vec3(1.23, -0.57, 0.84)), 42);
  const auto counts = std::tuple(v.node_count(), v.corner_count(), v.features().size());
  const auto stats = v.insert_points(one_point(Vec3(1.23, -0.57, 0.84)), 43);
  CHECK(stats.new_feature_indices.empty());
  CHECK(counts == std::tuple(v.node_count(), v.corner_count(), v.features().size()));
}

TEST_CASE("same-leaf points share corners, verified against brute force") {
  auto v = small_volume();
  // Two points 2 cm apart land in the same 0.2 m leaf (and parents).
  PointCloud cloud;
  cloud.frame = Frame::World;
  cloud.points = {{1.01, 1.01, 1.01}, {1.03, 1.01, 1.01}};
  v.insert_points(cloud, 1);
  CHECK(v.node_count() == 3);

  // Brute-force union of corner keys over the inserted nodes.
  for (int slot = 0; slot < 3; ++slot) {
    std::set<std::uint64_t> expected;
    for (const auto& [key, entry] : v.tables(slot).nodes) {
      for (const auto ck : entry.corner_keys) expected.insert(ck);
    }
    CHECK(v.tables(slot).corners.size() == expected.size());
  }
}

TEST_CASE("points outside the cube are skipped and counted") {
  auto v = small_volume();
  const auto stats = v.insert_points(one_point(Vec3(100.0, 0.0, 0.0)), 1);
  CHECK(stats.points_inserted == 0);
  CHECK(stats.points_skipped == 1);
  CHECK(v.node_count() == 0);
}

TEST_CASE("feature initialization is seeded and gaussian-scaled") {
  auto a = small_volume();
  auto b = small_volume();
  a.insert_points(one_point(Vec3(0.5, 0.5, 0.5)), 99);
  b.insert_points(one_point(Vec3(0.5, 0.5, 0.5)), 99);
  REQUIRE(a.features().size() == b.features().size());
  for (std::size_t i = 0; i < a.features().size(); ++i) {
    CHECK(bits_equal(a.features()[i], b.features()[i]));
    CHECK(a.features()[i].cwiseAbs().maxCoeff() < 0.1);  // std 0.01
  }
}

TEST_CASE("trilinear weights form a partition of unity") {
  auto v = small_volume();
  std::mt19937_64 rng(7);
  PointCloud cloud;
  cloud.frame = Frame::World;
  std::uniform_real_distribution<double> block(-2.0, 2.0);
  for (double x = -2.0; x <= 2.0; x += 0.19) {
    for (double y = -2.0; y <= 2.0; y += 0.19) {
      for (double z = -2.0; z <= 2.0; z += 0.19) cloud.points.emplace_back(x, y, z);
    }
  }
  v.insert_points(cloud, 3);

  int checked = 0;
  std::uniform_real_distribution<double> u(-1.9, 1.9);
  for (int i = 0; i < 10000; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng));
    const auto scaled = v.scale_to_unit(p);
    REQUIRE(scaled.has_value());
    const auto q = v.query_combined_feature(*scaled);
    if (!q) continue;
    ++checked;
    for (int l = 0; l < q->level_count; ++l) {
      double sum = 0.0;
      for (int c = 0; c < 8; ++c) {
        CHECK(q->levels[l].weight[c] >= 0.0);
        sum += q->levels[l].weight[c];
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
  CHECK(checked > 9000);
}

TEST_CASE("query at a coarse corner returns the summed corner features exactly") {
  auto v = small_volume();
  // Coarse corners sit on multiples of the coarse node size; 6.4 m at L=8
  // with three active levels (level 5 of 8).
  const double coarse = v.node_size_world(v.slot_level(0));
  const Vec3 corner(coarse, coarse, coarse);
  PointCloud support;
  support.frame = Frame::World;
  support.points = {corner + Vec3(0.01, 0.01, 0.01), corner - Vec3(0.01, 0.01, 0.01)};
  v.insert_points(support, 5);

  const auto q = v.query_combined_feature(*v.scale_to_unit(corner));
  REQUIRE(q.has_value());
  Vec12f expected = Vec12f::Zero();
  for (int l = 0; l < q->level_count; ++l) {
    int one_hot = -1;
    for (int c = 0; c < 8; ++c) {
      if (q->levels[l].weight[c] == 1.0) one_hot = c;
    }
    REQUIRE(one_hot >= 0);
    expected += v.features()[q->levels[l].feature_index[one_hot]];
  }
  CHECK(bits_equal(q->combined, expected));
}

TEST_CASE("query at a node center averages the corners") {
  auto v = small_volume(1);  // single (finest) level keeps the check exact
  const Vec3 center(0.1, 0.1, 0.1);  // leaf cell [0,0.2)^3
  v.insert_points(one_point(center), 11);
  const auto q = v.query_combined_feature(*v.scale_to_unit(center));
  REQUIRE(q.has_value());
  Vec12f mean = Vec12f::Zero();
  for (int c = 0; c < 8; ++c) mean += v.features()[q->levels[0].feature_index[c]];
  mean /= 8.0f;
  CHECK((q->combined - mean).cwiseAbs().maxCoeff() < 1e-6f);
}

TEST_CASE("query outside mapped nodes signals missing") {
  auto v = small_volume();
  v.insert_points(one_point(Vec3(1.0, 1.0, 1.0)), 1);
  CHECK_FALSE(v.query_combined_feature(Vec3(-0.9, -0.9, -0.9)).has_value());
}

TEST_CASE("query is continuous across shared node boundaries") {
  auto v = small_volume();
  PointCloud cloud;
  cloud.frame = Frame::World;
  // Two adjacent leaves along x around the boundary at x = 0.2.
  cloud.points = {{0.1, 0.05, 0.05}, {0.3, 0.05, 0.05}};
  v.insert_points(cloud, 2);
  const Vec3 boundary(0.2, 0.05, 0.05);
  const Vec3 eps(1e-9, 0, 0);
  const auto left = v.query_combined_feature(*v.scale_to_unit(boundary - eps));
  const auto right = v.query_combined_feature(*v.scale_to_unit(boundary + eps));
  REQUIRE(left.has_value());
  REQUIRE(right.has_value());
  CHECK((left->combined - right->combined).cwiseAbs().maxCoeff() < 1e-6f);
}

TEST_CASE("merge of an empty submap changes nothing") {
  auto global = small_volume();
  auto submap = small_volume();
  global.insert_points(one_point(Vec3(1, 1, 1)), 1);
  const auto counts =
      std::tuple(global.node_count(), global.corner_count(), global.features().size());
  global.merge_from(submap);
  CHECK(counts == std::tuple(global.node_count(), global.corner_count(),
                             global.features().size()));
  CHECK(submap.node_count() == 0);
}

TEST_CASE("disjoint merge adds exactly the submap cardinalities") {
  auto global = small_volume();
  auto submap = small_volume();
  global.insert_points(one_point(Vec3(10, 10, 10)), 1);
  submap.insert_points(one_point(Vec3(-10, -10, -10)), 2);
  const auto g = std::tuple(global.node_count(), global.corner_count(),
                            global.features().size());
  const auto s = std::tuple(submap.node_count(), submap.corner_count(),
                            submap.features().size());
  global.merge_from(submap);
  CHECK(global.node_count() == std::get<0>(g) + std::get<0>(s));
  CHECK(global.corner_count() == std::get<1>(g) + std::get<1>(s));
  CHECK(global.features().size() == std::get<2>(g) + std::get<2>(s));
  CHECK(global.audit());
  CHECK(submap.node_count() == 0);
  CHECK(submap.features().empty());
}

TEST_CASE("merge keeps global entries on key collisions") {
  auto global = small_volume();
  auto submap = small_volume();
  global.insert_points(one_point(Vec3(1, 1, 1)), 1);
  submap.insert_points(one_point(Vec3(1, 1, 1)), 2);  // same keys, new features
  const auto global_features = global.features();
  global.merge_from(submap);
  REQUIRE(global.features().size() == global_features.size());
  for (std::size_t i = 0; i < global_features.size(); ++i) {
    CHECK(bits_equal(global.features()[i], global_features[i]));
  }
}

TEST_CASE("double merge of identical submaps is bit-identical to one merge") {
  auto make_submap = [] {
    auto s = small_volume();
    PointCloud cloud;
    cloud.frame = Frame::World;
    cloud.points = {{2, 3, 1}, {-1, 0.5, 2}, {4, -2, 0.3}};
    s.insert_points(cloud, 77);
    return s;
  };
  auto global_a = small_volume();
  auto global_b = small_volume();
  auto s1 = make_submap();
  global_a.merge_from(s1);

  auto s2 = make_submap();
  auto s3 = make_submap();
  global_b.merge_from(s2);
  global_b.merge_from(s3);

  REQUIRE(global_a.features().size() == global_b.features().size());
  for (std::size_t i = 0; i < global_a.features().size(); ++i) {
    CHECK(bits_equal(global_a.features()[i], global_b.features()[i]));
  }
  for (int slot = 0; slot < 3; ++slot) {
    const auto& ta = global_a.tables(slot);
    const auto& tb = global_b.tables(slot);
    REQUIRE(ta.nodes.size() == tb.nodes.size());
    REQUIRE(ta.corners.size() == tb.corners.size());
    for (const auto& [key, entry] : ta.nodes) {
      REQUIRE(tb.nodes.contains(key));
      CHECK(tb.nodes.at(key) == entry);
    }
    for (const auto& [key, idx] : ta.corners) {
      REQUIRE(tb.corners.contains(key));
      CHECK(tb.corners.at(key) == idx);
    }
  }
}

TEST_CASE("merge rejects mismatched volume parameters") {
  auto global = small_volume();
  HierarchicalFeatureVolume other(9, 0.2, Vec3::Zero());
  CHECK_THROWS_AS(global.merge_from(other), std::invalid_argument);
  HierarchicalFeatureVolume shifted(8, 0.2, Vec3(1, 0, 0));
  CHECK_THROWS_AS(global.merge_from(shifted), std::invalid_argument);
}

TEST_CASE("referential integrity survives random insert and merge churn") {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  auto global = small_volume();
  auto submap = small_volume();
  for (int op = 0; op < 1000; ++op) {
    if (op % 37 == 36) {
      global.merge_from(submap);
    } else {
      PointCloud cloud;
      cloud.frame = Frame::World;
      const int n = 1 + int(rng() % 5);
      for (int i = 0; i < n; ++i) cloud.points.emplace_back(u(rng), u(rng), u(rng));
      submap.insert_points(cloud, rng());
    }
  }
  global.merge_from(submap);
  CHECK(global.audit());
  CHECK(submap.audit());
}
