#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support/test_fields.hpp"

#include "nsdf/sdf_field.hpp"

#include <array>
#include <cstring>
#include <random>

using namespace nsdf;
using namespace nsdf::testing;

TEST_CASE("zero decoder outputs zero for any input") {
  const SdfDecoder d = SdfDecoder::zero();
  std::mt19937_64 gen(3);
  std::normal_distribution<float> n(0.0f, 1.0f);
  for (int i = 0; i < 20; ++i) {
    Vec12f x;
    for (int j = 0; j < 12; ++j) x[j] = n(gen);
    CHECK(decode(d, x) == 0.0f);
  }
}

TEST_CASE("freshly initialized decoder is the zero field but nontrivial inside") {
  const SdfDecoder d = SdfDecoder::init(123);
  Vec12f x = Vec12f::Ones();
  CHECK(decode(d, x) == 0.0f);  // zeroed output layer
  CHECK(d.w1.cwiseAbs().maxCoeff() > 0.0f);
}

TEST_CASE("decode is deterministic for a fixed seed") {
  const SdfDecoder a = SdfDecoder::init(7);
  const SdfDecoder b = SdfDecoder::init(7);
  CHECK(std::memcmp(a.w1.data(), b.w1.data(), sizeof(float) * a.w1.size()) == 0);
  CHECK(std::memcmp(a.w2.data(), b.w2.data(), sizeof(float) * a.w2.size()) == 0);
}

TEST_CASE("decode magnitude respects an operator-norm bound") {
  std::mt19937_64 gen(17);
  std::normal_distribution<float> n(0.0f, 0.5f);
  for (int trial = 0; trial < 20; ++trial) {
    SdfDecoder d = SdfDecoder::init(trial);
    for (long i = 0; i < d.w3.size(); ++i) d.w3(0, i) = n(gen);
    d.b3 = 0.0f;
    Vec12f x;
    for (int j = 0; j < 12; ++j) x[j] = n(gen);
    const double bound = double(d.w1.norm()) * double(d.w2.norm()) * double(d.w3.norm()) *
                         double(x.norm());
    const float eps = decode(d, x);
    CHECK(std::isfinite(eps));
    CHECK(std::abs(double(eps)) <= bound + 1e-6);
  }
}

TEST_CASE("linear probe decoder is exactly linear") {
  std::mt19937_64 gen(29);
  std::normal_distribution<float> n(0.0f, 1.0f);
  Vec12f coeff;
  for (int j = 0; j < 12; ++j) coeff[j] = n(gen);
  const SdfDecoder d = SdfDecoder::linear_probe(coeff, 0.25f);
  for (int i = 0; i < 50; ++i) {
    Vec12f x;
    for (int j = 0; j < 12; ++j) x[j] = n(gen);
    CHECK(decode(d, x) == doctest::Approx(coeff.dot(x) + 0.25f).epsilon(1e-5));
  }
}

TEST_CASE("logistic basics") {
  CHECK(logistic(0.0, 0.08) == doctest::Approx(0.5));
  CHECK(logistic(0.0, 3.0) == doctest::Approx(0.5));
  CHECK(logistic(1e6, 0.08) == doctest::Approx(0.0));
  CHECK(logistic(-1e6, 0.08) == doctest::Approx(1.0));
  CHECK(logistic(-0.08 * std::log(3.0), 0.08) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK_THROWS_AS(logistic(0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(logistic(0.0, -1.0), std::invalid_argument);
}

TEST_CASE("logistic is monotone decreasing and symmetric") {
  double prev = 1.0;
  for (double x = -2.0; x <= 2.0; x += 0.01) {
    const double v = logistic(x, 0.08);
    CHECK(v < prev);
    prev = v;
    CHECK(std::abs(1.0 - logistic(x, 0.08) - logistic(-x, 0.08)) < 1e-12);
  }
}

namespace {

struct FieldFixture {
  HierarchicalFeatureVolume volume{8, 0.2, Vec3::Zero(), 3};
  SdfDecoder decoder = SdfDecoder::zero();

  FieldFixture() {
    // Smooth low-frequency features (as training produces) over a block of
    // nodes, random decoder with a live output layer.
    volume.insert_points(grid_cloud(Vec3(-2, -2, -2), Vec3(2, 2, 2), 0.19), 31);
    std::mt19937_64 gen(41);
    std::normal_distribution<float> n(0.0f, 0.3f);
    decoder = SdfDecoder::init(5);
    for (long i = 0; i < decoder.w3.size(); ++i) decoder.w3(0, i) = n(gen);
    decoder.b3 = n(gen);

    std::uniform_real_distribution<double> freq(0.4, 1.4);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
    std::array<Vec3, 12> k;
    std::array<double, 12> ph;
    for (int j = 0; j < 12; ++j) {
      k[j] = Vec3(freq(gen), freq(gen), freq(gen));
      ph[j] = phase(gen);
    }
    for (int slot = 0; slot < volume.active_levels(); ++slot) {
      const int level = volume.slot_level(slot);
      for (const auto& [key, index] : volume.tables(slot).corners) {
        const Vec3 pos = corner_world(volume, level, key);
        for (int j = 0; j < 12; ++j) {
          volume.features()[index][j] = 0.25f * float(std::sin(k[j].dot(pos) + ph[j]));
        }
      }
    }
  }
};

/// A scaled-frame point inside the mapped block, away from node boundaries
/// and (almost surely) away from ReLU kinks.
Vec3 random_interior_scaled(const HierarchicalFeatureVolume& v, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const int finest = v.levels() - 1;
  const double cell = std::ldexp(1.0, -finest);
  for (;;) {
    const Vec3 world(u(gen), u(gen), u(gen));
    const auto scaled = v.scale_to_unit(world);
    if (!scaled) continue;
    bool central = true;
    for (int a = 0; a < 3; ++a) {
      const double g = ((*scaled)[a] + 1.0) / cell;
      const double frac = g - std::floor(g);
      if (frac < 0.15 || frac > 0.85) central = false;
    }
    if (!central) continue;
    if (v.query_combined_feature(*scaled)) return *scaled;
  }
}

}  // namespace

namespace {

/// ReLU activation pattern of a cached forward pass.
std::uint64_t relu_pattern(const DecoderForward& f) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 32; ++i) {
    if (f.z1[i] > 0.0f) bits |= 1ull << i;
    if (f.z2[i] > 0.0f) bits |= 1ull << (32 + i);
  }
  return bits;
}

}  // namespace

TEST_CASE("analytic point gradient matches central finite differences") {
  FieldFixture fx;
  std::mt19937_64 gen(43);
  const double h = 1e-3;  // scaled units
  int checked = 0, attempts = 0;
  while (checked < 100 && attempts < 2000) {
    ++attempts;
    const Vec3 p = random_interior_scaled(fx.volume, gen);
    const auto s = sample_field_scaled(fx.volume, fx.decoder, p);
    REQUIRE(s.has_value());
    const std::uint64_t pattern = relu_pattern(s->forward);
    Vec3 fd;
    bool ok = true;
    for (int a = 0; a < 3 && ok; ++a) {
      Vec3 lo = p, hi = p;
      lo[a] -= h;
      hi[a] += h;
      const auto slo = sample_field_scaled(fx.volume, fx.decoder, lo);
      const auto shi = sample_field_scaled(fx.volume, fx.decoder, hi);
      // The derivative only exists where the stencil stays on one ReLU
      // pattern; kink-straddling points are resampled.
      ok = slo && shi && relu_pattern(slo->forward) == pattern &&
           relu_pattern(shi->forward) == pattern;
      if (ok) fd[a] = (shi->value - slo->value) / (2.0 * h);
    }
    if (!ok) continue;
    ++checked;
    const double denom = std::max(s->grad_scaled.norm(), 1e-6);
    CHECK((s->grad_scaled - fd).norm() / denom < 1e-3);
  }
  CHECK(checked == 100);
}

TEST_CASE("feature gradients match per-row finite differences") {
  FieldFixture fx;
  std::mt19937_64 gen(47);
  const Vec3 p = random_interior_scaled(fx.volume, gen);
  const Vec3 world = fx.volume.unscale(p);
  const auto q = sdf_query(fx.volume, fx.decoder, world);
  REQUIRE(q.has_value());
  REQUIRE_FALSE(q->feature_grads.empty());

  const float h = 1e-3f;
  int checked = 0;
  for (const auto& [idx, grad] : q->feature_grads) {
    for (int j = 0; j < 12; j += 5) {
      const float saved = fx.volume.features()[idx][j];
      fx.volume.features()[idx][j] = saved + h;
      const double hi = sample_field_world(fx.volume, fx.decoder, world)->value;
      fx.volume.features()[idx][j] = saved - h;
      const double lo = sample_field_world(fx.volume, fx.decoder, world)->value;
      fx.volume.features()[idx][j] = saved;
      const double fd = (hi - lo) / (2.0 * h);
      // Single-precision forward passes leave ~1e-4 of noise in the FD.
      const double tol = 1e-2 * std::max(std::abs(fd), std::abs(double(grad[j]))) + 1e-3;
      CHECK(std::abs(fd - grad[j]) < tol);
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("decoder parameter gradients of the value match finite differences") {
  FieldFixture fx;
  std::mt19937_64 gen(53);
  const Vec3 p = random_interior_scaled(fx.volume, gen);
  const Vec3 world = fx.volume.unscale(p);
  const auto q = sdf_query(fx.volume, fx.decoder, world, true);
  REQUIRE(q.has_value());
  REQUIRE(q->param_grads.has_value());

  auto views = decoder_params(fx.decoder);
  DecoderGrads grads = *q->param_grads;
  auto grad_views = grads_params(grads);
  std::uniform_int_distribution<int> pick_view(0, int(views.size()) - 1);
  const float h = 1e-3f;
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int vi = pick_view(gen);
    const long off = long(gen() % std::uint64_t(views[vi].size));
    float* slot = views[vi].data + off;
    const float saved = *slot;
    *slot = saved + h;
    const double hi = sample_field_world(fx.volume, fx.decoder, world)->value;
    *slot = saved - h;
    const double lo = sample_field_world(fx.volume, fx.decoder, world)->value;
    *slot = saved;
    const double fd = (hi - lo) / (2.0 * h);
    const double an = grad_views[vi].data[off];
    const double tol = 1e-2 * std::max(std::abs(fd), std::abs(an)) + 1e-3;
    CHECK(std::abs(fd - an) < tol);
    ++checked;
  }
  CHECK(checked > 10);
}

TEST_CASE("zero first layer makes the point gradient vanish") {
  FieldFixture fx;
  fx.decoder.w1.setZero();
  std::mt19937_64 gen(59);
  const Vec3 p = random_interior_scaled(fx.volume, gen);
  const auto s = sample_field_scaled(fx.volume, fx.decoder, p);
  REQUIRE(s.has_value());
  CHECK(s->grad_scaled.norm() == 0.0);
}

TEST_CASE("linear injected field has constant gradient and exact values") {
  HierarchicalFeatureVolume volume(8, 0.2, Vec3::Zero(), 3);
  const Vec3 a(1.0, -0.5, 0.25);
  const double b = 0.4;
  const SdfDecoder decoder =
      make_linear_field(volume, a, b, grid_cloud(Vec3(-2, -2, -2), Vec3(2, 2, 2), 0.19));

  std::mt19937_64 gen(61);
  std::uniform_real_distribution<double> u(-1.8, 1.8);
  for (int i = 0; i < 200; ++i) {
    const Vec3 p(u(gen), u(gen), u(gen));
    const auto s = sample_field_world(volume, decoder, p);
    if (!s) continue;
    CHECK(s->value == doctest::Approx(a.dot(p) + b).epsilon(1e-4));
    const Vec3 grad_metric = metric_gradient(volume, *s);
    CHECK((grad_metric - a).norm() < 1e-4);
  }
}

TEST_CASE("sdf_query is continuous across node boundaries") {
  FieldFixture fx;
  // Boundary at world x = 0.2 (leaf edge), both sides mapped.
  for (double y = -1.0; y <= 1.0; y += 0.37) {
    const Vec3 left(0.2 - 1e-7, y, 0.1);
    const Vec3 right(0.2 + 1e-7, y, 0.1);
    const auto sl = sample_field_world(fx.volume, fx.decoder, left);
    const auto sr = sample_field_world(fx.volume, fx.decoder, right);
    REQUIRE(sl.has_value());
    REQUIRE(sr.has_value());
    CHECK(std::abs(sl->value - sr->value) < 1e-5);
  }
}
