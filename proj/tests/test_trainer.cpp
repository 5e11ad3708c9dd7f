#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support/test_fields.hpp"

#include "nsdf/trainer.hpp"

#include <cmath>
#include <cstring>
#include <random>

using namespace nsdf;
using namespace nsdf::testing;

TEST_CASE("bce at matching zeros equals ln 2") {
  CHECK(std::abs(bce_loss(0.0, 0.0, 0.08) - std::log(2.0)) < 1e-9);
}

TEST_CASE("bce is minimized where prediction equals the label") {
  for (const double gt : {-0.15, 0.0, 0.07, 0.3}) {
    const double at_gt = bce_loss(gt, gt, 0.08);
    for (double pred = -0.5; pred <= 0.5; pred += 0.01) {
      CHECK(bce_loss(pred, gt, 0.08) >= at_gt - 1e-12);
    }
  }
}

TEST_CASE("bce saturates for badly mismatched values") {
  const double alpha = 0.08;
  CHECK(bce_loss(-10.0 * alpha, 10.0 * alpha, alpha) > 4.0);
}

TEST_CASE("bce derivative matches finite differences") {
  for (const double gt : {-0.2, 0.0, 0.11}) {
    for (double pred = -0.4; pred <= 0.4; pred += 0.05) {
      const double h = 1e-7;
      const double fd = (bce_loss(pred + h, gt, 0.08) - bce_loss(pred - h, gt, 0.08)) / (2 * h);
      CHECK(std::abs(fd - bce_loss_dpred(pred, gt, 0.08)) < 1e-5);
    }
  }
}

TEST_CASE("eikonal loss basics") {
  CHECK(eikonal_loss(Vec3(1, 0, 0)) == doctest::Approx(0.0));
  CHECK(eikonal_loss(Vec3(0, 0, 0)) == doctest::Approx(1.0));
  CHECK(eikonal_loss(Vec3(0, 2, 0)) == doctest::Approx(1.0));
}

TEST_CASE("normal alignment loss basics") {
  CHECK(normal_alignment_loss(Vec3(0, 0, 2), Vec3(0, 0, 1)) == doctest::Approx(0.0));
  CHECK(normal_alignment_loss(Vec3(1, 0, 0), Vec3(0, 0, 1)) == doctest::Approx(M_PI / 2));
  CHECK(normal_alignment_loss(Vec3(0, 0, -3), Vec3(0, 0, 1)) == doctest::Approx(M_PI));
}

namespace {

struct TrainerFixture {
  HierarchicalFeatureVolume volume{8, 0.2, Vec3::Zero(), 3};
  SdfDecoder decoder = SdfDecoder::zero();
  std::vector<LabeledSample> batch;

  explicit TrainerFixture(bool smooth_features = true) {
    volume.insert_points(grid_cloud(Vec3(-2, -2, -2), Vec3(2, 2, 2), 0.19), 31);
    std::mt19937_64 gen(71);
    std::normal_distribution<float> n(0.0f, 0.25f);
    decoder = SdfDecoder::init(3);
    for (long i = 0; i < decoder.w3.size(); ++i) decoder.w3(0, i) = n(gen);
    if (smooth_features) {
      std::uniform_real_distribution<double> freq(0.4, 1.2);
      std::array<Vec3, 12> k;
      for (int j = 0; j < 12; ++j) k[j] = Vec3(freq(gen), freq(gen), freq(gen));
      for (int slot = 0; slot < volume.active_levels(); ++slot) {
        const int level = volume.slot_level(slot);
        for (const auto& [key, index] : volume.tables(slot).corners) {
          const Vec3 pos = corner_world(volume, level, key);
          for (int j = 0; j < 12; ++j) {
            volume.features()[index][j] = 0.08f * float(std::sin(k[j].dot(pos) + 0.3 * j));
          }
        }
      }
    }
    std::uniform_real_distribution<double> u(-1.7, 1.7);
    std::normal_distribution<double> g(0.0, 1.0);
    while (batch.size() < 24) {
      LabeledSample s;
      s.position = Vec3(u(gen), u(gen), u(gen));
      s.gt_sdf = 0.2 * g(gen);
      s.surface_band = batch.size() % 3 != 0;
      if (s.surface_band) s.normal = Vec3(g(gen), g(gen), g(gen)).normalized();
      batch.push_back(s);
    }
  }
};

}  // namespace

TEST_CASE("total_loss equals mean bce when lambdas vanish") {
  TrainerFixture fx;
  LossWeights w;
  w.lambda1 = 1e-30;  // weights must stay positive; degenerate limit
  w.lambda2 = 1e-30;
  const auto loss = total_loss(fx.volume, fx.decoder, fx.batch, w);
  double mean_bce = 0.0;
  for (const auto& s : fx.batch) {
    mean_bce += bce_loss(sample_field_world(fx.volume, fx.decoder, s.position)->value, s.gt_sdf,
                         w.alpha);
  }
  mean_bce /= double(fx.batch.size());
  CHECK(loss.total == doctest::Approx(mean_bce).epsilon(1e-9));
  CHECK(loss.bce == doctest::Approx(mean_bce).epsilon(1e-9));
}

TEST_CASE("total_loss is linear in the eikonal weight") {
  TrainerFixture fx;
  LossWeights w;
  const auto base = total_loss(fx.volume, fx.decoder, fx.batch, w);
  LossWeights w2 = w;
  w2.lambda1 *= 2.0;
  const auto doubled = total_loss(fx.volume, fx.decoder, fx.batch, w2);
  CHECK(doubled.total - base.total == doctest::Approx(w.lambda1 * base.eikonal).epsilon(1e-9));
}

TEST_CASE("direction term only sees surface-band samples") {
  TrainerFixture fx;
  LossWeights w;
  const auto all = total_loss(fx.volume, fx.decoder, fx.batch, w);
  std::vector<LabeledSample> surface_only;
  for (const auto& s : fx.batch) {
    if (s.surface_band && s.normal) surface_only.push_back(s);
  }
  const auto surf = total_loss(fx.volume, fx.decoder, surface_only, w);
  CHECK(all.direction_count == surface_only.size());
  CHECK(all.direction == doctest::Approx(surf.direction).epsilon(1e-9));
}

TEST_CASE("exact linear field: eikonal and direction terms vanish") {
  HierarchicalFeatureVolume volume(8, 0.2, Vec3::Zero(), 3);
  const Vec3 a = Vec3(2.0, 1.0, -2.0).normalized();  // unit metric gradient
  const SdfDecoder decoder =
      make_linear_field(volume, a, 0.0, grid_cloud(Vec3(-2, -2, -2), Vec3(2, 2, 2), 0.19));
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::vector<LabeledSample> batch;
  for (int i = 0; i < 64; ++i) {
    LabeledSample s;
    s.position = Vec3(u(gen), u(gen), u(gen));
    s.gt_sdf = a.dot(s.position);  // gt equals the field -> bce at its optimum
    s.surface_band = true;
    s.normal = a;  // aligned with the gradient
    batch.push_back(s);
  }
  const auto loss = total_loss(volume, decoder, batch, LossWeights{});
  CHECK(loss.eikonal < 1e-4);
  CHECK(loss.direction < 2e-2);  // acos amplifies float noise near 0
  // Remaining total is the bce entropy floor.
  double floor = 0.0;
  for (const auto& s : batch) {
    floor += bce_loss(s.gt_sdf, s.gt_sdf, LossWeights{}.alpha);
  }
  floor /= double(batch.size());
  CHECK(loss.bce == doctest::Approx(floor).epsilon(1e-3));
}

TEST_CASE("all-outside batch throws") {
  TrainerFixture fx;
  std::vector<LabeledSample> outside(4);
  for (auto& s : outside) s.position = Vec3(20, 20, 20);  // unmapped region
  CHECK_THROWS_AS(total_loss(fx.volume, fx.decoder, outside, LossWeights{}),
                  std::runtime_error);
}

namespace {

/// ReLU activation patterns over a batch. The composite loss depends on the
/// field gradient, which jumps when any unit toggles; FD probes are only
/// meaningful where the whole batch keeps its pattern.
std::vector<std::uint64_t> batch_patterns(const HierarchicalFeatureVolume& v,
                                          const SdfDecoder& d,
                                          const std::vector<LabeledSample>& batch) {
  std::vector<std::uint64_t> out;
  out.reserve(batch.size());
  for (const auto& s : batch) {
    const auto f = sample_field_world(v, d, s.position);
    std::uint64_t bits = f ? 1 : 0;
    if (f) {
      for (int i = 0; i < 32; ++i) {
        if (f->forward.z1[i] > 0.0f) bits ^= 0x9e3779b97f4a7c15ull * (2 * i + 3);
        if (f->forward.z2[i] > 0.0f) bits ^= 0xc2b2ae3d27d4eb4full * (2 * i + 5);
      }
    }
    out.push_back(bits);
  }
  return out;
}

}  // namespace

TEST_CASE("composite-loss gradients match finite differences") {
  TrainerFixture fx;
  LossWeights w;
  DecoderGrads dg;
  dg.set_zero();
  FeatureGradMap fg;
  const auto base = total_loss(fx.volume, fx.decoder, fx.batch, w, &dg, &fg);
  REQUIRE(base.used == fx.batch.size());
  const auto pattern0 = batch_patterns(fx.volume, fx.decoder, fx.batch);

  std::mt19937_64 gen(83);
  const float h = 2e-3f;

  SUBCASE("decoder parameters") {
    auto views = decoder_params(fx.decoder);
    auto grad_views = grads_params(dg);
    int checked = 0, trials = 0;
    while (checked < 20 && trials < 400) {
      ++trials;
      const int vi = int(gen() % views.size());
      const long off = long(gen() % std::uint64_t(views[vi].size));
      float* slot = views[vi].data + off;
      const float saved = *slot;
      *slot = saved + h;
      const double hi = total_loss(fx.volume, fx.decoder, fx.batch, w).total;
      const bool hi_ok = batch_patterns(fx.volume, fx.decoder, fx.batch) == pattern0;
      *slot = saved - h;
      const double lo = total_loss(fx.volume, fx.decoder, fx.batch, w).total;
      const bool lo_ok = batch_patterns(fx.volume, fx.decoder, fx.batch) == pattern0;
      *slot = saved;
      if (!hi_ok || !lo_ok) continue;  // probe straddles a ReLU kink
      const double fd = (hi - lo) / (2.0 * h);
      const double an = grad_views[vi].data[off];
      // 1e-2 relative with a single-precision noise floor.
      CHECK(std::abs(fd - an) < 1e-2 * std::max(std::abs(fd), std::abs(an)) + 2e-3);
      ++checked;
    }
    CHECK(checked == 20);
  }

  SUBCASE("feature rows") {
    REQUIRE_FALSE(fg.rows.empty());
    int checked = 0;
    for (const auto& [idx, grad] : fg.rows) {
      if (checked >= 20) break;
      const int j = int(gen() % 12);
      float& slot = fx.volume.features()[idx][j];
      const float saved = slot;
      slot = saved + h;
      const double hi = total_loss(fx.volume, fx.decoder, fx.batch, w).total;
      const bool hi_ok = batch_patterns(fx.volume, fx.decoder, fx.batch) == pattern0;
      slot = saved - h;
      const double lo = total_loss(fx.volume, fx.decoder, fx.batch, w).total;
      const bool lo_ok = batch_patterns(fx.volume, fx.decoder, fx.batch) == pattern0;
      slot = saved;
      if (!hi_ok || !lo_ok) continue;
      const double fd = (hi - lo) / (2.0 * h);
      CHECK(std::abs(fd - grad[j]) < 1e-2 * std::max(std::abs(fd), std::abs(double(grad[j]))) +
                                         2e-3);
      ++checked;
    }
    CHECK(checked >= 15);
  }
}

TEST_CASE("train_frame reduces the loss on a fixed batch") {
  TrainerFixture fx(false);  // noisy random-ish start: zero features
  std::mt19937_64 gen(91);
  std::normal_distribution<float> n(0.0f, 0.01f);
  for (auto& f : fx.volume.features()) {
    for (int j = 0; j < 12; ++j) f[j] = n(gen);
  }
  MappingOptimizer opt;
  AdamConfig adam;
  adam.lr = 2e-3;
  const auto trace =
      train_frame(fx.volume, fx.decoder, {fx.batch}, 100, LossWeights{}, adam, opt);
  REQUIRE(trace.iterations.size() == 100);
  CHECK(trace.iterations.back().total < trace.iterations.front().total);
}

TEST_CASE("zero learning rate leaves parameters bit-identical") {
  TrainerFixture fx;
  const SdfDecoder before = fx.decoder;
  const auto features_before = fx.volume.features();
  MappingOptimizer opt;
  AdamConfig adam;
  adam.lr = 0.0;
  train_frame(fx.volume, fx.decoder, {fx.batch}, 5, LossWeights{}, adam, opt);
  CHECK(std::memcmp(before.w1.data(), fx.decoder.w1.data(), sizeof(float) * before.w1.size()) ==
        0);
  CHECK(std::memcmp(before.w2.data(), fx.decoder.w2.data(), sizeof(float) * before.w2.size()) ==
        0);
  CHECK(std::memcmp(before.w3.data(), fx.decoder.w3.data(), sizeof(float) * before.w3.size()) ==
        0);
  for (std::size_t i = 0; i < features_before.size(); ++i) {
    CHECK(std::memcmp(features_before[i].data(), fx.volume.features()[i].data(),
                      sizeof(float) * 12) == 0);
  }
}

TEST_CASE("training is deterministic end to end") {
  auto run = [] {
    TrainerFixture fx;
    MappingOptimizer opt;
    return train_frame(fx.volume, fx.decoder, {fx.batch}, 20, LossWeights{}, AdamConfig{}, opt);
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.iterations.size() == b.iterations.size());
  for (std::size_t i = 0; i < a.iterations.size(); ++i) {
    CHECK(a.iterations[i].total == b.iterations[i].total);
  }
}

TEST_CASE("mapping on a synthetic plane converges to the labels") {
  // Ray-style supervision of the plane z=0 from a sensor above: samples near
  // the plane carry signed distances along the vertical.
  HierarchicalFeatureVolume volume(8, 0.2, Vec3::Zero(), 3);
  SdfDecoder decoder = SdfDecoder::init(17);
  std::mt19937_64 gen(93);
  std::uniform_real_distribution<double> xy(-2.0, 2.0);
  std::uniform_real_distribution<double> dz(-0.3, 0.3);

  auto draw_samples = [&](int n, std::mt19937_64& g) {
    std::vector<LabeledSample> out;
    for (int i = 0; i < n; ++i) {
      LabeledSample s;
      const double z = dz(g);
      s.position = Vec3(xy(g), xy(g), z);
      s.gt_sdf = z;  // sensor above: positive above the plane
      s.surface_band = true;
      s.normal = Vec3(0, 0, 1);
      out.push_back(s);
      LabeledSample f;
      f.position = Vec3(xy(g), xy(g), 0.5 + 0.8 * std::abs(dz(g)));
      f.gt_sdf = f.position.z();
      f.surface_band = false;
      out.push_back(f);
    }
    return out;
  };

  // Seed the volume with nodes covering the sampled slab.
  volume.insert_points(grid_cloud(Vec3(-2.2, -2.2, -0.5), Vec3(2.2, 2.2, 1.2), 0.19), 3);

  MappingOptimizer opt;
  AdamConfig adam;
  adam.lr = 2e-3;  // larger than the online default; this is a cold start
  for (int frame = 0; frame < 30; ++frame) {
    std::vector<std::vector<LabeledSample>> batches;
    for (int it = 0; it < 20; ++it) batches.push_back(draw_samples(256, gen));
    train_frame(volume, decoder, batches, 20, LossWeights{}, adam, opt);
  }

  std::mt19937_64 held(12345);
  const auto held_out = draw_samples(2000, held);
  double err = 0.0;
  int count = 0;
  for (const auto& s : held_out) {
    if (!s.surface_band) continue;
    const auto f = sample_field_world(volume, decoder, s.position);
    REQUIRE(f.has_value());
    err += std::abs(f->value - s.gt_sdf);
    ++count;
  }
  CHECK(err / count < 0.05);
}
