#pragma once

#include "nsdf/sampling.hpp"
#include "nsdf/sdf_field.hpp"

#include <span>
#include <unordered_map>
#include <vector>

namespace nsdf {

struct LossWeights {
  double lambda1 = 0.1;  // Eikonal term
  double lambda2 = 0.1;  // normal-direction term
  double alpha = 0.08;   // logistic temperature, meters
};

/// Binary cross entropy between logistic-squashed SDF values, minimized at
/// pred == gt. Logistic outputs are clamped to [1e-7, 1 - 1e-7] inside logs.
double bce_loss(double epsilon_pred, double epsilon_gt, double alpha);

/// d(bce_loss)/d(epsilon_pred).
double bce_loss_dpred(double epsilon_pred, double epsilon_gt, double alpha);

/// | ||grad|| - 1 | for a metric-frame gradient.
double eikonal_loss(const Vec3& grad_metric);

/// Angle between the gradient and a unit surface normal, radians.
/// Requires ||grad|| > 1e-8 (callers skip near-zero gradients).
double normal_alignment_loss(const Vec3& grad_metric, const Vec3& normal);

struct FeatureGradMap {
  std::unordered_map<std::uint32_t, Vec12f> rows;

  void add(std::uint32_t index, const Vec12f& g) {
    auto [it, inserted] = rows.try_emplace(index, g);
    if (!inserted) it->second += g;
  }
  void add_scaled(const FeatureGradMap& other, float s) {
    for (const auto& [idx, g] : other.rows) add(idx, s * g);
  }
};

struct LossBreakdown {
  double bce = 0.0;      // L1, mean over in-map samples
  double eikonal = 0.0;  // L2, mean over in-map samples
  double direction = 0.0;  // L3, mean over surface samples with usable normals
  double total = 0.0;
  std::size_t used = 0;
  std::size_t skipped_outside = 0;
  std::size_t direction_count = 0;
  std::size_t skipped_zero_grad = 0;
};

/// Composite mapping loss L1 + lambda1 L2 + lambda2 L3 with gradients for the
/// decoder parameters and the touched feature rows. Out-of-map samples are
/// skipped and counted; an all-outside batch throws std::runtime_error.
LossBreakdown total_loss(const HierarchicalFeatureVolume& volume, const SdfDecoder& decoder,
                         std::span<const LabeledSample> batch, const LossWeights& weights,
                         DecoderGrads* decoder_grads = nullptr,
                         FeatureGradMap* feature_grads = nullptr);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Dense Adam over the decoder parameters.
struct DecoderAdam {
  DecoderGrads m, v;
  std::int64_t step_count = 0;

  DecoderAdam() {
    m.set_zero();
    v.set_zero();
  }
  void step(SdfDecoder& decoder, const DecoderGrads& grads, const AdamConfig& cfg);
};

/// Lazy per-row Adam over the feature matrix: moments and bias-correction
/// steps advance only for rows touched in a given step.
struct FeatureAdam {
  std::vector<Vec12f> m, v;
  std::vector<std::int32_t> row_steps;

  void resize(std::size_t rows);
  void step(std::vector<Vec12f>& features, const FeatureGradMap& grads, const AdamConfig& cfg);
  void reset();
};

struct MappingOptimizer {
  DecoderAdam decoder_state;
  FeatureAdam feature_state;
};

struct TrainTrace {
  std::vector<LossBreakdown> iterations;
};

/// Runs `iterations` Adam steps over the supplied batches (cycled when fewer
/// batches than iterations are given), updating the volume's features and the
/// decoder. Throws std::runtime_error on a non-finite loss.
TrainTrace train_frame(HierarchicalFeatureVolume& volume, SdfDecoder& decoder,
                       const std::vector<std::vector<LabeledSample>>& batches, int iterations,
                       const LossWeights& weights, const AdamConfig& adam,
                       MappingOptimizer& optimizer);

}  // namespace nsdf
