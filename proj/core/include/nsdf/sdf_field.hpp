#pragma once

#include "nsdf/decoder.hpp"
#include "nsdf/feature_volume.hpp"

#include <map>
#include <optional>

namespace nsdf {

/// Full evaluation context at one point: volume lookup, decoder cache, and
/// the pieces every backward pass needs.
struct FieldSample {
  VolumeQuery lookup;
  DecoderForward forward;
  Vec12f input_grad;      // d(value)/d(combined feature)
  double value = 0.0;     // metric SDF
  Vec3 grad_scaled = Vec3::Zero();  // d(value)/d(p_scaled)
};

/// Result surface for SDF queries.
struct SdfQueryResult {
  double epsilon = 0.0;             // metric SDF value
  Vec3 grad_point = Vec3::Zero();   // gradient w.r.t. the scaled point
  std::map<std::uint32_t, Vec12f> feature_grads;  // d(epsilon)/d(feature row)
  std::optional<DecoderGrads> param_grads;        // d(epsilon)/d(decoder params)
};

/// Evaluates field + gradient at a scaled point; nullopt when outside the map.
std::optional<FieldSample> sample_field_scaled(const HierarchicalFeatureVolume& volume,
                                               const SdfDecoder& decoder, const Vec3& p_scaled);

std::optional<FieldSample> sample_field_world(const HierarchicalFeatureVolume& volume,
                                              const SdfDecoder& decoder, const Vec3& p_world);

/// Metric-frame gradient: d(value)/d(p_world) = scale * grad_scaled.
inline Vec3 metric_gradient(const HierarchicalFeatureVolume& volume, const FieldSample& s) {
  return volume.scale() * s.grad_scaled;
}

/// Spec query with sparse backprop bookkeeping. The feature gradient of a row
/// is its total trilinear weight times the decoder input gradient.
std::optional<SdfQueryResult> sdf_query(const HierarchicalFeatureVolume& volume,
                                        const SdfDecoder& decoder, const Vec3& p_world,
                                        bool want_param_grads = false);

}  // namespace nsdf
