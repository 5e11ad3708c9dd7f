#include "nsdf/sdf_field.hpp"

namespace nsdf {

std::optional<FieldSample> sample_field_scaled(const HierarchicalFeatureVolume& volume,
                                               const SdfDecoder& decoder, const Vec3& p_scaled) {
  auto lookup = volume.query_combined_feature(p_scaled);
  if (!lookup) return std::nullopt;
  FieldSample s;
  s.lookup = std::move(*lookup);
  s.forward = decode_cached(decoder, s.lookup.combined);
  s.input_grad = input_gradient(decoder, s.forward);
  s.value = s.forward.value;
  const auto& features = volume.features();
  for (int l = 0; l < s.lookup.level_count; ++l) {
    const LevelLookup& lk = s.lookup.levels[l];
    for (int c = 0; c < 8; ++c) {
      const double fg = double(features[lk.feature_index[c]].dot(s.input_grad));
      s.grad_scaled += lk.weight_grad[c] * fg;
    }
  }
  return s;
}

std::optional<FieldSample> sample_field_world(const HierarchicalFeatureVolume& volume,
                                              const SdfDecoder& decoder, const Vec3& p_world) {
  const auto scaled = volume.scale_to_unit(p_world);
  if (!scaled) return std::nullopt;
  return sample_field_scaled(volume, decoder, *scaled);
}

std::optional<SdfQueryResult> sdf_query(const HierarchicalFeatureVolume& volume,
                                        const SdfDecoder& decoder, const Vec3& p_world,
                                        bool want_param_grads) {
  const auto s = sample_field_world(volume, decoder, p_world);
  if (!s) return std::nullopt;
  SdfQueryResult out;
  out.epsilon = s->value;
  out.grad_point = s->grad_scaled;
  for (int l = 0; l < s->lookup.level_count; ++l) {
    const LevelLookup& lk = s->lookup.levels[l];
    for (int c = 0; c < 8; ++c) {
      Vec12f g = float(lk.weight[c]) * s->input_grad;
      auto [it, inserted] = out.feature_grads.try_emplace(lk.feature_index[c], g);
      if (!inserted) it->second += g;
    }
  }
  if (want_param_grads) {
    DecoderGrads grads;
    grads.set_zero();
    backprop_value(decoder, s->forward, 1.0f, grads);
    out.param_grads = std::move(grads);
  }
  return out;
}

}  // namespace nsdf
