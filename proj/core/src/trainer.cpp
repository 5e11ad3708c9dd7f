#include "nsdf/trainer.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace nsdf {

namespace {
constexpr double kPsiClamp = 1e-7;
constexpr double kZeroGradTol = 1e-8;
}  // namespace

double bce_loss(double epsilon_pred, double epsilon_gt, double alpha) {
  const double target = logistic(epsilon_gt, alpha);
  const double pred = std::clamp(logistic(epsilon_pred, alpha), kPsiClamp, 1.0 - kPsiClamp);
  return -(target * std::log(pred) + (1.0 - target) * std::log(1.0 - pred));
}

double bce_loss_dpred(double epsilon_pred, double epsilon_gt, double alpha) {
  const double target = logistic(epsilon_gt, alpha);
  const double pred = logistic(epsilon_pred, alpha);
  // dPsi/dx = -Psi (1 - Psi) / alpha, so dL/dpred collapses to (target - Psi)/alpha.
  return (target - pred) / alpha;
}

double eikonal_loss(const Vec3& grad_metric) {
  return std::abs(grad_metric.norm() - 1.0);
}

double normal_alignment_loss(const Vec3& grad_metric, const Vec3& normal) {
  const double norm = grad_metric.norm();
  const double c = std::clamp(grad_metric.dot(normal) / norm, -1.0, 1.0);
  return std::acos(c);
}

LossBreakdown total_loss(const HierarchicalFeatureVolume& volume, const SdfDecoder& decoder,
                         std::span<const LabeledSample> batch, const LossWeights& weights,
                         DecoderGrads* decoder_grads, FeatureGradMap* feature_grads) {
  if (batch.empty()) throw std::runtime_error("total_loss: empty batch");
  const double sigma = volume.scale();
  const bool want_grads = decoder_grads != nullptr || feature_grads != nullptr;

  LossBreakdown out;
  double sum_l1 = 0.0, sum_l2 = 0.0, sum_l3 = 0.0;

  // Per-term accumulators; final scaling by the term counts happens once the
  // denominators are known.
  DecoderGrads dec_l12, dec_l3;
  FeatureGradMap feat_l12, feat_l3;
  if (want_grads) {
    dec_l12.set_zero();
    dec_l3.set_zero();
  }

  for (const LabeledSample& sample : batch) {
    const auto field = sample_field_world(volume, decoder, sample.position);
    if (!field) {
      ++out.skipped_outside;
      continue;
    }
    ++out.used;
    const Vec3 grad_metric = sigma * field->grad_scaled;
    const double grad_norm = grad_metric.norm();

    sum_l1 += bce_loss(field->value, sample.gt_sdf, weights.alpha);

    // L2 and its gradient w.r.t. the metric gradient.
    Vec3 dl_dgrad_metric = Vec3::Zero();
    sum_l2 += std::abs(grad_norm - 1.0);
    if (grad_norm > kZeroGradTol) {
      dl_dgrad_metric = weights.lambda1 * ((grad_norm >= 1.0) ? 1.0 : -1.0) / grad_norm *
                        grad_metric;
    }

    // L3 only contributes on surface-band samples with a usable gradient.
    Vec3 dl3_dgrad_metric = Vec3::Zero();
    bool has_l3 = false;
    if (sample.surface_band && sample.normal) {
      if (grad_norm > kZeroGradTol) {
        const Vec3& n = *sample.normal;
        const double c = std::clamp(grad_metric.dot(n) / grad_norm, -1.0, 1.0);
        sum_l3 += std::acos(c);
        ++out.direction_count;
        has_l3 = true;
        const double s = std::sqrt(std::max(1.0 - c * c, 1e-12));
        // d(acos c)/d(grad) with c = g.n/|g|.
        const Vec3 dc_dgrad = (n - c * grad_metric / grad_norm) / grad_norm;
        dl3_dgrad_metric = -dc_dgrad / s;
      } else {
        ++out.skipped_zero_grad;
      }
    }

    if (!want_grads) continue;

    // Scalar value path (L1 only; L2/L3 do not depend on the value).
    const float dl1_dvalue = float(bce_loss_dpred(field->value, sample.gt_sdf, weights.alpha));
    if (decoder_grads) backprop_value(decoder, field->forward, dl1_dvalue, dec_l12);
    if (feature_grads) {
      for (int l = 0; l < field->lookup.level_count; ++l) {
        const LevelLookup& lk = field->lookup.levels[l];
        for (int c = 0; c < 8; ++c) {
          feat_l12.add(lk.feature_index[c],
                       (dl1_dvalue * float(lk.weight[c])) * field->input_grad);
        }
      }
    }

    // Gradient path: both L2 and L3 reach the field through the metric
    // gradient; convert to the scaled frame once.
    auto backprop_grad_path = [&](const Vec3& dl_dgm, DecoderGrads* dg, FeatureGradMap* fg,
                                  FeatureGradMap& feat_acc, DecoderGrads& dec_acc) {
      if (dl_dgm.isZero(0.0)) return;
      const Vec3 dl_dgrad_scaled = sigma * dl_dgm;
      // v = B dl/du where B = dF_a/dp; feature term: (dl/du . grad_w) g_in.
      Vec12f v = Vec12f::Zero();
      const auto& features = volume.features();
      for (int l = 0; l < field->lookup.level_count; ++l) {
        const LevelLookup& lk = field->lookup.levels[l];
        for (int c = 0; c < 8; ++c) {
          const float a = float(lk.weight_grad[c].dot(dl_dgrad_scaled));
          v += a * features[lk.feature_index[c]];
          if (fg) feat_acc.add(lk.feature_index[c], a * field->input_grad);
        }
      }
      if (dg) backprop_input_gradient(decoder, field->forward, v, dec_acc);
    };
    backprop_grad_path(dl_dgrad_metric, decoder_grads, feature_grads, feat_l12, dec_l12);
    if (has_l3) {
      backprop_grad_path(weights.lambda2 * dl3_dgrad_metric, decoder_grads, feature_grads,
                         feat_l3, dec_l3);
    }
  }

  if (out.used == 0) throw std::runtime_error("total_loss: every sample fell outside the map");

  out.bce = sum_l1 / double(out.used);
  out.eikonal = sum_l2 / double(out.used);
  out.direction = out.direction_count ? sum_l3 / double(out.direction_count) : 0.0;
  out.total = out.bce + weights.lambda1 * out.eikonal + weights.lambda2 * out.direction;

  if (want_grads) {
    const float inv_used = 1.0f / float(out.used);
    const float inv_l3 = out.direction_count ? 1.0f / float(out.direction_count) : 0.0f;
    if (decoder_grads) {
      decoder_grads->add_scaled(dec_l12, inv_used);
      decoder_grads->add_scaled(dec_l3, inv_l3);
    }
    if (feature_grads) {
      feature_grads->add_scaled(feat_l12, inv_used);
      feature_grads->add_scaled(feat_l3, inv_l3);
    }
  }
  return out;
}

void DecoderAdam::step(SdfDecoder& decoder, const DecoderGrads& grads, const AdamConfig& cfg) {
  ++step_count;
  const float b1 = float(cfg.beta1), b2 = float(cfg.beta2);
  const float bc1 = 1.0f - std::pow(b1, float(step_count));
  const float bc2 = 1.0f - std::pow(b2, float(step_count));
  const float lr = float(cfg.lr), eps = float(cfg.eps);

  auto update = [&](auto& param, auto& mm, auto& vv, const auto& g) {
    mm = b1 * mm + (1.0f - b1) * g;
    vv = b2 * vv + (1.0f - b2) * g.cwiseProduct(g);
    param -= lr * (mm / bc1).cwiseQuotient(((vv / bc2).cwiseSqrt().array() + eps).matrix());
  };
  update(decoder.w1, m.w1, v.w1, grads.w1);
  update(decoder.b1, m.b1, v.b1, grads.b1);
  update(decoder.w2, m.w2, v.w2, grads.w2);
  update(decoder.b2, m.b2, v.b2, grads.b2);
  update(decoder.w3, m.w3, v.w3, grads.w3);
  m.b3 = b1 * m.b3 + (1.0f - b1) * grads.b3;
  v.b3 = b2 * v.b3 + (1.0f - b2) * grads.b3 * grads.b3;
  decoder.b3 -= lr * (m.b3 / bc1) / (std::sqrt(v.b3 / bc2) + eps);
}

void FeatureAdam::resize(std::size_t rows) {
  m.resize(rows, Vec12f::Zero());
  v.resize(rows, Vec12f::Zero());
  row_steps.resize(rows, 0);
}

void FeatureAdam::step(std::vector<Vec12f>& features, const FeatureGradMap& grads,
                       const AdamConfig& cfg) {
  if (m.size() < features.size()) resize(features.size());
  const float b1 = float(cfg.beta1), b2 = float(cfg.beta2);
  const float lr = float(cfg.lr), eps = float(cfg.eps);
  for (const auto& [idx, g] : grads.rows) {
    auto& mm = m[idx];
    auto& vv = v[idx];
    const std::int32_t t = ++row_steps[idx];
    mm = b1 * mm + (1.0f - b1) * g;
    vv = b2 * vv + (1.0f - b2) * g.cwiseProduct(g);
    const float bc1 = 1.0f - std::pow(b1, float(t));
    const float bc2 = 1.0f - std::pow(b2, float(t));
    features[idx] -=
        lr * (mm / bc1).cwiseQuotient(((vv / bc2).cwiseSqrt().array() + eps).matrix());
  }
}

void FeatureAdam::reset() {
  m.clear();
  v.clear();
  row_steps.clear();
}

TrainTrace train_frame(HierarchicalFeatureVolume& volume, SdfDecoder& decoder,
                       const std::vector<std::vector<LabeledSample>>& batches, int iterations,
                       const LossWeights& weights, const AdamConfig& adam,
                       MappingOptimizer& optimizer) {
  if (batches.empty()) throw std::invalid_argument("train_frame: no batches");
  TrainTrace trace;
  trace.iterations.reserve(iterations);
  optimizer.feature_state.resize(volume.features().size());
  for (int it = 0; it < iterations; ++it) {
    const auto& batch = batches[it % batches.size()];
    DecoderGrads dg;
    dg.set_zero();
    FeatureGradMap fg;
    const LossBreakdown loss = total_loss(volume, decoder, batch, weights, &dg, &fg);
    if (!std::isfinite(loss.total)) {
      std::ostringstream msg;
      msg << "train_frame: non-finite loss at iteration " << it << " (bce=" << loss.bce
          << " eikonal=" << loss.eikonal << " direction=" << loss.direction << ")";
      throw std::runtime_error(msg.str());
    }
    optimizer.decoder_state.step(decoder, dg, adam);
    optimizer.feature_state.step(volume.features(), fg, adam);
    trace.iterations.push_back(loss);
  }
  return trace;
}

}  // namespace nsdf
