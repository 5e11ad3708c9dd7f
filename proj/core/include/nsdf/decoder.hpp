#pragma once

#include "nsdf/feature_volume.hpp"

#include <cstdint>

namespace nsdf {

using Vec32f = Eigen::Matrix<float, 32, 1>;
using Mat32x12f = Eigen::Matrix<float, 32, 12>;
using Mat32x32f = Eigen::Matrix<float, 32, 32>;
using RowVec32f = Eigen::Matrix<float, 1, 32>;

/// Shallow SDF head: 12 -> 32 -> 32 -> 1, ReLU hidden units, linear output.
/// Input is the combined latent feature; output is a metric SDF value.
struct SdfDecoder {
  Mat32x12f w1;
  Vec32f b1;
  Mat32x32f w2;
  Vec32f b2;
  RowVec32f w3;
  float b3 = 0.0f;

  /// Kaiming fan-in initialization for hidden layers; the output layer is
  /// zeroed so the freshly built field decodes to exactly 0 everywhere.
  static SdfDecoder init(std::uint64_t seed);

  static SdfDecoder zero();

  /// A decoder that computes exactly coeff . x + offset for any input, built
  /// from split positive/negative pass-through ReLU units. Handy wherever a
  /// field with a known closed form has to flow through the real query path.
  static SdfDecoder linear_probe(const Vec12f& coeff, float offset);

  bool all_finite() const;
};

/// Forward pass cache for backprop.
struct DecoderForward {
  Vec12f input;
  Vec32f z1, a1, z2, a2;
  float value = 0.0f;
};

float decode(const SdfDecoder& d, const Vec12f& input);
DecoderForward decode_cached(const SdfDecoder& d, const Vec12f& input);

/// d(value)/d(input) at the cached activation pattern.
Vec12f input_gradient(const SdfDecoder& d, const DecoderForward& f);

/// Gradient accumulator shaped like SdfDecoder.
struct DecoderGrads {
  Mat32x12f w1 = Mat32x12f::Zero();
  Vec32f b1 = Vec32f::Zero();
  Mat32x32f w2 = Mat32x32f::Zero();
  Vec32f b2 = Vec32f::Zero();
  RowVec32f w3 = RowVec32f::Zero();
  float b3 = 0.0f;

  void set_zero();
  void add_scaled(const DecoderGrads& other, float s);
  bool all_finite() const;
};

/// Accumulates upstream * d(value)/d(params) into grads.
void backprop_value(const SdfDecoder& d, const DecoderForward& f, float upstream,
                    DecoderGrads& grads);

/// Accumulates d(v . input_gradient)/d(params) into grads, treating the ReLU
/// activation pattern as locally constant (exact almost everywhere). Bias
/// entries receive no contribution: the input gradient does not depend on
/// them at a fixed pattern.
void backprop_input_gradient(const SdfDecoder& d, const DecoderForward& f, const Vec12f& v,
                             DecoderGrads& grads);

/// Decreasing logistic 1 / (1 + exp(x / alpha)).
/// Throws std::invalid_argument for alpha <= 0.
double logistic(double x, double alpha);

}  // namespace nsdf
