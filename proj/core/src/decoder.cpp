#include "nsdf/decoder.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace nsdf {

namespace {

inline Vec32f relu(const Vec32f& z) { return z.cwiseMax(0.0f); }

inline Vec32f relu_mask(const Vec32f& z) {
  return (z.array() > 0.0f).cast<float>().matrix();
}

}  // namespace

SdfDecoder SdfDecoder::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SdfDecoder d = zero();
  const float std1 = std::sqrt(2.0f / 12.0f);
  const float std2 = std::sqrt(2.0f / 32.0f);
  std::normal_distribution<float> g1(0.0f, std1);
  std::normal_distribution<float> g2(0.0f, std2);
  for (int r = 0; r < 32; ++r) {
    for (int c = 0; c < 12; ++c) d.w1(r, c) = g1(rng);
  }
  for (int r = 0; r < 32; ++r) {
    for (int c = 0; c < 32; ++c) d.w2(r, c) = g2(rng);
  }
  // w3, biases stay zero: the initial field is identically 0.
  return d;
}

SdfDecoder SdfDecoder::zero() {
  SdfDecoder d;
  d.w1.setZero();
  d.b1.setZero();
  d.w2.setZero();
  d.b2.setZero();
  d.w3.setZero();
  d.b3 = 0.0f;
  return d;
}

SdfDecoder SdfDecoder::linear_probe(const Vec12f& coeff, float offset) {
  SdfDecoder d = zero();
  // a1 = [x+, x-, 0...], a2 = a1 (pass-through), out = c.(x+) - c.(x-) + offset.
  for (int i = 0; i < 12; ++i) {
    d.w1(i, i) = 1.0f;
    d.w1(12 + i, i) = -1.0f;
  }
  for (int i = 0; i < 24; ++i) d.w2(i, i) = 1.0f;
  for (int i = 0; i < 12; ++i) {
    d.w3(0, i) = coeff[i];
    d.w3(0, 12 + i) = -coeff[i];
  }
  d.b3 = offset;
  return d;
}

bool SdfDecoder::all_finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite() &&
         w3.allFinite() && std::isfinite(b3);
}

float decode(const SdfDecoder& d, const Vec12f& input) {
  const Vec32f a1 = relu(d.w1 * input + d.b1);
  const Vec32f a2 = relu(d.w2 * a1 + d.b2);
  return (d.w3 * a2)(0) + d.b3;
}

DecoderForward decode_cached(const SdfDecoder& d, const Vec12f& input) {
  DecoderForward f;
  f.input = input;
  f.z1 = d.w1 * input + d.b1;
  f.a1 = relu(f.z1);
  f.z2 = d.w2 * f.a1 + d.b2;
  f.a2 = relu(f.z2);
  f.value = (d.w3 * f.a2)(0) + d.b3;
  return f;
}

Vec12f input_gradient(const SdfDecoder& d, const DecoderForward& f) {
  const Vec32f d2 = relu_mask(f.z2).cwiseProduct(d.w3.transpose());
  const Vec32f d1 = relu_mask(f.z1).cwiseProduct(d.w2.transpose() * d2);
  return d.w1.transpose() * d1;
}

void DecoderGrads::set_zero() {
  w1.setZero();
  b1.setZero();
  w2.setZero();
  b2.setZero();
  w3.setZero();
  b3 = 0.0f;
}

void DecoderGrads::add_scaled(const DecoderGrads& other, float s) {
  w1 += s * other.w1;
  b1 += s * other.b1;
  w2 += s * other.w2;
  b2 += s * other.b2;
  w3 += s * other.w3;
  b3 += s * other.b3;
}

bool DecoderGrads::all_finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite() &&
         w3.allFinite() && std::isfinite(b3);
}

void backprop_value(const SdfDecoder& d, const DecoderForward& f, float upstream,
                    DecoderGrads& grads) {
  grads.b3 += upstream;
  grads.w3 += upstream * f.a2.transpose();
  const Vec32f d2 = upstream * relu_mask(f.z2).cwiseProduct(d.w3.transpose());
  grads.b2 += d2;
  grads.w2 += d2 * f.a1.transpose();
  const Vec32f d1 = relu_mask(f.z1).cwiseProduct(d.w2.transpose() * d2);
  grads.b1 += d1;
  grads.w1 += d1 * f.input.transpose();
}

void backprop_input_gradient(const SdfDecoder& d, const DecoderForward& f, const Vec12f& v,
                             DecoderGrads& grads) {
  const Vec32f m1 = relu_mask(f.z1);
  const Vec32f m2 = relu_mask(f.z2);
  const Vec32f r2 = m2.cwiseProduct(d.w3.transpose());        // D2 w3
  const Vec32f r1 = m1.cwiseProduct(d.w2.transpose() * r2);   // D1 W2^T D2 w3
  const Vec32f t1 = m1.cwiseProduct(d.w1 * v);                // D1 W1 v
  const Vec32f t2 = m2.cwiseProduct(d.w2 * t1);               // D2 W2 D1 W1 v
  grads.w1 += r1 * v.transpose();
  grads.w2 += r2 * t1.transpose();
  grads.w3 += t2.transpose();
}

double logistic(double x, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("logistic: alpha must be > 0");
  const double z = x / alpha;
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

}  // namespace nsdf
