#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "holobind/backbone.hpp"
#include "holobind/tensor.hpp"

namespace holobind {

// Differentiable primitives with handwritten backward passes. Every
// backward takes the forward inputs plus the upstream gradient.

/// y = W x + b for W rows x cols; x is read flat.
Tensor dense_forward(const Tensor& weights, const Tensor& bias, const Tensor& x);
struct DenseGrads {
  Tensor weights;
  Tensor bias;
  Tensor input;
};
DenseGrads dense_backward(const Tensor& weights, const Tensor& x, const Tensor& upstream);

Tensor leaky_relu_forward(const Tensor& x, double alpha);
Tensor leaky_relu_backward(const Tensor& x, double alpha, const Tensor& upstream);

std::vector<double> softmax(const Tensor& logits);
struct LossGrad {
  double loss;
  Tensor grad;  // d loss / d logits
};
LossGrad softmax_cross_entropy(const Tensor& logits, std::size_t label);

/// Gradient reversal: identity forward, negation backward.
Tensor reverse_grad_forward(const Tensor& t);
Tensor reverse_grad_backward(const Tensor& upstream);

/// flatten -> dense(hidden) -> leaky-relu(0.1) -> dense(classes) -> softmax.
/// Used for both the prediction and the adversarial head.
struct Head {
  Tensor w1, b1, w2, b2;

  std::size_t inputs() const { return w1.dims().at(1); }
  std::size_t classes() const { return w2.dims().at(0); }
};

inline constexpr double kHeadSlope = 0.1;

Head make_head(std::size_t inputs, std::size_t hidden, std::size_t classes, std::uint64_t seed);

struct HeadTrace {
  Tensor input, z1, a1;
};
/// Returns logits; fills `trace` when given.
Tensor head_forward(const Head& head, const Tensor& input, HeadTrace* trace = nullptr);
struct HeadGrads {
  Head params;
  Tensor input;
};
HeadGrads head_backward(const Head& head, const HeadTrace& trace, const Tensor& dlogits);
std::vector<double> head_predict(const Head& head, const Tensor& input);
std::vector<Tensor*> head_parameters(Head& head);

/// Forward pass that keeps every intermediate activation; acts[0] is the
/// input and acts.back() the output.
std::vector<Tensor> backbone_forward_traced(const BackboneSpec& spec, const Tensor& x);
struct BackboneGrads {
  std::vector<Tensor> layer_weights;  // aligned with spec.layers, empty when weightless
  Tensor input;
};
BackboneGrads backbone_backward(const BackboneSpec& spec, const std::vector<Tensor>& acts,
                                const Tensor& upstream);

std::size_t argmax(std::span<const double> v);

}  // namespace holobind
