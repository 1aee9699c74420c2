#include "holobind/layers.hpp"

#include <algorithm>
#include <cmath>

#include "holobind/errors.hpp"
#include "holobind/rng.hpp"

namespace holobind {

Tensor dense_forward(const Tensor& weights, const Tensor& bias, const Tensor& x) {
  const std::size_t rows = weights.dims().at(0), cols = weights.dims().at(1);
  if (x.size() != cols || bias.size() != rows) throw ShapeError("dense_forward: shape mismatch");
  Tensor y({rows});
  const double* w = weights.values().data();
  const double* in = x.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = bias[r];
    const double* wr = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * in[c];
    y[r] = acc;
  }
  return y;
}

DenseGrads dense_backward(const Tensor& weights, const Tensor& x, const Tensor& upstream) {
  const std::size_t rows = weights.dims().at(0), cols = weights.dims().at(1);
  if (x.size() != cols || upstream.size() != rows) throw ShapeError("dense_backward: shape mismatch");
  DenseGrads g{Tensor(weights.dims()), Tensor({rows}), Tensor(x.dims())};
  const double* w = weights.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double u = upstream[r];
    g.bias[r] = u;
    if (u == 0.0) continue;
    double* gw = g.weights.values().data() + r * cols;
    const double* wr = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      gw[c] = u * x[c];
      g.input[c] += u * wr[c];
    }
  }
  return g;
}

Tensor leaky_relu_forward(const Tensor& x, double alpha) {
  Tensor y = x;
  for (double& v : y.values())
    if (v < 0) v *= alpha;
  return y;
}

Tensor leaky_relu_backward(const Tensor& x, double alpha, const Tensor& upstream) {
  require_same_dims(x, upstream, "leaky_relu_backward");
  Tensor g = upstream;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (x[i] < 0) g[i] *= alpha;
  return g;
}

std::vector<double> softmax(const Tensor& logits) {
  std::vector<double> p(logits.values().begin(), logits.values().end());
  const double mx = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& v : p) sum += (v = std::exp(v - mx));
  for (double& v : p) v /= sum;
  return p;
}

LossGrad softmax_cross_entropy(const Tensor& logits, std::size_t label) {
  if (label >= logits.size()) throw ParameterError("label out of range for logits");
  const auto p = softmax(logits);
  LossGrad out{-std::log(std::max(p[label], 1e-300)), Tensor(logits.dims())};
  for (std::size_t i = 0; i < p.size(); ++i) out.grad[i] = p[i] - (i == label ? 1.0 : 0.0);
  return out;
}

Tensor reverse_grad_forward(const Tensor& t) { return t; }

Tensor reverse_grad_backward(const Tensor& upstream) { return -1.0 * upstream; }

Head make_head(std::size_t inputs, std::size_t hidden, std::size_t classes, std::uint64_t seed) {
  const RngStream root(seed);
  Head h;
  h.w1 = gaussian_tensor({hidden, inputs}, 2.0 / static_cast<double>(inputs), root.fork(1)).value;
  h.b1 = Tensor({hidden});
  h.w2 = gaussian_tensor({classes, hidden}, 1.0 / static_cast<double>(hidden), root.fork(2)).value;
  h.b2 = Tensor({classes});
  return h;
}

Tensor head_forward(const Head& head, const Tensor& input, HeadTrace* trace) {
  Tensor flat = input.reshaped({input.size()});
  Tensor z1 = dense_forward(head.w1, head.b1, flat);
  Tensor a1 = leaky_relu_forward(z1, kHeadSlope);
  Tensor logits = dense_forward(head.w2, head.b2, a1);
  if (trace) *trace = HeadTrace{std::move(flat), std::move(z1), std::move(a1)};
  return logits;
}

HeadGrads head_backward(const Head& head, const HeadTrace& trace, const Tensor& dlogits) {
  auto g2 = dense_backward(head.w2, trace.a1, dlogits);
  const Tensor dz1 = leaky_relu_backward(trace.z1, kHeadSlope, g2.input);
  auto g1 = dense_backward(head.w1, trace.input, dz1);
  HeadGrads out;
  out.params = Head{std::move(g1.weights), std::move(g1.bias), std::move(g2.weights), std::move(g2.bias)};
  out.input = std::move(g1.input);
  return out;
}

std::vector<double> head_predict(const Head& head, const Tensor& input) {
  return softmax(head_forward(head, input));
}

std::vector<Tensor*> head_parameters(Head& head) { return {&head.w1, &head.b1, &head.w2, &head.b2}; }

std::vector<Tensor> backbone_forward_traced(const BackboneSpec& spec, const Tensor& x) {
  if (x.dims() != spec.input_dims) throw ShapeError("backbone input has the wrong shape");
  std::vector<Tensor> acts;
  acts.reserve(spec.layers.size() + 1);
  acts.push_back(x);
  for (const auto& layer : spec.layers) {
    const Tensor& cur = acts.back();
    switch (layer.kind) {
      case LayerKind::identity: acts.push_back(cur); break;
      case LayerKind::circconv2d: acts.push_back(circconv_forward(layer.weights, cur)); break;
      case LayerKind::pointwise: acts.push_back(leaky_relu_forward(cur, layer.alpha)); break;
      case LayerKind::dense: {
        Tensor y = dense_forward(layer.weights, Tensor({layer.rows}), cur);
        acts.push_back(layer.rows == layer.cols ? y.reshaped(cur.dims()) : y);
        break;
      }
    }
  }
  return acts;
}

BackboneGrads backbone_backward(const BackboneSpec& spec, const std::vector<Tensor>& acts,
                                const Tensor& upstream) {
  if (acts.size() != spec.layers.size() + 1) throw ShapeError("backbone trace does not match spec");
  BackboneGrads out;
  out.layer_weights.resize(spec.layers.size());
  Tensor grad = upstream.reshaped(acts.back().dims());
  for (std::size_t li = spec.layers.size(); li-- > 0;) {
    const auto& layer = spec.layers[li];
    const Tensor& in = acts[li];
    switch (layer.kind) {
      case LayerKind::identity: break;
      case LayerKind::circconv2d: {
        auto g = circconv_backward(layer.weights, in, grad);
        out.layer_weights[li] = std::move(g.kernel);
        grad = std::move(g.input);
        break;
      }
      case LayerKind::pointwise: grad = leaky_relu_backward(in, layer.alpha, grad); break;
      case LayerKind::dense: {
        auto g = dense_backward(layer.weights, in, grad);
        out.layer_weights[li] = std::move(g.weights);
        grad = g.input.reshaped(in.dims());
        break;
      }
    }
  }
  out.input = std::move(grad);
  return out;
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace holobind
