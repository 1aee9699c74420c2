#include <doctest.h>

#include <functional>

#include "holobind/layers.hpp"
#include "holobind/trainer.hpp"
#include "holobind/vsa.hpp"
#include "oracles.hpp"

using namespace holobind;

namespace {

constexpr std::size_t kCoords = 20;
constexpr double kTol = 1e-4;

// Worst relative error between `analytic` and central differences of `f` at
// 20 coordinates drawn from `seed`.
double fd_check(const std::function<double(const Tensor&)>& f, const Tensor& x, const Tensor& analytic,
                std::uint64_t seed) {
  REQUIRE(analytic.size() == x.size());
  const RngStream rng(seed);
  double worst = 0;
  for (std::size_t n = 0; n < kCoords; ++n) {
    const std::size_t i = rng.word(n) % x.size();
    worst = std::max(worst, oracle::relative_error(oracle::central_difference(f, x, i), analytic[i], 1e-6));
  }
  return worst;
}

}  // namespace

TEST_CASE("circconv gradients") {
  const Tensor k = oracle::random_tensor({3, 3, 2, 3}, 1), x = oracle::random_tensor({6, 6, 2}, 2);
  const Tensor up = oracle::random_tensor({6, 6, 3}, 3);
  const auto g = circconv_backward(k, x, up);
  CHECK(fd_check([&](const Tensor& kk) { return dot(circconv_forward(kk, x), up); }, k, g.kernel, 4) <= kTol);
  CHECK(fd_check([&](const Tensor& xx) { return dot(circconv_forward(k, xx), up); }, x, g.input, 5) <= kTol);
}

TEST_CASE("dense gradients") {
  const Tensor w = oracle::random_tensor({5, 12}, 6), b = oracle::random_tensor({5}, 7);
  const Tensor x = oracle::random_tensor({12}, 8), up = oracle::random_tensor({5}, 9);
  const auto g = dense_backward(w, x, up);
  CHECK(fd_check([&](const Tensor& ww) { return dot(dense_forward(ww, b, x), up); }, w, g.weights, 10) <= kTol);
  CHECK(fd_check([&](const Tensor& bb) { return dot(dense_forward(w, bb, x), up); }, b, g.bias, 11) <= kTol);
  CHECK(fd_check([&](const Tensor& xx) { return dot(dense_forward(w, b, xx), up); }, x, g.input, 12) <= kTol);
}

TEST_CASE("leaky-relu and softmax cross-entropy gradients") {
  const Tensor x = oracle::random_tensor({40}, 13), up = oracle::random_tensor({40}, 14);
  CHECK(fd_check([&](const Tensor& xx) { return dot(leaky_relu_forward(xx, 0.1), up); }, x,
                 leaky_relu_backward(x, 0.1, up), 15) <= kTol);
  const Tensor logits = oracle::random_tensor({6}, 16);
  const auto ce = softmax_cross_entropy(logits, 2);
  CHECK(fd_check([](const Tensor& l) { return softmax_cross_entropy(l, 2).loss; }, logits, ce.grad, 17) <= kTol);
  double total = 0;
  for (double p : softmax(logits)) total += p;
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("gradient reversal is identity forward and negation backward") {
  const Tensor t = oracle::random_tensor({7}, 18);
  CHECK(reverse_grad_forward(t) == t);
  CHECK(reverse_grad_backward(t) == -1.0 * t);
}

TEST_CASE("binding as a linear map") {
  const Secret s = sample_secret({8, 8}, RngStream(19)).value;
  const Tensor x = oracle::random_tensor({8, 8}, 20), up = oracle::random_tensor({8, 8}, 21);
  // d/dx <unbind(x, s), up> = unbind_adjoint(up, s); same for bind with adjoint unbind-by-conjugate.
  CHECK(fd_check([&](const Tensor& xx) { return dot(unbind(xx, s), up); }, x, unbind_adjoint(up, s), 22) <= kTol);
  CHECK(fd_check([&](const Tensor& xx) { return dot(bind(xx, s), up); }, x, unbind(up, s), 23) <= kTol);
}

TEST_CASE("head gradients") {
  Head head = make_head(20, 8, 3, 24);
  const Tensor x = oracle::random_tensor({20}, 25);
  HeadTrace trace;
  const auto ce = softmax_cross_entropy(head_forward(head, x, &trace), 1);
  auto g = head_backward(head, trace, ce.grad);
  auto loss_with = [&](std::size_t which) {
    return [&, which](const Tensor& p) {
      Head h = head;
      *head_parameters(h)[which] = p;
      return softmax_cross_entropy(head_forward(h, x), 1).loss;
    };
  };
  const auto params = head_parameters(head);
  const auto grads = head_parameters(g.params);
  for (std::size_t i = 0; i < params.size(); ++i)
    CHECK_MESSAGE(fd_check(loss_with(i), *params[i], *grads[i], 26 + i) <= kTol, "head parameter " << i);
  CHECK(fd_check([&](const Tensor& xx) { return softmax_cross_entropy(head_forward(head, xx), 1).loss; }, x,
                 g.input, 30) <= kTol);
}

TEST_CASE("backbone gradients") {
  const BackboneSpec spec = toy_fw_spec({8, 8, 1}, 31);
  const Tensor x = oracle::random_tensor({8, 8, 1}, 32), up = oracle::random_tensor({8, 8, 1}, 33);
  const auto acts = backbone_forward_traced(spec, x);
  CHECK(acts.back() == apply(spec, x));
  const auto g = backbone_backward(spec, acts, up);
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    if (spec.layers[li].kind != LayerKind::circconv2d) continue;
    auto f = [&](const Tensor& w) {
      BackboneSpec s = spec;
      s.layers[li].weights = w;
      return dot(apply(s, x), up);
    };
    CHECK_MESSAGE(fd_check(f, spec.layers[li].weights, g.layer_weights[li], 34 + li) <= kTol, "layer " << li);
  }
  CHECK(fd_check([&](const Tensor& xx) { return dot(apply(spec, xx), up); }, x, g.input, 40) <= kTol);
}

TEST_CASE("full example gradients, with reversal on the backbone") {
  TrainConfig cfg;
  cfg.seed = 41;
  const ToyModel model = init_toy_model({8, 8, 1}, 3, cfg);
  const Tensor x = oracle::random_tensor({8, 8, 1}, 42);
  const Secret s = sample_secret({8, 8, 1}, RngStream(43)).value;
  const auto g = example_gradients(model, x, 2, s);
  const auto params = model_parameters(model);
  REQUIRE(g.params.size() == params.size());
  const std::size_t backbone_count = params.size() - 8;

  // Heads descend their own loss; the backbone descends L_pred - L_adv.
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double adv_sign = i < backbone_count ? -1.0 : 1.0;
    auto f = [&](const Tensor& p) {
      ToyModel m = model;
      *model_parameters(m)[i] = p;
      const auto e = example_gradients(m, x, 2, s);
      return e.loss_pred + adv_sign * e.loss_adv;
    };
    CHECK_MESSAGE(fd_check(f, *params[i], g.params[i], 50 + i) <= kTol, "parameter " << i);
  }
}
