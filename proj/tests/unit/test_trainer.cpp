#include <doctest.h>

#include <cmath>
#include <sstream>

#include "holobind/errors.hpp"
#include "holobind/trainer.hpp"
#include "holobind/vsa.hpp"
#include "oracles.hpp"

using namespace holobind;

TEST_CASE("adam single steps") {
  Tensor p = oracle::random_tensor({5}, 1);
  const Tensor before = p;
  std::vector<Tensor*> params{&p};
  AdamState state;
  adam_step(params, std::vector<Tensor>{Tensor({5})}, state, 1e-3, 0.9, 0.999, 1e-8);
  CHECK(p == before);

  AdamState fresh;
  const Tensor g({5}, {0.5, -2.0, 1e-3, -7.0, 3.0});
  adam_step(params, std::vector<Tensor>{g}, fresh, 1e-3, 0.9, 0.999, 1e-8);
  // After one bias-corrected step m_hat = g and v_hat = g^2.
  for (std::size_t i = 0; i < 5; ++i) {
    const double expect = -1e-3 * g[i] / (std::abs(g[i]) + 1e-8);
    CHECK(p[i] - before[i] == doctest::Approx(expect).epsilon(1e-9));
  }
  CHECK(fresh.step == 1);
  CHECK(decode_adam_state(encode_adam_state(fresh)) == fresh);
  CHECK_THROWS_AS(adam_step(params, std::vector<Tensor>{Tensor({4})}, fresh, 1e-3, 0.9, 0.999, 1e-8), ShapeError);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = {};
  cfg.learning_rate = -1;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
}

TEST_CASE("synthetic dataset") {
  const auto a = synth_dataset(3), b = synth_dataset(3);
  CHECK(a.train_images.size() == 512);
  CHECK(a.test_images.size() == 256);
  CHECK(a.train_images.front().dims() == Dims{16, 16, 1});
  CHECK(a.train_images == b.train_images);
  CHECK(a.test_labels == b.test_labels);
  CHECK(synth_dataset(4).train_images != a.train_images);
  std::vector<std::size_t> counts(4);
  for (auto y : a.train_labels) ++counts[y];
  CHECK(counts == std::vector<std::size_t>(4, 128));
  for (const auto& p : a.patterns) CHECK(norm(p) == doctest::Approx(1.0));
}

TEST_CASE("linear probes: separability gate and the per-example secret") {
  SynthOptions clean;
  clean.noise_sigma = 0;
  const double noiseless = linear_adversary_demo(synth_dataset(1, clean), 1, LinearDemoVariant::unbound);
  const auto data = synth_dataset(1);
  const double unbound = linear_adversary_demo(data, 1, LinearDemoVariant::unbound);
  const double shared = linear_adversary_demo(data, 1, LinearDemoVariant::shared_secret);
  const double fresh = linear_adversary_demo(data, 1, LinearDemoVariant::per_example_secret);
  MESSAGE("noiseless " << noiseless << " unbound " << unbound << " shared " << shared << " per-example " << fresh);
  CHECK(noiseless == 1.0);
  CHECK(unbound >= 0.95);
  CHECK(shared >= 0.90);
  CHECK(std::abs(fresh - 0.25) <= 0.05);
}

TEST_CASE("untrained model is at chance in every mode") {
  const auto data = synth_dataset(5);
  TrainConfig cfg;
  cfg.epochs = 0;
  const ToyModel model = train_csps(data, cfg).model;
  for (EvalMode mode : {EvalMode::with_secret, EvalMode::adversary_raw, EvalMode::plain}) {
    const double acc = evaluate(model, data.test_images, data.test_labels, mode, RngStream(6));
    CHECK_MESSAGE(std::abs(acc - 0.25) <= 0.08, to_string(mode) << " " << acc);
  }
}

TEST_CASE("zero epochs returns the initialization and models serialize") {
  const auto data = synth_dataset(7);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 9;
  const auto result = train_csps(data, cfg);
  CHECK(result.metrics.empty());
  const ToyModel init = init_toy_model({16, 16, 1}, 4, cfg);
  const auto a = model_parameters(result.model), b = model_parameters(init);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i] == *b[i]);

  const ToyModel back = decode_model(encode_model(init));
  const auto c = model_parameters(back);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(*c[i] == *b[i]);
  CHECK(back.classes == 4);
  CHECK(back.config.seed == 9);
  CHECK(format_backbone_spec(back.backbone) == format_backbone_spec(init.backbone));
  Bytes bad = encode_model(init);
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_model(bad), FormatError);
}

TEST_CASE("gradient reversal identity on the backbone") {
  TrainConfig cfg;
  const ToyModel model = init_toy_model({16, 16, 1}, 4, cfg);
  const Tensor x = oracle::random_tensor({16, 16, 1}, 10);
  const Secret s = sample_secret({16, 16, 1}, RngStream(11)).value;
  const auto g = example_gradients(model, x, 1, s);

  // The adversarial path in isolation, without reversal.
  const Tensor r = apply(model.backbone, bind(x, s));
  HeadTrace trace;
  const auto ce = softmax_cross_entropy(head_forward(model.adversary, r, &trace), 1);
  const Tensor direct = head_backward(model.adversary, trace, ce.grad).input.reshaped(r.dims());
  CHECK(max_abs_diff(g.backbone_output_from_adv, -1.0 * direct) <= 1e-10);

  const auto acts = backbone_forward_traced(model.backbone, bind(x, s));
  const auto from_pred = backbone_backward(model.backbone, acts, g.backbone_output_from_pred);
  const auto from_adv = backbone_backward(model.backbone, acts, g.backbone_output_from_adv);
  std::size_t p = 0;
  for (std::size_t li = 0; li < model.backbone.layers.size(); ++li) {
    if (model.backbone.layers[li].kind != LayerKind::circconv2d) continue;
    CHECK(max_abs_diff(g.params[p++], from_pred.layer_weights[li] + from_adv.layer_weights[li]) <= 1e-10);
  }
}

TEST_CASE("training is deterministic and the loss falls early") {
  const auto data = synth_dataset(1);
  TrainConfig cfg;
  cfg.epochs = 5;
  std::vector<EpochMetrics> seen;
  const auto a = train_csps(data, cfg, [&](const EpochMetrics& m) { seen.push_back(m); });
  REQUIRE(a.metrics.size() == 5);
  CHECK(seen.size() == 5);
  for (std::size_t e = 1; e < 5; ++e)
    CHECK_MESSAGE(a.metrics[e].train_loss < a.metrics[e - 1].train_loss, "epoch " << e);

  TrainConfig short_cfg = cfg;
  short_cfg.epochs = 1;
  const auto b = train_csps(data, short_cfg), c = train_csps(data, short_cfg);
  const auto pb = model_parameters(b.model), pc = model_parameters(c.model);
  for (std::size_t i = 0; i < pb.size(); ++i) {
    CHECK(*pb[i] == *pc[i]);
    CHECK(std::isfinite(norm(*pb[i])));
  }
  CHECK(b.metrics.front().train_loss == a.metrics.front().train_loss);

  std::ostringstream out;
  write_metrics_csv(out, a.metrics);
  CHECK(out.str().rfind("epoch,train_loss,pred_acc,adv_acc\n", 0) == 0);
}
