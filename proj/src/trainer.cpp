#include "holobind/trainer.hpp"

#include <cmath>
#include <cstring>
#include <ostream>
#include <sstream>

#include "holobind/errors.hpp"
#include "holobind/vsa.hpp"

namespace holobind {
namespace {

constexpr std::uint8_t kModelMagic[4] = {'H', 'B', 'T', 'M'};
constexpr std::uint16_t kModelVersion = 1;

// Fork keys for the training streams.
constexpr std::uint64_t kShuffleKey = 0x5348;
constexpr std::uint64_t kSecretKey = 0x5345;

Tensor to_flat(const Tensor& t) { return t.reshaped({t.size()}); }

double parameter_norm(std::span<Tensor* const> params) {
  double s = 0.0;
  for (const Tensor* p : params)
    for (double v : p->values()) s += v * v;
  return std::sqrt(s);
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw ParameterError("batch size must be positive");
  if (!(learning_rate > 0) || !(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1) ||
      !(epsilon > 0) || !(decay_factor > 0))
    throw ParameterError("optimizer settings must be positive (betas in (0, 1))");
}

SynthDataset synth_dataset(std::uint64_t seed, const SynthOptions& options) {
  if (options.classes == 0 || options.side == 0) throw ParameterError("empty dataset geometry");
  SynthDataset data;
  data.classes = options.classes;
  data.noise_sigma = options.noise_sigma;
  data.seed = seed;
  const RngStream root(seed);
  const Dims dims{options.side, options.side, 1};
  RngStream pattern_rng = root.fork(1);
  for (std::size_t c = 0; c < options.classes; ++c) {
    auto d = gaussian_tensor(dims, 1.0, pattern_rng);
    pattern_rng = d.next;
    data.patterns.push_back((1.0 / norm(d.value)) * d.value);
  }
  auto make_split = [&](std::size_t count, RngStream rng, std::vector<Tensor>& images,
                        std::vector<std::size_t>& labels) {
    Sampler noise(rng);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t label = i % options.classes;
      Tensor img = data.patterns[label];
      if (options.noise_sigma > 0)
        for (double& v : img.values()) v += options.noise_sigma * noise.normal();
      images.push_back(std::move(img));
      labels.push_back(label);
    }
  };
  make_split(options.train_count, root.fork(2), data.train_images, data.train_labels);
  make_split(options.test_count, root.fork(3), data.test_images, data.test_labels);
  return data;
}

ToyModel init_toy_model(const Dims& input_dims, std::size_t classes, const TrainConfig& config) {
  ToyModel model;
  const RngStream root(config.seed);
  model.backbone = toy_fw_spec(input_dims, root.fork(10).word());
  const std::size_t inputs = element_count(input_dims);
  model.predictor = make_head(inputs, kHeadHidden, classes, root.fork(11).word());
  model.adversary = make_head(inputs, kHeadHidden, classes, root.fork(12).word());
  model.classes = classes;
  model.config = config;
  return model;
}

std::vector<const Tensor*> model_parameters(const ToyModel& model) {
  std::vector<const Tensor*> params;
  for (const auto& layer : model.backbone.layers)
    if (layer.kind == LayerKind::circconv2d || layer.kind == LayerKind::dense)
      params.push_back(&layer.weights);
  for (const Head* h : {&model.predictor, &model.adversary})
    for (const Tensor* p : {&h->w1, &h->b1, &h->w2, &h->b2}) params.push_back(p);
  return params;
}

std::vector<Tensor*> model_parameters(ToyModel& model) {
  std::vector<Tensor*> params;
  for (auto& layer : model.backbone.layers)
    if (layer.kind == LayerKind::circconv2d || layer.kind == LayerKind::dense)
      params.push_back(&layer.weights);
  for (Tensor* p : head_parameters(model.predictor)) params.push_back(p);
  for (Tensor* p : head_parameters(model.adversary)) params.push_back(p);
  return params;
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               double learning_rate, double beta1, double beta2, double epsilon) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter/gradient count mismatch");
  if (state.first_moment.empty()) {
    for (const Tensor* p : params) {
      state.first_moment.emplace_back(p->dims());
      state.second_moment.emplace_back(p->dims());
    }
  }
  if (state.first_moment.size() != params.size()) throw ShapeError("adam_step: state does not match parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    require_same_dims(p, g, "adam_step");
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
      v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p[j] -= learning_rate * mhat / (std::sqrt(vhat) + epsilon);
    }
  }
}

Bytes encode_adam_state(const AdamState& state) {
  Bytes out;
  put_u64(out, state.step);
  put_u32(out, static_cast<std::uint32_t>(state.first_moment.size()));
  for (std::size_t i = 0; i < state.first_moment.size(); ++i) {
    append_tensor(out, state.first_moment[i], Dtype::f64);
    append_tensor(out, state.second_moment[i], Dtype::f64);
  }
  return out;
}

AdamState decode_adam_state(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw FormatError("truncated optimizer state header", bytes.size());
  AdamState state;
  state.step = get_u64(bytes, 0);
  const std::uint32_t count = get_u32(bytes, 8);
  std::size_t offset = 12;
  for (std::uint32_t i = 0; i < count; ++i) {
    state.first_moment.push_back(decode_tensor(bytes, offset));
    state.second_moment.push_back(decode_tensor(bytes, offset));
  }
  if (offset != bytes.size()) throw FormatError("trailing bytes after optimizer state", offset);
  return state;
}

ExampleGrads example_gradients(const ToyModel& model, const Tensor& x, std::size_t label,
                               const Secret& secret) {
  const Tensor bound = bind(x, secret);
  const auto acts = backbone_forward_traced(model.backbone, bound);
  const Tensor& r = acts.back();

  HeadTrace pred_trace, adv_trace;
  const Tensor unbound = unbind(r, secret);
  const Tensor pred_logits = head_forward(model.predictor, unbound, &pred_trace);
  const Tensor adv_logits = head_forward(model.adversary, reverse_grad_forward(r), &adv_trace);
  const auto pred = softmax_cross_entropy(pred_logits, label);
  const auto adv = softmax_cross_entropy(adv_logits, label);

  auto pred_grads = head_backward(model.predictor, pred_trace, pred.grad);
  auto adv_grads = head_backward(model.adversary, adv_trace, adv.grad);

  ExampleGrads out;
  out.loss_pred = pred.loss;
  out.loss_adv = adv.loss;
  out.pred_label = argmax(pred_logits.values());
  out.adv_label = argmax(adv_logits.values());
  // unbind is a fixed linear map of r, so its adjoint carries the gradient back.
  out.backbone_output_from_pred = unbind_adjoint(pred_grads.input.reshaped(r.dims()), secret);
  out.backbone_output_from_adv = reverse_grad_backward(adv_grads.input.reshaped(r.dims()));
  const Tensor dr = out.backbone_output_from_pred + out.backbone_output_from_adv;
  auto bb = backbone_backward(model.backbone, acts, dr);

  for (std::size_t li = 0; li < model.backbone.layers.size(); ++li) {
    const auto kind = model.backbone.layers[li].kind;
    if (kind == LayerKind::circconv2d || kind == LayerKind::dense)
      out.params.push_back(std::move(bb.layer_weights[li]));
  }
  for (Tensor* g : head_parameters(pred_grads.params)) out.params.push_back(std::move(*g));
  for (Tensor* g : head_parameters(adv_grads.params)) out.params.push_back(std::move(*g));
  return out;
}

TrainResult train_csps(const SynthDataset& data, const TrainConfig& config,
                       const EpochCallback& on_epoch) {
  config.validate();
  if (data.train_images.empty()) throw ParameterError("training set is empty");
  TrainResult result;
  result.model = init_toy_model(data.train_images.front().dims(), data.classes, config);
  ToyModel& model = result.model;
  auto params = model_parameters(model);
  AdamState adam;
  const RngStream root(config.seed);
  const std::size_t n = data.train_images.size();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr =
        config.learning_rate * (epoch >= config.decay_epoch ? config.decay_factor : 1.0);
    const auto order = permutation(n, root.fork(kShuffleKey).fork(epoch)).value;
    RngStream secret_rng = root.fork(kSecretKey).fork(epoch);
    double loss_sum = 0.0;
    std::size_t pred_hits = 0, adv_hits = 0;

    for (std::size_t start = 0, batch = 0; start < n; start += config.batch_size, ++batch) {
      const std::size_t end = std::min(n, start + config.batch_size);
      std::vector<Tensor> grads;
      for (const Tensor* p : params) grads.emplace_back(p->dims());
      double batch_loss = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        auto draw = sample_secret(data.train_images[idx].dims(), secret_rng);
        secret_rng = draw.next;
        Secret& secret = draw.value;
        const Tensor& x = data.train_images[idx];
        const std::size_t label = data.train_labels[idx];

        auto eg = example_gradients(model, x, label, secret);
        batch_loss += eg.loss_pred + eg.loss_adv;
        for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += eg.params[i];
        if (eg.pred_label == label) ++pred_hits;
        if (eg.adv_label == label) ++adv_hits;
        secure_wipe(secret.tensor);
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (auto& g : grads)
        for (double& v : g.values()) v *= scale;
      if (!std::isfinite(batch_loss))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch) + ", parameter norm " +
                           std::to_string(parameter_norm(params)));
      adam_step(params, grads, adam, lr, config.beta1, config.beta2, config.epsilon);
      loss_sum += batch_loss;
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(n);
    m.pred_acc = static_cast<double>(pred_hits) / static_cast<double>(n);
    m.adv_acc = static_cast<double>(adv_hits) / static_cast<double>(n);
    for (Tensor* p : params)
      for (double v : p->values())
        if (!std::isfinite(v))
          throw NumericError("non-finite parameter after epoch " + std::to_string(epoch));
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return result;
}

const char* to_string(EvalMode mode) {
  switch (mode) {
    case EvalMode::with_secret: return "with_secret";
    case EvalMode::adversary_raw: return "adversary_raw";
    case EvalMode::plain: return "plain";
  }
  return "?";
}

double evaluate(const ToyModel& model, const std::vector<Tensor>& images,
                const std::vector<std::size_t>& labels, EvalMode mode, RngStream rng) {
  if (images.size() != labels.size() || images.empty())
    throw ParameterError("evaluate: need matching, non-empty images and labels");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::vector<double> p;
    if (mode == EvalMode::plain) {
      p = head_predict(model.predictor, images[i]);
    } else {
      auto draw = sample_secret(images[i].dims(), rng);
      rng = draw.next;
      const Tensor r = apply(model.backbone, bind(images[i], draw.value));
      p = mode == EvalMode::with_secret ? head_predict(model.predictor, unbind(r, draw.value))
                                        : head_predict(model.adversary, r);
      secure_wipe(draw.value.tensor);
    }
    if (argmax(p) == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(images.size());
}

std::vector<Tensor> worker_outputs(const ToyModel& model, const std::vector<Tensor>& images,
                                   RngStream rng) {
  std::vector<Tensor> out;
  out.reserve(images.size());
  for (const auto& img : images) {
    auto draw = sample_secret(img.dims(), rng);
    rng = draw.next;
    out.push_back(apply(model.backbone, bind(img, draw.value)));
  }
  return out;
}

constexpr double kLinearWeightDecay = 0.1;

double linear_adversary_demo(const SynthDataset& data, std::uint64_t seed, LinearDemoVariant variant) {
  const RngStream root(seed);
  const Dims dims = data.train_images.at(0).dims();
  const std::size_t d = element_count(dims), classes = data.classes;
  const Secret shared = sample_secret(dims, root.fork(1)).value;

  RngStream secret_rng = root.fork(2);
  auto prepare = [&](const Tensor& x) {
    switch (variant) {
      case LinearDemoVariant::unbound: return to_flat(x);
      case LinearDemoVariant::shared_secret: return to_flat(bind(x, shared));
      case LinearDemoVariant::per_example_secret: break;
    }
    auto draw = sample_secret(dims, secret_rng);
    secret_rng = draw.next;
    return to_flat(bind(x, draw.value));
  };

  std::vector<Tensor> train;
  for (const auto& x : data.train_images) train.push_back(prepare(x));

  // Full-batch Adam on a linear softmax model with L2 weight decay.
  Tensor w = Tensor({classes, d}), b = Tensor({classes});
  std::vector<Tensor*> params{&w, &b};
  AdamState adam;
  constexpr std::size_t kSteps = 300;
  for (std::size_t step = 0; step < kSteps; ++step) {
    std::vector<Tensor> grads{Tensor(w.dims()), Tensor(b.dims())};
    for (std::size_t i = 0; i < train.size(); ++i) {
      const auto lg = softmax_cross_entropy(dense_forward(w, b, train[i]), data.train_labels[i]);
      auto g = dense_backward(w, train[i], lg.grad);
      grads[0] += g.weights;
      grads[1] += g.bias;
    }
    const double scale = 1.0 / static_cast<double>(train.size());
    for (auto& g : grads)
      for (double& v : g.values()) v *= scale;
    grads[0] += kLinearWeightDecay * w;
    adam_step(params, grads, adam, 1e-2, 0.9, 0.999, 1e-8);
  }

  // Fresh bindings for evaluation; several per test image to tame variance.
  const std::size_t replicates = variant == LinearDemoVariant::per_example_secret ? 4 : 1;
  std::size_t hits = 0, total = 0;
  for (std::size_t rep = 0; rep < replicates; ++rep)
    for (std::size_t i = 0; i < data.test_images.size(); ++i, ++total) {
      const Tensor logits = dense_forward(w, b, prepare(data.test_images[i]));
      if (argmax(logits.values()) == data.test_labels[i]) ++hits;
    }
  return static_cast<double>(hits) / static_cast<double>(total);
}

Bytes encode_model(const ToyModel& model) {
  Bytes out(std::begin(kModelMagic), std::end(kModelMagic));
  put_u16(out, kModelVersion);
  put_u32(out, static_cast<std::uint32_t>(model.classes));
  const auto& c = model.config;
  put_u32(out, static_cast<std::uint32_t>(c.epochs));
  put_u32(out, static_cast<std::uint32_t>(c.batch_size));
  put_f64(out, c.learning_rate);
  put_f64(out, c.beta1);
  put_f64(out, c.beta2);
  put_f64(out, c.epsilon);
  put_u32(out, static_cast<std::uint32_t>(c.decay_epoch));
  put_f64(out, c.decay_factor);
  put_u64(out, c.seed);
  const std::string spec_text = format_backbone_spec(model.backbone);
  put_u32(out, static_cast<std::uint32_t>(spec_text.size()));
  out.insert(out.end(), spec_text.begin(), spec_text.end());
  const auto params = model_parameters(model);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const Tensor* p : params) append_tensor(out, *p, Dtype::f64);
  return out;
}

ToyModel decode_model(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kFixed = 4 + 2 + 4 + 4 + 4 + 8 * 4 + 4 + 8 + 8 + 4;
  if (bytes.size() < kFixed) throw FormatError("truncated model header", bytes.size());
  if (std::memcmp(bytes.data(), kModelMagic, 4) != 0) throw FormatError("bad model magic, expected HBTM", 0);
  if (get_u16(bytes, 4) != kModelVersion) throw FormatError("unsupported model version", 4);
  ToyModel model;
  std::size_t at = 6;
  model.classes = get_u32(bytes, at), at += 4;
  auto& c = model.config;
  c.epochs = get_u32(bytes, at), at += 4;
  c.batch_size = get_u32(bytes, at), at += 4;
  c.learning_rate = get_f64(bytes, at), at += 8;
  c.beta1 = get_f64(bytes, at), at += 8;
  c.beta2 = get_f64(bytes, at), at += 8;
  c.epsilon = get_f64(bytes, at), at += 8;
  c.decay_epoch = get_u32(bytes, at), at += 4;
  c.decay_factor = get_f64(bytes, at), at += 8;
  c.seed = get_u64(bytes, at), at += 8;
  const std::uint32_t spec_len = get_u32(bytes, at);
  at += 4;
  if (bytes.size() < at + spec_len + 4) throw FormatError("truncated backbone description", bytes.size());
  model.backbone =
      parse_backbone_spec(std::string(reinterpret_cast<const char*>(bytes.data() + at), spec_len));
  at += spec_len;
  const std::uint32_t count = get_u32(bytes, at);
  at += 4;
  const std::size_t inputs = element_count(model.backbone.input_dims);
  model.predictor = make_head(inputs, kHeadHidden, model.classes, 0);
  model.adversary = make_head(inputs, kHeadHidden, model.classes, 0);
  auto params = model_parameters(model);
  if (count != params.size()) throw FormatError("model parameter count mismatch", at - 4);
  for (Tensor* p : params) {
    const std::size_t where = at;
    Tensor t = decode_tensor(bytes, at);
    if (t.dims() != p->dims()) throw FormatError("model parameter has the wrong shape", where);
    *p = std::move(t);
  }
  if (at != bytes.size()) throw FormatError("trailing bytes after model parameters", at);
  return model;
}

void save_model(const std::filesystem::path& path, const ToyModel& model) {
  write_file(path, encode_model(model));
}

ToyModel load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

void write_metrics_csv(std::ostream& out, const std::vector<EpochMetrics>& metrics) {
  out << "epoch,train_loss,pred_acc,adv_acc\n";
  out.precision(10);
  for (const auto& m : metrics)
    out << m.epoch << ',' << m.train_loss << ',' << m.pred_acc << ',' << m.adv_acc << '\n';
}

}  // namespace holobind
