#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "holobind/backbone.hpp"
#include "holobind/layers.hpp"
#include "holobind/rng.hpp"
#include "holobind/tensor_io.hpp"

namespace holobind {

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t decay_epoch = 40;  // learning rate is multiplied by decay_factor from here on
  double decay_factor = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Class-labelled 16 x 16 x 1 images: class c is P_c + noise with P_c a
/// fixed unit-norm Gaussian pattern and i.i.d. N(0, sigma^2) noise.
struct SynthDataset {
  std::vector<Tensor> train_images, test_images;
  std::vector<std::size_t> train_labels, test_labels;
  std::vector<Tensor> patterns;
  std::size_t classes = 4;
  double noise_sigma = 0.3;
  std::uint64_t seed = 0;
};

struct SynthOptions {
  std::size_t classes = 4;
  std::size_t side = 16;
  std::size_t train_count = 512;
  std::size_t test_count = 256;
  double noise_sigma = 0.3;
};

SynthDataset synth_dataset(std::uint64_t seed, const SynthOptions& options = {});

/// Backbone f_W plus two identically shaped heads: f_P reads the unbound
/// backbone output, f_A reads the raw output through gradient reversal.
struct ToyModel {
  BackboneSpec backbone;
  Head predictor;
  Head adversary;
  std::size_t classes = 4;
  TrainConfig config;
};

inline constexpr std::size_t kHeadHidden = 64;

ToyModel init_toy_model(const Dims& input_dims, std::size_t classes, const TrainConfig& config);
/// Trainable tensors in a fixed order: backbone kernels, predictor, adversary.
std::vector<Tensor*> model_parameters(ToyModel& model);
std::vector<const Tensor*> model_parameters(const ToyModel& model);

struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  bool operator==(const AdamState&) const = default;
};

/// Bias-corrected Adam update with the configured moments and learning rate.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               double learning_rate, double beta1, double beta2, double epsilon);
Bytes encode_adam_state(const AdamState& state);
AdamState decode_adam_state(std::span<const std::uint8_t> bytes);

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0, pred_acc = 0, adv_acc = 0;
};

struct TrainResult {
  ToyModel model;
  std::vector<EpochMetrics> metrics;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Joint training with a fresh projected secret per example and loss
/// CE(f_P) + CE(f_A), averaged over the mini-batch.
TrainResult train_csps(const SynthDataset& data, const TrainConfig& config,
                       const EpochCallback& on_epoch = {});

/// Gradients of the summed loss for one example. Exposed for the gradient
/// audit; `secret` must match the input shape.
struct ExampleGrads {
  double loss_pred = 0, loss_adv = 0;
  std::size_t pred_label = 0, adv_label = 0;  // argmax of each head's logits
  std::vector<Tensor> params;        // aligned with model_parameters()
  Tensor backbone_output_from_pred;  // d loss_pred / d r
  Tensor backbone_output_from_adv;   // d loss_adv / d r, after reversal
};
ExampleGrads example_gradients(const ToyModel& model, const Tensor& x, std::size_t label,
                               const Secret& secret);

enum class EvalMode { with_secret, adversary_raw, plain };
const char* to_string(EvalMode mode);

double evaluate(const ToyModel& model, const std::vector<Tensor>& images,
                const std::vector<std::size_t>& labels, EvalMode mode, RngStream rng);

/// Backbone outputs r = f_W(x (*) s) with a fresh secret per image: exactly
/// what the worker observes.
std::vector<Tensor> worker_outputs(const ToyModel& model, const std::vector<Tensor>& images,
                                   RngStream rng);

enum class LinearDemoVariant { per_example_secret, shared_secret, unbound };

/// Trains a linear softmax classifier on (possibly bound) training images and
/// reports accuracy on freshly bound test images.
double linear_adversary_demo(const SynthDataset& data, std::uint64_t seed,
                             LinearDemoVariant variant = LinearDemoVariant::per_example_secret);

/// Model file: "HBTM" | version u16 | classes u32 | config echo | parameter
/// tensors as f64 containers in model_parameters() order.
Bytes encode_model(const ToyModel& model);
ToyModel decode_model(std::span<const std::uint8_t> bytes);
void save_model(const std::filesystem::path& path, const ToyModel& model);
ToyModel load_model(const std::filesystem::path& path);

void write_metrics_csv(std::ostream& out, const std::vector<EpochMetrics>& metrics);

}  // namespace holobind
