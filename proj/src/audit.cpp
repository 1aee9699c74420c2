#include "holobind/audit.hpp"

#include "holobind/errors.hpp"
#include "holobind/vsa.hpp"

namespace holobind {

AttackKind parse_attack_kind(const std::string& name) {
  if (name == "cluster") return AttackKind::cluster;
  if (name == "strong") return AttackKind::strong;
  if (name == "invert") return AttackKind::invert;
  if (name == "regress") return AttackKind::regress;
  throw ParameterError("unknown attack kind '" + name + "' (cluster|strong|invert|regress)");
}

const char* to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::cluster: return "cluster";
    case AttackKind::strong: return "strong";
    case AttackKind::invert: return "invert";
    case AttackKind::regress: return "regress";
  }
  return "?";
}

InversionTrial make_inversion_trial(const SynthDataset& data, std::size_t count, RngStream rng) {
  if (count == 0 || count > data.test_images.size())
    throw ParameterError("inversion trial size must be in 1.." + std::to_string(data.test_images.size()));
  InversionTrial trial;
  trial.secret = sample_secret(data.test_images.front().dims(), rng.fork(1)).value;
  const auto order = permutation(data.test_images.size(), rng.fork(2)).value;
  for (std::size_t i = 0; i < count; ++i) {
    const Tensor& x = data.test_images[order[i]];
    trial.truth.push_back(x);
    trial.bound.push_back(bind(x, trial.secret));
  }
  return trial;
}

std::vector<RegressionPair> regression_pairs(const std::vector<Tensor>& images, std::size_t pairs,
                                             RngStream rng) {
  if (images.empty()) throw ParameterError("regression_pairs: no images");
  std::vector<RegressionPair> out;
  out.reserve(pairs);
  for (std::size_t i = 0; i < pairs; ++i) {
    auto draw = sample_secret(images.front().dims(), rng);
    rng = draw.next;
    out.push_back({bind(images[i % images.size()], draw.value), draw.value.tensor});
  }
  return out;
}

std::vector<AttackReport> run_attack(AttackKind kind, const ToyModel& model,
                                     const SynthDataset& data, std::uint64_t seed) {
  const RngStream root(seed);
  std::vector<AttackReport> reports;
  switch (kind) {
    case AttackKind::cluster: {
      const auto r = worker_outputs(model, data.test_images, root.fork(1));
      reports.push_back(clustering_attack(r, data.test_labels, data.classes, ClusterTarget::r, root.fork(2)));
      SynthOptions clean;
      clean.classes = data.classes;
      clean.noise_sigma = 0;
      const auto noiseless = synth_dataset(data.seed, clean);
      reports.push_back(clustering_attack(noiseless.test_images, noiseless.test_labels, data.classes,
                                          ClusterTarget::x_plain, root.fork(3), 0.9));
      break;
    }
    case AttackKind::strong: {
      const auto train_r = worker_outputs(model, data.train_images, root.fork(1));
      const auto test_r = worker_outputs(model, data.test_images, root.fork(2));
      StrongAdversaryConfig cfg;
      cfg.seed = root.fork(3).word();
      reports.push_back(strong_adversary(train_r, data.train_labels, test_r, data.test_labels, data.classes, cfg));
      cfg.shuffle_labels = true;
      cfg.threshold = 1.0 / static_cast<double>(data.classes) + 0.08;
      reports.push_back(strong_adversary(train_r, data.train_labels, test_r, data.test_labels, data.classes, cfg));
      break;
    }
    case AttackKind::invert: {
      const auto reference = make_inversion_reference(data.train_images);
      const auto trial = make_inversion_trial(data, kInversionBatch, root.fork(1));
      reports.push_back(
          inversion_attack(trial.bound, reference, {}, root.fork(2), nullptr, &trial.truth).report);
      // Planted oracle: evaluated at the true secret itself. Descending from
      // there drifts to lower sample scores.
      InversionConfig at_truth;
      at_truth.steps = 0;
      auto planted = inversion_attack(trial.bound, reference, at_truth, root.fork(2), &trial.secret, &trial.truth);
      planted.report.name = "inversion_planted";
      planted.report.threshold = 0.99;
      planted.report.comparison = Comparison::at_least;
      reports.push_back(planted.report);
      break;
    }
    case AttackKind::regress: {
      const auto train = regression_pairs(data.train_images, kRegressionTrain, root.fork(1));
      const auto heldout = regression_pairs(data.test_images, kRegressionHeldout, root.fork(2));
      reports.push_back(secret_regression_attack(train, heldout, seed).report);
      // Planted identity task: the "bound" tensor is the secret itself.
      auto identity = [](std::vector<RegressionPair> pairs) {
        for (auto& p : pairs) p.bound = p.secret;
        return pairs;
      };
      auto planted = secret_regression_attack(identity(train), identity(heldout), seed, 0.99).report;
      planted.name = "secret_regression_planted";
      planted.comparison = Comparison::at_least;
      reports.push_back(planted);
      break;
    }
  }
  return reports;
}

}  // namespace holobind
