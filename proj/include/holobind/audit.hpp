#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "holobind/attacks.hpp"
#include "holobind/trainer.hpp"

namespace holobind {

// End-to-end attack runs against a trained toy model: build the worker's
// view of the data, run the attack, and report it next to its planted or
// unbound control.

enum class AttackKind { cluster, strong, invert, regress };
AttackKind parse_attack_kind(const std::string& name);
const char* to_string(AttackKind kind);

/// Probe batch for one inversion trial: `count` test images bound with one
/// shared secret.
struct InversionTrial {
  std::vector<Tensor> bound;
  std::vector<Tensor> truth;
  Secret secret;
};
InversionTrial make_inversion_trial(const SynthDataset& data, std::size_t count, RngStream rng);

/// `pairs` bound inputs x (*) s with fresh secrets, cycling through `images`.
std::vector<RegressionPair> regression_pairs(const std::vector<Tensor>& images, std::size_t pairs,
                                             RngStream rng);

inline constexpr std::size_t kInversionBatch = 64;
inline constexpr std::size_t kRegressionTrain = 1024;
inline constexpr std::size_t kRegressionHeldout = 256;

/// Genuine attack first, then its control.
std::vector<AttackReport> run_attack(AttackKind kind, const ToyModel& model,
                                     const SynthDataset& data, std::uint64_t seed);

}  // namespace holobind
