#pragma once

#include <cstdint>
#include <vector>

#include "holobind/tensor.hpp"

namespace holobind {

/// Counter-based random stream. Word i of a stream is
///   splitmix64_finalize(key + (counter + i + 1) * 0x9E3779B97F4A7C15)
/// where key = splitmix64_finalize(seed). No hidden state: a stream is a
/// (seed, counter) value and drawing returns the successor stream.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0, std::uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  /// Word at position counter + i; does not advance.
  std::uint64_t word(std::uint64_t i = 0) const noexcept;
  RngStream advanced(std::uint64_t n) const noexcept { return RngStream(seed_, counter_ + n); }
  /// Statistically independent child stream identified by `key`.
  RngStream fork(std::uint64_t key) const noexcept;

  bool operator==(const RngStream&) const = default;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

std::uint64_t splitmix64_finalize(std::uint64_t z) noexcept;

template <class T>
struct Draw {
  T value;
  RngStream next;
};

/// Uniform doubles in [0, 1) with 53 random bits each.
Draw<std::vector<double>> uniform01(std::size_t n, RngStream rng);
/// Standard normals via Box-Muller, two stream words per pair of samples.
Draw<std::vector<double>> standard_normal(std::size_t n, RngStream rng);
/// i.i.d. N(0, variance) samples; throws ParameterError for variance <= 0.
Draw<Tensor> gaussian_tensor(const Dims& dims, double variance, RngStream rng);
/// Uniform random permutation of 0..n-1 (Fisher-Yates).
Draw<std::vector<std::size_t>> permutation(std::size_t n, RngStream rng);

/// Local sequential cursor over a stream, for algorithms that draw many
/// scattered values. Owned by one caller; never shared.
class Sampler {
 public:
  explicit Sampler(RngStream stream) : stream_(stream) {}

  std::uint64_t next_word();
  double uniform();
  double normal();
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  RngStream stream() const noexcept { return stream_; }

 private:
  RngStream stream_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace holobind
