#include "holobind/rng.hpp"

#include <cmath>
#include <numbers>

#include "holobind/errors.hpp"

namespace holobind {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

double to_unit(std::uint64_t w) { return static_cast<double>(w >> 11) * 0x1.0p-53; }

// Box-Muller on a pair of words; u1 is shifted into (0, 1] so log is finite.
void box_muller(std::uint64_t w1, std::uint64_t w2, double& z0, double& z1) {
  const double u1 = (static_cast<double>(w1 >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = to_unit(w2);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  z0 = r * std::cos(theta);
  z1 = r * std::sin(theta);
}

}  // namespace

std::uint64_t splitmix64_finalize(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t RngStream::word(std::uint64_t i) const noexcept {
  const std::uint64_t key = splitmix64_finalize(seed_);
  return splitmix64_finalize(key + (counter_ + i + 1) * kGolden);
}

RngStream RngStream::fork(std::uint64_t key) const noexcept {
  // Mix the parent position in so forks of successor streams differ too.
  const std::uint64_t child =
      splitmix64_finalize(splitmix64_finalize(seed_ ^ 0xD1B54A32D192ED03ULL) + counter_ * kGolden +
                          splitmix64_finalize(key + 0x632BE59BD9B4E019ULL));
  return RngStream(child, 0);
}

Draw<std::vector<double>> uniform01(std::size_t n, RngStream rng) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = to_unit(rng.word(i));
  return {std::move(out), rng.advanced(n)};
}

Draw<std::vector<double>> standard_normal(std::size_t n, RngStream rng) {
  std::vector<double> out(n);
  const std::size_t pairs = (n + 1) / 2;
  for (std::size_t p = 0; p < pairs; ++p) {
    double z0, z1;
    box_muller(rng.word(2 * p), rng.word(2 * p + 1), z0, z1);
    out[2 * p] = z0;
    if (2 * p + 1 < n) out[2 * p + 1] = z1;
  }
  return {std::move(out), rng.advanced(2 * pairs)};
}

Draw<Tensor> gaussian_tensor(const Dims& dims, double variance, RngStream rng) {
  if (!(variance > 0.0) || !std::isfinite(variance))
    throw ParameterError("gaussian_tensor: variance must be positive, got " +
                         std::to_string(variance));
  auto [samples, next] = standard_normal(element_count(dims), rng);
  const double sd = std::sqrt(variance);
  for (double& v : samples) v *= sd;
  return {Tensor(dims, std::move(samples)), next};
}

Draw<std::vector<std::size_t>> permutation(std::size_t n, RngStream rng) {
  Sampler sampler(rng);
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[sampler.below(i)]);
  return {std::move(perm), sampler.stream()};
}

std::uint64_t Sampler::next_word() {
  const auto w = stream_.word();
  stream_ = stream_.advanced(1);
  return w;
}

double Sampler::uniform() { return to_unit(next_word()); }

double Sampler::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const auto w1 = next_word();
  const auto w2 = next_word();
  double z0;
  box_muller(w1, w2, z0, spare_);
  has_spare_ = true;
  return z0;
}

std::size_t Sampler::below(std::size_t n) {
  if (n == 0) throw ParameterError("Sampler::below requires n > 0");
  // Lemire's multiply-shift; rejection keeps it unbiased.
  const std::uint64_t bound = n;
  const std::uint64_t threshold = (0 - bound) % bound;
  while (true) {
    const __uint128_t m = static_cast<__uint128_t>(next_word()) * bound;
    if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::size_t>(m >> 64);
  }
}

}  // namespace holobind
