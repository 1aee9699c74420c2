#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "holobind/fft.hpp"
#include "holobind/rng.hpp"
#include "holobind/tensor.hpp"

namespace holobind {

/// Smallest spectral magnitude accepted by projection and inversion.
inline constexpr double kProjectionEpsilon = 1e-12;

/// Client-held binding key. Projected secrets have unit spectral magnitude
/// at every frequency of every channel.
struct Secret {
  Tensor tensor;
  std::uint64_t seed = 0;
  bool projected = false;
};

/// pi(v) = F^-1(F(v) / |F(v)|), per channel for H x W x D inputs.
Tensor project(const Tensor& v);

/// Circular convolution via pointwise spectral products. Rank 1 binds in 1D,
/// rank 2 in 2D, rank 3 as D independent 2D convolutions.
Tensor bind(const Tensor& x, const Tensor& y);
Tensor bind(const Tensor& x, const Secret& s);

/// y-dagger = F^-1(1 / F(y)).
Secret inverse(const Secret& s);
Tensor unbind(const Tensor& bound, const Secret& s);
/// Adjoint of `unbind(., s)` as a linear map: multiplies spectra by the
/// conjugate reciprocal. For projected secrets this is `bind(., s)`.
Tensor unbind_adjoint(const Tensor& upstream, const Secret& s);

/// Draws N(0, 1/d) and projects it. A draw with a degenerate spectrum is
/// resampled from the successor stream up to three times.
Draw<Secret> sample_secret(const Dims& dims, RngStream rng);

double cosine(const Tensor& a, const Tensor& b);

/// Superposition of bound pairs.
struct Bundle {
  Tensor tensor;
  std::size_t term_count = 0;
};

Bundle bundle_add(Bundle bundle, const Tensor& x, const Secret& y);

/// Retrieval score x_candidate . (B (*) y-dagger): close to 1 for a present
/// unit-norm term, close to 0 for an absent one.
double presence_probe(const Bundle& bundle, const Secret& y, const Tensor& x_candidate);

enum class ProbeMode { projected, naive };
const char* to_string(ProbeMode mode);

struct ProbeConfig {
  std::size_t side = 32;  // d = side * side
  std::vector<std::size_t> term_counts = {1, 2, 4, 8, 16, 32};
  std::vector<ProbeMode> modes = {ProbeMode::projected, ProbeMode::naive};
  std::size_t trials = 100;
  std::uint64_t seed = 0;
};

struct ProbeRow {
  std::size_t k = 0;
  ProbeMode mode = ProbeMode::projected;
  double present_mean = 0, absent_mean = 0, present_std = 0, absent_std = 0;
};

/// Bundles k pairs per trial and probes the first pair (present) and a
/// fresh independent candidate (absent). Naive mode skips projection.
std::vector<ProbeRow> run_probe_experiment(const ProbeConfig& config);
void write_probe_csv(std::ostream& out, const std::vector<ProbeRow>& rows);

}  // namespace holobind
