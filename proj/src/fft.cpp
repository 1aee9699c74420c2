#include "holobind/fft.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <unordered_map>

#include "holobind/errors.hpp"

namespace holobind {
namespace {

bool is_pow2(std::size_t n) { return n && !(n & (n - 1)); }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

struct Radix2Plan {
  std::size_t n = 0;
  std::vector<Complex> twiddle;  // exp(-2 pi i k / n), k < n/2
  std::vector<std::size_t> bitrev;

  explicit Radix2Plan(std::size_t size) : n(size), twiddle(size / 2), bitrev(size) {
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddle[k] = {std::cos(angle), std::sin(angle)};
    }
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      bitrev[i] = r;
    }
  }

  void run(std::span<Complex> a, bool inverse) const {
    for (std::size_t i = 0; i < n; ++i)
      if (i < bitrev[i]) std::swap(a[i], a[bitrev[i]]);
    for (std::size_t len = 2; len <= n; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t stride = n / len;
      for (std::size_t start = 0; start < n; start += len) {
        for (std::size_t k = 0; k < half; ++k) {
          Complex w = twiddle[k * stride];
          if (inverse) w = std::conj(w);
          const Complex u = a[start + k];
          const Complex v = a[start + k + half] * w;
          a[start + k] = u + v;
          a[start + k + half] = u - v;
        }
      }
    }
  }
};

struct BluesteinPlan {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<Complex> chirp;       // exp(-pi i k^2 / n)
  std::vector<Complex> kernel_fwd;  // FFT_m of conj(chirp), wrapped
  std::shared_ptr<const Radix2Plan> inner;

  explicit BluesteinPlan(std::size_t size) : n(size), m(next_pow2(2 * size - 1)), chirp(size) {
    inner = std::make_shared<Radix2Plan>(m);
    for (std::size_t k = 0; k < n; ++k) {
      // k^2 mod 2n keeps the angle argument small and exact.
      const auto k2 = static_cast<unsigned long long>(k) * k % (2ULL * n);
      const double angle = -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
      chirp[k] = {std::cos(angle), std::sin(angle)};
    }
    kernel_fwd.assign(m, Complex{});
    kernel_fwd[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) kernel_fwd[k] = kernel_fwd[m - k] = std::conj(chirp[k]);
    inner->run(kernel_fwd, false);
  }

  void run(std::span<Complex> a, bool inverse) const {
    // The inverse transform is the forward one on conjugated data.
    std::vector<Complex> buf(m, Complex{});
    for (std::size_t k = 0; k < n; ++k) buf[k] = (inverse ? std::conj(a[k]) : a[k]) * chirp[k];
    inner->run(buf, false);
    for (std::size_t k = 0; k < m; ++k) buf[k] *= kernel_fwd[k];
    inner->run(buf, true);
    const double scale = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n; ++k) {
      const Complex v = buf[k] * scale * chirp[k];
      a[k] = inverse ? std::conj(v) : v;
    }
  }
};

struct Plan {
  std::shared_ptr<const Radix2Plan> radix2;
  std::shared_ptr<const BluesteinPlan> bluestein;
};

const Plan& plan_for(std::size_t n) {
  thread_local std::unordered_map<std::size_t, Plan> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Plan p;
  if (is_pow2(n))
    p.radix2 = std::make_shared<Radix2Plan>(n);
  else
    p.bluestein = std::make_shared<BluesteinPlan>(n);
  return cache.emplace(n, std::move(p)).first->second;
}

void transform_planes(std::vector<Complex>& data, std::size_t rows, std::size_t cols,
                      std::size_t channels, bool inverse) {
  std::vector<Complex> line(std::max(rows, cols));
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) line[j] = data[(i * cols + j) * channels + c];
      dft_inplace(std::span(line.data(), cols), inverse);
      for (std::size_t j = 0; j < cols; ++j) data[(i * cols + j) * channels + c] = line[j];
    }
    for (std::size_t j = 0; j < cols; ++j) {
      for (std::size_t i = 0; i < rows; ++i) line[i] = data[(i * cols + j) * channels + c];
      dft_inplace(std::span(line.data(), rows), inverse);
      for (std::size_t i = 0; i < rows; ++i) data[(i * cols + j) * channels + c] = line[i];
    }
  }
}

Tensor real_part_checked(const Dims& dims, const std::vector<Complex>& values, double scale) {
  double max_re = 0.0, max_im = 0.0;
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = values[i].real() * scale;
    max_re = std::max(max_re, std::abs(out[i]));
    max_im = std::max(max_im, std::abs(values[i].imag() * scale));
  }
  if (max_im > 1e-8 * max_re && max_im > 0.0)
    throw ConjugateSymmetryError("inverse transform left an imaginary residue of " +
                                 std::to_string(max_im) + " against real magnitude " +
                                 std::to_string(max_re));
  return Tensor(dims, std::move(out));
}

}  // namespace

void dft_inplace(std::span<Complex> data, bool inverse) {
  const std::size_t n = data.size();
  if (n <= 1) return;
  const Plan& p = plan_for(n);
  if (p.radix2)
    p.radix2->run(data, inverse);
  else
    p.bluestein->run(data, inverse);
}

Spectrum fft2(const Tensor& t) {
  if (t.rank() != 2)
    throw ShapeError("fft2 expects a 2-dimensional tensor, got " + dims_to_string(t.dims()));
  return spatial_fft(t);
}

Tensor ifft2(const Spectrum& s) {
  if (s.dims.size() != 2)
    throw ShapeError("ifft2 expects a 2-dimensional spectrum, got " + dims_to_string(s.dims));
  return spatial_ifft(s);
}

Spectrum spatial_fft(const Tensor& t) {
  Spectrum s{t.dims(), std::vector<Complex>(t.values().begin(), t.values().end())};
  if (t.rank() == 1) {
    dft_inplace(s.values, false);
  } else {
    const auto g = plane_geometry(t.dims());
    transform_planes(s.values, g.rows, g.cols, g.channels, false);
  }
  return s;
}

Tensor spatial_ifft(const Spectrum& s) {
  if (element_count(s.dims) != s.values.size())
    throw ShapeError("spectrum dims " + dims_to_string(s.dims) + " do not match value count");
  std::vector<Complex> data = s.values;
  double scale;
  if (s.dims.size() == 1) {
    dft_inplace(data, true);
    scale = 1.0 / static_cast<double>(s.dims[0]);
  } else {
    const auto g = plane_geometry(s.dims);
    transform_planes(data, g.rows, g.cols, g.channels, true);
    scale = 1.0 / static_cast<double>(g.rows * g.cols);
  }
  return real_part_checked(s.dims, data, scale);
}

}  // namespace holobind
