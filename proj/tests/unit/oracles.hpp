#pragma once

// Independent reference implementations used as test oracles. Everything
// here is written the slow, obvious way and shares no code with the library
// beyond the Tensor container.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "holobind/rng.hpp"
#include "holobind/tensor.hpp"

namespace oracle {

using cd = std::complex<double>;

// Direct O(n^2) DFT, unnormalized forward.
inline std::vector<cd> dft(const std::vector<cd>& x, bool inverse = false) {
  const std::size_t n = x.size();
  std::vector<cd> out(n);
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k) {
    cd acc = 0;
    for (std::size_t j = 0; j < n; ++j)
      acc += x[j] * std::polar(1.0, sign * 2.0 * std::numbers::pi * double((j * k) % n) / double(n));
    out[k] = inverse ? acc / double(n) : acc;
  }
  return out;
}

// Direct O(n^4) 2D DFT of a real H x W tensor.
inline std::vector<cd> dft2(const holobind::Tensor& t) {
  const std::size_t h = t.dims()[0], w = t.dims()[1];
  std::vector<cd> out(h * w);
  for (std::size_t u = 0; u < h; ++u)
    for (std::size_t v = 0; v < w; ++v) {
      cd acc = 0;
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
          const double phase = -2.0 * std::numbers::pi * (double((u * i) % h) / double(h) + double((v * j) % w) / double(w));
          acc += t[i * w + j] * std::polar(1.0, phase);
        }
      out[u * w + v] = acc;
    }
  return out;
}

// z[i,j] = sum_{a,b} x[a,b] y[(i-a) mod H, (j-b) mod W]
inline holobind::Tensor circular_convolution_2d(const holobind::Tensor& x, const holobind::Tensor& y) {
  const std::size_t h = x.dims()[0], w = x.dims()[1];
  holobind::Tensor z(x.dims());
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) {
      double acc = 0;
      for (std::size_t a = 0; a < h; ++a)
        for (std::size_t b = 0; b < w; ++b) acc += x[a * w + b] * y[((i + h - a) % h) * w + (j + w - b) % w];
      z[i * w + j] = acc;
    }
  return z;
}

// Circulant matrix C(y) with C[i][j] = y[(i - j) mod d]; C(y) x = x (*) y.
inline std::vector<std::vector<double>> circulant(const holobind::Tensor& y) {
  const std::size_t d = y.size();
  std::vector<std::vector<double>> c(d, std::vector<double>(d));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) c[i][j] = y[(i + d - j) % d];
  return c;
}

inline holobind::Tensor matvec(const std::vector<std::vector<double>>& m, const holobind::Tensor& x) {
  holobind::Tensor out({m.size()});
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) out[i] += m[i][j] * x[j];
  return out;
}

inline holobind::Tensor random_tensor(const holobind::Dims& dims, std::uint64_t seed, double variance = 1.0) {
  return holobind::gaussian_tensor(dims, variance, holobind::RngStream(seed)).value;
}

// Central finite-difference derivative of f along coordinate `i` of `x`.
template <class F>
double central_difference(F&& f, holobind::Tensor x, std::size_t i, double h = 1e-5) {
  const double orig = x[i];
  x[i] = orig + h;
  const double up = f(x);
  x[i] = orig - h;
  const double down = f(x);
  return (up - down) / (2 * h);
}

inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace oracle
