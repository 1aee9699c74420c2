#include "holobind/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "holobind/errors.hpp"

namespace holobind {

// Empty dims describe the empty tensor, not a scalar.
std::size_t element_count(const Dims& dims) {
  if (dims.empty()) return 0;
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::string dims_to_string(const Dims& dims) {
  std::ostringstream out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out << 'x';
    out << dims[i];
  }
  return out.str();
}

Dims parse_dims(const std::string& text) {
  Dims dims;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto next = text.find_first_of("xX", pos);
    auto token = text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    if (token.empty() || token.find_first_not_of("0123456789") != std::string::npos)
      throw ParameterError("malformed dims '" + text + "', expected e.g. 16x16x1");
    auto value = std::stoull(token);
    if (value == 0) throw ParameterError("dims must be positive: '" + text + "'");
    dims.push_back(static_cast<std::size_t>(value));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return dims;
}

Tensor::Tensor(Dims dims) : dims_(std::move(dims)), values_(element_count(dims_), 0.0) {
  for (auto d : dims_)
    if (d == 0) throw ShapeError("tensor extents must be positive, got " + dims_to_string(dims_));
}

Tensor::Tensor(Dims dims, std::vector<double> values)
    : dims_(std::move(dims)), values_(std::move(values)) {
  for (auto d : dims_)
    if (d == 0) throw ShapeError("tensor extents must be positive, got " + dims_to_string(dims_));
  if (element_count(dims_) != values_.size())
    throw ShapeError("dims " + dims_to_string(dims_) + " need " +
                     std::to_string(element_count(dims_)) + " values, got " +
                     std::to_string(values_.size()));
}

Tensor Tensor::filled(Dims dims, double value) {
  Tensor t(std::move(dims));
  std::fill(t.values_.begin(), t.values_.end(), value);
  return t;
}

Tensor Tensor::reshaped(Dims dims) const {
  if (element_count(dims) != values_.size())
    throw ShapeError("cannot reshape " + dims_to_string(dims_) + " to " + dims_to_string(dims));
  return Tensor(std::move(dims), values_);
}

PlaneGeometry plane_geometry(const Dims& dims) {
  if (dims.size() == 2) return {dims[0], dims[1], 1};
  if (dims.size() == 3) return {dims[0], dims[1], dims[2]};
  throw ShapeError("expected an H x W or H x W x D tensor, got " + dims_to_string(dims));
}

Tensor extract_plane(const Tensor& t, std::size_t channel) {
  auto g = plane_geometry(t.dims());
  if (channel >= g.channels) throw ShapeError("channel index out of range");
  Tensor plane({g.rows, g.cols});
  for (std::size_t i = 0; i < g.rows * g.cols; ++i) plane[i] = t[i * g.channels + channel];
  return plane;
}

void insert_plane(Tensor& t, std::size_t channel, const Tensor& plane) {
  auto g = plane_geometry(t.dims());
  if (channel >= g.channels || plane.size() != g.rows * g.cols)
    throw ShapeError("plane does not fit target tensor");
  for (std::size_t i = 0; i < g.rows * g.cols; ++i) t[i * g.channels + channel] = plane[i];
}

void require_same_dims(const Tensor& a, const Tensor& b, const char* what) {
  if (a.dims() != b.dims())
    throw ShapeError(std::string(what) + ": shape mismatch " + dims_to_string(a.dims()) + " vs " +
                     dims_to_string(b.dims()));
}

void require_finite(const Tensor& t, const char* what) {
  for (std::size_t i = 0; i < t.size(); ++i)
    if (!std::isfinite(t[i]))
      throw ParameterError(std::string(what) + ": non-finite value at index " + std::to_string(i));
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v * v;
  return std::sqrt(s);
}

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (double v : t.values()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  out += b;
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  out -= b;
  return out;
}

Tensor operator*(double s, const Tensor& t) {
  Tensor out = t;
  for (double& v : out.values()) v *= s;
  return out;
}

Tensor& operator+=(Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "add");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

Tensor& operator-=(Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "subtract");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

void secure_wipe(Tensor& t) {
  volatile double* p = t.values().data();
  for (std::size_t i = 0; i < t.size(); ++i) p[i] = 0.0;
}

}  // namespace holobind
