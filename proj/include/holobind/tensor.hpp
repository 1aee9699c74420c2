#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace holobind {

using Dims = std::vector<std::size_t>;

std::size_t element_count(const Dims& dims);
std::string dims_to_string(const Dims& dims);
/// Parses "16x16x1" style extents.
Dims parse_dims(const std::string& text);

/// Dense row-major array of doubles. 3D tensors are channel-last (H x W x D).
/// A default-constructed tensor has no dims and no values.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Dims dims);
  Tensor(Dims dims, std::vector<double> values);

  static Tensor filled(Dims dims, double value);

  const Dims& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  const std::vector<double>& storage() const noexcept { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  /// Reinterprets the extents; element count must not change.
  Tensor reshaped(Dims dims) const;

  bool operator==(const Tensor&) const = default;

 private:
  Dims dims_;
  std::vector<double> values_;
};

/// Geometry of a tensor viewed as a stack of 2D planes: rank 2 is one plane,
/// rank 3 is D channel-last planes.
struct PlaneGeometry {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t channels = 0;
};

PlaneGeometry plane_geometry(const Dims& dims);

/// Copies channel `c` of an H x W x D (or H x W) tensor into an H x W tensor.
Tensor extract_plane(const Tensor& t, std::size_t channel);
void insert_plane(Tensor& t, std::size_t channel, const Tensor& plane);

void require_same_dims(const Tensor& a, const Tensor& b, const char* what);
void require_finite(const Tensor& t, const char* what);

double dot(const Tensor& a, const Tensor& b);
double norm(const Tensor& t);
double max_abs(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& t);
Tensor& operator+=(Tensor& a, const Tensor& b);
Tensor& operator-=(Tensor& a, const Tensor& b);

/// Overwrites the storage with zeros in a way the optimizer may not elide.
void secure_wipe(Tensor& t);

}  // namespace holobind
