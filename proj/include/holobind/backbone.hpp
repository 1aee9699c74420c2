#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "holobind/tensor.hpp"
#include "holobind/vsa.hpp"

namespace holobind {

enum class LayerKind { identity, circconv2d, pointwise, dense };

/// One worker-side layer. Weights are materialized from `seed` when a spec is
/// parsed; trained models overwrite them.
struct Layer {
  LayerKind kind = LayerKind::identity;
  // circconv2d: kernel kh x kw x cin x cout
  std::size_t kh = 0, kw = 0, cin = 0, cout = 0;
  // pointwise leaky-relu slope
  double alpha = 0.0;
  // dense: rows (outputs) x cols (inputs)
  std::size_t rows = 0, cols = 0;
  std::uint64_t seed = 0;
  Tensor weights;

  static Layer identity();
  static Layer circconv2d(std::size_t kh, std::size_t kw, std::size_t cin, std::size_t cout,
                          std::uint64_t seed);
  static Layer leaky_relu(double alpha);
  static Layer dense(std::size_t rows, std::size_t cols, std::uint64_t seed);
};

/// Worker-side tensor-to-tensor function f_W.
struct BackboneSpec {
  Dims input_dims;  // H x W x D
  std::vector<Layer> layers;

  /// Output dims after chaining every layer; throws SpecError on a broken chain.
  Dims output_dims() const;
  bool shape_preserving() const { return output_dims() == input_dims; }
  bool purely_linear_circconv() const;
};

/// Line format: `input H W D` then one layer per line:
///   identity | circconv2d kh kw cin cout seed | pointwise leaky_relu alpha |
///   dense rows cols seed
/// Blank lines and '#' comments are ignored.
BackboneSpec parse_backbone_spec(const std::string& text);
BackboneSpec load_backbone_spec(const std::filesystem::path& path);
std::string format_backbone_spec(const BackboneSpec& spec);

BackboneSpec identity_spec(const Dims& dims);
/// Single-channel circconv stack with no nonlinearity.
BackboneSpec linear_circconv_spec(const Dims& dims, std::size_t layers, std::uint64_t seed);
/// circconv 3x3 1->16, leaky-relu 0.1, circconv 3x3 16->16, leaky-relu 0.1,
/// circconv 3x3 16->1.
BackboneSpec toy_fw_spec(const Dims& dims, std::uint64_t seed);

Tensor apply(const BackboneSpec& spec, const Tensor& t);

/// Stride-1 cross-correlation with wrap-around padding, centered on tap
/// (kh/2, kw/2): out[i,j,o] = sum K[a,b,c,o] in[i+a-kh/2, j+b-kw/2, c].
/// Input H x W x cin (or H x W when cin == 1); output H x W x cout.
Tensor circconv_forward(const Tensor& kernel, const Tensor& input);

struct CircconvGrads {
  Tensor kernel;
  Tensor input;
};
CircconvGrads circconv_backward(const Tensor& kernel, const Tensor& input, const Tensor& upstream);

/// max |unbind(apply(spec, bind(x, s)), s) - apply(spec, x)| for a purely
/// linear single-channel circconv spec; ContractError otherwise.
double linear_circconv_commutation_check(const BackboneSpec& spec, const Tensor& x,
                                         const Secret& s);

/// Multiply-add counts. Conventions: circconv2d = H W kh kw cin cout,
/// dense = rows cols, one FFT of n points = 5 n log2(n).
struct FlopReport {
  std::uint64_t remote_flops = 0;
  std::uint64_t local_flops = 0;
  std::uint64_t bytes_up = 0;
  std::uint64_t bytes_down = 0;

  double remote_fraction() const {
    const auto total = remote_flops + local_flops;
    return total == 0 ? 0.0 : static_cast<double>(remote_flops) / static_cast<double>(total);
  }
};

std::uint64_t count_flops(const BackboneSpec& spec);
std::uint64_t fft_flops(std::size_t n);

}  // namespace holobind
