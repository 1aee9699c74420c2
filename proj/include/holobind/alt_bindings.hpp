#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "holobind/rng.hpp"
#include "holobind/tensor.hpp"
#include "holobind/vsa.hpp"

namespace holobind {

/// Vector-derived transformation binding key. `block` is the m x m matrix
/// d^(1/4) * reshape(vector, m, m); binding multiplies each consecutive
/// m-chunk of the input by it.
struct VtbSecret {
  Tensor vector;  // length d = m * m
  Tensor block;   // m x m, row-major
  std::size_t m = 0;
  bool orthogonal = false;
};

/// Builds the block from a length-d vector. Throws ShapeError unless d is a
/// perfect square.
VtbSecret make_vtb_secret(const Tensor& vector, bool orthogonal = false);
/// Plain VTB key drawn from N(0, 1/d).
Draw<VtbSecret> vtb_secret(std::size_t d, RngStream rng);
/// Orthogonal factor of the QR decomposition of an m x m Gaussian draw, with
/// R's diagonal forced positive so the factor is unique.
Draw<VtbSecret> ivtb_secret(std::size_t d, RngStream rng);

Tensor vtb_bind(const Tensor& x, const VtbSecret& y);
/// Applies block^T per chunk; exact for orthogonal keys.
Tensor vtb_unbind(const Tensor& z, const VtbSecret& y);

/// Hilbert curve over a 2^order x 2^order grid.
class HilbertMap {
 public:
  explicit HilbertMap(unsigned order);

  unsigned order() const noexcept { return order_; }
  std::size_t side() const noexcept { return side_; }
  /// Row-major cell index visited at curve position `rank`.
  std::size_t cell_at(std::size_t rank) const { return forward_[rank]; }
  std::size_t rank_of(std::size_t cell) const { return inverse_[cell]; }
  const std::vector<std::size_t>& forward() const noexcept { return forward_; }
  const std::vector<std::size_t>& inverse() const noexcept { return inverse_; }

 private:
  unsigned order_;
  std::size_t side_;
  std::vector<std::size_t> forward_;
  std::vector<std::size_t> inverse_;
};

/// Smallest order whose side covers max(rows, cols).
unsigned hilbert_order_for(std::size_t rows, std::size_t cols);

/// Linearizes an H x W image (zero-padded to the next 2^k square) along the
/// Hilbert curve. H x W x D inputs give a (4^k) x D channel-last result.
Tensor hilbert_encode(const Tensor& img);
/// Inverse of hilbert_encode; crops back to rows x cols.
Tensor hilbert_decode(const Tensor& linear, std::size_t rows, std::size_t cols);

/// 1D HRR applied to the Hilbert linearization, channel by channel with the
/// same 1D secret. `s1d` must have length 4^k.
Tensor hilbert_hrr_bind(const Tensor& img, const Secret& s1d);
Tensor hilbert_hrr_unbind(const Tensor& bound, const Secret& s1d, std::size_t rows,
                          std::size_t cols);

enum class BindingOp { hrr2d, hrr1d, vtb, ivtb, hilbert };
BindingOp parse_binding_op(const std::string& name);
const char* to_string(BindingOp op);

/// Key for `op` sized for inputs of shape `dims`, as a plain tensor: the
/// secret for the HRR variants, the generating vector for VTB/iVTB.
Draw<Tensor> secret_for(BindingOp op, const Dims& dims, RngStream rng);
Tensor bind_op(BindingOp op, const Tensor& x, const Tensor& key);
/// `original` is the unbound shape; only the Hilbert operator needs it.
Tensor unbind_op(BindingOp op, const Tensor& bound, const Tensor& key, const Dims& original);

struct AblationRow {
  BindingOp op;
  double reconstruction_cosine = 0;
  double bound_input_cosine = 0;
};

/// Binds and unbinds `trials` images of side x side with each operator and
/// averages reconstruction and obfuscation cosines.
std::vector<AblationRow> run_ablation(const std::vector<Tensor>& images, std::uint64_t seed);
void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);

}  // namespace holobind
