#include "holobind/alt_bindings.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <ostream>

#include "holobind/errors.hpp"

namespace holobind {
namespace {

std::size_t exact_sqrt(std::size_t d) {
  auto m = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(d))));
  if (m == 0 || m * m != d)
    throw ShapeError("VTB needs a perfect-square length, got " + std::to_string(d));
  return m;
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Tensor apply_blocks(const Tensor& x, const VtbSecret& y, bool transpose) {
  if (x.size() != y.vector.size())
    throw ShapeError("VTB length mismatch: input " + std::to_string(x.size()) + " vs key " +
                     std::to_string(y.vector.size()));
  exact_sqrt(x.size());
  const std::size_t m = y.m;
  Tensor z(x.dims());
  for (std::size_t chunk = 0; chunk < m; ++chunk) {
    const std::size_t base = chunk * m;
    for (std::size_t r = 0; r < m; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < m; ++c) {
        const double w = transpose ? y.block[c * m + r] : y.block[r * m + c];
        acc += w * x[base + c];
      }
      z[base + r] = acc;
    }
  }
  return z;
}

// Bit-twiddling Hilbert index to (row, col), the classic d2xy iteration.
void hilbert_cell(std::size_t side, std::size_t rank, std::size_t& row, std::size_t& col) {
  row = col = 0;
  std::size_t t = rank;
  for (std::size_t s = 1; s < side; s *= 2) {
    const std::size_t rx = 1 & (t / 2);
    const std::size_t ry = 1 & (t ^ rx);
    if (ry == 0) {
      if (rx == 1) {
        row = s - 1 - row;
        col = s - 1 - col;
      }
      std::swap(row, col);
    }
    row += s * rx;
    col += s * ry;
    t /= 4;
  }
}

Tensor bind_1d(const Tensor& x, const Secret& s) {
  return bind(x.reshaped({x.size()}), s.tensor.reshaped({s.tensor.size()}));
}

Tensor unbind_1d(const Tensor& b, const Secret& s) {
  Secret flat{s.tensor.reshaped({s.tensor.size()}), s.seed, s.projected};
  return unbind(b.reshaped({b.size()}), flat);
}

}  // namespace

VtbSecret make_vtb_secret(const Tensor& vector, bool orthogonal) {
  const std::size_t d = vector.size();
  const std::size_t m = exact_sqrt(d);
  const double scale = std::pow(static_cast<double>(d), 0.25);
  Tensor block({m, m});
  for (std::size_t i = 0; i < d; ++i) block[i] = scale * vector[i];
  if (orthogonal) {
    Eigen::Map<const RowMajor> b(block.values().data(), m, m);
    const double err = (b.transpose() * b - RowMajor::Identity(m, m)).cwiseAbs().maxCoeff();
    if (err > 1e-9) throw ParameterError("VTB key flagged orthogonal but block^T block != I");
  }
  return VtbSecret{vector.reshaped({d}), std::move(block), m, orthogonal};
}

Draw<VtbSecret> vtb_secret(std::size_t d, RngStream rng) {
  exact_sqrt(d);
  auto [v, next] = gaussian_tensor({d}, 1.0 / static_cast<double>(d), rng);
  return {make_vtb_secret(v, false), next};
}

Draw<VtbSecret> ivtb_secret(std::size_t d, RngStream rng) {
  const std::size_t m = exact_sqrt(d);
  auto [g, next] = gaussian_tensor({m, m}, 1.0, rng);
  Eigen::Map<const RowMajor> a(g.values().data(), m, m);
  Eigen::HouseholderQR<RowMajor> qr(a);
  RowMajor q = qr.householderQ();
  const RowMajor r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (std::size_t j = 0; j < m; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  const double inv_scale = std::pow(static_cast<double>(d), -0.25);
  Tensor vec({d});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) vec[i * m + j] = inv_scale * q(i, j);
  VtbSecret key = make_vtb_secret(vec, false);
  // Re-store the exact orthogonal factor; scaling back and forth costs ulps.
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) key.block[i * m + j] = q(i, j);
  key.orthogonal = true;
  return {std::move(key), next};
}

Tensor vtb_bind(const Tensor& x, const VtbSecret& y) { return apply_blocks(x, y, false); }

Tensor vtb_unbind(const Tensor& z, const VtbSecret& y) { return apply_blocks(z, y, true); }

HilbertMap::HilbertMap(unsigned order) : order_(order), side_(std::size_t{1} << order) {
  if (order > 15) throw ParameterError("Hilbert order too large");
  const std::size_t n = side_ * side_;
  forward_.resize(n);
  inverse_.resize(n);
  for (std::size_t rank = 0; rank < n; ++rank) {
    std::size_t row, col;
    hilbert_cell(side_, rank, row, col);
    forward_[rank] = row * side_ + col;
    inverse_[row * side_ + col] = rank;
  }
}

unsigned hilbert_order_for(std::size_t rows, std::size_t cols) {
  unsigned k = 0;
  while ((std::size_t{1} << k) < std::max(rows, cols)) ++k;
  return k;
}

Tensor hilbert_encode(const Tensor& img) {
  const auto g = plane_geometry(img.dims());
  const HilbertMap map(hilbert_order_for(g.rows, g.cols));
  const std::size_t side = map.side();
  const std::size_t n = side * side;
  Tensor out = img.rank() == 2 ? Tensor({n}) : Tensor({n, g.channels});
  for (std::size_t rank = 0; rank < n; ++rank) {
    const std::size_t cell = map.cell_at(rank);
    const std::size_t r = cell / side, c = cell % side;
    if (r >= g.rows || c >= g.cols) continue;  // zero padding
    for (std::size_t ch = 0; ch < g.channels; ++ch)
      out[rank * g.channels + ch] = img[(r * g.cols + c) * g.channels + ch];
  }
  return out;
}

Tensor hilbert_decode(const Tensor& linear, std::size_t rows, std::size_t cols) {
  if (linear.rank() != 1 && linear.rank() != 2)
    throw ShapeError("hilbert_decode expects a length-L or L x D tensor");
  const std::size_t channels = linear.rank() == 2 ? linear.dims()[1] : 1;
  const HilbertMap map(hilbert_order_for(rows, cols));
  const std::size_t side = map.side();
  if (linear.dims()[0] != side * side)
    throw ShapeError("hilbert_decode: length " + std::to_string(linear.dims()[0]) +
                     " does not match a " + std::to_string(side) + "x" + std::to_string(side) +
                     " curve");
  Tensor img = linear.rank() == 1 ? Tensor({rows, cols}) : Tensor({rows, cols, channels});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t rank = map.rank_of(r * side + c);
      for (std::size_t ch = 0; ch < channels; ++ch)
        img[(r * cols + c) * channels + ch] = linear[rank * channels + ch];
    }
  return img;
}

Tensor hilbert_hrr_bind(const Tensor& img, const Secret& s1d) {
  Tensor encoded = hilbert_encode(img);
  const std::size_t length = encoded.dims()[0];
  if (s1d.tensor.size() != length)
    throw ShapeError("hilbert_hrr_bind: secret length " + std::to_string(s1d.tensor.size()) +
                     " != encoded length " + std::to_string(length));
  if (encoded.rank() == 1) return bind_1d(encoded, s1d);
  const std::size_t channels = encoded.dims()[1];
  Tensor out(encoded.dims());
  for (std::size_t ch = 0; ch < channels; ++ch) {
    Tensor column({length});
    for (std::size_t i = 0; i < length; ++i) column[i] = encoded[i * channels + ch];
    const Tensor bound = bind_1d(column, s1d);
    for (std::size_t i = 0; i < length; ++i) out[i * channels + ch] = bound[i];
  }
  return out;
}

Tensor hilbert_hrr_unbind(const Tensor& bound, const Secret& s1d, std::size_t rows,
                          std::size_t cols) {
  const std::size_t length = bound.dims()[0];
  if (s1d.tensor.size() != length)
    throw ShapeError("hilbert_hrr_unbind: secret length mismatch");
  if (bound.rank() == 1) return hilbert_decode(unbind_1d(bound, s1d), rows, cols);
  if (bound.rank() != 2) throw ShapeError("hilbert_hrr_unbind expects L or L x D input");
  const std::size_t channels = bound.dims()[1];
  Tensor linear(bound.dims());
  for (std::size_t ch = 0; ch < channels; ++ch) {
    Tensor column({length});
    for (std::size_t i = 0; i < length; ++i) column[i] = bound[i * channels + ch];
    const Tensor plain = unbind_1d(column, s1d);
    for (std::size_t i = 0; i < length; ++i) linear[i * channels + ch] = plain[i];
  }
  return hilbert_decode(linear, rows, cols);
}

BindingOp parse_binding_op(const std::string& name) {
  if (name == "hrr2d") return BindingOp::hrr2d;
  if (name == "hrr1d") return BindingOp::hrr1d;
  if (name == "vtb") return BindingOp::vtb;
  if (name == "ivtb") return BindingOp::ivtb;
  if (name == "hilbert") return BindingOp::hilbert;
  throw ParameterError("unknown binding operator '" + name + "'");
}

const char* to_string(BindingOp op) {
  switch (op) {
    case BindingOp::hrr2d: return "hrr2d";
    case BindingOp::hrr1d: return "hrr1d";
    case BindingOp::vtb: return "vtb";
    case BindingOp::ivtb: return "ivtb";
    case BindingOp::hilbert: return "hilbert";
  }
  return "?";
}

Draw<Tensor> secret_for(BindingOp op, const Dims& dims, RngStream rng) {
  const std::size_t d = element_count(dims);
  if (d == 0) throw ShapeError("cannot make a key for an empty tensor");
  auto plain = [](Draw<Secret> s) { return Draw<Tensor>{std::move(s.value.tensor), s.next}; };
  switch (op) {
    case BindingOp::hrr2d: return plain(sample_secret(dims, rng));
    case BindingOp::hrr1d: return plain(sample_secret({d}, rng));
    case BindingOp::vtb: {
      auto k = vtb_secret(d, rng);
      return {std::move(k.value.vector), k.next};
    }
    case BindingOp::ivtb: {
      auto k = ivtb_secret(d, rng);
      return {std::move(k.value.vector), k.next};
    }
    case BindingOp::hilbert: {
      const auto g = plane_geometry(dims);
      const std::size_t side = std::size_t{1} << hilbert_order_for(g.rows, g.cols);
      return plain(sample_secret({side * side}, rng));
    }
  }
  throw ParameterError("unknown binding operator");
}

Tensor bind_op(BindingOp op, const Tensor& x, const Tensor& key) {
  switch (op) {
    case BindingOp::hrr2d: return bind(x, key);
    case BindingOp::hrr1d: return bind(x.reshaped({x.size()}), key).reshaped(x.dims());
    case BindingOp::vtb: return vtb_bind(x, make_vtb_secret(key, false));
    case BindingOp::ivtb: return vtb_bind(x, make_vtb_secret(key, true));
    case BindingOp::hilbert: return hilbert_hrr_bind(x, Secret{key, 0, true});
  }
  throw ParameterError("unknown binding operator");
}

Tensor unbind_op(BindingOp op, const Tensor& bound, const Tensor& key, const Dims& original) {
  switch (op) {
    case BindingOp::hrr2d: return unbind(bound, Secret{key, 0, true});
    case BindingOp::hrr1d:
      return unbind(bound.reshaped({bound.size()}), Secret{key, 0, true}).reshaped(bound.dims());
    case BindingOp::vtb: return vtb_unbind(bound, make_vtb_secret(key, false));
    case BindingOp::ivtb: return vtb_unbind(bound, make_vtb_secret(key, true));
    case BindingOp::hilbert: {
      const auto g = plane_geometry(original);
      return hilbert_hrr_unbind(bound, Secret{key, 0, true}, g.rows, g.cols).reshaped(original);
    }
  }
  throw ParameterError("unknown binding operator");
}

std::vector<AblationRow> run_ablation(const std::vector<Tensor>& images, std::uint64_t seed) {
  if (images.empty()) throw ParameterError("ablation needs at least one image");
  std::vector<AblationRow> rows;
  const RngStream root(seed);
  for (auto op : {BindingOp::hrr2d, BindingOp::hrr1d, BindingOp::vtb, BindingOp::ivtb,
                  BindingOp::hilbert}) {
    AblationRow row{op};
    for (std::size_t i = 0; i < images.size(); ++i) {
      const Tensor& img = images[i];
      const RngStream rng = root.fork(static_cast<std::uint64_t>(op)).fork(i);
      const auto g = plane_geometry(img.dims());
      Tensor reference = img, bound, recovered;
      switch (op) {
        case BindingOp::hrr2d: {
          auto s = sample_secret(img.dims(), rng).value;
          bound = bind(img, s);
          recovered = unbind(bound, s);
          break;
        }
        case BindingOp::hrr1d: {
          reference = img.reshaped({img.size()});
          auto s = sample_secret({img.size()}, rng).value;
          bound = bind(reference, s);
          recovered = unbind(bound, s);
          break;
        }
        case BindingOp::vtb:
        case BindingOp::ivtb: {
          reference = img.reshaped({img.size()});
          auto key = op == BindingOp::vtb ? vtb_secret(img.size(), rng).value
                                          : ivtb_secret(img.size(), rng).value;
          bound = vtb_bind(reference, key);
          recovered = vtb_unbind(bound, key);
          break;
        }
        case BindingOp::hilbert: {
          const Tensor encoded = hilbert_encode(img);
          auto s = sample_secret({encoded.dims()[0]}, rng).value;
          bound = hilbert_hrr_bind(img, s);
          recovered = hilbert_hrr_unbind(bound, s, g.rows, g.cols);
          reference = encoded;
          break;
        }
      }
      row.reconstruction_cosine += cosine(recovered.reshaped(img.dims()), img);
      row.bound_input_cosine += cosine(bound, reference);
    }
    row.reconstruction_cosine /= static_cast<double>(images.size());
    row.bound_input_cosine /= static_cast<double>(images.size());
    rows.push_back(row);
  }
  return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "operator,reconstruction_cosine,bound_input_cosine\n";
  out.precision(10);
  for (const auto& r : rows)
    out << to_string(r.op) << ',' << r.reconstruction_cosine << ',' << r.bound_input_cosine << '\n';
}

}  // namespace holobind
