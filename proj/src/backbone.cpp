#include "holobind/backbone.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "holobind/errors.hpp"
#include "holobind/rng.hpp"

namespace holobind {
namespace {

Dims layer_output(const Layer& layer, const Dims& in) {
  switch (layer.kind) {
    case LayerKind::identity:
    case LayerKind::pointwise:
      return in;
    case LayerKind::circconv2d: {
      if (in.size() != 3)
        throw SpecError("circconv2d needs an H x W x C input, got " + dims_to_string(in));
      if (in[2] != layer.cin)
        throw SpecError("circconv2d expects " + std::to_string(layer.cin) + " input channels, got " +
                        std::to_string(in[2]));
      return {in[0], in[1], layer.cout};
    }
    case LayerKind::dense: {
      if (element_count(in) != layer.cols)
        throw SpecError("dense layer expects " + std::to_string(layer.cols) + " inputs, got " +
                        std::to_string(element_count(in)));
      if (layer.rows == layer.cols) return in;
      return {layer.rows};
    }
  }
  throw SpecError("unknown layer kind");
}

void check_weights(const Layer& layer) {
  if (layer.kind == LayerKind::circconv2d &&
      layer.weights.dims() != Dims{layer.kh, layer.kw, layer.cin, layer.cout})
    throw SpecError("circconv2d weights have the wrong shape");
  if (layer.kind == LayerKind::dense && layer.weights.dims() != Dims{layer.rows, layer.cols})
    throw SpecError("dense weights have the wrong shape");
}

Tensor leaky_relu(const Tensor& t, double alpha) {
  Tensor out = t;
  for (double& v : out.values())
    if (v < 0) v *= alpha;
  return out;
}

Tensor dense_apply(const Layer& layer, const Tensor& t, const Dims& out_dims) {
  Tensor out(out_dims);
  for (std::size_t r = 0; r < layer.rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < layer.cols; ++c) acc += layer.weights[r * layer.cols + c] * t[c];
    out[r] = acc;
  }
  return out;
}

std::size_t to_size(const std::string& token, int line) {
  if (token.empty() || token.find_first_not_of("0123456789") != std::string::npos)
    throw SpecError("line " + std::to_string(line) + ": expected a non-negative integer, got '" +
                    token + "'");
  return static_cast<std::size_t>(std::stoull(token));
}

}  // namespace

Layer Layer::identity() { return Layer{}; }

Layer Layer::circconv2d(std::size_t kh, std::size_t kw, std::size_t cin, std::size_t cout,
                        std::uint64_t seed) {
  if (!kh || !kw || !cin || !cout) throw SpecError("circconv2d extents must be positive");
  Layer l;
  l.kind = LayerKind::circconv2d;
  l.kh = kh;
  l.kw = kw;
  l.cin = cin;
  l.cout = cout;
  l.seed = seed;
  // He-style fan-in scaling.
  const double variance = 2.0 / static_cast<double>(kh * kw * cin);
  l.weights = gaussian_tensor({kh, kw, cin, cout}, variance, RngStream(seed)).value;
  return l;
}

Layer Layer::leaky_relu(double alpha) {
  if (!std::isfinite(alpha)) throw SpecError("leaky-relu slope must be finite");
  Layer l;
  l.kind = LayerKind::pointwise;
  l.alpha = alpha;
  return l;
}

Layer Layer::dense(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  if (!rows || !cols) throw SpecError("dense extents must be positive");
  Layer l;
  l.kind = LayerKind::dense;
  l.rows = rows;
  l.cols = cols;
  l.seed = seed;
  l.weights = gaussian_tensor({rows, cols}, 1.0 / static_cast<double>(cols), RngStream(seed)).value;
  return l;
}

Dims BackboneSpec::output_dims() const {
  if (input_dims.empty()) throw SpecError("backbone spec has no input dims");
  Dims d = input_dims;
  for (const auto& layer : layers) {
    check_weights(layer);
    d = layer_output(layer, d);
  }
  return d;
}

bool BackboneSpec::purely_linear_circconv() const {
  for (const auto& layer : layers) {
    if (layer.kind == LayerKind::identity) continue;
    if (layer.kind != LayerKind::circconv2d || layer.cin != 1 || layer.cout != 1) return false;
  }
  return true;
}

BackboneSpec parse_backbone_spec(const std::string& text) {
  BackboneSpec spec;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  bool have_input = false;
  while (std::getline(in, raw)) {
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream line(raw);
    std::vector<std::string> tok;
    for (std::string t; line >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    auto arity = [&](std::size_t n) {
      if (tok.size() != n)
        throw SpecError("line " + std::to_string(line_no) + ": '" + tok[0] + "' takes " +
                        std::to_string(n - 1) + " arguments");
    };
    if (!have_input) {
      if (tok[0] != "input") throw SpecError("line " + std::to_string(line_no) + ": expected 'input H W D'");
      arity(4);
      spec.input_dims = {to_size(tok[1], line_no), to_size(tok[2], line_no), to_size(tok[3], line_no)};
      for (auto d : spec.input_dims)
        if (!d) throw SpecError("input dims must be positive");
      have_input = true;
    } else if (tok[0] == "identity") {
      arity(1);
      spec.layers.push_back(Layer::identity());
    } else if (tok[0] == "circconv2d") {
      arity(6);
      spec.layers.push_back(Layer::circconv2d(to_size(tok[1], line_no), to_size(tok[2], line_no),
                                              to_size(tok[3], line_no), to_size(tok[4], line_no),
                                              to_size(tok[5], line_no)));
    } else if (tok[0] == "pointwise") {
      arity(3);
      if (tok[1] != "leaky_relu")
        throw SpecError("line " + std::to_string(line_no) + ": unknown pointwise op '" + tok[1] + "'");
      double alpha;
      try {
        alpha = std::stod(tok[2]);
      } catch (const std::exception&) {
        throw SpecError("line " + std::to_string(line_no) + ": bad slope '" + tok[2] + "'");
      }
      spec.layers.push_back(Layer::leaky_relu(alpha));
    } else if (tok[0] == "dense") {
      arity(4);
      spec.layers.push_back(
          Layer::dense(to_size(tok[1], line_no), to_size(tok[2], line_no), to_size(tok[3], line_no)));
    } else {
      throw SpecError("line " + std::to_string(line_no) + ": unknown layer '" + tok[0] + "'");
    }
  }
  if (!have_input) throw SpecError("backbone spec is missing the 'input H W D' line");
  spec.output_dims();  // validates the chain at load time
  return spec;
}

BackboneSpec load_backbone_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open backbone spec " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_backbone_spec(buf.str());
}

std::string format_backbone_spec(const BackboneSpec& spec) {
  // Shortest text that parses back to the same double.
  auto shortest = [](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  std::ostringstream out;
  out << "input " << spec.input_dims.at(0) << ' ' << spec.input_dims.at(1) << ' '
      << spec.input_dims.at(2) << '\n';
  for (const auto& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::identity: out << "identity\n"; break;
      case LayerKind::circconv2d:
        out << "circconv2d " << l.kh << ' ' << l.kw << ' ' << l.cin << ' ' << l.cout << ' ' << l.seed
            << '\n';
        break;
      case LayerKind::pointwise: out << "pointwise leaky_relu " << shortest(l.alpha) << '\n'; break;
      case LayerKind::dense: out << "dense " << l.rows << ' ' << l.cols << ' ' << l.seed << '\n'; break;
    }
  }
  return out.str();
}

BackboneSpec identity_spec(const Dims& dims) {
  BackboneSpec spec{dims, {Layer::identity()}};
  spec.output_dims();
  return spec;
}

BackboneSpec linear_circconv_spec(const Dims& dims, std::size_t layers, std::uint64_t seed) {
  BackboneSpec spec{dims, {}};
  for (std::size_t i = 0; i < layers; ++i) spec.layers.push_back(Layer::circconv2d(3, 3, 1, 1, seed + i));
  spec.output_dims();
  return spec;
}

BackboneSpec toy_fw_spec(const Dims& dims, std::uint64_t seed) {
  BackboneSpec spec{dims,
                    {Layer::circconv2d(3, 3, 1, 16, seed), Layer::leaky_relu(0.1),
                     Layer::circconv2d(3, 3, 16, 16, seed + 1), Layer::leaky_relu(0.1),
                     Layer::circconv2d(3, 3, 16, 1, seed + 2)}};
  spec.output_dims();
  return spec;
}

Tensor apply(const BackboneSpec& spec, const Tensor& t) {
  if (t.dims() != spec.input_dims)
    throw ShapeError("backbone input must be " + dims_to_string(spec.input_dims) + ", got " +
                     dims_to_string(t.dims()));
  Tensor cur = t;
  Dims dims = t.dims();
  for (const auto& layer : spec.layers) {
    dims = layer_output(layer, dims);
    switch (layer.kind) {
      case LayerKind::identity: break;
      case LayerKind::circconv2d: cur = circconv_forward(layer.weights, cur); break;
      case LayerKind::pointwise: cur = leaky_relu(cur, layer.alpha); break;
      case LayerKind::dense: cur = dense_apply(layer, cur, dims); break;
    }
  }
  return cur;
}

namespace {

struct ConvGeometry {
  std::size_t rows, cols, kh, kw, cin, cout;
};

ConvGeometry conv_geometry(const Tensor& kernel, const Tensor& input) {
  if (kernel.rank() != 4) throw ShapeError("circconv kernel must be kh x kw x cin x cout");
  const auto& k = kernel.dims();
  const std::size_t channels = input.rank() == 3 ? input.dims()[2] : 1;
  if (input.rank() != 2 && input.rank() != 3)
    throw ShapeError("circconv input must be H x W or H x W x C");
  if (channels != k[2])
    throw ShapeError("circconv kernel expects " + std::to_string(k[2]) + " channels, input has " +
                     std::to_string(channels));
  return {input.dims()[0], input.dims()[1], k[0], k[1], k[2], k[3]};
}

}  // namespace

Tensor circconv_forward(const Tensor& kernel, const Tensor& input) {
  const auto g = conv_geometry(kernel, input);
  Tensor out({g.rows, g.cols, g.cout});
  const double* in = input.values().data();
  const double* w = kernel.values().data();
  double* o = out.values().data();
  const std::size_t ch = g.kh / 2, cw = g.kw / 2;
  for (std::size_t i = 0; i < g.rows; ++i)
    for (std::size_t j = 0; j < g.cols; ++j) {
      double* dst = o + (i * g.cols + j) * g.cout;
      for (std::size_t a = 0; a < g.kh; ++a) {
        const std::size_t ii = (i + g.rows * g.kh + a - ch) % g.rows;
        for (std::size_t b = 0; b < g.kw; ++b) {
          const std::size_t jj = (j + g.cols * g.kw + b - cw) % g.cols;
          const double* src = in + (ii * g.cols + jj) * g.cin;
          const double* wk = w + (a * g.kw + b) * g.cin * g.cout;
          for (std::size_t c = 0; c < g.cin; ++c) {
            const double v = src[c];
            const double* wrow = wk + c * g.cout;
            for (std::size_t oc = 0; oc < g.cout; ++oc) dst[oc] += v * wrow[oc];
          }
        }
      }
    }
  return out;
}

CircconvGrads circconv_backward(const Tensor& kernel, const Tensor& input, const Tensor& upstream) {
  const auto g = conv_geometry(kernel, input);
  if (element_count(upstream.dims()) != g.rows * g.cols * g.cout)
    throw ShapeError("circconv upstream gradient has the wrong shape");
  CircconvGrads grads{Tensor(kernel.dims()), Tensor(input.dims())};
  const double* in = input.values().data();
  const double* w = kernel.values().data();
  const double* up = upstream.values().data();
  double* gw = grads.kernel.values().data();
  double* gi = grads.input.values().data();
  const std::size_t ch = g.kh / 2, cw = g.kw / 2;
  for (std::size_t i = 0; i < g.rows; ++i)
    for (std::size_t j = 0; j < g.cols; ++j) {
      const double* u = up + (i * g.cols + j) * g.cout;
      for (std::size_t a = 0; a < g.kh; ++a) {
        const std::size_t ii = (i + g.rows * g.kh + a - ch) % g.rows;
        for (std::size_t b = 0; b < g.kw; ++b) {
          const std::size_t jj = (j + g.cols * g.kw + b - cw) % g.cols;
          const std::size_t at = (ii * g.cols + jj) * g.cin;
          const std::size_t kbase = (a * g.kw + b) * g.cin * g.cout;
          for (std::size_t c = 0; c < g.cin; ++c) {
            const double v = in[at + c];
            const double* wrow = w + kbase + c * g.cout;
            double* gwrow = gw + kbase + c * g.cout;
            double acc = 0.0;
            for (std::size_t oc = 0; oc < g.cout; ++oc) {
              gwrow[oc] += v * u[oc];
              acc += wrow[oc] * u[oc];
            }
            gi[at + c] += acc;
          }
        }
      }
    }
  return grads;
}

double linear_circconv_commutation_check(const BackboneSpec& spec, const Tensor& x,
                                         const Secret& s) {
  if (!spec.purely_linear_circconv())
    throw ContractError("commutation check needs a purely linear single-channel circconv spec");
  const Tensor direct = apply(spec, x);
  const Tensor through = unbind(apply(spec, bind(x, s)), s);
  return max_abs_diff(through, direct);
}

std::uint64_t fft_flops(std::size_t n) {
  if (n <= 1) return 0;
  return static_cast<std::uint64_t>(std::llround(5.0 * static_cast<double>(n) * std::log2(static_cast<double>(n))));
}

std::uint64_t count_flops(const BackboneSpec& spec) {
  std::uint64_t total = 0;
  Dims d = spec.input_dims;
  for (const auto& layer : spec.layers) {
    if (layer.kind == LayerKind::circconv2d)
      total += static_cast<std::uint64_t>(d[0] * d[1] * layer.kh * layer.kw * layer.cin * layer.cout);
    else if (layer.kind == LayerKind::dense)
      total += static_cast<std::uint64_t>(layer.rows * layer.cols);
    d = layer_output(layer, d);
  }
  return total;
}

}  // namespace holobind
