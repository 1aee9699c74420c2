#include <doctest.h>

#include "holobind/backbone.hpp"
#include "holobind/errors.hpp"
#include "holobind/layers.hpp"
#include "holobind/protocol.hpp"
#include "holobind/trainer.hpp"
#include "oracles.hpp"

using namespace holobind;

namespace {

// Nested-loop centered cross-correlation with wrap-around indexing.
Tensor direct_circconv(const Tensor& k, std::size_t kh, std::size_t kw, std::size_t cin,
                       std::size_t cout, const Tensor& in, std::size_t h, std::size_t w) {
  Tensor out({h, w, cout});
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t o = 0; o < cout; ++o) {
        double acc = 0;
        for (std::size_t a = 0; a < kh; ++a)
          for (std::size_t b = 0; b < kw; ++b)
            for (std::size_t c = 0; c < cin; ++c) {
              const long ii = ((long(i) + long(a) - long(kh / 2)) % long(h) + long(h)) % long(h);
              const long jj = ((long(j) + long(b) - long(kw / 2)) % long(w) + long(w)) % long(w);
              acc += k[((a * kw + b) * cin + c) * cout + o] * in[(std::size_t(ii) * w + std::size_t(jj)) * cin + c];
            }
        out[(i * w + j) * cout + o] = acc;
      }
  return out;
}

BackboneSpec single_conv(const Dims& dims, std::size_t kh, std::size_t cin, std::size_t cout, std::uint64_t seed) {
  BackboneSpec spec;
  spec.input_dims = dims;
  spec.layers.push_back(Layer::circconv2d(kh, kh, cin, cout, seed));
  return spec;
}

}  // namespace

TEST_CASE("identity and delta-kernel backbones are the identity") {
  const Tensor x = oracle::random_tensor({8, 8, 1}, 1);
  CHECK(apply(identity_spec({8, 8, 1}), x) == x);
  BackboneSpec delta = single_conv({8, 8, 1}, 3, 1, 1, 1);
  delta.layers[0].weights = Tensor({3, 3, 1, 1});
  delta.layers[0].weights[4] = 1;
  CHECK(max_abs_diff(apply(delta, x), x) <= 1e-15);
  CHECK_THROWS_AS(apply(delta, Tensor({4, 4, 1})), ShapeError);
}

TEST_CASE("circconv matches the nested-loop oracle") {
  for (auto [cin, cout, kh] : {std::tuple{1, 1, 3}, std::tuple{2, 3, 3}, std::tuple{3, 1, 5}, std::tuple{1, 2, 2}}) {
    const Tensor k = oracle::random_tensor({std::size_t(kh), std::size_t(kh), std::size_t(cin), std::size_t(cout)}, 7);
    const Tensor x = oracle::random_tensor({8, 6, std::size_t(cin)}, 8);
    CHECK(max_abs_diff(circconv_forward(k, x), direct_circconv(k, kh, kh, cin, cout, x, 8, 6)) <= 1e-9);
  }
}

TEST_CASE("circconv backward special cases") {
  const Tensor x = oracle::random_tensor({6, 6, 1}, 2), up = oracle::random_tensor({6, 6, 1}, 3);
  Tensor delta({3, 3, 1, 1});
  delta[4] = 1;
  CHECK(max_abs_diff(circconv_backward(delta, x, up).input, up) <= 1e-15);
  const Tensor scalar({1, 1, 1, 1}, {0.7});
  const auto g = circconv_backward(scalar, x, up);
  CHECK(g.kernel[0] == doctest::Approx(dot(up, x)).epsilon(1e-12));
  CHECK(max_abs_diff(g.input, 0.7 * up) <= 1e-15);
}

TEST_CASE("spec text round trips and validates") {
  const BackboneSpec toy = toy_fw_spec({16, 16, 1}, 42);
  const std::string text = format_backbone_spec(toy);
  const BackboneSpec back = parse_backbone_spec(text);
  CHECK(format_backbone_spec(back) == text);
  const Tensor x = oracle::random_tensor({16, 16, 1}, 4);
  CHECK(apply(back, x) == apply(toy, x));
  CHECK(toy.shape_preserving());
  CHECK_FALSE(toy.purely_linear_circconv());

  CHECK(parse_backbone_spec("# comment\ninput 4 4 1\n\nidentity\n").layers.size() == 1);
  CHECK_THROWS_AS(parse_backbone_spec("input 4 4 1\ncircconv2d 3 3 2 1 1\n"), SpecError);
  CHECK_THROWS_AS(parse_backbone_spec("input 4 4 1\nsoftplus\n"), SpecError);
  CHECK_THROWS_AS(parse_backbone_spec("identity\n"), SpecError);
  CHECK_FALSE(parse_backbone_spec("input 4 4 1\ncircconv2d 3 3 1 2 1\n").shape_preserving());
}

TEST_CASE("apply is deterministic") {
  const BackboneSpec toy = toy_fw_spec({16, 16, 1}, 5);
  const Tensor x = oracle::random_tensor({16, 16, 1}, 6);
  CHECK(apply(toy, x) == apply(toy_fw_spec({16, 16, 1}, 5), x));
  CHECK(apply(toy, x).dims() == x.dims());
}

TEST_CASE("linear circconv backbones commute with binding") {
  for (std::size_t side : {8, 16, 32}) {
    const Dims dims{side, side, 1};
    const Tensor x = oracle::random_tensor(dims, side);
    const Secret s = sample_secret(dims, RngStream(side + 1)).value;
    CHECK(linear_circconv_commutation_check(identity_spec(dims), x, s) <= 1e-9);
    CHECK(linear_circconv_commutation_check(single_conv(dims, 3, 1, 1, 9), x, s) <= 1e-8);
    CHECK(linear_circconv_commutation_check(linear_circconv_spec(dims, 3, 10), x, s) <= 1e-8);
  }
  const Dims dims{8, 8, 1};
  BackboneSpec bent = single_conv(dims, 3, 1, 1, 1);
  bent.layers.push_back(Layer::leaky_relu(0.1));
  CHECK_THROWS_AS(linear_circconv_commutation_check(bent, oracle::random_tensor(dims, 1),
                                                    sample_secret(dims, RngStream(1)).value),
                  ContractError);
}

TEST_CASE("flop accounting") {
  CHECK(count_flops(identity_spec({16, 16, 1})) == 0);
  BackboneSpec dense;
  dense.input_dims = {100};
  dense.layers.push_back(Layer::dense(10, 100, 1));
  CHECK(count_flops(dense) == 1000);
  CHECK(count_flops(single_conv({8, 8, 2}, 3, 2, 4, 1)) == 8 * 8 * 3 * 3 * 2 * 4);
  CHECK(fft_flops(1) == 0);
  CHECK(fft_flops(256) == 5 * 256 * 8);

  const Head head = make_head(256, kHeadHidden, 4, 1);
  const FlopReport r = cost_report(toy_fw_spec({16, 16, 1}, 1), 1, &head);
  MESSAGE("toy remote fraction " << r.remote_fraction());
  CHECK(r.remote_fraction() >= 0.65);
  CHECK(r.remote_fraction() <= 1.0);
}
