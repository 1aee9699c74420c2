// Acceptance suite: one PASS/FAIL line per criterion with the measured
// values. Exits nonzero when any criterion fails; pass indices to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "holobind/alt_bindings.hpp"
#include "holobind/attacks.hpp"
#include "holobind/audit.hpp"
#include "holobind/backbone.hpp"
#include "holobind/layers.hpp"
#include "holobind/protocol.hpp"
#include "holobind/trainer.hpp"
#include "holobind/vsa.hpp"
#include "oracles.hpp"

using namespace holobind;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// The trained toy model is shared by several criteria.
struct ToyRun {
  SynthDataset data;
  ToyModel model;
  double seconds = 0;
};

const ToyRun& toy_run() {
  static const ToyRun run = [] {
    ToyRun r;
    r.data = synth_dataset(1);
    TrainConfig cfg;  // defaults: 60 epochs, batch 32, lr 1e-3, seed 1
    const auto t0 = std::chrono::steady_clock::now();
    r.model = train_csps(r.data, cfg).model;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }();
  return run;
}

Outcome exact_retrieval() {
  double worst = 0;
  for (const Dims& dims : {Dims{16, 16, 1}, Dims{32, 32, 3}, Dims{28, 28, 1}})
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const Tensor x = oracle::random_tensor(dims, seed);
      const Secret s = sample_secret(dims, RngStream(seed).fork(1)).value;
      worst = std::max(worst, max_abs_diff(unbind(bind(x, s), s), x));
    }
  return {worst <= 1e-9, fmt("max_err=%.3g over 300 pairs (bar 1e-9)", worst)};
}

Outcome oracle_equivalence() {
  double worst2 = 0, worst1 = 0;
  for (std::size_t h = 1; h <= 8; ++h)
    for (std::size_t w = 1; w <= 8; ++w) {
      const Tensor x = oracle::random_tensor({h, w}, h * 10 + w), y = oracle::random_tensor({h, w}, h * 10 + w + 500);
      worst2 = std::max(worst2, max_abs_diff(bind(x, y), oracle::circular_convolution_2d(x, y)));
    }
  for (std::size_t d = 1; d <= 8; ++d) {
    const Tensor x = oracle::random_tensor({d}, d), y = oracle::random_tensor({d}, d + 100);
    worst1 = std::max(worst1, max_abs_diff(bind(x, y), oracle::matvec(oracle::circulant(y), x)));
  }
  return {worst2 <= 1e-9 && worst1 <= 1e-9,
          fmt("2D max_err=%.3g (all dims <= 8x8), 1D circulant max_err=%.3g (d <= 8); bar 1e-9", worst2, worst1)};
}

Outcome probe_curves() {
  ProbeConfig cfg;  // d = 1024, k in {1..32}, 100 trials, both modes
  const auto rows = run_probe_experiment(cfg);
  bool ok = true;
  std::string proj = "projected present:", naive = "naive present:";
  double worst_absent = 0, naive_absent = 0;
  std::vector<std::size_t> naive_not_below;
  for (std::size_t k : cfg.term_counts) {
    const ProbeRow* p = nullptr;
    const ProbeRow* n = nullptr;
    for (const auto& r : rows)
      if (r.k == k) (r.mode == ProbeMode::projected ? p : n) = &r;
    proj += fmt(" %.3f", p->present_mean);
    naive += fmt(" %.3f", n->present_mean);
    if (k <= 8 && p->present_mean < 0.9) ok = false;
    worst_absent = std::max(worst_absent, std::abs(p->absent_mean));
    naive_absent = std::max(naive_absent, std::abs(n->absent_mean));
    if (!(n->present_mean < p->present_mean)) naive_not_below.push_back(k);
  }
  if (worst_absent > 0.1) ok = false;
  std::string below = "naive strictly below projected at every k: ";
  if (naive_not_below.empty()) {
    below += "yes";
  } else {
    ok = false;
    below += "no (k =";
    for (auto k : naive_not_below) below += fmt(" %zu", k);
    below += ")";
  }
  return {ok, proj + "; " + naive + "; " +
                  fmt("projected max |absent| %.3f (bar 0.1), naive %.3f; ", worst_absent, naive_absent) + below};
}

Outcome ivtb_exactness() {
  double worst = 0;
  bool ordered = true;
  for (std::size_t d : {16, 64, 256}) {
    const Tensor x = oracle::random_tensor({d}, d);
    const VtbSecret orth = ivtb_secret(d, RngStream(d)).value;
    const VtbSecret plain = vtb_secret(d, RngStream(d)).value;
    const double eo = max_abs_diff(vtb_unbind(vtb_bind(x, orth), orth), x);
    const double ep = max_abs_diff(vtb_unbind(vtb_bind(x, plain), plain), x);
    worst = std::max(worst, eo);
    ordered = ordered && ep > eo;
  }
  return {worst <= 1e-9 && ordered,
          fmt("iVTB max_err=%.3g (bar 1e-9); plain VTB error larger on every matched seed: %s", worst,
              ordered ? "yes" : "no")};
}

Outcome hilbert_bijection() {
  bool bijective = true, adjacent = true;
  for (unsigned order = 1; order <= 6; ++order) {
    const HilbertMap map(order);
    const std::size_t n = map.side();
    std::vector<bool> seen(n * n, false);
    for (std::size_t r = 0; r < n * n; ++r) {
      const auto c = map.cell_at(r);
      bijective = bijective && !seen[c] && map.rank_of(c) == r;
      seen[c] = true;
      if (r + 1 < n * n) {
        const auto d = map.cell_at(r + 1);
        adjacent = adjacent && std::abs(long(c / n) - long(d / n)) + std::abs(long(c % n) - long(d % n)) == 1;
      }
    }
    const Tensor img = oracle::random_tensor({n, n}, order);
    bijective = bijective && hilbert_decode(hilbert_encode(img), n, n) == img;
  }
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor img = oracle::random_tensor({16, 16}, seed);
    const Secret s = sample_secret({256}, RngStream(seed)).value;
    worst = std::max(worst, max_abs_diff(hilbert_hrr_unbind(hilbert_hrr_bind(img, s), s, 16, 16), img));
  }
  return {bijective && adjacent && worst <= 1e-9,
          fmt("bijection orders 1-6: %s; adjacency: %s; hilbert+1D HRR max_err=%.3g (bar 1e-9)",
              bijective ? "yes" : "no", adjacent ? "yes" : "no", worst)};
}

double fd_worst(const std::function<double(const Tensor&)>& f, const Tensor& x, const Tensor& analytic,
                std::uint64_t seed) {
  const RngStream rng(seed);
  double worst = 0;
  for (std::size_t n = 0; n < 20; ++n) {
    const std::size_t i = rng.word(n) % x.size();
    worst = std::max(worst, oracle::relative_error(oracle::central_difference(f, x, i), analytic[i], 1e-6));
  }
  return worst;
}

Outcome gradient_audit() {
  std::vector<std::pair<std::string, double>> errs;
  {
    const Tensor k = oracle::random_tensor({3, 3, 2, 2}, 1), x = oracle::random_tensor({6, 6, 2}, 2);
    const Tensor up = oracle::random_tensor({6, 6, 2}, 3);
    const auto g = circconv_backward(k, x, up);
    errs.emplace_back("circconv", std::max(fd_worst([&](const Tensor& kk) { return dot(circconv_forward(kk, x), up); }, k, g.kernel, 4),
                                           fd_worst([&](const Tensor& xx) { return dot(circconv_forward(k, xx), up); }, x, g.input, 5)));
  }
  {
    const Tensor w = oracle::random_tensor({5, 12}, 6), b = oracle::random_tensor({5}, 7);
    const Tensor x = oracle::random_tensor({12}, 8), up = oracle::random_tensor({5}, 9);
    const auto g = dense_backward(w, x, up);
    errs.emplace_back("dense", std::max({fd_worst([&](const Tensor& ww) { return dot(dense_forward(ww, b, x), up); }, w, g.weights, 10),
                                         fd_worst([&](const Tensor& bb) { return dot(dense_forward(w, bb, x), up); }, b, g.bias, 11),
                                         fd_worst([&](const Tensor& xx) { return dot(dense_forward(w, b, xx), up); }, x, g.input, 12)}));
  }
  {
    const Tensor x = oracle::random_tensor({40}, 13), up = oracle::random_tensor({40}, 14);
    errs.emplace_back("leaky-relu", fd_worst([&](const Tensor& xx) { return dot(leaky_relu_forward(xx, 0.1), up); }, x,
                                             leaky_relu_backward(x, 0.1, up), 15));
  }
  {
    const Tensor logits = oracle::random_tensor({6}, 16);
    errs.emplace_back("softmax-CE", fd_worst([](const Tensor& l) { return softmax_cross_entropy(l, 2).loss; }, logits,
                                             softmax_cross_entropy(logits, 2).grad, 17));
  }
  {
    const Tensor x = oracle::random_tensor({10}, 18), up = oracle::random_tensor({10}, 19);
    errs.emplace_back("reverse_grad", fd_worst([&](const Tensor& xx) { return -dot(reverse_grad_forward(xx), up); }, x,
                                               reverse_grad_backward(up), 20));
  }
  {
    const Secret s = sample_secret({8, 8}, RngStream(21)).value;
    const Tensor x = oracle::random_tensor({8, 8}, 22), up = oracle::random_tensor({8, 8}, 23);
    errs.emplace_back("bind-as-linear-map",
                      std::max(fd_worst([&](const Tensor& xx) { return dot(bind(xx, s), up); }, x, unbind(up, s), 24),
                               fd_worst([&](const Tensor& xx) { return dot(unbind(xx, s), up); }, x, unbind_adjoint(up, s), 25)));
  }
  bool ok = true;
  std::string detail;
  for (const auto& [name, e] : errs) {
    ok = ok && e <= 1e-4;
    detail += fmt("%s%s=%.2g", detail.empty() ? "" : " ", name.c_str(), e);
  }
  return {ok, "max rel err at 20 coords: " + detail + " (bar 1e-4)"};
}

Outcome toy_training() {
  const auto& run = toy_run();
  const double pred = evaluate(run.model, run.data.test_images, run.data.test_labels, EvalMode::with_secret, RngStream(101));
  const double adv = evaluate(run.model, run.data.test_images, run.data.test_labels, EvalMode::adversary_raw, RngStream(102));
  const double gap = pred - adv;
  // Committed thresholds 0.90 / 0.40 / 0.40, failure bars 0.03 looser.
  const bool ok = pred >= 0.87 && adv <= 0.43 && gap >= 0.37;
  return {ok, fmt("pred=%.4f (>= 0.90, bar 0.87) adv=%.4f (<= 0.40, bar 0.43) gap=%.4f (>= 0.40, bar 0.37); "
                  "nominal %s; training %.0f s",
                  pred, adv, gap, (pred >= 0.90 && adv <= 0.40 && gap >= 0.40) ? "met" : "missed", run.seconds)};
}

Outcome linear_demo() {
  const auto& data = toy_run().data;
  const double fresh = linear_adversary_demo(data, 1, LinearDemoVariant::per_example_secret);
  const double unbound = linear_adversary_demo(data, 1, LinearDemoVariant::unbound);
  const double shared = linear_adversary_demo(data, 1, LinearDemoVariant::shared_secret);
  const bool ok = std::abs(fresh - 0.25) <= 0.05 && unbound >= 0.95 && shared >= 0.90;
  return {ok, fmt("per-example secrets=%.4f (0.25 +- 0.05) unbound=%.4f (>= 0.95) shared secret=%.4f (>= 0.90)",
                  fresh, unbound, shared)};
}

Outcome clustering() {
  const auto& run = toy_run();
  const auto reports = run_attack(AttackKind::cluster, run.model, run.data, 1);
  return {reports[0].score <= 0.05 && reports[1].score >= 0.9,
          fmt("ARI on r=%.4f (<= 0.05); control ARI on noiseless unbound images=%.4f (>= 0.9)", reports[0].score,
              reports[1].score)};
}

Outcome inversion_and_regression() {
  const auto& run = toy_run();
  std::size_t inv_ok = 0, reg_ok = 0;
  double inv_max = 0, reg_max = 0, inv_planted = 1, reg_planted = 1;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto r = run_attack(AttackKind::invert, run.model, run.data, seed);
    if (r[0].score <= 0.2) ++inv_ok;
    inv_max = std::max(inv_max, r[0].score);
    inv_planted = std::min(inv_planted, r[1].score);
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = run_attack(AttackKind::regress, run.model, run.data, seed);
    if (r[0].score <= 0.15) ++reg_ok;
    reg_max = std::max(reg_max, r[0].score);
    reg_planted = std::min(reg_planted, r[1].score);
  }
  const bool ok = inv_planted >= 0.99 && reg_planted >= 0.99 && inv_ok >= 45 && reg_ok >= 18;
  return {ok, fmt("planted inversion min cos=%.4f, planted regression min cos=%.4f (>= 0.99); "
                  "inversion cos <= 0.2 on %zu/50 seeds (max %.4f, need 45); regression cos <= 0.15 on %zu/20 "
                  "seeds (max %.4f, need 18)",
                  inv_planted, reg_planted, inv_ok, inv_max, reg_ok, reg_max)};
}

bool contains(const Bytes& hay, const Bytes& needle) {
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

Outcome protocol() {
  const Dims dims{16, 16, 1};
  const Head head = make_head(256, kHeadHidden, 4, 7);
  const Tensor x = oracle::random_tensor(dims, 8);

  const Worker identity(identity_spec(dims));
  LoopbackTransport loop(identity);
  RecordingTransport rec(loop);
  const QueryPlan plan{4, RngStream(9)};
  const auto remote = client_infer(x, plan, rec, head);
  const auto local = head_predict(head, x);
  double diff = 0;
  for (std::size_t c = 0; c < local.size(); ++c) diff = std::max(diff, std::abs(remote[c] - local[c]));

  const auto transcript = rec.transcript();
  bool sizes = transcript.size() == plan.k;
  RngStream rng = plan.rng;
  bool leaked = false;
  for (std::size_t i = 0; i < plan.k; ++i) {
    auto draw = sample_secret(dims, rng);
    rng = draw.next.advanced(1);
    for (const auto& ex : transcript) {
      sizes = sizes && ex.request.size() == 18 + container_size(dims, Dtype::f32) && ex.request.size() == 1060;
      for (std::size_t j = 0; j + 1 < draw.value.tensor.size(); ++j) {
        Bytes f32(8), f64(8);
        const float a = static_cast<float>(draw.value.tensor[j]), b = static_cast<float>(draw.value.tensor[j + 1]);
        std::memcpy(f32.data(), &a, 4);
        std::memcpy(f32.data() + 4, &b, 4);
        std::memcpy(f64.data(), &draw.value.tensor[j], 8);
        leaked = leaked || contains(ex.request, f32) || contains(ex.request, f64) || contains(ex.response, f32);
      }
    }
  }
  const bool ok = diff <= 1e-5 && sizes && !leaked;
  return {ok, fmt("identity loopback max diff=%.3g (<= 1e-5); exchanges=%zu for k=%zu; request bytes=%zu "
                  "(18 + %zu); secret bytes in transcript: %s",
                  diff, transcript.size(), plan.k, transcript.empty() ? 0 : transcript[0].request.size(),
                  container_size(dims, Dtype::f32), leaked ? "yes" : "none")};
}

Outcome k_averaging() {
  const auto& run = toy_run();
  const Worker worker(run.model.backbone);
  LoopbackTransport loop(worker);
  std::size_t hits1 = 0, hits10 = 0;
  const std::size_t n = 200;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& x = run.data.test_images[i];
    const auto y = run.data.test_labels[i];
    if (argmax(client_infer(x, {1, RngStream(2000 + i)}, loop, run.model.predictor)) == y) ++hits1;
    if (argmax(client_infer(x, {10, RngStream(5000 + i)}, loop, run.model.predictor)) == y) ++hits10;
  }
  const double a1 = double(hits1) / n, a10 = double(hits10) / n;
  // Informational: k=1 accuracy averaged over 10 secret draws per image.
  double expected1 = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < 10; ++r)
      if (argmax(client_infer(run.data.test_images[i], {1, RngStream(9000 + i * 10 + r)}, loop,
                              run.model.predictor)) == run.data.test_labels[i])
        expected1 += 0.1;
  return {a10 >= a1, fmt("accuracy k=1: %.4f, k=10: %.4f over %zu test images (k=1 mean over 10 draws: %.4f)",
                         a1, a10, n, expected1 / n)};
}

Outcome compute_split() {
  const auto spec = load_backbone_spec(HOLOBIND_TOY_SPEC);
  const Head head = make_head(element_count(spec.input_dims), kHeadHidden, 4, 1);
  const FlopReport r = cost_report(spec, 1, &head);
  return {r.remote_fraction() >= 0.65,
          fmt("remote=%llu local=%llu remote fraction=%.4f (>= 0.65); bytes up=%llu down=%llu",
              (unsigned long long)r.remote_flops, (unsigned long long)r.local_flops, r.remote_fraction(),
              (unsigned long long)r.bytes_up, (unsigned long long)r.bytes_down)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"exact HRR retrieval", exact_retrieval},
      {"bind oracle equivalence", oracle_equivalence},
      {"presence probe curves", probe_curves},
      {"iVTB exactness", ivtb_exactness},
      {"Hilbert bijection", hilbert_bijection},
      {"gradient audit", gradient_audit},
      {"toy adversarial training", toy_training},
      {"linear adversary demo", linear_demo},
      {"clustering attack", clustering},
      {"inversion and regression attacks", inversion_and_regression},
      {"protocol", protocol},
      {"k-averaging", k_averaging},
      {"compute split", compute_split},
  };
  // Optional: run a subset by 1-based index, e.g. `acceptance 3 7`.
  std::vector<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::stoul(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && std::find(only.begin(), only.end(), i + 1) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2zu %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  std::printf("%d of %zu criteria failed\n", failures, only.empty() ? criteria.size() : only.size());
  return failures == 0 ? 0 : 1;
}
