#include "holobind/vsa.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "holobind/errors.hpp"

namespace holobind {
namespace {

void require_spatial(const Tensor& t, const char* what) {
  if (t.rank() < 1 || t.rank() > 3)
    throw ShapeError(std::string(what) + ": expected rank 1, 2 or 3, got " +
                     dims_to_string(t.dims()));
}

Spectrum checked_spectrum(const Tensor& t, const char* what) {
  require_spatial(t, what);
  return spatial_fft(t);
}

}  // namespace

Tensor project(const Tensor& v) {
  auto s = checked_spectrum(v, "project");
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const double mag = std::abs(s.values[i]);
    if (mag < kProjectionEpsilon)
      throw DegenerateSpectrumError("project: spectral magnitude " + std::to_string(mag) +
                                    " below epsilon at coefficient " + std::to_string(i));
    s.values[i] /= mag;
  }
  return spatial_ifft(s);
}

Tensor bind(const Tensor& x, const Tensor& y) {
  require_same_dims(x, y, "bind");
  auto fx = checked_spectrum(x, "bind");
  const auto fy = spatial_fft(y);
  for (std::size_t i = 0; i < fx.values.size(); ++i) fx.values[i] *= fy.values[i];
  return spatial_ifft(fx);
}

Tensor bind(const Tensor& x, const Secret& s) { return bind(x, s.tensor); }

Secret inverse(const Secret& s) {
  auto f = checked_spectrum(s.tensor, "inverse");
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    const double mag = std::abs(f.values[i]);
    if (mag < kProjectionEpsilon)
      throw NearSingularInverseError("inverse: spectral magnitude " + std::to_string(mag) +
                                     " below epsilon at coefficient " + std::to_string(i));
    f.values[i] = 1.0 / f.values[i];
  }
  return Secret{spatial_ifft(f), s.seed, s.projected};
}

Tensor unbind(const Tensor& bound, const Secret& s) {
  require_same_dims(bound, s.tensor, "unbind");
  return bind(bound, inverse(s));
}

Tensor unbind_adjoint(const Tensor& upstream, const Secret& s) {
  require_same_dims(upstream, s.tensor, "unbind_adjoint");
  auto fu = checked_spectrum(upstream, "unbind_adjoint");
  const auto fs = spatial_fft(s.tensor);
  for (std::size_t i = 0; i < fu.values.size(); ++i) {
    const double mag = std::abs(fs.values[i]);
    if (mag < kProjectionEpsilon)
      throw NearSingularInverseError("unbind_adjoint: near-singular secret spectrum");
    fu.values[i] *= std::conj(1.0 / fs.values[i]);
  }
  return spatial_ifft(fu);
}

Draw<Secret> sample_secret(const Dims& dims, RngStream rng) {
  const double variance = 1.0 / static_cast<double>(element_count(dims));
  for (int attempt = 0;; ++attempt) {
    auto [draw, next] = gaussian_tensor(dims, variance, rng);
    try {
      return {Secret{project(draw), rng.seed(), true}, next};
    } catch (const DegenerateSpectrumError&) {
      if (attempt >= 3) throw;
      rng = next;
    }
  }
}

double cosine(const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "cosine");
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw ParameterError("cosine: zero-norm input");
  const double c = dot(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

Bundle bundle_add(Bundle bundle, const Tensor& x, const Secret& y) {
  Tensor bound = bind(x, y);
  if (bundle.term_count == 0 && bundle.tensor.empty()) {
    bundle.tensor = std::move(bound);
  } else {
    require_same_dims(bundle.tensor, bound, "bundle_add");
    bundle.tensor += bound;
  }
  ++bundle.term_count;
  return bundle;
}

double presence_probe(const Bundle& bundle, const Secret& y, const Tensor& x_candidate) {
  return dot(unbind(bundle.tensor, y), x_candidate);
}

const char* to_string(ProbeMode mode) {
  return mode == ProbeMode::projected ? "projected" : "naive";
}

std::vector<ProbeRow> run_probe_experiment(const ProbeConfig& config) {
  if (config.trials < 2) throw ParameterError("probe experiment needs at least 2 trials");
  const Dims dims{config.side, config.side};
  const double variance = 1.0 / static_cast<double>(config.side * config.side);
  const RngStream root(config.seed);
  std::vector<ProbeRow> rows;
  for (auto mode : config.modes) {
    for (auto k : config.term_counts) {
      if (k == 0) throw ParameterError("probe term count must be positive");
      std::vector<double> present, absent;
      for (std::size_t trial = 0; trial < config.trials; ++trial) {
        // The same stream per (k, trial) in both modes gives matched draws.
        RngStream rng = root.fork(k).fork(trial);
        auto draw_vector = [&] {
          auto d = gaussian_tensor(dims, variance, rng);
          rng = d.next;
          return mode == ProbeMode::projected ? project(d.value) : d.value;
        };
        Bundle bundle;
        Tensor first_x;
        Secret first_y;
        for (std::size_t i = 0; i < k; ++i) {
          Tensor x = draw_vector();
          Secret y{draw_vector(), rng.counter(), mode == ProbeMode::projected};
          bundle = bundle_add(std::move(bundle), x, y);
          if (i == 0) {
            first_x = x;
            first_y = y;
          }
        }
        const Tensor outsider = draw_vector();
        present.push_back(presence_probe(bundle, first_y, first_x));
        absent.push_back(presence_probe(bundle, first_y, outsider));
      }
      auto stats = [](const std::vector<double>& v, double& mean, double& sd) {
        mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
      };
      ProbeRow row;
      row.k = k;
      row.mode = mode;
      stats(present, row.present_mean, row.present_std);
      stats(absent, row.absent_mean, row.absent_std);
      rows.push_back(row);
    }
  }
  return rows;
}

void write_probe_csv(std::ostream& out, const std::vector<ProbeRow>& rows) {
  out << "k,mode,present_mean,absent_mean,present_std,absent_std\n";
  out.precision(10);
  for (const auto& r : rows)
    out << r.k << ',' << to_string(r.mode) << ',' << r.present_mean << ',' << r.absent_mean << ','
        << r.present_std << ',' << r.absent_std << '\n';
}

}  // namespace holobind
