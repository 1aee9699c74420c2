#include "holobind/attacks.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include "holobind/errors.hpp"
#include "holobind/fft.hpp"
#include "holobind/trainer.hpp"

namespace holobind {
namespace {

double choose2(double n) { return n * (n - 1.0) / 2.0; }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Squared distance from every row to its nearest centroid, and that centroid.
double assign(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
              std::vector<std::size_t>& labels, std::vector<double>& dist) {
  double inertia = 0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d = (points.row(i) - centroids.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<std::size_t>(c);
      }
    }
    labels[i] = arg;
    dist[i] = best;
    inertia += best;
  }
  return inertia;
}

Eigen::MatrixXd kmeans_plus_plus(const Eigen::MatrixXd& points, std::size_t k, Sampler& rng) {
  const auto n = static_cast<std::size_t>(points.rows());
  Eigen::MatrixXd centroids(k, points.cols());
  centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.below(n)));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = (points.row(i) - centroids.row(0)).squaredNorm();
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0;
    for (double v : d2) total += v;
    std::size_t pick = n - 1;
    if (total <= 0) {
      pick = rng.below(n);
    } else {
      double target = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        target -= d2[i];
        if (target < 0) {
          pick = i;
          break;
        }
      }
    }
    centroids.row(c) = points.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], (points.row(i) - centroids.row(c)).squaredNorm());
  }
  return centroids;
}

// u_i = b_i (*) involution(c), i.e. U = B conj(C): equal to unbind(b, c) for
// a projected candidate and differentiable for any c.
std::vector<Tensor> correlate_all(const std::vector<Spectrum>& bound, const Spectrum& c) {
  std::vector<Tensor> out;
  out.reserve(bound.size());
  for (const auto& b : bound) {
    Spectrum u{b.dims, std::vector<Complex>(b.values.size())};
    for (std::size_t j = 0; j < u.values.size(); ++j) u.values[j] = b.values[j] * std::conj(c.values[j]);
    out.push_back(spatial_ifft(u));
  }
  return out;
}

std::vector<Spectrum> spectra_of(const std::vector<Tensor>& bound, const Tensor& candidate) {
  if (bound.empty()) throw ParameterError("inversion needs a non-empty probe batch");
  std::vector<Spectrum> out;
  out.reserve(bound.size());
  for (const auto& b : bound) {
    require_same_dims(b, candidate, "inversion_attack");
    out.push_back(spatial_fft(b));
  }
  return out;
}

double objective_from(const std::vector<Spectrum>& spectra, const Tensor& candidate,
                      const InversionReference& reference) {
  const auto u = correlate_all(spectra, spatial_fft(candidate));
  return frechet_distance(gaussian_stats(reference.pca.transform(stack_rows(u))), reference.stats);
}

Tensor gradient_from(const std::vector<Spectrum>& spectra, const Tensor& candidate,
                     const InversionReference& reference) {
  const auto u = correlate_all(spectra, spatial_fft(candidate));
  const Eigen::MatrixXd z = reference.pca.transform(stack_rows(u));
  const auto n = static_cast<double>(z.rows());
  if (z.rows() < 2) throw ParameterError("inversion needs at least two probe images");
  const GaussianStats stats = gaussian_stats(z);

  // d FD / d Sigma = I - A M^-1/2 A with A = Sigma_ref^1/2, M = A Sigma A.
  const Eigen::MatrixXd a = psd_sqrt(reference.stats.covariance);
  const Eigen::MatrixXd m = a * stats.covariance * a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  Eigen::VectorXd inv_sqrt = eig.eigenvalues();
  const double floor = 1e-12 * std::max(1.0, inv_sqrt.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < inv_sqrt.size(); ++i)
    inv_sqrt[i] = inv_sqrt[i] > floor ? 1.0 / std::sqrt(inv_sqrt[i]) : 0.0;
  const Eigen::MatrixXd m_inv_sqrt = eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
  const Eigen::MatrixXd g_sigma = Eigen::MatrixXd::Identity(m.rows(), m.cols()) - a * m_inv_sqrt * a;

  const Eigen::VectorXd mean_term = 2.0 * (stats.mean - reference.stats.mean) / n;
  Spectrum total{spectra.front().dims, std::vector<Complex>(spectra.front().values.size())};
  for (std::size_t i = 0; i < spectra.size(); ++i) {
    const Eigen::VectorXd zi = z.row(static_cast<Eigen::Index>(i)).transpose();
    const Eigen::VectorXd dz = mean_term + (2.0 / (n - 1.0)) * g_sigma * (zi - stats.mean);
    const Eigen::VectorXd du = reference.pca.components.transpose() * dz;
    const Spectrum g = spatial_fft(Tensor(candidate.dims(), std::vector<double>(du.data(), du.data() + du.size())));
    for (std::size_t j = 0; j < total.values.size(); ++j)
      total.values[j] += std::conj(g.values[j]) * spectra[i].values[j];
  }
  return spatial_ifft(total);
}

}  // namespace

Eigen::MatrixXd stack_rows(const std::vector<Tensor>& tensors) {
  if (tensors.empty()) return Eigen::MatrixXd(0, 0);
  const std::size_t p = tensors.front().size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(tensors.size()), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].size() != p) throw ShapeError("stack_rows: tensors differ in size");
    for (std::size_t j = 0; j < p; ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = tensors[i][j];
  }
  return out;
}

namespace {

KMeansResult lloyd(const Eigen::MatrixXd& points, std::size_t k, Sampler& sampler, std::size_t max_iter,
                   double tol) {
  const auto n = static_cast<std::size_t>(points.rows());
  KMeansResult r;
  r.centroids = kmeans_plus_plus(points, k, sampler);
  r.labels.assign(n, 0);
  std::vector<double> dist(n);
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < max_iter; ++it) {
    double inertia = assign(points, r.centroids, r.labels, dist);

    std::vector<std::size_t> counts(k, 0);
    for (auto l : r.labels) ++counts[l];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      // Re-seed from the point farthest from its centroid.
      const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
      --counts[r.labels[far]];
      r.labels[far] = c;
      counts[c] = 1;
      inertia -= dist[far];
      dist[far] = 0;
    }

    r.centroids.setZero();
    for (std::size_t i = 0; i < n; ++i) r.centroids.row(r.labels[i]) += points.row(i);
    for (std::size_t c = 0; c < k; ++c) r.centroids.row(c) /= static_cast<double>(counts[c]);

    r.inertia_history.push_back(inertia);
    r.iterations = it + 1;
    if (previous - inertia <= tol * std::max(previous, 1e-300) || inertia == 0) break;
    previous = inertia;
  }
  return r;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k, RngStream rng,
                    std::size_t max_iter, double tol, std::size_t restarts) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k == 0 || k > n)
    throw ParameterError("kmeans: k = " + std::to_string(k) + " but only " + std::to_string(n) + " points");
  if (restarts == 0) throw ParameterError("kmeans: restarts must be positive");
  Sampler sampler(rng);
  KMeansResult best;
  for (std::size_t run = 0; run < restarts; ++run) {
    KMeansResult r = lloyd(points, k, sampler, max_iter, tol);
    if (run == 0 || r.inertia_history.back() < best.inertia_history.back()) best = std::move(r);
  }
  return best;
}

double ari(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size())
    throw ParameterError("ari: labelings have lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  std::map<std::pair<std::size_t, std::size_t>, double> table;
  std::map<std::size_t, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[{a[i], b[i]}] += 1;
    rows[a[i]] += 1;
    cols[b[i]] += 1;
  }
  double index = 0, sum_a = 0, sum_b = 0;
  for (const auto& [_, v] : table) index += choose2(v);
  for (const auto& [_, v] : rows) sum_a += choose2(v);
  for (const auto& [_, v] : cols) sum_b += choose2(v);
  const double pairs = choose2(static_cast<double>(a.size()));
  if (pairs == 0) return 1.0;
  const double expected = sum_a * sum_b / pairs;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;  // both partitions trivial and identical
  return (index - expected) / (max_index - expected);
}

bool AttackReport::passed() const {
  return comparison == Comparison::at_most ? score <= threshold : score >= threshold;
}

void write_attack_csv(std::ostream& out, const std::vector<AttackReport>& reports) {
  out << "name,score,threshold,comparison,verdict,seed,params\n";
  for (const auto& r : reports) {
    std::string params;
    for (const auto& [k, v] : r.params) params += (params.empty() ? "" : ";") + k + "=" + v;
    out << r.name << ',' << fmt(r.score) << ',' << fmt(r.threshold) << ','
        << (r.comparison == Comparison::at_most ? "at_most" : "at_least") << ',' << r.verdict() << ','
        << r.seed << ',' << params << '\n';
  }
}

const char* to_string(ClusterTarget target) {
  switch (target) {
    case ClusterTarget::r: return "r";
    case ClusterTarget::x_bound: return "x_bound";
    case ClusterTarget::x_plain: return "x_plain";
  }
  return "?";
}

AttackReport clustering_attack(const std::vector<Tensor>& outputs,
                               std::span<const std::size_t> true_labels, std::size_t k,
                               ClusterTarget target, RngStream rng, double threshold) {
  if (outputs.size() != true_labels.size()) throw ParameterError("clustering_attack: outputs and labels differ in count");
  const auto result = kmeans(stack_rows(outputs), k, rng);
  AttackReport r;
  r.name = std::string("cluster_") + to_string(target);
  r.score = ari(result.labels, true_labels);
  r.params = {{"k", std::to_string(k)}, {"n", std::to_string(outputs.size())},
              {"iterations", std::to_string(result.iterations)}};
  r.seed = rng.seed();
  r.threshold = threshold;
  // The unbound control is expected to succeed.
  r.comparison = target == ClusterTarget::x_plain ? Comparison::at_least : Comparison::at_most;
  return r;
}

AttackReport strong_adversary(const std::vector<Tensor>& train_outputs,
                              std::span<const std::size_t> train_labels,
                              const std::vector<Tensor>& test_outputs,
                              std::span<const std::size_t> test_labels, std::size_t classes,
                              const StrongAdversaryConfig& config) {
  if (train_outputs.empty() || train_outputs.size() != train_labels.size() ||
      test_outputs.empty() || test_outputs.size() != test_labels.size())
    throw ParameterError("strong_adversary: need matching, non-empty train and test sets");
  if (config.batch_size == 0 || config.epochs == 0 || !(config.learning_rate > 0))
    throw ParameterError("strong_adversary: epochs, batch size and learning rate must be positive");

  const RngStream root(config.seed);
  std::vector<std::size_t> labels(train_labels.begin(), train_labels.end());
  if (config.shuffle_labels) {
    const auto perm = permutation(labels.size(), root.fork(3)).value;
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = train_labels[perm[i]];
  }

  Head head = make_head(train_outputs.front().size(), config.hidden, classes, root.fork(1).word());
  AdamState adam;
  const std::size_t n = train_outputs.size();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = permutation(n, root.fork(2).fork(epoch)).value;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      Head sum{Tensor(head.w1.dims()), Tensor(head.b1.dims()), Tensor(head.w2.dims()), Tensor(head.b2.dims())};
      for (std::size_t j = start; j < end; ++j) {
        const std::size_t i = order[j];
        HeadTrace trace;
        const Tensor logits = head_forward(head, train_outputs[i], &trace);
        const auto loss = softmax_cross_entropy(logits, labels[i]);
        const auto g = head_backward(head, trace, loss.grad);
        sum.w1 += g.params.w1;
        sum.b1 += g.params.b1;
        sum.w2 += g.params.w2;
        sum.b2 += g.params.b2;
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      const std::vector<Tensor> grads = {scale * sum.w1, scale * sum.b1, scale * sum.w2, scale * sum.b2};
      const auto params = head_parameters(head);
      adam_step(params, grads, adam, config.learning_rate, 0.9, 0.999, 1e-8);
    }
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < test_outputs.size(); ++i)
    correct += argmax(head_predict(head, test_outputs[i])) == test_labels[i];

  AttackReport r;
  r.name = config.shuffle_labels ? "strong_adversary_shuffled" : "strong_adversary";
  r.score = static_cast<double>(correct) / static_cast<double>(test_outputs.size());
  r.params = {{"epochs", std::to_string(config.epochs)},
              {"batch", std::to_string(config.batch_size)},
              {"lr", fmt(config.learning_rate)},
              {"train", std::to_string(n)},
              {"test", std::to_string(test_outputs.size())}};
  r.seed = config.seed;
  r.threshold = config.threshold;
  r.comparison = Comparison::at_most;
  return r;
}

GaussianStats gaussian_stats(const Eigen::MatrixXd& samples) {
  if (samples.rows() < 2) throw ParameterError("gaussian_stats needs at least two samples");
  GaussianStats s;
  s.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - s.mean.transpose();
  s.covariance = centered.transpose() * centered / static_cast<double>(samples.rows() - 1);
  s.covariance = 0.5 * (s.covariance + s.covariance.transpose());
  return s;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  const auto p = a.mean.size();
  if (b.mean.size() != p || a.covariance.rows() != p || a.covariance.cols() != p ||
      b.covariance.rows() != p || b.covariance.cols() != p)
    throw ParameterError("frechet_distance: dimension mismatch");
  const Eigen::MatrixXd ra = psd_sqrt(a.covariance);
  const Eigen::MatrixXd cross = psd_sqrt(ra * b.covariance * ra);
  const double d = (a.mean - b.mean).squaredNorm() + a.covariance.trace() + b.covariance.trace() -
                   2.0 * cross.trace();
  return std::max(d, 0.0);
}

Eigen::MatrixXd Pca::transform(const Eigen::MatrixXd& samples) const {
  if (samples.cols() != mean.size()) throw ShapeError("pca: sample width does not match the basis");
  return (samples.rowwise() - mean.transpose()) * components.transpose();
}

Pca fit_pca(const Eigen::MatrixXd& samples, std::size_t dims) {
  if (dims == 0 || static_cast<Eigen::Index>(dims) > samples.cols())
    throw ParameterError("fit_pca: need 1 <= dims <= sample width");
  const GaussianStats s = gaussian_stats(samples);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.covariance);
  Pca pca;
  pca.mean = s.mean;
  const auto d = static_cast<Eigen::Index>(dims);
  // Eigenvalues come back ascending; take the last `dims`, largest first.
  pca.components = eig.eigenvectors().rightCols(d).rowwise().reverse().transpose();
  return pca;
}

InversionReference make_inversion_reference(const std::vector<Tensor>& images, std::size_t pca_dims) {
  const Eigen::MatrixXd x = stack_rows(images);
  InversionReference ref;
  ref.pca = fit_pca(x, pca_dims);
  ref.stats = gaussian_stats(ref.pca.transform(x));
  return ref;
}

double inversion_objective(const std::vector<Tensor>& bound, const Tensor& candidate,
                           const InversionReference& reference) {
  return objective_from(spectra_of(bound, candidate), candidate, reference);
}

Tensor inversion_gradient(const std::vector<Tensor>& bound, const Tensor& candidate,
                          const InversionReference& reference) {
  return gradient_from(spectra_of(bound, candidate), candidate, reference);
}

InversionResult inversion_attack(const std::vector<Tensor>& bound,
                                 const InversionReference& reference,
                                 const InversionConfig& config, RngStream rng,
                                 const Secret* initial, const std::vector<Tensor>* truth,
                                 double threshold) {
  if (bound.empty()) throw ParameterError("inversion_attack: empty probe batch");
  if (truth && truth->size() != bound.size()) throw ParameterError("inversion_attack: truth does not match the batch");
  const Dims dims = bound.front().dims();
  Secret current = initial ? *initial : sample_secret(dims, rng.fork(1)).value;
  if (current.tensor.dims() != dims) throw ShapeError("inversion_attack: initial secret has the wrong shape");
  if (!current.projected) current.tensor = project(current.tensor);
  current.projected = true;

  const auto spectra = spectra_of(bound, current.tensor);
  InversionResult result;

  if (config.check_gradient) {
    const Tensor g = gradient_from(spectra, current.tensor, reference);
    const Tensor v = gaussian_tensor(dims, 1.0, rng.fork(2)).value;
    const double h = 1e-5;
    const double fd = (objective_from(spectra, current.tensor + h * v, reference) -
                       objective_from(spectra, current.tensor - h * v, reference)) / (2 * h);
    const double an = dot(g, v);
    result.gradient_check_error = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-12});
  }

  double best_score = objective_from(spectra, current.tensor, reference);
  Secret best = current;
  result.trajectory.push_back(best_score);
  for (std::size_t step = 0; step < config.steps; ++step) {
    const Tensor g = gradient_from(spectra, current.tensor, reference);
    const double gn = norm(g);
    if (!std::isfinite(gn))
      throw NumericError("inversion_attack: non-finite gradient at step " + std::to_string(step));
    if (gn == 0) {
      result.trajectory.push_back(result.trajectory.back());
      continue;
    }
    current.tensor = project(current.tensor - (config.learning_rate / gn) * g);
    const double score = objective_from(spectra, current.tensor, reference);
    result.trajectory.push_back(score);
    if (score < best_score) {
      best_score = score;
      best = current;
    }
  }
  result.estimate = best;
  result.estimate.seed = rng.seed();

  AttackReport& r = result.report;
  r.name = "inversion";
  r.params = {{"steps", std::to_string(config.steps)},
              {"lr", fmt(config.learning_rate)},
              {"batch", std::to_string(bound.size())},
              {"pca_dims", std::to_string(reference.pca.components.rows())},
              {"frechet", fmt(best_score)},
              {"gradient_check", fmt(result.gradient_check_error)}};
  r.seed = rng.seed();
  r.threshold = threshold;
  r.comparison = Comparison::at_most;
  if (truth) {
    double total = 0;
    for (std::size_t i = 0; i < bound.size(); ++i)
      total += std::abs(cosine((*truth)[i], unbind(bound[i], best)));
    result.recovery_cosine = total / static_cast<double>(bound.size());
    r.score = *result.recovery_cosine;
  } else {
    r.name = "inversion_frechet";
    r.score = best_score;
  }
  return result;
}

RegressionResult secret_regression_attack(const std::vector<RegressionPair>& train,
                                          const std::vector<RegressionPair>& heldout,
                                          std::uint64_t seed, double threshold) {
  if (heldout.size() < 2) throw ParameterError("secret_regression_attack: need at least two held-out pairs");
  if (train.empty()) throw ParameterError("secret_regression_attack: no training pairs");
  const std::size_t d = train.front().bound.size();
  if (train.size() < 2 * d)
    throw ParameterError("secret_regression_attack: need at least " + std::to_string(2 * d) +
                         " training pairs, got " + std::to_string(train.size()));
  std::vector<Tensor> xb, xs;
  for (const auto& p : train) {
    xb.push_back(p.bound);
    xs.push_back(p.secret);
  }
  const Eigen::MatrixXd b = stack_rows(xb);
  const Eigen::MatrixXd s = stack_rows(xs);
  if (s.cols() != b.cols()) throw ShapeError("secret_regression_attack: bound and secret sizes differ");
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(b);
  const Eigen::MatrixXd w = cod.solve(s);  // s_hat = b w

  RegressionResult res;
  res.rank = static_cast<std::size_t>(cod.rank());
  res.rank_deficient = res.rank < d;
  for (const auto& p : heldout) {
    if (p.bound.size() != d || p.secret.size() != d) throw ShapeError("secret_regression_attack: held-out pair has the wrong size");
    Eigen::RowVectorXd row(d);
    for (std::size_t j = 0; j < d; ++j) row[static_cast<Eigen::Index>(j)] = p.bound[j];
    const Eigen::RowVectorXd pred = row * w;
    const Tensor guess(p.secret.dims(), std::vector<double>(pred.data(), pred.data() + pred.size()));
    res.heldout_cosine += norm(guess) > 0 ? cosine(guess, p.secret) : 0.0;
    res.heldout_residual += norm(guess - p.secret) / norm(p.secret);
  }
  res.heldout_cosine /= static_cast<double>(heldout.size());
  res.heldout_residual /= static_cast<double>(heldout.size());

  AttackReport& r = res.report;
  r.name = "secret_regression";
  r.score = res.heldout_cosine;
  r.params = {{"train", std::to_string(train.size())},
              {"heldout", std::to_string(heldout.size())},
              {"residual", fmt(res.heldout_residual)},
              {"rank", std::to_string(res.rank)},
              {"rank_deficient", res.rank_deficient ? "1" : "0"}};
  r.seed = seed;
  r.threshold = threshold;
  r.comparison = Comparison::at_most;
  return res;
}

}  // namespace holobind
