#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "holobind/layers.hpp"
#include "holobind/rng.hpp"
#include "holobind/tensor.hpp"
#include "holobind/vsa.hpp"

namespace holobind {

// Everything here works only from what the worker can see: bound inputs,
// backbone outputs, and (for the oracles) planted ground truth.

/// One row per sample, flattened tensor values.
Eigen::MatrixXd stack_rows(const std::vector<Tensor>& tensors);

struct KMeansResult {
  std::vector<std::size_t> labels;
  Eigen::MatrixXd centroids;            // k x p
  std::vector<double> inertia_history;  // after each Lloyd iteration
  std::size_t iterations = 0;
};

/// k-means++ seeding followed by Lloyd iterations. Each run stops when
/// inertia improves by less than tol (relative) or after max_iter
/// iterations; the run with the lowest final inertia out of `restarts` wins.
KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k, RngStream rng,
                    std::size_t max_iter = 100, double tol = 1e-6, std::size_t restarts = 10);

/// Adjusted Rand index of two labelings of the same points.
double ari(std::span<const std::size_t> a, std::span<const std::size_t> b);

enum class Comparison { at_most, at_least };

/// `passed` records whether the score landed on the expected side of the
/// threshold: for a genuine attack that means the defense held.
struct AttackReport {
  std::string name;
  double score = 0;
  std::vector<std::pair<std::string, std::string>> params;
  std::uint64_t seed = 0;
  double threshold = 0;
  Comparison comparison = Comparison::at_most;

  bool passed() const;
  std::string verdict() const { return passed() ? "pass" : "fail"; }
};

void write_attack_csv(std::ostream& out, const std::vector<AttackReport>& reports);

enum class ClusterTarget { r, x_bound, x_plain };
const char* to_string(ClusterTarget target);

AttackReport clustering_attack(const std::vector<Tensor>& outputs,
                               std::span<const std::size_t> true_labels, std::size_t k,
                               ClusterTarget target, RngStream rng, double threshold = 0.05);

struct StrongAdversaryConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t hidden = 64;
  bool shuffle_labels = false;  // control: destroys any label signal
  std::uint64_t seed = 0;
  double threshold = 0.45;
};

/// Trains a fresh head with f_A's architecture on (r, y) pairs and reports
/// its accuracy on held-out pairs.
AttackReport strong_adversary(const std::vector<Tensor>& train_outputs,
                              std::span<const std::size_t> train_labels,
                              const std::vector<Tensor>& test_outputs,
                              std::span<const std::size_t> test_labels, std::size_t classes,
                              const StrongAdversaryConfig& config);

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // unbiased; symmetric
};

/// Sample statistics of the rows of `samples` (needs at least two rows).
GaussianStats gaussian_stats(const Eigen::MatrixXd& samples);

/// ||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2), with
/// negative eigenvalues clamped to zero before every square root.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

/// Symmetric PSD square root by eigendecomposition; eigenvalues below zero
/// are clamped.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m);

struct Pca {
  Eigen::VectorXd mean;        // D
  Eigen::MatrixXd components;  // p x D, orthonormal rows, leading first

  Eigen::MatrixXd transform(const Eigen::MatrixXd& samples) const;  // n x p
};

Pca fit_pca(const Eigen::MatrixXd& samples, std::size_t dims);

/// The adversary's model of natural inputs: a PCA basis and the Gaussian
/// statistics of its own reference images in that basis.
struct InversionReference {
  Pca pca;
  GaussianStats stats;
};

InversionReference make_inversion_reference(const std::vector<Tensor>& images,
                                            std::size_t pca_dims = 32);

struct InversionConfig {
  std::size_t steps = 500;
  double learning_rate = 0.05;
  bool check_gradient = true;  // one finite-difference check at the start
};

struct InversionResult {
  Secret estimate;
  std::vector<double> trajectory;  // Frechet score before each step and at the end
  std::optional<double> recovery_cosine;
  double gradient_check_error = 0;
  AttackReport report;
};

/// Frechet score of unbind(bound_i, candidate) over the probe batch.
double inversion_objective(const std::vector<Tensor>& bound, const Tensor& candidate,
                           const InversionReference& reference);
/// Analytic gradient of inversion_objective with respect to the candidate's
/// spatial values.
Tensor inversion_gradient(const std::vector<Tensor>& bound, const Tensor& candidate,
                          const InversionReference& reference);

/// Projected gradient descent on a candidate secret. `bound` is a probe batch
/// of inputs that share one secret. When `truth` is given, the result carries
/// the mean |cosine| between each true input and its recovery. Returns the
/// lowest-scoring candidate seen. The score of a finite batch is generally
/// not minimized at the true secret, so descent started there drifts away.
InversionResult inversion_attack(const std::vector<Tensor>& bound,
                                 const InversionReference& reference,
                                 const InversionConfig& config, RngStream rng,
                                 const Secret* initial = nullptr,
                                 const std::vector<Tensor>* truth = nullptr,
                                 double threshold = 0.2);

struct RegressionPair {
  Tensor bound;
  Tensor secret;
};

struct RegressionResult {
  double heldout_cosine = 0;   // mean cosine(s_hat, s)
  double heldout_residual = 0; // mean ||s_hat - s|| / ||s||
  std::size_t rank = 0;
  bool rank_deficient = false;
  AttackReport report;
};

/// Least-squares linear map from bound tensors to secrets, fit on `train`
/// and scored on `heldout`. Rank-deficient systems get the least-norm
/// solution and are flagged.
RegressionResult secret_regression_attack(const std::vector<RegressionPair>& train,
                                          const std::vector<RegressionPair>& heldout,
                                          std::uint64_t seed = 0, double threshold = 0.15);

}  // namespace holobind
