#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "anneal/numutil.hpp"

namespace anneal {

/// Half-open coordinate range [begin, end) updated together by the
/// Metropolis-within-Gibbs kernel.
struct BlockRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const BlockRange&, const BlockRange&) = default;
};

/// `count` contiguous blocks covering [0, dim), sizes differing by at most one
/// with the larger blocks last (dim 13, count 6 -> 2,2,2,2,2,3).
std::vector<BlockRange> even_blocks(std::size_t dim, std::size_t count);

struct GaussianLinearModel;

/// Target family pi_phi(theta) ∝ p(theta) p(y|theta)^phi over a fixed-dimension
/// parameter vector.
struct TemperedModel {
  std::string name;
  std::size_t dim = 0;
  std::vector<BlockRange> blocks;
  std::function<double(const Vector&)> log_prior;
  std::function<double(const Vector&)> log_likelihood;
  std::function<Vector(Rng&)> sample_prior;
  /// Densities are smooth and close enough to unimodal that a Laplace
  /// approximation is sensible.
  bool smooth = false;
  /// Set for the linear-Gaussian model; enables analytic oracles and the
  /// perfect-mixing kernel.
  std::shared_ptr<const GaussianLinearModel> gaussian;

  /// Throws UsageError if the blocks do not partition [0, dim) or callbacks are missing.
  void validate() const;
};

/// log p(theta) + phi * log p(y|theta). -inf prior wins over everything, and
/// phi == 0 ignores the likelihood entirely (no 0 * -inf).
double tempered_logdensity(const TemperedModel& m, const Vector& theta, double phi);

inline double temper(double log_prior, double log_lik, double phi) noexcept {
  if (log_prior == -std::numeric_limits<double>::infinity() || phi == 0.0) return log_prior;
  return log_prior + phi * log_lik;
}

// ---------------------------------------------------------------------------
// Model 1: y = H theta + e, theta ~ N(mu, Sigma), e ~ N(0, Sigma_y).

struct GaussianLinearModel {
  Matrix H;  // n x d
  Gaussian prior;
  Matrix noise_cov;  // n x n
  Vector y;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(H.cols()); }
  std::size_t observations() const noexcept { return static_cast<std::size_t>(H.rows()); }
  void validate() const;
};

double gauss_loglik(const GaussianLinearModel& m, const Vector& theta);
Gaussian gauss_posterior(const GaussianLinearModel& m);
double gauss_log_evidence(const GaussianLinearModel& m);
/// Exact tempered target N(mu_phi, Sigma_phi): the posterior with the noise
/// covariance inflated to Sigma_y / phi. phi == 0 returns the prior.
Gaussian perfect_mixing_params(const GaussianLinearModel& m, double phi);

/// H with i.i.d. N(0,1) entries, prior N(0, 10 I_d), Sigma_y = I_n, and y drawn
/// from the model at a prior draw of theta. Everything comes from `seed`.
GaussianLinearModel make_linear_gaussian(std::size_t d, std::size_t n, std::uint64_t seed);
/// d = n = 1: H = 1, Sigma = 10, Sigma_y = 1, y = 5.
GaussianLinearModel make_scalar_linear_gaussian();

TemperedModel to_tempered(std::shared_ptr<const GaussianLinearModel> m,
                          std::vector<BlockRange> blocks = {});

// ---------------------------------------------------------------------------
// Model 2: multivariate Student-t likelihood around H theta.

struct StudentTModel {
  Matrix H;  // n x d
  Gaussian prior;
  Matrix scale;  // Sigma_l, n x n
  double dof = 1.0;
  Vector y;

  void validate() const;
};

double studentt_loglik(const StudentTModel& m, const Vector& theta);
/// H = [1 1 0 0; 0 0 1 1]^T, prior N(0, 20 I_2), Sigma_l = 0.1 I_4, y = (8, -8, 8, -8).
StudentTModel make_student_t(double dof);
TemperedModel to_tempered(std::shared_ptr<const StudentTModel> m,
                          std::vector<BlockRange> blocks = {});

// ---------------------------------------------------------------------------
// Model 3: Poisson regression on a Gaussian-kernel basis with an
// exponential-power prior on the coefficients and an inverse-gamma scale.

struct PoissonRegressionModel {
  std::vector<double> x;       // scalar covariates
  std::vector<long> counts;    // y_i >= 0
  std::vector<double> centers; // kernel centres c_j
  double radius = 0.5;
  double q = 0.5;              // EP exponent
  double ig_shape = 2.0;
  double ig_scale = 1.3;

  std::size_t coefficients() const noexcept { return centers.size() + 1; }
  /// beta_0..beta_p followed by gamma.
  std::size_t dim() const noexcept { return coefficients() + 1; }
  void validate() const;
};

/// (1, Phi_1(x), ..., Phi_p(x)) with Phi_j(x) = exp(-(x - c_j)^2 / r^2).
Vector basis_row(const PoissonRegressionModel& m, double x);

struct PoissonLogDensity {
  double log_prior = 0.0;
  double log_lik = 0.0;
};

/// Densities at theta = (beta, gamma) on the natural scale; gamma <= 0 gives a
/// -inf prior.
PoissonLogDensity poisson_model_logdensity(const PoissonRegressionModel& m, const Vector& theta);

/// Log-density of the exponential-power prior on beta given gamma.
double exp_power_logpdf(const Eigen::Ref<const Vector>& beta, double gamma, double q);

/// Coefficients used to simulate Model 3 data: zero except beta_0 = 1,
/// beta_2 = 1.5, beta_4 = -2, beta_6 = 1, beta_7 = -2, beta_9 = 1.2.
Vector poisson_true_coefficients();

/// n covariates uniform on [0, 1], 11 equally spaced centres on [0, 1],
/// counts drawn at poisson_true_coefficients(). Deterministic in `seed`.
PoissonRegressionModel make_poisson_regression(std::size_t n, std::uint64_t seed);

/// The sampler sees the last coordinate as log(gamma); the prior includes the
/// Jacobian so the evidence is unchanged. Default blocks: even_blocks(dim, 6).
TemperedModel to_tempered(std::shared_ptr<const PoissonRegressionModel> m,
                          std::vector<BlockRange> blocks = {});

// ---------------------------------------------------------------------------

using ModelSpec = std::variant<GaussianLinearModel, StudentTModel, PoissonRegressionModel>;

/// A concrete model plus the block partition the sampler should use.
struct ModelInstance {
  ModelSpec spec;
  std::vector<BlockRange> blocks;  // empty: model default
};

TemperedModel to_tempered(const ModelInstance& inst);
std::string model_kind(const ModelSpec& spec);

}  // namespace anneal
