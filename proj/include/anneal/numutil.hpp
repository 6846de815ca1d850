#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "anneal/rng.hpp"

namespace anneal {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// Row-per-point storage for particle sets (N x d).
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Multivariate normal N(mean, cov).
struct Gaussian {
  Vector mean;
  Matrix cov;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
};

/// Points with normalized log-weights (log-sum-exp of the weights is 0).
struct WeightedSample {
  RowMatrix points;
  std::vector<double> log_weights;
};

/// log sum_i exp(v_i), computed with a max shift. Throws UsageError on empty input.
double logsumexp(std::span<const double> values);

/// Shifts log-weights in place so they sum to one in linear space; returns the
/// log of the original total. Leaves the weights untouched if the total is
/// -inf or non-finite.
double normalize_log_weights(std::span<double> log_weights);

/// Lower Cholesky factor with the jitter policy: on failure add
/// 1e-10 * trace/d * I, escalating x10, at most three retries.
struct CholeskyFactor {
  Matrix lower;
  double log_det = 0.0;
  double jitter = 0.0;  // diagonal amount that was added, 0 if none
};

/// Throws UsageError for non-square / asymmetric input and NumericError if the
/// matrix is still not PD after jitter. `what` names the matrix in messages.
CholeskyFactor cholesky_with_jitter(const Matrix& a, const std::string& what = "covariance");

/// A Gaussian with its factorization cached, for repeated density/sampling.
class FactoredGaussian {
 public:
  FactoredGaussian() = default;
  explicit FactoredGaussian(Gaussian g);

  const Gaussian& gaussian() const noexcept { return g_; }
  const Matrix& lower() const noexcept { return chol_.lower; }
  double jitter() const noexcept { return chol_.jitter; }
  std::size_t dim() const noexcept { return g_.dim(); }

  double logpdf(const Eigen::Ref<const Vector>& x) const;
  Vector sample(Rng& rng) const;
  /// Writes mean + L z into `out` (size d) using `z` as the standard normals.
  void transform(const Eigen::Ref<const Vector>& z, Eigen::Ref<Vector> out) const;

 private:
  Gaussian g_;
  CholeskyFactor chol_;
};

double mvn_logpdf(const Eigen::Ref<const Vector>& x, const Gaussian& g);
Vector mvn_sample(Rng& rng, const Gaussian& g);

/// Fills `out` with independent N(0, 1) draws.
void standard_normals(Rng& rng, Eigen::Ref<Vector> out);

struct Moments {
  Gaussian gaussian;
  bool rank_deficient = false;  // covariance singular; callers apply jitter
};

/// Weighted mean and covariance sum_m W_m (x_m - mu)(x_m - mu)^T of a
/// normalized weighted sample.
Moments weighted_moments(const WeightedSample& ws);

/// Same, with non-negative linear-space weights (normalized internally).
Moments weighted_moments(const RowMatrix& points, std::span<const double> weights);

/// log of int f1^alpha f2^(1-alpha) dx for Gaussians f1, f2.
///
/// Throws DomainError when alpha*S2 + (1-alpha)*S1 or
/// alpha*S1^-1 + (1-alpha)*S2^-1 is not positive definite (the integral
/// diverges); the message names the failing matrix.
double log_gaussian_power_integral(const Gaussian& f1, const Gaussian& f2, double alpha);
double gaussian_power_integral(const Gaussian& f1, const Gaussian& f2, double alpha);

struct NelderMeadOptions {
  double tol = 1e-8;         // stop when max f - min f over the simplex is below this
  double xtol = 1e-6;        // ... and the simplex diameter is below xtol * max(1, |best|)
  int max_iters = 500;
  double initial_step = -1;  // < 0: 0.05 * max(|x0|_inf, 1)
};

struct NelderMeadResult {
  Vector argmin;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Derivative-free simplex minimizer (reflection, expansion, contraction,
/// shrink). Non-finite values away from x0 are treated as +inf.
NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                             const NelderMeadOptions& opts = {});

}  // namespace anneal
