#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "anneal/kernels.hpp"
#include "anneal/models.hpp"
#include "anneal/particles.hpp"

namespace anneal {

CoolingSchedule linear_schedule(std::size_t T);

/// phi_t = expm1(gamma * s) / expm1(gamma), s = (t - 1) / (T - 1); linear for
/// |gamma| < 1e-8.
CoolingSchedule parametric_schedule(double gamma, std::size_t T);

/// Gaussian approximations of every tempered target, in information form:
/// precision(phi) = prior precision + phi * likelihood precision and
/// shift(phi) = prior precision * prior mean + phi * likelihood shift.
struct GaussianSequence {
  Gaussian prior_approx;
  Gaussian posterior_approx;
  Matrix prior_precision;
  Matrix lik_precision;
  Vector lik_shift;
  std::size_t clipped_eigenvalues = 0;
  std::string method;
  std::vector<std::string> warnings;

  std::size_t dim() const noexcept { return prior_approx.dim(); }
  Gaussian intermediate(double phi) const;
  /// N(mu_l, Sigma_l) when the likelihood precision is invertible.
  std::optional<Gaussian> likelihood_approx() const;

  /// Likelihood term from Sigma_T^-1 - Sigma_p^-1. Eigenvalues below 1e-8 of
  /// the largest are raised to that floor; the shift is then chosen so the
  /// phi = 1 mean stays at the posterior mean.
  static GaussianSequence from_moments(const Gaussian& prior, const Gaussian& posterior);
  /// Exact sequence from a Gaussian prior and a Gaussian likelihood term.
  static GaussianSequence from_information(const Gaussian& prior, Matrix lik_precision,
                                           Vector lik_shift);
};

enum class ApproxMethod { automatic, exact, laplace, moment_match, pilot };

std::string approx_method_name(ApproxMethod m);
ApproxMethod parse_approx_method(const std::string& name);

struct ApproxOptions {
  /// automatic: exact for the linear-Gaussian model, Laplace for models
  /// flagged smooth, moment matching otherwise.
  ApproxMethod method = ApproxMethod::automatic;
  std::size_t n_draws = 10000;   // prior draws for moment matching
  std::uint64_t seed = 0;
  // pilot: a short CESS-driven run whose final cloud gives the posterior moments
  std::size_t pilot_particles = 1000;
  double pilot_cess = 0.9;
  MwgSettings pilot_kernel{};
};

GaussianSequence approximate_sequence(const TemperedModel& m, const ApproxOptions& opts = {});

/// sum_{k=1}^{T-1} (integral pi_{k+1}^2 / pi_k - 1) over the Gaussian
/// intermediates; the large-N variance of the log-evidence times N.
double asymptotic_variance(const GaussianSequence& seq, const CoolingSchedule& sched);

struct GammaOptimum {
  double gamma = 0.0;
  double variance = 0.0;
};

/// Minimizes asymptotic_variance over parametric schedules with gamma in
/// [-30, 30], Nelder-Mead from five starting points.
GammaOptimum optimize_gamma(const GaussianSequence& seq, std::size_t T);

/// Smallest phi' in (cloud.phi, 1] with CESS(phi') = cess_target, by bisection
/// to 1e-10; 1 if CESS stays above the target all the way.
double cess_next_phi(const ParticleCloud& cloud, double cess_target);

}  // namespace anneal
