#include "anneal/schedule.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "anneal/errors.hpp"
#include "anneal/smc.hpp"

namespace anneal {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

Matrix spd_inverse(const Matrix& a, const std::string& what) {
  const auto c = cholesky_with_jitter(symmetrized(a), what);
  const Matrix eye = Matrix::Identity(a.rows(), a.cols());
  const Matrix linv = c.lower.triangularView<Eigen::Lower>().solve(eye);
  return symmetrized(linv.transpose() * linv);
}

Gaussian unweighted_moments(const RowMatrix& pts) {
  std::vector<double> w(static_cast<std::size_t>(pts.rows()), 1.0);
  return weighted_moments(pts, w).gaussian;
}

RowMatrix prior_draws(const TemperedModel& m, std::size_t n, std::uint64_t seed,
                      std::vector<double>* log_lik) {
  auto rng = Rng::stream(seed, StreamTag::auxiliary, 1);
  RowMatrix pts(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m.dim));
  if (log_lik) log_lik->resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector th = m.sample_prior(rng);
    pts.row(static_cast<Eigen::Index>(i)) = th.transpose();
    if (log_lik) (*log_lik)[i] = m.log_likelihood(th);
  }
  return pts;
}

// Mode by Nelder-Mead (restarted once from its own answer), covariance from a
// central-difference Hessian of the negative log density.
Gaussian laplace(const std::function<double(const Vector&)>& neg_log, const Vector& start,
                 const std::string& what) {
  NelderMeadOptions opts{.tol = 1e-12, .xtol = 1e-9, .max_iters = 20000, .initial_step = -1};
  auto r = nelder_mead(neg_log, start, opts);
  r = nelder_mead(neg_log, r.argmin, opts);
  const Vector x = r.argmin;
  const auto d = x.size();
  Vector h(d);
  for (Eigen::Index i = 0; i < d; ++i) h[i] = 1e-4 * std::max(1.0, std::abs(x[i]));
  const double f0 = neg_log(x);
  Matrix hess(d, d);
  auto at = [&](Eigen::Index i, double si, Eigen::Index j, double sj) {
    Vector y = x;
    y[i] += si * h[i];
    y[j] += sj * h[j];
    return neg_log(y);
  };
  for (Eigen::Index i = 0; i < d; ++i) {
    hess(i, i) = (at(i, 1, i, 0) - 2 * f0 + at(i, -1, i, 0)) / (h[i] * h[i]);
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = (at(i, 1, j, 1) - at(i, 1, j, -1) - at(i, -1, j, 1) + at(i, -1, j, -1)) /
                       (4 * h[i] * h[j]);
      hess(i, j) = hess(j, i) = v;
    }
  }
  if (!hess.allFinite()) throw NumericError("laplace approximation of the " + what + ": non-finite Hessian");
  Eigen::LLT<Matrix> llt(hess);
  if (llt.info() != Eigen::Success) {
    throw NumericError("laplace approximation of the " + what + ": Hessian is not positive definite");
  }
  return {x, spd_inverse(hess, what + " Laplace covariance")};
}
}  // namespace

CoolingSchedule linear_schedule(std::size_t T) {
  if (T < 2) throw UsageError("linear_schedule: T must be at least 2");
  CoolingSchedule s;
  s.strategy = CoolingSchedule::Strategy::linear;
  s.phis.resize(T);
  for (std::size_t t = 0; t < T; ++t) s.phis[t] = static_cast<double>(t) / static_cast<double>(T - 1);
  s.phis.back() = 1.0;
  return s;
}

CoolingSchedule parametric_schedule(double gamma, std::size_t T) {
  if (T < 2) throw UsageError("parametric_schedule: T must be at least 2");
  if (!std::isfinite(gamma)) throw UsageError("parametric_schedule: gamma must be finite");
  if (std::abs(gamma) < 1e-8) {
    auto s = linear_schedule(T);
    s.strategy = CoolingSchedule::Strategy::parametric;
    s.parameter = gamma;
    return s;
  }
  CoolingSchedule s;
  s.strategy = CoolingSchedule::Strategy::parametric;
  s.parameter = gamma;
  s.phis.resize(T);
  const double denom = std::expm1(gamma);
  for (std::size_t t = 0; t < T; ++t) {
    const double frac = static_cast<double>(t) / static_cast<double>(T - 1);
    s.phis[t] = std::clamp(std::expm1(gamma * frac) / denom, 0.0, 1.0);
    if (t > 0) s.phis[t] = std::max(s.phis[t], s.phis[t - 1]);
  }
  s.phis.front() = 0.0;
  s.phis.back() = 1.0;
  return s;
}

// ---------------------------------------------------------------------------

Gaussian GaussianSequence::intermediate(double phi) const {
  if (!(phi >= 0.0 && phi <= 1.0)) throw UsageError("GaussianSequence: phi outside [0, 1]");
  if (phi == 0.0) return prior_approx;
  const Matrix precision = prior_precision + phi * lik_precision;
  const Vector shift = prior_precision * prior_approx.mean + phi * lik_shift;
  Eigen::LLT<Matrix> llt(symmetrized(precision));
  if (llt.info() != Eigen::Success) {
    throw NumericError("GaussianSequence: intermediate precision is not positive definite");
  }
  Gaussian g;
  g.mean = llt.solve(shift);
  g.cov = symmetrized(llt.solve(Matrix::Identity(precision.rows(), precision.cols())));
  return g;
}

std::optional<Gaussian> GaussianSequence::likelihood_approx() const {
  Eigen::LLT<Matrix> llt(lik_precision);
  if (llt.info() != Eigen::Success) return std::nullopt;
  return Gaussian{llt.solve(lik_shift),
                  symmetrized(llt.solve(Matrix::Identity(lik_precision.rows(), lik_precision.cols())))};
}

GaussianSequence GaussianSequence::from_information(const Gaussian& prior, Matrix lik_precision,
                                                    Vector lik_shift) {
  GaussianSequence s;
  s.prior_approx = prior;
  s.prior_precision = spd_inverse(prior.cov, "prior covariance");
  s.lik_precision = symmetrized(lik_precision);
  s.lik_shift = std::move(lik_shift);
  s.posterior_approx = s.intermediate(1.0);
  return s;
}

GaussianSequence GaussianSequence::from_moments(const Gaussian& prior, const Gaussian& posterior) {
  if (prior.dim() != posterior.dim()) throw UsageError("GaussianSequence: dimension mismatch");
  GaussianSequence s;
  s.prior_approx = prior;
  s.prior_precision = spd_inverse(prior.cov, "prior approximation");
  const Matrix post_precision = spd_inverse(posterior.cov, "posterior approximation");

  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(post_precision - s.prior_precision));
  Vector lambda = eig.eigenvalues();
  const double top = lambda.maxCoeff();
  if (!(top > 0.0)) {
    throw NumericError("GaussianSequence: posterior approximation is nowhere tighter than the prior");
  }
  const double floor = 1e-8 * top;
  for (auto& l : lambda) {
    if (l < floor) {
      l = floor;
      ++s.clipped_eigenvalues;
    }
  }
  if (s.clipped_eigenvalues > 0) {
    s.warnings.push_back("likelihood precision: clipped " + std::to_string(s.clipped_eigenvalues) +
                         " eigenvalue(s) to 1e-8 of the largest");
  }
  s.lik_precision = symmetrized(eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose());
  const Matrix final_precision = s.prior_precision + s.lik_precision;
  s.lik_shift = final_precision * posterior.mean - s.prior_precision * prior.mean;
  s.posterior_approx = s.intermediate(1.0);
  return s;
}

std::string approx_method_name(ApproxMethod m) {
  switch (m) {
    case ApproxMethod::automatic:
      return "automatic";
    case ApproxMethod::exact:
      return "exact";
    case ApproxMethod::laplace:
      return "laplace";
    case ApproxMethod::moment_match:
      return "moment_match";
    case ApproxMethod::pilot:
      return "pilot";
  }
  return "automatic";
}

ApproxMethod parse_approx_method(const std::string& name) {
  for (auto m : {ApproxMethod::automatic, ApproxMethod::exact, ApproxMethod::laplace,
                 ApproxMethod::moment_match, ApproxMethod::pilot}) {
    if (approx_method_name(m) == name) return m;
  }
  throw ConfigError("unknown approximation method '" + name + "'");
}

GaussianSequence approximate_sequence(const TemperedModel& m, const ApproxOptions& opts) {
  m.validate();
  ApproxMethod method = opts.method;
  if (method == ApproxMethod::automatic) {
    method = m.gaussian ? ApproxMethod::exact
                        : (m.smooth ? ApproxMethod::laplace : ApproxMethod::moment_match);
  }

  GaussianSequence seq;
  switch (method) {
    case ApproxMethod::exact: {
      if (!m.gaussian) throw UsageError("approximate_sequence: exact method needs the linear-Gaussian model");
      const auto& g = *m.gaussian;
      const Matrix noise_prec = spd_inverse(g.noise_cov, "noise covariance");
      seq = GaussianSequence::from_information(g.prior, g.H.transpose() * noise_prec * g.H,
                                               g.H.transpose() * noise_prec * g.y);
      break;
    }
    case ApproxMethod::laplace: {
      if (opts.n_draws < 2) throw UsageError("approximate_sequence: need at least two prior draws");
      const Vector start = unweighted_moments(prior_draws(m, std::min<std::size_t>(opts.n_draws, 1000),
                                                          opts.seed, nullptr)).mean;
      const auto prior = laplace([&](const Vector& x) { return -m.log_prior(x); }, start, "prior");
      const auto post = laplace(
          [&](const Vector& x) { return -tempered_logdensity(m, x, 1.0); }, prior.mean, "posterior");
      seq = GaussianSequence::from_moments(prior, post);
      break;
    }
    case ApproxMethod::moment_match: {
      if (opts.n_draws < 2) throw UsageError("approximate_sequence: need at least two prior draws");
      std::vector<double> ll;
      const RowMatrix pts = prior_draws(m, opts.n_draws, opts.seed, &ll);
      const auto prior = unweighted_moments(pts);
      WeightedSample ws{pts, ll};
      const auto post = weighted_moments(ws);
      if (post.rank_deficient) seq.warnings.push_back("posterior moments are rank deficient");
      auto warnings = seq.warnings;
      seq = GaussianSequence::from_moments(prior, post.gaussian);
      seq.warnings.insert(seq.warnings.begin(), warnings.begin(), warnings.end());
      break;
    }
    case ApproxMethod::pilot: {
      if (opts.n_draws < 2) throw UsageError("approximate_sequence: need at least two prior draws");
      const auto prior = unweighted_moments(prior_draws(m, opts.n_draws, opts.seed, nullptr));
      SmcConfig cfg;
      cfg.n_particles = opts.pilot_particles;
      cfg.cess_fraction = opts.pilot_cess;
      cfg.kernel = opts.pilot_kernel;
      cfg.seed = splitmix64(opts.seed ^ 0x70696c6f74ULL);
      const auto trace = smc_run(m, cfg);
      const auto& last = trace.clouds.back();
      const auto post = weighted_moments(WeightedSample{last.positions, last.log_weights});
      seq = GaussianSequence::from_moments(prior, post.gaussian);
      if (post.rank_deficient) seq.warnings.push_back("pilot posterior moments are rank deficient");
      break;
    }
    case ApproxMethod::automatic:
      break;
  }
  seq.method = approx_method_name(method);
  return seq;
}

double asymptotic_variance(const GaussianSequence& seq, const CoolingSchedule& sched) {
  sched.validate();
  double total = 0.0;
  Gaussian prev = seq.intermediate(sched.phis[0]);
  for (std::size_t k = 1; k < sched.size(); ++k) {
    if (sched.phis[k] == sched.phis[k - 1]) continue;
    Gaussian next = seq.intermediate(sched.phis[k]);
    try {
      total += std::expm1(log_gaussian_power_integral(next, prev, 2.0));
    } catch (const DomainError& e) {
      throw DomainError("asymptotic_variance: step k=" + std::to_string(k) + ": " + e.what());
    }
    prev = std::move(next);
  }
  return total;
}

GammaOptimum optimize_gamma(const GaussianSequence& seq, std::size_t T) {
  if (T < 2) throw UsageError("optimize_gamma: T must be at least 2");
  auto objective = [&](const Vector& g) {
    if (!(std::abs(g[0]) <= 30.0)) return kInf;
    try {
      const double v = asymptotic_variance(seq, parametric_schedule(g[0], T));
      return std::isfinite(v) ? v : kInf;
    } catch (const DomainError&) {
      return kInf;
    } catch (const NumericError&) {
      return kInf;
    }
  };
  GammaOptimum best{0.0, kInf};
  const NelderMeadOptions opts{.tol = 1e-12, .xtol = 1e-7, .max_iters = 2000, .initial_step = 1.0};
  for (double start : {-20.0, -6.0, 0.0, 6.0, 20.0}) {
    const Vector x0 = Vector::Constant(1, start);
    if (!std::isfinite(objective(x0))) continue;
    const auto r = nelder_mead(objective, x0, opts);
    if (r.value < best.variance) best = {r.argmin[0], r.value};
  }
  if (!std::isfinite(best.variance)) {
    throw DomainError("optimize_gamma: the asymptotic variance is infinite for every starting gamma");
  }
  return best;
}

double cess_next_phi(const ParticleCloud& cloud, double cess_target) {
  const auto n = static_cast<double>(cloud.size());
  if (!(cess_target > 0.0 && cess_target <= n)) {
    throw UsageError("cess_next_phi: target must lie in (0, N]");
  }
  auto cess_at = [&](double phi) { return cess(cloud.log_weights, incremental_logweights(cloud, phi)); };
  if (cloud.phi >= 1.0) return 1.0;
  if (cess_at(1.0) >= cess_target * (1.0 - 1e-12)) return 1.0;
  double lo = cloud.phi;
  double hi = 1.0;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (cess_at(mid) >= cess_target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

}  // namespace anneal
