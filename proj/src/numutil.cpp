#include "anneal/numutil.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "anneal/errors.hpp"
#include "anneal/simd.hpp"

namespace anneal {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;

bool symmetric_enough(const Matrix& a) {
  const double scale = std::max(a.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale;
}
}  // namespace

double logsumexp(std::span<const double> values) {
  if (values.empty()) throw UsageError("logsumexp: empty input");
  const double m = simd::max(values);
  if (!std::isfinite(m)) return m;
  return m + std::log(simd::sum_exp(values, 1.0, m));
}

double normalize_log_weights(std::span<double> log_weights) {
  const double total = logsumexp(log_weights);
  if (!std::isfinite(total)) return total;
  for (double& w : log_weights) w -= total;
  return total;
}

CholeskyFactor cholesky_with_jitter(const Matrix& a, const std::string& what) {
  if (a.rows() != a.cols()) throw UsageError(what + ": matrix is not square");
  if (a.rows() == 0) throw UsageError(what + ": empty matrix");
  if (!a.allFinite()) throw NumericError(what + ": non-finite entries");
  if (!symmetric_enough(a)) throw UsageError(what + ": matrix is not symmetric");

  const auto d = static_cast<double>(a.rows());
  const double base = std::abs(a.trace()) / d;
  double jitter = 0.0;
  for (int attempt = 0; attempt <= 3; ++attempt) {
    if (attempt > 0) {
      jitter = (base > 0 ? base : 1.0) * 1e-10 * std::pow(10.0, attempt - 1);
    }
    Matrix m = a;
    m.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() == Eigen::Success) {
      CholeskyFactor f;
      f.lower = llt.matrixL();
      f.log_det = 2.0 * f.lower.diagonal().array().log().sum();
      f.jitter = jitter;
      if (std::isfinite(f.log_det)) return f;
    }
  }
  throw NumericError(what + ": not positive definite after jitter");
}

FactoredGaussian::FactoredGaussian(Gaussian g) : g_(std::move(g)) {
  if (g_.cov.rows() != g_.mean.size()) throw UsageError("Gaussian: mean/cov dimension mismatch");
  chol_ = cholesky_with_jitter(g_.cov, "Gaussian covariance");
}

double FactoredGaussian::logpdf(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != g_.mean.size()) throw UsageError("mvn_logpdf: dimension mismatch");
  const Vector z = chol_.lower.triangularView<Eigen::Lower>().solve(x - g_.mean);
  return -0.5 * (static_cast<double>(x.size()) * kLog2Pi + chol_.log_det + z.squaredNorm());
}

void FactoredGaussian::transform(const Eigen::Ref<const Vector>& z, Eigen::Ref<Vector> out) const {
  out.noalias() = g_.mean + chol_.lower.triangularView<Eigen::Lower>() * z;
}

Vector FactoredGaussian::sample(Rng& rng) const {
  Vector z(g_.mean.size());
  standard_normals(rng, z);
  Vector out(g_.mean.size());
  transform(z, out);
  return out;
}

double mvn_logpdf(const Eigen::Ref<const Vector>& x, const Gaussian& g) {
  return FactoredGaussian(g).logpdf(x);
}

Vector mvn_sample(Rng& rng, const Gaussian& g) { return FactoredGaussian(g).sample(rng); }

void standard_normals(Rng& rng, Eigen::Ref<Vector> out) {
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = normal(rng);
}

Moments weighted_moments(const RowMatrix& points, std::span<const double> weights) {
  const auto n = points.rows();
  const auto d = points.cols();
  if (static_cast<std::size_t>(n) != weights.size()) {
    throw UsageError("weighted_moments: point/weight count mismatch");
  }
  if (n == 0) throw UsageError("weighted_moments: empty sample");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw UsageError("weighted_moments: invalid weight");
    total += w;
  }
  if (!(total > 0.0)) throw UsageError("weighted_moments: weights sum to zero");

  Moments out;
  out.gaussian.mean = Vector::Zero(d);
  for (Eigen::Index m = 0; m < n; ++m) {
    out.gaussian.mean.noalias() +=
        (weights[static_cast<std::size_t>(m)] / total) * points.row(m).transpose();
  }
  out.gaussian.cov = Matrix::Zero(d, d);
  Vector dev(d);
  for (Eigen::Index m = 0; m < n; ++m) {
    const double w = weights[static_cast<std::size_t>(m)] / total;
    if (w == 0.0) continue;
    dev = points.row(m).transpose() - out.gaussian.mean;
    out.gaussian.cov.noalias() += w * dev * dev.transpose();
  }
  out.gaussian.cov = 0.5 * (out.gaussian.cov + out.gaussian.cov.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Matrix> eig(out.gaussian.cov, Eigen::EigenvaluesOnly);
  const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
  out.rank_deficient = !(eig.eigenvalues().minCoeff() > 1e-12 * top) || top == 0.0;
  return out;
}

Moments weighted_moments(const WeightedSample& ws) {
  std::vector<double> w(ws.log_weights.begin(), ws.log_weights.end());
  if (w.empty()) throw UsageError("weighted_moments: empty sample");
  normalize_log_weights(w);
  for (double& v : w) v = std::exp(v);
  return weighted_moments(ws.points, w);
}

double log_gaussian_power_integral(const Gaussian& f1, const Gaussian& f2, double alpha) {
  const auto d = f1.mean.size();
  if (f2.mean.size() != d || f1.cov.rows() != d || f2.cov.rows() != d) {
    throw UsageError("gaussian_power_integral: dimension mismatch");
  }
  const CholeskyFactor c1 = cholesky_with_jitter(f1.cov, "f1 covariance");
  const CholeskyFactor c2 = cholesky_with_jitter(f2.cov, "f2 covariance");

  const Matrix mixed = alpha * f2.cov + (1.0 - alpha) * f1.cov;
  Eigen::LLT<Matrix> llt(mixed);
  if (llt.info() != Eigen::Success) {
    throw DomainError(
        "gaussian_power_integral: alpha*Sigma2 + (1-alpha)*Sigma1 is not positive definite");
  }
  const Matrix eye = Matrix::Identity(d, d);
  const Matrix p1 = c1.lower.triangularView<Eigen::Lower>().transpose().solve(
      c1.lower.triangularView<Eigen::Lower>().solve(eye));
  const Matrix p2 = c2.lower.triangularView<Eigen::Lower>().transpose().solve(
      c2.lower.triangularView<Eigen::Lower>().solve(eye));
  Eigen::LLT<Matrix> prec_check(alpha * p1 + (1.0 - alpha) * p2);
  if (prec_check.info() != Eigen::Success) {
    throw DomainError(
        "gaussian_power_integral: alpha*Sigma1^-1 + (1-alpha)*Sigma2^-1 is not positive definite");
  }

  const Matrix l = llt.matrixL();
  const double log_det_mixed = 2.0 * l.diagonal().array().log().sum();
  const Vector delta = f1.mean - f2.mean;
  const double quad = delta.dot(llt.solve(delta));
  return -0.5 * log_det_mixed - 0.5 * (alpha - 1.0) * c1.log_det + 0.5 * alpha * c2.log_det +
         0.5 * alpha * (alpha - 1.0) * quad;
}

double gaussian_power_integral(const Gaussian& f1, const Gaussian& f2, double alpha) {
  return std::exp(log_gaussian_power_integral(f1, f2, alpha));
}

NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                             const NelderMeadOptions& opts) {
  const auto k = x0.size();
  if (k == 0) throw UsageError("nelder_mead: empty start point");
  const double f0 = f(x0);
  if (!std::isfinite(f0)) throw UsageError("nelder_mead: objective is not finite at x0");

  auto eval = [&f](const Vector& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : kInf;
  };

  const double step = opts.initial_step > 0
                          ? opts.initial_step
                          : 0.05 * std::max(x0.cwiseAbs().maxCoeff(), 1.0);
  std::vector<Vector> simplex(static_cast<std::size_t>(k + 1), x0);
  std::vector<double> values(static_cast<std::size_t>(k + 1), f0);
  for (Eigen::Index i = 0; i < k; ++i) {
    auto& v = simplex[static_cast<std::size_t>(i + 1)];
    v[i] += step;
    values[static_cast<std::size_t>(i + 1)] = eval(v);
  }

  std::vector<std::size_t> order(simplex.size());
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<Vector> s2;
    std::vector<double> v2;
    s2.reserve(order.size());
    v2.reserve(order.size());
    for (auto i : order) {
      s2.push_back(std::move(simplex[i]));
      v2.push_back(values[i]);
    }
    simplex = std::move(s2);
    values = std::move(v2);
  };

  NelderMeadResult res;
  const std::size_t worst = static_cast<std::size_t>(k);
  // Both the value spread and the simplex diameter must be small: a simplex
  // straddling a symmetric minimum has equal values at distinct points.
  auto settled = [&] {
    if (!(values[worst] - values[0] < opts.tol)) return false;
    double diameter = 0.0;
    for (std::size_t i = 1; i < simplex.size(); ++i) {
      diameter = std::max(diameter, (simplex[i] - simplex[0]).cwiseAbs().maxCoeff());
    }
    return diameter <= opts.xtol * std::max(1.0, simplex[0].cwiseAbs().maxCoeff());
  };

  constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5, kShrink = 0.5;
  int it = 0;
  for (; it < opts.max_iters; ++it) {
    sort_simplex();
    if (settled()) {
      res.converged = true;
      break;
    }
    Vector centroid = Vector::Zero(k);
    for (std::size_t i = 0; i < worst; ++i) centroid += simplex[i];
    centroid /= static_cast<double>(k);

    const Vector xr = centroid + kReflect * (centroid - simplex[worst]);
    const double fr = eval(xr);
    if (fr < values[0]) {
      const Vector xe = centroid + kExpand * (xr - centroid);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[worst] = xe;
        values[worst] = fe;
      } else {
        simplex[worst] = xr;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[worst - 1]) {
      simplex[worst] = xr;
      values[worst] = fr;
      continue;
    }
    // Contraction: outside if the reflected point beats the worst vertex.
    const bool outside = fr < values[worst];
    const Vector xc = outside ? Vector(centroid + kContract * (xr - centroid))
                              : Vector(centroid + kContract * (simplex[worst] - centroid));
    const double fc = eval(xc);
    if ((outside && fc <= fr) || (!outside && fc < values[worst])) {
      simplex[worst] = xc;
      values[worst] = fc;
      continue;
    }
    for (std::size_t i = 1; i < simplex.size(); ++i) {
      simplex[i] = simplex[0] + kShrink * (simplex[i] - simplex[0]);
      values[i] = eval(simplex[i]);
    }
  }
  sort_simplex();
  res.argmin = simplex[0];
  res.value = values[0];
  res.iterations = it;
  if (!res.converged) res.converged = settled();
  return res;
}

}  // namespace anneal
