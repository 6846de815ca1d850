#include "anneal/models.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "anneal/errors.hpp"

namespace anneal {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_prior(const Gaussian& g, std::size_t d, const char* who) {
  if (g.mean.size() != static_cast<Eigen::Index>(d) || g.cov.rows() != g.mean.size() ||
      g.cov.cols() != g.mean.size()) {
    throw UsageError(std::string(who) + ": prior dimension does not match H");
  }
}

Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

std::vector<BlockRange> default_or(std::vector<BlockRange> blocks, std::size_t dim,
                                   std::size_t count) {
  if (!blocks.empty()) return blocks;
  return even_blocks(dim, std::min(dim, count));
}
}  // namespace

std::vector<BlockRange> even_blocks(std::size_t dim, std::size_t count) {
  if (count == 0 || count > dim) throw UsageError("even_blocks: need 1 <= count <= dim");
  std::vector<BlockRange> out;
  const std::size_t base = dim / count;
  const std::size_t extra = dim % count;
  std::size_t at = 0;
  for (std::size_t b = 0; b < count; ++b) {
    const std::size_t len = base + (b >= count - extra ? 1 : 0);
    out.push_back({at, at + len});
    at += len;
  }
  return out;
}

void TemperedModel::validate() const {
  if (dim == 0) throw UsageError("TemperedModel: dim must be positive");
  if (!log_prior || !log_likelihood || !sample_prior) {
    throw UsageError("TemperedModel '" + name + "': missing density or sampler");
  }
  std::size_t at = 0;
  for (const auto& b : blocks) {
    if (b.begin != at || b.end <= b.begin) {
      throw UsageError("TemperedModel '" + name + "': blocks must partition [0, dim) in order");
    }
    at = b.end;
  }
  if (at != dim) throw UsageError("TemperedModel '" + name + "': blocks do not cover all coordinates");
}

double tempered_logdensity(const TemperedModel& m, const Vector& theta, double phi) {
  if (!(phi >= 0.0 && phi <= 1.0)) throw UsageError("tempered_logdensity: phi outside [0, 1]");
  const double lp = m.log_prior(theta);
  if (std::isnan(lp) || lp == kNegInf) return kNegInf;
  if (phi == 0.0) return lp;
  const double ll = m.log_likelihood(theta);
  if (std::isnan(ll)) return kNegInf;
  return temper(lp, ll, phi);
}

// ---------------------------------------------------------------------------

void GaussianLinearModel::validate() const {
  const auto n = H.rows();
  if (H.cols() == 0 || n == 0) throw UsageError("GaussianLinearModel: empty H");
  check_prior(prior, dim(), "GaussianLinearModel");
  if (noise_cov.rows() != n || noise_cov.cols() != n || y.size() != n) {
    throw UsageError("GaussianLinearModel: noise covariance / y do not match H");
  }
}

namespace {
struct PreparedLinearGaussian {
  std::shared_ptr<const GaussianLinearModel> model;
  CholeskyFactor noise;
  double constant = 0.0;

  explicit PreparedLinearGaussian(std::shared_ptr<const GaussianLinearModel> m)
      : model(std::move(m)), noise(cholesky_with_jitter(model->noise_cov, "noise covariance")) {
    constant = -0.5 * (static_cast<double>(model->observations()) * std::log(2.0 * std::numbers::pi) +
                       noise.log_det);
  }

  double loglik(const Vector& theta) const {
    const Vector r = model->y - model->H * theta;
    const Vector z = noise.lower.triangularView<Eigen::Lower>().solve(r);
    return constant - 0.5 * z.squaredNorm();
  }
};
}  // namespace

double gauss_loglik(const GaussianLinearModel& m, const Vector& theta) {
  return mvn_logpdf(m.y, Gaussian{m.H * theta, m.noise_cov});
}

namespace {
Gaussian condition(const GaussianLinearModel& m, const Matrix& noise) {
  const Matrix s = m.H * m.prior.cov * m.H.transpose() + noise;
  Eigen::LLT<Matrix> llt(symmetrized(s));
  if (llt.info() != Eigen::Success) {
    throw NumericError("GaussianLinearModel: H Sigma H^T + Sigma_y is not positive definite");
  }
  const Matrix gain = llt.solve(m.H * m.prior.cov).transpose();  // Sigma H^T S^-1
  Gaussian post;
  post.mean = m.prior.mean + gain * (m.y - m.H * m.prior.mean);
  const Matrix eye = Matrix::Identity(m.H.cols(), m.H.cols());
  post.cov = symmetrized((eye - gain * m.H) * m.prior.cov);
  return post;
}
}  // namespace

Gaussian gauss_posterior(const GaussianLinearModel& m) {
  m.validate();
  return condition(m, m.noise_cov);
}

double gauss_log_evidence(const GaussianLinearModel& m) {
  m.validate();
  Gaussian marginal{m.H * m.prior.mean, symmetrized(m.H * m.prior.cov * m.H.transpose() + m.noise_cov)};
  try {
    return mvn_logpdf(m.y, marginal);
  } catch (const NumericError&) {
    throw NumericError("GaussianLinearModel: H Sigma H^T + Sigma_y is not positive definite");
  }
}

Gaussian perfect_mixing_params(const GaussianLinearModel& m, double phi) {
  m.validate();
  if (!(phi >= 0.0 && phi <= 1.0)) throw UsageError("perfect_mixing_params: phi outside [0, 1]");
  if (phi == 0.0) return m.prior;
  return condition(m, m.noise_cov / phi);
}

GaussianLinearModel make_linear_gaussian(std::size_t d, std::size_t n, std::uint64_t seed) {
  if (d == 0 || n == 0) throw UsageError("make_linear_gaussian: empty dimensions");
  Rng rng(seed);
  GaussianLinearModel m;
  m.H.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < m.H.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.H.cols(); ++j) m.H(i, j) = normal(rng);
  }
  m.prior.mean = Vector::Zero(static_cast<Eigen::Index>(d));
  m.prior.cov = 10.0 * Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  m.noise_cov = Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  Vector theta(static_cast<Eigen::Index>(d));
  for (auto& v : theta) v = std::sqrt(10.0) * normal(rng);
  m.y = m.H * theta;
  for (auto& v : m.y) v += normal(rng);
  return m;
}

GaussianLinearModel make_scalar_linear_gaussian() {
  GaussianLinearModel m;
  m.H = Matrix::Constant(1, 1, 1.0);
  m.prior = Gaussian{Vector::Zero(1), Matrix::Constant(1, 1, 10.0)};
  m.noise_cov = Matrix::Constant(1, 1, 1.0);
  m.y = Vector::Constant(1, 5.0);
  return m;
}

TemperedModel to_tempered(std::shared_ptr<const GaussianLinearModel> m, std::vector<BlockRange> blocks) {
  m->validate();
  auto prepared = std::make_shared<const PreparedLinearGaussian>(m);
  auto prior = std::make_shared<const FactoredGaussian>(m->prior);
  TemperedModel t;
  t.name = "linear_gaussian";
  t.dim = m->dim();
  t.blocks = default_or(std::move(blocks), t.dim, 5);
  t.log_prior = [prior](const Vector& th) { return prior->logpdf(th); };
  t.log_likelihood = [prepared](const Vector& th) { return prepared->loglik(th); };
  t.sample_prior = [prior](Rng& rng) { return prior->sample(rng); };
  t.smooth = true;
  t.gaussian = std::move(m);
  t.validate();
  return t;
}

// ---------------------------------------------------------------------------

void StudentTModel::validate() const {
  const auto n = H.rows();
  if (H.cols() == 0 || n == 0) throw UsageError("StudentTModel: empty H");
  check_prior(prior, static_cast<std::size_t>(H.cols()), "StudentTModel");
  if (scale.rows() != n || scale.cols() != n || y.size() != n) {
    throw UsageError("StudentTModel: scale matrix / y do not match H");
  }
  if (!(dof > 0.0)) throw UsageError("StudentTModel: degrees of freedom must be positive");
}

namespace {
struct PreparedStudentT {
  std::shared_ptr<const StudentTModel> model;
  CholeskyFactor scale;
  double constant = 0.0;

  explicit PreparedStudentT(std::shared_ptr<const StudentTModel> m)
      : model(std::move(m)), scale(cholesky_with_jitter(model->scale, "Student-t scale matrix")) {
    const double nu = model->dof;
    const auto n = static_cast<double>(model->y.size());
    constant = std::lgamma(0.5 * (nu + n)) - std::lgamma(0.5 * nu) -
               0.5 * n * std::log(nu * std::numbers::pi) - 0.5 * scale.log_det;
  }

  double loglik(const Vector& theta) const {
    const Vector r = model->y - model->H * theta;
    const Vector z = scale.lower.triangularView<Eigen::Lower>().solve(r);
    const double nu = model->dof;
    const auto n = static_cast<double>(r.size());
    return constant - 0.5 * (nu + n) * std::log1p(z.squaredNorm() / nu);
  }
};
}  // namespace

double studentt_loglik(const StudentTModel& m, const Vector& theta) {
  m.validate();
  return PreparedStudentT(std::make_shared<const StudentTModel>(m)).loglik(theta);
}

StudentTModel make_student_t(double dof) {
  StudentTModel m;
  m.H = Matrix::Zero(4, 2);
  m.H(0, 0) = m.H(1, 0) = 1.0;
  m.H(2, 1) = m.H(3, 1) = 1.0;
  m.prior = Gaussian{Vector::Zero(2), 20.0 * Matrix::Identity(2, 2)};
  m.scale = 0.1 * Matrix::Identity(4, 4);
  m.dof = dof;
  m.y = Vector(4);
  m.y << 8.0, -8.0, 8.0, -8.0;
  return m;
}

TemperedModel to_tempered(std::shared_ptr<const StudentTModel> m, std::vector<BlockRange> blocks) {
  m->validate();
  auto prepared = std::make_shared<const PreparedStudentT>(m);
  auto prior = std::make_shared<const FactoredGaussian>(m->prior);
  TemperedModel t;
  t.name = "student_t";
  t.dim = static_cast<std::size_t>(m->H.cols());
  t.blocks = default_or(std::move(blocks), t.dim, 2);
  t.log_prior = [prior](const Vector& th) { return prior->logpdf(th); };
  t.log_likelihood = [prepared](const Vector& th) { return prepared->loglik(th); };
  t.sample_prior = [prior](Rng& rng) { return prior->sample(rng); };
  t.smooth = false;  // four separated modes
  t.validate();
  return t;
}

// ---------------------------------------------------------------------------

void PoissonRegressionModel::validate() const {
  if (x.size() != counts.size() || x.empty()) {
    throw UsageError("PoissonRegressionModel: need one count per covariate");
  }
  for (long c : counts) {
    if (c < 0) throw UsageError("PoissonRegressionModel: counts must be non-negative");
  }
  if (centers.empty()) throw UsageError("PoissonRegressionModel: no kernel centres");
  if (!(radius > 0.0)) throw UsageError("PoissonRegressionModel: radius must be positive");
  if (!(q > 0.0 && q < 2.0)) throw UsageError("PoissonRegressionModel: q must lie in (0, 2)");
  if (!(ig_shape > 0.0 && ig_scale > 0.0)) {
    throw UsageError("PoissonRegressionModel: inverse-gamma parameters must be positive");
  }
}

Vector basis_row(const PoissonRegressionModel& m, double x) {
  Vector row(static_cast<Eigen::Index>(m.coefficients()));
  row[0] = 1.0;
  const double r2 = m.radius * m.radius;
  for (std::size_t j = 0; j < m.centers.size(); ++j) {
    const double dx = x - m.centers[j];
    row[static_cast<Eigen::Index>(j + 1)] = std::exp(-dx * dx / r2);
  }
  return row;
}

double exp_power_logpdf(const Eigen::Ref<const Vector>& beta, double gamma, double q) {
  if (!(gamma > 0.0)) return kNegInf;
  const double norm = std::log(q) - std::log(2.0 * gamma) - std::lgamma(1.0 / q);
  double out = static_cast<double>(beta.size()) * norm;
  for (double b : beta) out -= std::pow(std::abs(b / gamma), q);
  return out;
}

namespace {
double inv_gamma_logpdf(double x, double shape, double scale) {
  if (!(x > 0.0)) return kNegInf;
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

struct PreparedPoisson {
  std::shared_ptr<const PoissonRegressionModel> model;
  Matrix design;   // n x (p + 1)
  Vector counts;   // as doubles
  double log_factorials = 0.0;

  explicit PreparedPoisson(std::shared_ptr<const PoissonRegressionModel> m) : model(std::move(m)) {
    const auto n = static_cast<Eigen::Index>(model->x.size());
    design.resize(n, static_cast<Eigen::Index>(model->coefficients()));
    counts.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      design.row(i) = basis_row(*model, model->x[static_cast<std::size_t>(i)]).transpose();
      const long c = model->counts[static_cast<std::size_t>(i)];
      counts[i] = static_cast<double>(c);
      log_factorials += std::lgamma(static_cast<double>(c) + 1.0);
    }
  }

  double loglik(const Eigen::Ref<const Vector>& beta) const {
    const Vector eta = design * beta;
    double out = -log_factorials;
    for (Eigen::Index i = 0; i < eta.size(); ++i) out += counts[i] * eta[i] - std::exp(eta[i]);
    return std::isnan(out) ? kNegInf : out;
  }

  double log_prior(const Eigen::Ref<const Vector>& beta, double gamma) const {
    return exp_power_logpdf(beta, gamma, model->q) +
           inv_gamma_logpdf(gamma, model->ig_shape, model->ig_scale);
  }
};
}  // namespace

PoissonLogDensity poisson_model_logdensity(const PoissonRegressionModel& m, const Vector& theta) {
  m.validate();
  if (theta.size() != static_cast<Eigen::Index>(m.dim())) {
    throw UsageError("poisson_model_logdensity: theta has the wrong dimension");
  }
  PreparedPoisson p(std::make_shared<const PoissonRegressionModel>(m));
  const auto k = static_cast<Eigen::Index>(m.coefficients());
  return {p.log_prior(theta.head(k), theta[k]), p.loglik(theta.head(k))};
}

Vector poisson_true_coefficients() {
  Vector beta = Vector::Zero(12);
  beta[0] = 1.0;
  beta[2] = 1.5;
  beta[4] = -2.0;
  beta[6] = 1.0;
  beta[7] = -2.0;
  beta[9] = 1.2;
  return beta;
}

PoissonRegressionModel make_poisson_regression(std::size_t n, std::uint64_t seed) {
  PoissonRegressionModel m;
  for (int j = 0; j < 11; ++j) m.centers.push_back(j / 10.0);
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Vector beta = poisson_true_coefficients();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = unif(rng);
    std::poisson_distribution<long> pois(std::exp(basis_row(m, x).dot(beta)));
    m.x.push_back(x);
    m.counts.push_back(pois(rng));
  }
  return m;
}

TemperedModel to_tempered(std::shared_ptr<const PoissonRegressionModel> m,
                          std::vector<BlockRange> blocks) {
  m->validate();
  auto prepared = std::make_shared<const PreparedPoisson>(m);
  const auto k = static_cast<Eigen::Index>(m->coefficients());
  TemperedModel t;
  t.name = "poisson_regression";
  t.dim = m->dim();
  t.blocks = default_or(std::move(blocks), t.dim, 6);
  t.log_prior = [prepared, k](const Vector& th) {
    const double u = th[k];
    const double lp = prepared->log_prior(th.head(k), std::exp(u));
    return lp == kNegInf ? lp : lp + u;  // d gamma / d log gamma
  };
  t.log_likelihood = [prepared, k](const Vector& th) { return prepared->loglik(th.head(k)); };
  t.sample_prior = [m, k](Rng& rng) {
    std::gamma_distribution<double> precision(m->ig_shape, 1.0 / m->ig_scale);
    const double gamma = 1.0 / precision(rng);
    std::gamma_distribution<double> magnitude(1.0 / m->q, 1.0);
    Vector th(k + 1);
    for (Eigen::Index j = 0; j < k; ++j) {
      const double b = gamma * std::pow(magnitude(rng), 1.0 / m->q);
      th[j] = (rng() >> 63) ? -b : b;
    }
    th[k] = std::log(gamma);
    return th;
  };
  t.smooth = false;
  t.validate();
  return t;
}

// ---------------------------------------------------------------------------

TemperedModel to_tempered(const ModelInstance& inst) {
  return std::visit(
      [&](const auto& spec) {
        using T = std::decay_t<decltype(spec)>;
        return to_tempered(std::make_shared<const T>(spec), inst.blocks);
      },
      inst.spec);
}

std::string model_kind(const ModelSpec& spec) {
  switch (spec.index()) {
    case 0:
      return "linear_gaussian";
    case 1:
      return "student_t";
    default:
      return "poisson_regression";
  }
}

}  // namespace anneal
