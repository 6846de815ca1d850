#include <cmath>
#include <memory>

#include "anneal/errors.hpp"
#include "anneal/schedule.hpp"
#include "anneal/smc.hpp"
#include "doctest.h"
#include "oracles/quadrature.hpp"

using namespace anneal;

namespace {

std::shared_ptr<const GaussianLinearModel> scalar() {
  return std::make_shared<const GaussianLinearModel>(make_scalar_linear_gaussian());
}

GaussianSequence scalar_sequence() { return approximate_sequence(to_tempered(scalar())); }

const GaussianSequence& model1_sequence() {
  static const GaussianSequence seq = approximate_sequence(
      to_tempered(std::make_shared<const GaussianLinearModel>(make_linear_gaussian(10, 20, 2024))));
  return seq;
}

CoolingSchedule fixed(std::vector<double> phis) {
  CoolingSchedule s;
  s.phis = std::move(phis);
  s.strategy = CoolingSchedule::Strategy::fixed;
  return s;
}

// sum_k integral pi_{k+1}^2 / pi_k - 1 for the scalar model, by quadrature of the
// tempered densities themselves (prior N(0, 10), likelihood N(5 | theta, 1)).
double scalar_variance_by_quadrature(const std::vector<double>& phis) {
  auto log_gamma = [](double th, double phi) {
    return oracle::log_normal_pdf(th, 0.0, 10.0) + phi * oracle::log_normal_pdf(5.0, th, 1.0);
  };
  auto log_z = [&](double phi) {
    return std::log(oracle::simpson([&](double th) { return std::exp(log_gamma(th, phi)); }, -40, 40, 8000));
  };
  double total = 0.0;
  for (std::size_t k = 1; k < phis.size(); ++k) {
    const double za = log_z(phis[k]), zb = log_z(phis[k - 1]);
    const double integral = oracle::simpson(
        [&](double th) {
          return std::exp(2.0 * (log_gamma(th, phis[k]) - za) - (log_gamma(th, phis[k - 1]) - zb));
        },
        -40, 40, 8000);
    total += integral - 1.0;
  }
  return total;
}

}  // namespace

TEST_CASE("parametric schedule examples") {
  const auto s = parametric_schedule(6.0, 3);
  REQUIRE(s.size() == 3);
  CHECK(s.phis[0] == 0.0);
  CHECK(s.phis[2] == 1.0);
  CHECK(s.phis[1] == doctest::Approx(std::expm1(3.0) / std::expm1(6.0)).epsilon(1e-14));
  CHECK(s.phis[1] == doctest::Approx(0.047426).epsilon(1e-5));

  const auto lin = linear_schedule(11);
  const auto tiny = parametric_schedule(1e-9, 11);
  const auto small = parametric_schedule(1e-6, 11);
  for (std::size_t t = 0; t < 11; ++t) {
    CHECK(lin.phis[t] == doctest::Approx(t / 10.0).epsilon(1e-15));
    CHECK(tiny.phis[t] == lin.phis[t]);
    CHECK(std::abs(small.phis[t] - lin.phis[t]) < 1e-6);
  }
  CHECK(s.strategy == CoolingSchedule::Strategy::parametric);
  CHECK(s.parameter == 6.0);
}

TEST_CASE("parametric schedules are always valid") {
  for (double g : {-30.0, -12.5, -1.0, -1e-7, 0.0, 0.37, 5.6, 29.9, 30.0, 80.0, -80.0}) {
    for (std::size_t T : {2u, 3u, 25u, 200u}) {
      const auto s = parametric_schedule(g, T);
      CHECK_NOTHROW(s.validate());
      CHECK(s.phis.front() == 0.0);
      CHECK(s.phis.back() == 1.0);
    }
  }
  CHECK_THROWS_AS(parametric_schedule(1.0, 1), UsageError);
}

TEST_CASE("exact sequence reproduces the perfect-mixing targets") {
  const auto g = make_linear_gaussian(10, 20, 2024);
  const auto& seq = model1_sequence();
  CHECK(seq.method == "exact");
  for (double phi : {0.0, 1e-6, 0.01, 0.3, 0.77, 1.0}) {
    const auto a = seq.intermediate(phi);
    const auto b = perfect_mixing_params(g, phi);
    CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((a.cov - b.cov).cwiseAbs().maxCoeff() < 1e-8);
  }
  const auto post = gauss_posterior(g);
  CHECK((seq.intermediate(1.0).mean - post.mean).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((seq.intermediate(0.0).cov - g.prior.cov).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sequence from moments composes back to the posterior") {
  Gaussian prior{Vector::Zero(2), Matrix::Identity(2, 2) * 20.0};
  Matrix pc(2, 2);
  pc << 2.0, 0.3, 0.3, 0.5;
  Gaussian post{Vector(Vector::LinSpaced(2, -1.0, 2.0)), pc};
  const auto seq = GaussianSequence::from_moments(prior, post);
  CHECK(seq.clipped_eigenvalues == 0);
  CHECK((seq.intermediate(1.0).mean - post.mean).norm() < 1e-10);
  CHECK((seq.intermediate(1.0).cov - post.cov).norm() < 1e-10);
  CHECK((seq.intermediate(0.0).cov - prior.cov).norm() < 1e-10);
  CHECK((seq.intermediate(0.0).mean - prior.mean).norm() < 1e-10);
  const auto lik = seq.likelihood_approx();
  REQUIRE(lik.has_value());
  const Matrix expect = (post.cov.inverse() - prior.cov.inverse()).inverse();
  CHECK((lik->cov - expect).norm() < 1e-9);
}

TEST_CASE("a posterior wider than the prior is clipped and keeps its mean") {
  Gaussian prior{Vector::Zero(2), Matrix::Identity(2, 2)};
  Matrix pc(2, 2);
  pc << 0.5, 0.0, 0.0, 3.0;
  Gaussian post{Vector::Constant(2, 0.4), pc};
  const auto seq = GaussianSequence::from_moments(prior, post);
  CHECK(seq.clipped_eigenvalues == 1);
  CHECK_FALSE(seq.warnings.empty());
  CHECK((seq.intermediate(1.0).mean - post.mean).norm() < 1e-9);
  const Eigen::SelfAdjointEigenSolver<Matrix> es(seq.lik_precision);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("asymptotic variance of identical targets is zero") {
  const auto seq = scalar_sequence();
  CHECK(asymptotic_variance(seq, fixed({0.0, 0.0, 0.0, 1.0, 1.0})) ==
        doctest::Approx(asymptotic_variance(seq, fixed({0.0, 1.0}))).epsilon(1e-14));
  CoolingSchedule flat = fixed({0.0, 0.0});
  flat.phis = {0.0, 0.5, 0.5, 1.0};
  CHECK(asymptotic_variance(seq, flat) > 0.0);
}

TEST_CASE("asymptotic variance agrees with quadrature") {
  const auto seq = scalar_sequence();
  for (const auto& phis : std::vector<std::vector<double>>{{0.0, 0.5, 1.0},
                                                           {0.0, 0.05, 1.0},
                                                           {0.0, 0.01, 0.1, 0.4, 1.0}}) {
    const double v = asymptotic_variance(seq, fixed(phis));
    const double q = scalar_variance_by_quadrature(phis);
    CHECK(v == doctest::Approx(q).epsilon(1e-6));
  }
  // Frozen value for T = 3 with the midpoint schedule.
  CHECK(asymptotic_variance(seq, fixed({0.0, 0.5, 1.0})) ==
        doctest::Approx(scalar_variance_by_quadrature({0.0, 0.5, 1.0})).epsilon(1e-9));
}

TEST_CASE("splitting a step reduces the asymptotic variance") {
  const auto seq = scalar_sequence();
  const double one = asymptotic_variance(seq, fixed({0.0, 0.2, 1.0}));
  const double two = asymptotic_variance(seq, fixed({0.0, 0.2, 0.6, 1.0}));
  CHECK(two < one);
  CHECK(scalar_variance_by_quadrature({0.0, 0.2, 0.6, 1.0}) < scalar_variance_by_quadrature({0.0, 0.2, 1.0}));
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> phis{0.0};
    const int k = 2 + static_cast<int>(rng.uniform() * 8);
    for (int j = 0; j < k; ++j) phis.push_back(rng.uniform());
    phis.push_back(1.0);
    std::sort(phis.begin(), phis.end());
    CHECK(asymptotic_variance(seq, fixed(phis)) >= 0.0);
  }
}

TEST_CASE("optimized gamma beats the grid scan") {
  const auto& seq = model1_sequence();
  const std::size_t T = 25;
  const auto opt = optimize_gamma(seq, T);
  CHECK(opt.variance == doctest::Approx(asymptotic_variance(seq, parametric_schedule(opt.gamma, T))));
  double grid_min = std::numeric_limits<double>::infinity();
  for (int g = -10; g <= 10; ++g) {
    grid_min = std::min(grid_min, asymptotic_variance(seq, parametric_schedule(g, T)));
  }
  CHECK(opt.variance <= grid_min * (1.0 + 1e-12));
  for (double g : {0.0, 6.0, -6.0}) {
    CHECK(opt.variance <= asymptotic_variance(seq, parametric_schedule(g, T)));
  }
  // Local minimum.
  for (double d : {-0.1, 0.1}) {
    CHECK(asymptotic_variance(seq, parametric_schedule(opt.gamma + d, T)) >= opt.variance * (1.0 - 1e-10));
  }
  // Interior minimum: the objective rises on both sides of gamma*.
  CHECK(opt.gamma > -10.0);
  CHECK(opt.gamma < 10.0);
  CHECK(asymptotic_variance(seq, parametric_schedule(-10.0, T)) > opt.variance);
  CHECK(asymptotic_variance(seq, parametric_schedule(10.0, T)) > opt.variance);
  // Frozen optimum for this instance.
  CHECK(opt.gamma == doctest::Approx(5.606).epsilon(1e-3));
}

TEST_CASE("longer schedules reach a smaller optimal variance") {
  const auto& seq = model1_sequence();
  const auto a = optimize_gamma(seq, 25);
  const auto b = optimize_gamma(seq, 200);
  CHECK(b.variance < a.variance);
}

TEST_CASE("cess bisection") {
  const auto m = to_tempered(scalar());
  const auto cloud = initial_cloud(m, 1000, 4);
  const double target = 900.0;
  const double phi = cess_next_phi(cloud, target);
  CHECK(phi > 0.0);
  CHECK(phi < 1.0);
  const auto inc = incremental_logweights(cloud, phi);
  CHECK(std::abs(cess(cloud.log_weights, inc) - target) < 0.1);

  const double near = cess_next_phi(cloud, 1000.0);
  CHECK(near > 0.0);
  CHECK(near < 1e-6);

  auto flat = cloud;
  std::fill(flat.log_lik.begin(), flat.log_lik.end(), -3.0);
  CHECK(cess_next_phi(flat, 900.0) == 1.0);
}

TEST_CASE("laplace approximation of a Gaussian model is exact") {
  auto m = to_tempered(scalar());
  m.gaussian.reset();
  m.smooth = true;
  const auto seq = approximate_sequence(m, ApproxOptions{});
  CHECK(seq.method == "laplace");
  const auto post = gauss_posterior(make_scalar_linear_gaussian());
  CHECK(seq.posterior_approx.mean[0] == doctest::Approx(post.mean[0]).epsilon(1e-5));
  CHECK(seq.posterior_approx.cov(0, 0) == doctest::Approx(post.cov(0, 0)).epsilon(1e-4));
  CHECK(seq.prior_approx.cov(0, 0) == doctest::Approx(10.0).epsilon(1e-4));
}

TEST_CASE("moment matching on a Gaussian model is close") {
  auto m = to_tempered(scalar());
  ApproxOptions o;
  o.method = ApproxMethod::moment_match;
  o.n_draws = 20000;
  o.seed = 3;
  const auto seq = approximate_sequence(m, o);
  CHECK(seq.method == "moment_match");
  CHECK(seq.posterior_approx.mean[0] == doctest::Approx(50.0 / 11.0).epsilon(0.05));
  CHECK(seq.posterior_approx.cov(0, 0) == doctest::Approx(10.0 / 11.0).epsilon(0.1));
}

TEST_CASE("automatic approximation on the Student-t model uses moment matching") {
  const auto m = to_tempered(ModelInstance{make_student_t(0.2), {}});
  ApproxOptions o;
  o.seed = 1;
  const auto seq = approximate_sequence(m, o);
  CHECK(seq.method == "moment_match");
  CHECK(std::abs(seq.posterior_approx.mean[0]) < 0.5);
  const auto opt = optimize_gamma(seq, 50);
  CHECK(std::isfinite(opt.variance));
}

TEST_CASE("approximation method names round trip") {
  for (auto m : {ApproxMethod::automatic, ApproxMethod::exact, ApproxMethod::laplace,
                 ApproxMethod::moment_match, ApproxMethod::pilot}) {
    CHECK(parse_approx_method(approx_method_name(m)) == m);
  }
  CHECK_THROWS_AS(parse_approx_method("quadrature"), ConfigError);
  ApproxOptions o;
  o.method = ApproxMethod::exact;
  const auto st = to_tempered(ModelInstance{make_student_t(7.0), {}});
  CHECK_THROWS_AS(approximate_sequence(st, o), UsageError);
}
