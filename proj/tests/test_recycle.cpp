#include <cmath>
#include <memory>
#include <numeric>

#include "anneal/errors.hpp"
#include "anneal/recycle.hpp"
#include "anneal/schedule.hpp"
#include "doctest.h"

using namespace anneal;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> logs(std::initializer_list<double> w) {
  std::vector<double> out;
  for (double x : w) out.push_back(std::log(x));
  return out;
}

double lsum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

const auto identity = [](const Vector& x) { return x; };

// Single collection drawn from a 1-D Gaussian at the given phi.
UniformizedHistory one_collection(std::size_t n, double phi, std::uint64_t seed) {
  UniformizedHistory h;
  Rng rng(seed);
  RowMatrix p(static_cast<Eigen::Index>(n), 1);
  std::vector<double> lp(n), ll(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vector z(1);
    standard_normals(rng, z);
    p(static_cast<Eigen::Index>(i), 0) = z[0];
    lp[i] = -0.5 * z[0] * z[0];
    ll[i] = -0.5 * (z[0] - 1.0) * (z[0] - 1.0);
  }
  h.points.push_back(p);
  h.log_prior.push_back(lp);
  h.log_lik.push_back(ll);
  h.phis.push_back(phi);
  h.log_Z.push_back(0.0);
  h.proportions.push_back(1.0);
  return h;
}

SmcConfig mwg_config(std::size_t n, CoolingSchedule sched, std::uint64_t seed, double threshold = 0.5) {
  SmcConfig cfg;
  cfg.n_particles = n;
  cfg.schedule = std::move(sched);
  cfg.seed = seed;
  cfg.ess_threshold_fraction = threshold;
  return cfg;
}

}  // namespace

TEST_CASE("naive lambda") {
  const auto lam = lambda_naive({logs({2.0, 1.0}), logs({0.5, 0.5})});
  CHECK(lam[0] == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(lam[1] == doctest::Approx(0.25).epsilon(1e-14));

  const auto same = lambda_naive({logs({1.0, 2.0}), logs({1.0, 2.0}), logs({1.0, 2.0})});
  for (double l : same) CHECK(l == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  const auto zero = lambda_naive({logs({1.0, 2.0}), {-kInf, -kInf}});
  CHECK(zero[1] == 0.0);
  CHECK(zero[0] == 1.0);
  CHECK_THROWS_AS(lambda_naive({{-kInf}, {-kInf, -kInf}}), DomainError);
}

TEST_CASE("optimal lambda") {
  const auto lam = lambda_optimal({logs({1.0, 1.0}), {0.0, -kInf}});
  CHECK(lam[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(lam[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  // Uniform internal weights: lambda proportional to the collection size.
  const auto sizes = lambda_optimal({std::vector<double>(4, 0.7), std::vector<double>(2, -3.0)});
  CHECK(sizes[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));

  // A degenerate collection contributes an ESS of one.
  const auto deg = lambda_optimal({std::vector<double>(99, 0.0), {5.0, -kInf, -kInf, -kInf}});
  CHECK(deg[1] == doctest::Approx(1.0 / 100.0).epsilon(1e-12));
  CHECK_THROWS_AS(lambda_optimal({{-kInf}}), DomainError);
}

TEST_CASE("lambda vectors are probability vectors and ESS stays in [1, N]") {
  Rng rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<std::vector<double>> lw(5);
    for (auto& c : lw) {
      c.resize(3 + static_cast<std::size_t>(rng.uniform() * 20));
      for (double& x : c) x = 30.0 * (rng.uniform() - 0.5);
    }
    for (const auto& lam : {lambda_naive(lw), lambda_optimal(lw)}) {
      CHECK(std::abs(lsum(lam) - 1.0) < 1e-12);
      for (double l : lam) CHECK(l >= 0.0);
    }
    for (const auto& c : lw) {
      std::vector<double> w(c);
      normalize_log_weights(w);
      const double l = ess(w);
      CHECK(l >= 1.0 - 1e-12);
      CHECK(l <= static_cast<double>(c.size()) + 1e-9);
    }
  }
}

TEST_CASE("uniformize reuses uniform clouds and resamples the rest") {
  const auto g = make_linear_gaussian(3, 5, 2);
  const auto m = to_tempered(std::make_shared<const GaussianLinearModel>(g));
  const auto always = smc_run(m, mwg_config(80, linear_schedule(6), 4, 1.0));
  const auto h = uniformize(always);
  REQUIRE(h.iterations() == 6);
  for (std::size_t t = 0; t < 6; ++t) CHECK(h.points[t] == always.clouds[t].positions);
  CHECK(std::abs(lsum(h.proportions) - 1.0) < 1e-15);
  CHECK(h.log_Z.front() == 0.0);
  CHECK(h.log_Z.back() == doctest::Approx(log_evidence(always)).epsilon(1e-14));

  const auto never = smc_run(m, mwg_config(80, linear_schedule(6), 4, 1e-9));
  const auto h2 = uniformize(never);
  CHECK(h2.points[0] == never.clouds[0].positions);
  CHECK(h2.points[5] != never.clouds[5].positions);
  CHECK(uniformize(never).points[5] == h2.points[5]);
  CHECK(uniformize(never, 99).points[5] != h2.points[5]);
}

TEST_CASE("uniformized collection is unbiased for the weighted moments") {
  ParticleCloud c;
  const std::size_t n = 20;
  c.positions.resize(n, 1);
  Rng rng(5);
  for (std::size_t i = 0; i < n; ++i) {
    c.positions(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i) * 0.3 - 2.0;
    c.log_weights.push_back(2.0 * rng.uniform());
  }
  normalize_log_weights(c.log_weights);
  c.log_prior.assign(n, 0.0);
  c.log_lik.assign(n, 0.0);
  c.phi = 1.0;
  c.iteration = 1;
  RunTrace tr;
  tr.clouds = {c};
  tr.resampled = {false};
  tr.acceptance = {1.0};
  tr.schedule.phis = {1.0};
  double target = 0.0;
  for (std::size_t i = 0; i < n; ++i) target += std::exp(c.log_weights[i]) * c.positions(static_cast<Eigen::Index>(i), 0);

  const int reps = 10000;
  double s = 0, q = 0;
  for (int r = 0; r < reps; ++r) {
    tr.seed = static_cast<std::uint64_t>(r);
    const auto h = uniformize(tr);
    const double mean = h.points[0].col(0).mean();
    s += mean;
    q += mean * mean;
  }
  const double mean = s / reps;
  const double se = std::sqrt((q / reps - mean * mean) / reps);
  CHECK(std::abs(mean - target) < 4.0 * se);
}

TEST_CASE("correction weights at the endpoints") {
  const auto g = make_linear_gaussian(2, 4, 9);
  const auto m = to_tempered(std::make_shared<const GaussianLinearModel>(g));
  const auto h = uniformize(smc_run(m, mwg_config(50, linear_schedule(4), 3)));
  for (double w : ess_correction_logweights(h, 3)) CHECK(w == 0.0);
  const auto first = ess_correction_logweights(h, 0);
  for (std::size_t i = 0; i < first.size(); ++i) CHECK(first[i] == h.log_lik[0][i]);
  CHECK_THROWS_AS(ess_correction_logweights(h, 4), UsageError);
}

TEST_CASE("prior collection alone estimates the posterior mean") {
  const auto g = make_scalar_linear_gaussian();
  const auto m = to_tempered(std::make_shared<const GaussianLinearModel>(g));
  const auto cloud = initial_cloud(m, 100000, 12);
  RunTrace tr;
  tr.clouds = {cloud};
  tr.resampled = {false};
  tr.acceptance = {1.0};
  tr.schedule.phis = {0.0};
  tr.seed = 12;
  const auto h = uniformize(tr);
  const auto r = recycled_estimate_ess(h, identity, LambdaRule::optimal, {0});
  const auto post = gauss_posterior(g);
  CHECK(std::abs(r.estimate[0] - post.mean[0]) < 4.0 * std::sqrt(post.cov(0, 0) / r.detail.pooled_ess));
}

TEST_CASE("final-collection reduction and constants") {
  const auto g = make_linear_gaussian(3, 5, 2);
  const auto m = to_tempered(std::make_shared<const GaussianLinearModel>(g));
  const auto tr = smc_run(m, mwg_config(100, linear_schedule(8), 6, 1.0));
  const auto h = uniformize(tr);
  const auto r = recycled_estimate_ess(h, identity, LambdaRule::naive, {7});
  CHECK((r.estimate - posterior_expectation(tr, identity)).cwiseAbs().maxCoeff() < 1e-12);
  const auto constant = [](const Vector&) { return Vector::Constant(2, -1.25); };
  for (auto rule : {LambdaRule::naive, LambdaRule::optimal}) {
    const auto c = recycled_estimate_ess(h, constant, rule);
    CHECK(std::abs(c.estimate[0] + 1.25) < 1e-12);
  }
  CHECK(std::abs(demix_estimate(h, constant).estimate[1] + 1.25) < 1e-12);
  CHECK_THROWS_AS(recycle_ess(h, LambdaRule::naive, {8}), UsageError);
}

TEST_CASE("DeMix on one collection equals the ESS estimator") {
  const auto h = one_collection(500, 0.0, 1);
  const auto a = demix_estimate(h, identity);
  const auto b = recycled_estimate_ess(h, identity, LambdaRule::naive);
  CHECK(std::abs(a.estimate[0] - b.estimate[0]) < 1e-12);
}

TEST_CASE("DeMix with identical targets is a plain average") {
  auto h = one_collection(300, 1.0, 2);
  auto h2 = one_collection(200, 1.0, 3);
  h.points.push_back(h2.points[0]);
  h.log_prior.push_back(h2.log_prior[0]);
  h.log_lik.push_back(h2.log_lik[0]);
  h.phis.push_back(1.0);
  h.log_Z.push_back(0.0);
  h.proportions = {0.6, 0.4};
  const auto r = recycle_demix(h);
  for (double w : r.sample.log_weights) CHECK(w == doctest::Approx(-std::log(500.0)).epsilon(1e-12));
  CHECK(r.pooled_ess == doctest::Approx(500.0).epsilon(1e-10));
}

TEST_CASE("DeMix weights are invariant to a consistent shift of the constants") {
  const auto g = make_linear_gaussian(3, 5, 8);
  const auto m = to_tempered(std::make_shared<const GaussianLinearModel>(g));
  const auto h = uniformize(smc_run(m, mwg_config(100, linear_schedule(10), 6)));
  auto shifted = h;
  const double s = 37.5;
  for (auto& ll : shifted.log_lik) {
    for (double& v : ll) v += s;
  }
  for (std::size_t n = 0; n < shifted.iterations(); ++n) shifted.log_Z[n] += shifted.phis[n] * s;
  const auto a = recycle_demix(h);
  const auto b = recycle_demix(shifted);
  REQUIRE(a.sample.log_weights.size() == b.sample.log_weights.size());
  for (std::size_t i = 0; i < a.sample.log_weights.size(); ++i) {
    CHECK(std::abs(a.sample.log_weights[i] - b.sample.log_weights[i]) < 1e-10);
  }
}

TEST_CASE("DeMix drops points outside the support") {
  auto h = one_collection(10, 0.0, 4);
  h.log_prior[0][3] = -kInf;
  const auto r = recycle_demix(h);
  CHECK(r.zero_denominators == 1);
  CHECK(r.sample.log_weights[3] == -kInf);
}

TEST_CASE("recycled posterior means agree with the analytic posterior") {
  const auto g = make_linear_gaussian(10, 20, 2024);
  const auto m = to_tempered(std::make_shared<const GaussianLinearModel>(g), even_blocks(10, 5));
  const auto seq = approximate_sequence(m);
  const auto sched = parametric_schedule(optimize_gamma(seq, 25).gamma, 25);
  const auto h = uniformize(smc_run(m, mwg_config(10000, sched, 2024)));
  const auto post = gauss_posterior(g);
  for (const auto& r : {recycled_estimate_ess(h, identity, LambdaRule::naive),
                        recycled_estimate_ess(h, identity, LambdaRule::optimal), demix_estimate(h, identity)}) {
    for (Eigen::Index k = 0; k < 10; ++k) {
      const double se = std::sqrt(post.cov(k, k) / r.detail.pooled_ess);
      CHECK_MESSAGE(std::abs(r.estimate[k] - post.mean[k]) < 4.0 * se, r.estimator, " coordinate ", k);
    }
  }
}
