#include "anneal/smc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "anneal/errors.hpp"
#include "anneal/schedule.hpp"
#include "anneal/simd.hpp"

namespace anneal {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> linear_weights(std::span<const double> log_weights, double& total) {
  std::vector<double> w(log_weights.size());
  const double shift = simd::max(log_weights);
  if (!std::isfinite(shift)) throw NumericError("resampling: no particle has positive weight");
  simd::exp_shifted(log_weights, shift, w);
  total = 0.0;
  for (double& v : w) {
    total += v;
    v = total;  // running sum
  }
  return w;
}

MwgState mwg_start(const TemperedModel& m, const MwgSettings& s) {
  MwgState st;
  st.settings = s;
  st.blocks = s.blocks == 0 ? m.blocks : even_blocks(m.dim, s.blocks);
  st.reset_tallies();
  return st;
}
}  // namespace

void SmcConfig::validate() const {
  if (n_particles < 2) throw UsageError("SmcConfig: need at least two particles");
  if (!(ess_threshold_fraction > 0.0 && ess_threshold_fraction <= 1.0)) {
    throw UsageError("SmcConfig: ess_threshold_fraction must lie in (0, 1]");
  }
  if (cess_fraction) {
    if (!(*cess_fraction > 0.0 && *cess_fraction < 1.0)) {
      throw UsageError("SmcConfig: cess_fraction must lie in (0, 1)");
    }
  } else {
    schedule.validate();
  }
  if (const auto* mwg = std::get_if<MwgSettings>(&kernel); mwg && mwg->n_mcmc < 1) {
    throw UsageError("SmcConfig: n_mcmc must be at least 1");
  }
}

void RunTrace::validate() const {
  const auto t = clouds.size();
  if (t == 0 || resampled.size() != t || log_Z_increments.size() + 1 != t || schedule.size() != t) {
    throw UsageError("RunTrace: inconsistent lengths");
  }
  for (double z : log_Z_increments) {
    if (!std::isfinite(z)) throw UsageError("RunTrace: non-finite evidence increment");
  }
}

double ess(std::span<const double> log_weights) {
  if (log_weights.empty()) throw UsageError("ess: empty weights");
  return 1.0 / simd::sum_exp(log_weights, 2.0, 0.0);
}

double cess(std::span<const double> prev_log_weights, std::span<const double> inc_log_weights) {
  const auto n = prev_log_weights.size();
  if (n == 0 || inc_log_weights.size() != n) throw UsageError("cess: size mismatch");
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = prev_log_weights[i] + inc_log_weights[i];
    b[i] = a[i] + inc_log_weights[i];
  }
  const double ma = simd::max(a);
  if (!std::isfinite(ma)) throw DomainError("cess: every incremental weight is zero");
  // Scale both sums by exp(-ma) and exp(-2 ma); the ratio is unchanged.
  const double num = simd::sum_exp(a, 1.0, ma);
  const double den = simd::sum_exp(b, 1.0, 2.0 * ma);
  return static_cast<double>(n) * num * num / den;
}

std::vector<double> incremental_logweights(const ParticleCloud& cloud, double phi_next) {
  const double dphi = phi_next - cloud.phi;
  if (!(dphi >= 0.0)) throw UsageError("incremental_logweights: phi_next below current phi");
  std::vector<double> out(cloud.log_lik.size(), 0.0);
  if (dphi == 0.0) return out;
  simd::affine(0.0, dphi, cloud.log_lik, out);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (std::isnan(out[i]) || cloud.log_lik[i] == kNegInf) out[i] = kNegInf;
  }
  return out;
}

std::vector<std::size_t> multinomial_indices(Rng& rng, std::span<const double> log_weights,
                                             std::size_t count) {
  double total = 0.0;
  const auto cum = linear_weights(log_weights, total);
  std::vector<std::size_t> out(count);
  for (auto& k : out) {
    const double u = rng.uniform() * total;
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    k = std::min(static_cast<std::size_t>(it - cum.begin()), cum.size() - 1);
  }
  return out;
}

std::vector<std::size_t> systematic_indices(Rng& rng, std::span<const double> log_weights,
                                            std::size_t count) {
  double total = 0.0;
  const auto cum = linear_weights(log_weights, total);
  std::vector<std::size_t> out(count);
  const double u0 = rng.uniform();
  std::size_t j = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double u = (u0 + static_cast<double>(k)) / static_cast<double>(count) * total;
    while (j + 1 < cum.size() && !(cum[j] > u)) ++j;
    out[k] = j;
  }
  return out;
}

ParticleCloud select(const ParticleCloud& cloud, std::span<const std::size_t> indices) {
  const auto n = indices.size();
  ParticleCloud out;
  out.positions.resize(static_cast<Eigen::Index>(n), cloud.positions.cols());
  out.log_prior.resize(n);
  out.log_lik.resize(n);
  out.log_weights.assign(n, -std::log(static_cast<double>(n)));
  out.phi = cloud.phi;
  out.iteration = cloud.iteration;
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = indices[i];
    out.positions.row(static_cast<Eigen::Index>(i)) = cloud.positions.row(static_cast<Eigen::Index>(k));
    out.log_prior[i] = cloud.log_prior[k];
    out.log_lik[i] = cloud.log_lik[k];
  }
  return out;
}

ParticleCloud resample_multinomial(Rng& rng, const ParticleCloud& cloud) {
  const auto idx = multinomial_indices(rng, cloud.log_weights, cloud.size());
  return select(cloud, idx);
}

ParticleCloud resample_systematic(Rng& rng, const ParticleCloud& cloud) {
  const auto idx = systematic_indices(rng, cloud.log_weights, cloud.size());
  return select(cloud, idx);
}

ParticleCloud initial_cloud(const TemperedModel& m, std::size_t n, std::uint64_t seed) {
  ParticleCloud c;
  c.positions.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m.dim));
  c.log_prior.resize(n);
  c.log_lik.resize(n);
  c.log_weights.assign(n, -std::log(static_cast<double>(n)));
  c.phi = 0.0;
  c.iteration = 1;
  auto rng = Rng::stream(seed, StreamTag::prior_init);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector th = m.sample_prior(rng);
    c.positions.row(static_cast<Eigen::Index>(i)) = th.transpose();
    c.log_prior[i] = m.log_prior(th);
    c.log_lik[i] = m.log_likelihood(th);
  }
  return c;
}

RunTrace smc_run(const TemperedModel& m, const SmcConfig& cfg) {
  m.validate();
  cfg.validate();
  const auto n = cfg.n_particles;
  const double threshold = cfg.ess_threshold_fraction * static_cast<double>(n);

  RunTrace trace;
  trace.seed = cfg.seed;
  trace.schedule = cfg.schedule;
  if (cfg.cess_fraction) {
    trace.schedule.phis = {0.0};
    trace.schedule.strategy = CoolingSchedule::Strategy::cess;
    trace.schedule.parameter = *cfg.cess_fraction;
  }

  const auto* mwg = std::get_if<MwgSettings>(&cfg.kernel);
  if (!mwg && !m.gaussian) {
    throw UsageError("smc_run: the perfect-mixing kernel needs the linear-Gaussian model");
  }
  MwgState state;
  if (mwg) state = mwg_start(m, *mwg);

  ParticleCloud cloud = initial_cloud(m, n, cfg.seed);
  trace.clouds.push_back(cloud);
  trace.resampled.push_back(false);
  trace.acceptance.push_back(1.0);

  for (std::size_t t = 2;; ++t) {
    double phi_next = 0.0;
    if (cfg.cess_fraction) {
      if (cloud.phi >= 1.0) break;
      if (t > cfg.max_iterations) {
        throw NumericError("smc_run: online schedule did not reach phi = 1 within " +
                           std::to_string(cfg.max_iterations) + " iterations");
      }
      phi_next = cess_next_phi(cloud, *cfg.cess_fraction * static_cast<double>(n));
      trace.schedule.phis.push_back(phi_next);
    } else {
      if (t > cfg.schedule.size()) break;
      phi_next = cfg.schedule.phis[t - 1];
    }

    if (mwg) state = adapt_covariances(cloud, state);

    const auto inc = incremental_logweights(cloud, phi_next);
    for (std::size_t i = 0; i < n; ++i) cloud.log_weights[i] += inc[i];
    const double log_inc = logsumexp(cloud.log_weights);
    if (!std::isfinite(log_inc)) {
      throw NumericError("smc_run: every particle weight vanished at iteration " + std::to_string(t));
    }
    for (double& w : cloud.log_weights) w -= log_inc;
    trace.log_Z_increments.push_back(log_inc);
    cloud.phi = phi_next;
    cloud.iteration = t;

    const bool resample = ess(cloud.log_weights) < threshold;
    if (resample) {
      auto rng = Rng::stream(cfg.seed, StreamTag::resample, t);
      cloud = cfg.resampling == Resampling::multinomial ? resample_multinomial(rng, cloud)
                                                        : resample_systematic(rng, cloud);
    }
    trace.resampled.push_back(resample);

    if (mwg) {
      long accepted = 0;
      for (std::size_t i = 0; i < n; ++i) {
        auto rng = Rng::stream(cfg.seed, StreamTag::mutation, t, i);
        const auto row = static_cast<Eigen::Index>(i);
        auto mv = mwg_sweep(rng, m, cloud.positions.row(row).transpose(), cloud.log_prior[i],
                            cloud.log_lik[i], phi_next, state);
        cloud.positions.row(row) = mv.theta.transpose();
        cloud.log_prior[i] = mv.log_prior;
        cloud.log_lik[i] = mv.log_lik;
        for (std::size_t b = 0; b < mv.accepted.size(); ++b) {
          state.acc_counts[b] += mv.accepted[b];
          state.prop_counts[b] += mwg->n_mcmc;
          accepted += mv.accepted[b];
        }
      }
      trace.acceptance.push_back(static_cast<double>(accepted) /
                                 static_cast<double>(n * state.blocks.size() * mwg->n_mcmc));
    } else {
      const FactoredGaussian target(perfect_mixing_params(*m.gaussian, phi_next));
      for (std::size_t i = 0; i < n; ++i) {
        auto rng = Rng::stream(cfg.seed, StreamTag::mutation, t, i);
        const Vector th = target.sample(rng);
        const auto row = static_cast<Eigen::Index>(i);
        cloud.positions.row(row) = th.transpose();
        cloud.log_prior[i] = m.log_prior(th);
        cloud.log_lik[i] = m.log_likelihood(th);
      }
      trace.acceptance.push_back(1.0);
    }
    trace.clouds.push_back(cloud);
  }
  return trace;
}

double log_evidence(const RunTrace& trace) {
  double s = 0.0;
  for (double z : trace.log_Z_increments) s += z;
  return s;
}

Vector posterior_expectation(const RunTrace& trace, const std::function<Vector(const Vector&)>& f) {
  if (trace.clouds.empty()) throw UsageError("posterior_expectation: empty trace");
  const auto& c = trace.clouds.back();
  Vector acc;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double w = std::exp(c.log_weights[i]);
    const Vector v = f(c.positions.row(static_cast<Eigen::Index>(i)).transpose());
    if (i == 0) acc = Vector::Zero(v.size());
    if (w > 0.0) acc.noalias() += w * v;
  }
  return acc;
}

}  // namespace anneal
