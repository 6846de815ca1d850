#include "anneal/kernels.hpp"

#include <cmath>
#include <limits>

#include "anneal/errors.hpp"

namespace anneal {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

void factor_blocks(MwgState& st) {
  st.block_chols.clear();
  for (const auto& cov : st.block_covs) {
    auto c = cholesky_with_jitter(cov, "block proposal covariance");
    if (c.jitter > 0.0) ++st.jitter_events;
    st.block_chols.push_back(std::move(c.lower));
  }
}
}  // namespace

double MwgState::acceptance_rate(std::size_t b) const noexcept {
  if (b >= prop_counts.size() || prop_counts[b] == 0) return -1.0;
  return static_cast<double>(acc_counts[b]) / static_cast<double>(prop_counts[b]);
}

void MwgState::reset_tallies() {
  acc_counts.assign(blocks.size(), 0);
  prop_counts.assign(blocks.size(), 0);
}

MwgState initial_mwg_state(const Matrix& prior_cov, std::vector<BlockRange> blocks,
                           const MwgSettings& settings) {
  MwgState st;
  st.settings = settings;
  st.blocks = std::move(blocks);
  for (const auto& b : st.blocks) {
    const double scale = 2.38 * 2.38 / static_cast<double>(b.size());
    st.block_covs.push_back(scale * prior_cov.block(idx(b.begin), idx(b.begin), idx(b.size()), idx(b.size())));
  }
  factor_blocks(st);
  st.reset_tallies();
  return st;
}

MwgState adapt_covariances(const ParticleCloud& prev_cloud, const MwgState& state) {
  MwgState st;
  st.settings = state.settings;
  st.blocks = state.blocks;
  st.jitter_events = state.jitter_events;
  std::vector<double> w(prev_cloud.log_weights.begin(), prev_cloud.log_weights.end());
  normalize_log_weights(w);
  for (double& v : w) v = std::exp(v);

  for (std::size_t b = 0; b < st.blocks.size(); ++b) {
    const auto& r = st.blocks[b];
    const RowMatrix pts = prev_cloud.positions.middleCols(idx(r.begin), idx(r.size()));
    Matrix cov = weighted_moments(pts, w).gaussian.cov;
    if (!(cov.trace() > 0.0) || !cov.allFinite()) {
      // Collapsed block: keep the previous proposal scale rather than a zero matrix.
      cov = b < state.block_covs.size() ? state.block_covs[b]
                                        : Matrix(1e-8 * Matrix::Identity(idx(r.size()), idx(r.size())));
      ++st.jitter_events;
    }
    const double rate = state.acceptance_rate(b);
    if (rate > st.settings.rate_high) {
      cov *= st.settings.factor_up;
    } else if (rate >= 0.0 && rate < st.settings.rate_low) {
      cov *= st.settings.factor_down;
    }
    st.block_covs.push_back(std::move(cov));
  }
  factor_blocks(st);
  st.reset_tallies();
  return st;
}

double mh_log_accept(double log_current, double log_proposed) noexcept {
  if (std::isnan(log_proposed) || log_proposed == kNegInf) return kNegInf;
  if (log_current == kNegInf) return 0.0;
  return std::min(0.0, log_proposed - log_current);
}

MwgMove mwg_sweep(Rng& rng, const TemperedModel& m, const Vector& theta, double phi,
                  const MwgState& state) {
  const double lp = m.log_prior(theta);
  const double ll = lp == kNegInf ? kNegInf : m.log_likelihood(theta);
  return mwg_sweep(rng, m, theta, lp, ll, phi, state);
}

MwgMove mwg_sweep(Rng& rng, const TemperedModel& m, const Vector& theta, double log_prior,
                  double log_lik, double phi, const MwgState& state) {
  if (!(phi >= 0.0 && phi <= 1.0)) throw UsageError("mwg_sweep: phi outside [0, 1]");
  if (state.block_chols.size() != state.blocks.size()) {
    throw UsageError("mwg_sweep: state has no proposal covariances");
  }
  MwgMove mv{theta, log_prior, log_lik, std::vector<int>(state.blocks.size(), 0)};
  double current = temper(log_prior, log_lik, phi);
  if (std::isnan(current)) current = kNegInf;

  Vector proposal = theta;
  Vector z;
  for (int sweep = 0; sweep < state.settings.n_mcmc; ++sweep) {
    for (std::size_t b = 0; b < state.blocks.size(); ++b) {
      const auto& r = state.blocks[b];
      z.resize(idx(r.size()));
      standard_normals(rng, z);
      proposal = mv.theta;
      proposal.segment(idx(r.begin), idx(r.size())).noalias() +=
          state.block_chols[b].triangularView<Eigen::Lower>() * z;
      const double plp = m.log_prior(proposal);
      const double pll = (plp == kNegInf || std::isnan(plp)) ? kNegInf : m.log_likelihood(proposal);
      double target = temper(plp, pll, phi);
      if (std::isnan(target)) target = kNegInf;
      const double log_alpha = mh_log_accept(current, target);
      if (log_alpha == kNegInf) continue;
      if (log_alpha == 0.0 || std::log(rng.uniform()) < log_alpha) {
        mv.theta.swap(proposal);
        mv.log_prior = plp;
        mv.log_lik = pll;
        current = target;
        ++mv.accepted[b];
      }
    }
  }
  return mv;
}

Vector perfect_gaussian_kernel(Rng& rng, const GaussianLinearModel& m, double phi) {
  return mvn_sample(rng, perfect_mixing_params(m, phi));
}

}  // namespace anneal
