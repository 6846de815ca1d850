#pragma once

#include <cstddef>
#include <memory>
#include <variant>
#include <vector>

#include "anneal/models.hpp"
#include "anneal/particles.hpp"

namespace anneal {

/// Settings of the adaptive Metropolis-within-Gibbs kernel.
struct MwgSettings {
  int n_mcmc = 5;            // sweeps per mutation
  std::size_t blocks = 0;    // 0: the model's own partition
  double rate_high = 0.7;
  double rate_low = 0.2;
  double factor_up = 5.0;
  double factor_down = 0.2;
};

/// Independent draws from the exact tempered target; linear-Gaussian model only.
struct PerfectMixing {};

using KernelConfig = std::variant<MwgSettings, PerfectMixing>;

/// Per-iteration proposal covariances plus the acceptance tallies that drive
/// the next rescaling.
struct MwgState {
  MwgSettings settings;
  std::vector<BlockRange> blocks;
  std::vector<Matrix> block_covs;
  std::vector<Matrix> block_chols;
  std::vector<long> acc_counts;
  std::vector<long> prop_counts;
  std::size_t jitter_events = 0;

  /// Pooled acceptance rate of block b, or -1 with no proposals yet.
  double acceptance_rate(std::size_t b) const noexcept;
  void reset_tallies();
};

/// Starting state before any cloud exists: the prior covariance restricted to
/// each block, scaled by 2.38^2 / dim_b.
MwgState initial_mwg_state(const Matrix& prior_cov, std::vector<BlockRange> blocks,
                           const MwgSettings& settings);

/// Sigma_b = weighted covariance of the block coordinates of prev_cloud,
/// multiplied by factor_up / factor_down when the acceptance rate recorded in
/// `state` lies above rate_high / below rate_low. Tallies are reset.
MwgState adapt_covariances(const ParticleCloud& prev_cloud, const MwgState& state);

/// log of the Metropolis acceptance probability, min(0, proposed - current).
/// A -inf proposal is always rejected; NaN counts as -inf.
double mh_log_accept(double log_current, double log_proposed) noexcept;

struct MwgMove {
  Vector theta;
  double log_prior = 0.0;
  double log_lik = 0.0;
  std::vector<int> accepted;  // per block, summed over sweeps
};

/// n_mcmc sweeps over the blocks in order, each a Gaussian random-walk
/// proposal for one block with the others held at their current values.
MwgMove mwg_sweep(Rng& rng, const TemperedModel& m, const Vector& theta, double phi,
                  const MwgState& state);
/// Same, reusing cached densities at theta.
MwgMove mwg_sweep(Rng& rng, const TemperedModel& m, const Vector& theta, double log_prior,
                  double log_lik, double phi, const MwgState& state);

/// Draw from N(mu_phi, Sigma_phi) of perfect_mixing_params, independent of the
/// current particle.
Vector perfect_gaussian_kernel(Rng& rng, const GaussianLinearModel& m, double phi);

}  // namespace anneal
