#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "anneal/kernels.hpp"
#include "anneal/models.hpp"
#include "anneal/particles.hpp"

namespace anneal {

enum class Resampling { multinomial, systematic };

struct SmcConfig {
  std::size_t n_particles = 100;
  /// Resample when ESS < fraction * N. 1.0 resamples at every step.
  double ess_threshold_fraction = 0.5;
  CoolingSchedule schedule;
  /// When set, phi_t is chosen online so that CESS = fraction * N and
  /// `schedule` is ignored.
  std::optional<double> cess_fraction;
  std::size_t max_iterations = 10000;  // cap for online schedules
  KernelConfig kernel = MwgSettings{};
  Resampling resampling = Resampling::multinomial;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RunTrace {
  std::vector<ParticleCloud> clouds;  // after mutation, one per iteration
  std::vector<bool> resampled;
  std::vector<double> log_Z_increments;  // T - 1 entries
  std::vector<double> acceptance;        // mean block acceptance per iteration, 1 for t = 1
  CoolingSchedule schedule;
  std::uint64_t seed = 0;

  std::size_t iterations() const noexcept { return clouds.size(); }
  void validate() const;
};

/// 1 / sum W^2 for normalized log-weights.
double ess(std::span<const double> log_weights);

/// (sum W w)^2 / (sum W w^2 / N), from normalized previous log-weights and
/// incremental log-weights. Throws DomainError if every increment is -inf.
double cess(std::span<const double> prev_log_weights, std::span<const double> inc_log_weights);

/// (phi_next - phi) * log p(y | theta_m) per particle.
std::vector<double> incremental_logweights(const ParticleCloud& cloud, double phi_next);

/// Ancestor indices drawn i.i.d. from the normalized weights.
std::vector<std::size_t> multinomial_indices(Rng& rng, std::span<const double> log_weights,
                                             std::size_t count);
std::vector<std::size_t> systematic_indices(Rng& rng, std::span<const double> log_weights,
                                            std::size_t count);

/// Copies the selected particles; the result has uniform weights.
ParticleCloud select(const ParticleCloud& cloud, std::span<const std::size_t> indices);
ParticleCloud resample_multinomial(Rng& rng, const ParticleCloud& cloud);
ParticleCloud resample_systematic(Rng& rng, const ParticleCloud& cloud);

/// Cloud of N prior draws with uniform weights at phi = 0.
ParticleCloud initial_cloud(const TemperedModel& m, std::size_t n, std::uint64_t seed);

RunTrace smc_run(const TemperedModel& m, const SmcConfig& cfg);

double log_evidence(const RunTrace& trace);

/// sum_m W_T^m f(theta_T^m) over the final cloud.
Vector posterior_expectation(const RunTrace& trace, const std::function<Vector(const Vector&)>& f);

}  // namespace anneal
