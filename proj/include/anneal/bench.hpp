#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "anneal/models.hpp"
#include "anneal/recycle.hpp"
#include "anneal/schedule.hpp"
#include "anneal/smc.hpp"

namespace anneal {

// ---------------------------------------------------------------------------
// Ground truth for the marginal-distribution metric.

/// Piecewise-linear CDF through (x_i, F_i); 0 below the first node and 1 above
/// the last.
struct TabulatedCdf {
  std::vector<double> x;
  std::vector<double> F;

  double operator()(double v) const;
  /// Smallest node with F >= p.
  double quantile(double p) const;
};

struct GridSpec {
  double lo = -15.0;
  double hi = 15.0;
  std::size_t resolution = 2000;  // nodes per axis
};

/// Marginal CDF of theta_axis for the 2-parameter Student-t model, by
/// trapezoidal integration of the unnormalized posterior over a square grid.
/// Throws DomainError when the grid holds less than 0.999 of the evidence
/// estimated by prior importance sampling (allowing three standard errors).
TabulatedCdf grid_marginal_cdf(const StudentTModel& m, std::size_t axis, const GridSpec& grid = {},
                               std::size_t is_draws = 200000, std::uint64_t is_seed = 1);

struct GridIntegral {
  double log_mass = 0.0;   // log of the trapezoidal integral of prior x likelihood
  Vector mean;             // posterior mean on the grid
};
GridIntegral grid_posterior(const StudentTModel& m, const GridSpec& grid = {});

/// Marginal N(mean_axis, cov_axis) tabulated on `nodes` points over +-10 sd.
TabulatedCdf gaussian_marginal_cdf(const Gaussian& g, std::size_t axis, std::size_t nodes = 4001);

/// sup |F_N - F| with F_N the weighted empirical CDF of `values`, taken over
/// the grid nodes and both one-sided limits at every sample point. Empty
/// log_weights means equal weights.
double ks_distance(std::span<const double> values, std::span<const double> log_weights,
                   const TabulatedCdf& truth);

// ---------------------------------------------------------------------------
// Experiment harness.

struct ScheduleSpec {
  CoolingSchedule::Strategy strategy = CoolingSchedule::Strategy::linear;
  double gamma = 0.0;                 // parametric
  double cess_target = 0.9;           // cess, fraction of N
  std::vector<double> phis;           // fixed
  ApproxOptions approximation;        // optimal

  std::string label() const;
};

enum class Estimator { none, ess_naive, ess_optimal, demix };
std::string estimator_name(Estimator e);
Estimator parse_estimator(const std::string& name);

struct ExperimentConfig {
  int schema_version = 1;
  std::string name = "experiment";
  ModelInstance model;
  std::size_t particles = 100;
  std::size_t iterations = 25;  // T for fixed-length schedules
  std::vector<ScheduleSpec> schedules;
  KernelConfig kernel = MwgSettings{};
  double ess_threshold = 0.5;
  Resampling resampling = Resampling::multinomial;
  std::vector<Estimator> estimators{Estimator::none};
  std::size_t replicates = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::optional<Vector> true_mean;       // default: analytic where available
  std::optional<std::size_t> ks_axis;    // marginal compared by KS distance
  GridSpec grid;
  std::string output = "results";

  void validate() const;
};

/// One (schedule, estimator) pair: per-replicate values plus their summary.
struct MetricsRow {
  std::string experiment;
  std::string schedule;
  double schedule_parameter = 0.0;  // gamma or CESS fraction; gamma* for optimal
  std::string estimator;
  std::vector<std::uint64_t> seeds;
  std::vector<bool> ok;
  std::vector<std::string> errors;
  std::vector<double> log_evidence;
  std::vector<double> sq_error;  // NaN when no truth is available
  std::vector<double> ks;        // NaN when no KS axis is configured
  std::vector<double> wall_seconds;
  std::vector<std::size_t> iterations;

  // Summary over successful replicates.
  std::size_t failures = 0;
  double log_evidence_mean = 0.0;
  double log_evidence_var = 0.0;
  double evidence_var = 0.0;  // variance of exp(log evidence)
  double mse = 0.0;
  double ks_mean = 0.0;
  double ks_std = 0.0;
  double wall_mean = 0.0;

  void summarize();
};

/// Runs every schedule for replicates r = 1..R with seed root + r (shared by
/// all schedules, so comparisons are paired). Output is independent of the
/// thread count.
std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg);

/// Reruns replicate `replicate` (0-based) of schedule `schedule_index` and
/// returns its full trace; identical to the run inside run_experiment.
RunTrace run_replicate(const ExperimentConfig& cfg, std::size_t schedule_index, std::size_t replicate);

/// Resolves a schedule spec into phis (running the approximation and gamma
/// search for the optimal strategy). nullopt for online CESS schedules.
std::optional<CoolingSchedule> resolve_schedule(const ScheduleSpec& spec, const TemperedModel& m,
                                                std::size_t T);

enum class OutputFormat { csv, json };

/// Writes <dir>/<stem>_summary.{csv,json} and <dir>/<stem>_replicates.{csv,json}.
/// Floats use 17 significant digits. Returns the two paths.
std::vector<std::filesystem::path> emit(const std::vector<MetricsRow>& rows, OutputFormat format,
                                        const std::filesystem::path& dir, const std::string& stem);

/// Column names of the summary and per-replicate CSV files, in order.
const std::vector<std::string>& summary_columns();
const std::vector<std::string>& replicate_columns();

}  // namespace anneal
