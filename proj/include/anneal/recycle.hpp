#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "anneal/smc.hpp"

namespace anneal {

/// Unweighted collections, one per iteration, each approximately distributed
/// as its tempered target.
struct UniformizedHistory {
  std::vector<RowMatrix> points;
  std::vector<std::vector<double>> log_prior;
  std::vector<std::vector<double>> log_lik;
  std::vector<double> phis;
  std::vector<double> log_Z;       // cumulative log evidence estimate, 0 at the first iteration
  std::vector<double> proportions; // c_t = N_t / sum N

  std::size_t iterations() const noexcept { return points.size(); }
};

/// Clouds with exactly uniform weights are reused as they are; the others are
/// multinomially resampled with a stream derived from `seed` (default: the
/// trace seed).
UniformizedHistory uniformize(const RunTrace& trace, std::optional<std::uint64_t> seed = {});

/// log p(y | x)^{1 - phi_k} for every point of collection k (0-based).
std::vector<double> ess_correction_logweights(const UniformizedHistory& hist, std::size_t k);

/// lambda_k proportional to the sum of the collection's correction weights.
std::vector<double> lambda_naive(const std::vector<std::vector<double>>& log_weights);
/// lambda_k proportional to the ESS of the collection's correction weights.
std::vector<double> lambda_optimal(const std::vector<std::vector<double>>& log_weights);

enum class LambdaRule { naive, optimal };
std::string lambda_rule_name(LambdaRule r);

/// A pooled weighted point set together with how it was built.
struct RecycledSample {
  WeightedSample sample;                 // normalized log-weights
  std::vector<std::size_t> omega;        // collections used (0-based)
  std::vector<double> lambda;            // per collection in omega; empty for DeMix
  std::size_t zero_denominators = 0;     // DeMix points dropped
  double pooled_ess = 0.0;
};

/// sum_{k in omega} lambda_k * (self-normalized correction-weighted collection k).
/// Empty omega means every collection.
RecycledSample recycle_ess(const UniformizedHistory& hist, LambdaRule rule,
                           std::vector<std::size_t> omega = {});

/// All collections pooled with deterministic-mixture weights
/// p(y|x) / sum_n c_n p(y|x)^{phi_n} / Z_n.
RecycledSample recycle_demix(const UniformizedHistory& hist);

/// sum_i W_i f(x_i).
Vector weighted_expectation(const WeightedSample& ws, const std::function<Vector(const Vector&)>& f);

struct RecycleReport {
  std::string estimator;
  Vector estimate;
  RecycledSample detail;
};

RecycleReport recycled_estimate_ess(const UniformizedHistory& hist,
                                    const std::function<Vector(const Vector&)>& f, LambdaRule rule,
                                    std::vector<std::size_t> omega = {});
RecycleReport demix_estimate(const UniformizedHistory& hist,
                             const std::function<Vector(const Vector&)>& f);

}  // namespace anneal
