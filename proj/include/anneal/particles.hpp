#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "anneal/numutil.hpp"

namespace anneal {

/// Tempering exponents phi_1 = 0 <= ... <= phi_T = 1 and how they were chosen.
struct CoolingSchedule {
  enum class Strategy { linear, parametric, cess, optimal, fixed };

  std::vector<double> phis;
  Strategy strategy = Strategy::fixed;
  /// gamma for parametric/optimal, the CESS fraction for cess, unused otherwise.
  double parameter = 0.0;

  std::size_t size() const noexcept { return phis.size(); }
  /// Throws UsageError unless T >= 2, phi_1 = 0, phi_T = 1 and non-decreasing.
  void validate() const;
};

std::string strategy_name(CoolingSchedule::Strategy s);
CoolingSchedule::Strategy parse_strategy(const std::string& name);

/// N weighted particles targeting pi_phi. Per-particle log-prior and
/// log-likelihood are cached so reweighting and recycling never re-evaluate
/// the model.
struct ParticleCloud {
  RowMatrix positions;              // N x d
  std::vector<double> log_weights;  // normalized
  std::vector<double> log_prior;
  std::vector<double> log_lik;
  double phi = 0.0;
  std::size_t iteration = 0;        // 1-based

  std::size_t size() const noexcept { return log_weights.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(positions.cols()); }
  /// True when every log-weight equals -log N exactly.
  bool uniform_weights() const noexcept;
  void validate() const;
};

}  // namespace anneal
