#include "anneal/particles.hpp"

#include <cmath>

#include "anneal/errors.hpp"

namespace anneal {

void CoolingSchedule::validate() const {
  if (phis.size() < 2) throw UsageError("schedule: need at least two temperatures");
  if (phis.front() != 0.0) throw UsageError("schedule: first temperature must be 0");
  if (phis.back() != 1.0) throw UsageError("schedule: last temperature must be 1");
  for (std::size_t t = 1; t < phis.size(); ++t) {
    if (!(phis[t] >= phis[t - 1])) {
      throw UsageError("schedule: temperatures decrease at index " + std::to_string(t));
    }
  }
}

std::string strategy_name(CoolingSchedule::Strategy s) {
  switch (s) {
    case CoolingSchedule::Strategy::linear:
      return "linear";
    case CoolingSchedule::Strategy::parametric:
      return "parametric";
    case CoolingSchedule::Strategy::cess:
      return "cess";
    case CoolingSchedule::Strategy::optimal:
      return "optimal";
    case CoolingSchedule::Strategy::fixed:
      return "fixed";
  }
  return "fixed";
}

CoolingSchedule::Strategy parse_strategy(const std::string& name) {
  using S = CoolingSchedule::Strategy;
  for (S s : {S::linear, S::parametric, S::cess, S::optimal, S::fixed}) {
    if (strategy_name(s) == name) return s;
  }
  throw ConfigError("unknown schedule strategy '" + name + "'");
}

bool ParticleCloud::uniform_weights() const noexcept {
  if (log_weights.empty()) return false;
  const double u = -std::log(static_cast<double>(log_weights.size()));
  for (double w : log_weights) {
    if (w != u) return false;
  }
  return true;
}

void ParticleCloud::validate() const {
  const auto n = log_weights.size();
  if (n < 2) throw UsageError("particle cloud: need at least two particles");
  if (static_cast<std::size_t>(positions.rows()) != n || log_prior.size() != n || log_lik.size() != n) {
    throw UsageError("particle cloud: inconsistent sizes");
  }
  const double total = logsumexp(log_weights);
  if (!(std::abs(total) <= 1e-9)) throw UsageError("particle cloud: weights are not normalized");
}

}  // namespace anneal
