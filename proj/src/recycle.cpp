#include "anneal/recycle.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "anneal/errors.hpp"
#include "anneal/simd.hpp"

namespace anneal {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> normalized_from_logs(std::vector<double> logs, const char* who) {
  const double total = logsumexp(logs);
  if (!std::isfinite(total)) throw DomainError(std::string(who) + ": every collection has zero weight");
  for (double& v : logs) v = std::exp(v - total);
  return logs;
}

WeightedSample pooled(const UniformizedHistory& hist, const std::vector<std::size_t>& omega) {
  std::size_t total = 0;
  for (auto k : omega) total += static_cast<std::size_t>(hist.points[k].rows());
  WeightedSample ws;
  ws.points.resize(static_cast<Eigen::Index>(total), hist.points.front().cols());
  ws.log_weights.reserve(total);
  Eigen::Index row = 0;
  for (auto k : omega) {
    ws.points.middleRows(row, hist.points[k].rows()) = hist.points[k];
    row += hist.points[k].rows();
  }
  return ws;
}

double finish(WeightedSample& ws, const char* who) {
  const double total = normalize_log_weights(ws.log_weights);
  if (!std::isfinite(total)) throw DomainError(std::string(who) + ": all pooled weights vanish");
  return ess(ws.log_weights);
}
}  // namespace

UniformizedHistory uniformize(const RunTrace& trace, std::optional<std::uint64_t> seed) {
  trace.validate();
  const std::uint64_t s = seed.value_or(trace.seed);
  UniformizedHistory h;
  double log_z = 0.0;
  std::size_t total = 0;
  for (std::size_t t = 0; t < trace.iterations(); ++t) {
    const auto& cloud = trace.clouds[t];
    if (t > 0) log_z += trace.log_Z_increments[t - 1];
    if (cloud.uniform_weights()) {
      h.points.push_back(cloud.positions);
      h.log_prior.push_back(cloud.log_prior);
      h.log_lik.push_back(cloud.log_lik);
    } else {
      auto rng = Rng::stream(s, StreamTag::uniformize, t);
      auto r = resample_multinomial(rng, cloud);
      h.points.push_back(std::move(r.positions));
      h.log_prior.push_back(std::move(r.log_prior));
      h.log_lik.push_back(std::move(r.log_lik));
    }
    h.phis.push_back(cloud.phi);
    h.log_Z.push_back(log_z);
    total += cloud.size();
  }
  for (const auto& p : h.points) {
    h.proportions.push_back(static_cast<double>(p.rows()) / static_cast<double>(total));
  }
  return h;
}

std::vector<double> ess_correction_logweights(const UniformizedHistory& hist, std::size_t k) {
  if (k >= hist.iterations()) throw UsageError("ess_correction_logweights: iteration out of range");
  const double expo = 1.0 - hist.phis[k];
  const auto& ll = hist.log_lik[k];
  std::vector<double> out(ll.size(), 0.0);
  if (expo == 0.0) return out;
  for (std::size_t i = 0; i < ll.size(); ++i) {
    out[i] = hist.log_prior[k][i] == kNegInf ? kNegInf : expo * ll[i];
    if (std::isnan(out[i])) out[i] = kNegInf;
  }
  return out;
}

std::vector<double> lambda_naive(const std::vector<std::vector<double>>& log_weights) {
  if (log_weights.empty()) throw UsageError("lambda_naive: no collections");
  std::vector<double> logs;
  for (const auto& w : log_weights) logs.push_back(w.empty() ? kNegInf : logsumexp(w));
  return normalized_from_logs(std::move(logs), "lambda_naive");
}

std::vector<double> lambda_optimal(const std::vector<std::vector<double>>& log_weights) {
  if (log_weights.empty()) throw UsageError("lambda_optimal: no collections");
  std::vector<double> logs;
  for (const auto& w : log_weights) {
    if (w.empty() || !std::isfinite(simd::max(w))) {
      logs.push_back(kNegInf);
      continue;
    }
    // log ESS = 2 logsumexp(w) - logsumexp(2w)
    std::vector<double> twice(w.size());
    simd::affine(0.0, 2.0, w, twice);
    logs.push_back(2.0 * logsumexp(w) - logsumexp(twice));
  }
  return normalized_from_logs(std::move(logs), "lambda_optimal");
}

std::string lambda_rule_name(LambdaRule r) { return r == LambdaRule::naive ? "naive" : "optimal"; }

RecycledSample recycle_ess(const UniformizedHistory& hist, LambdaRule rule,
                           std::vector<std::size_t> omega) {
  if (hist.iterations() == 0) throw UsageError("recycle_ess: empty history");
  if (omega.empty()) {
    omega.resize(hist.iterations());
    std::iota(omega.begin(), omega.end(), std::size_t{0});
  }
  std::vector<std::vector<double>> lw;
  for (auto k : omega) {
    if (k >= hist.iterations()) throw UsageError("recycle_ess: omega index out of range");
    lw.push_back(ess_correction_logweights(hist, k));
  }
  RecycledSample out;
  out.lambda = rule == LambdaRule::naive ? lambda_naive(lw) : lambda_optimal(lw);
  out.sample = pooled(hist, omega);
  for (std::size_t j = 0; j < omega.size(); ++j) {
    const double total = logsumexp(lw[j]);
    const double log_lambda = std::log(out.lambda[j]);
    for (double w : lw[j]) {
      out.sample.log_weights.push_back(std::isfinite(total) && out.lambda[j] > 0.0
                                           ? log_lambda + w - total
                                           : kNegInf);
    }
  }
  out.pooled_ess = finish(out.sample, "recycle_ess");
  out.omega = std::move(omega);
  return out;
}

RecycledSample recycle_demix(const UniformizedHistory& hist) {
  const auto T = hist.iterations();
  if (T == 0) throw UsageError("recycle_demix: empty history");
  RecycledSample out;
  out.omega.resize(T);
  std::iota(out.omega.begin(), out.omega.end(), std::size_t{0});
  out.sample = pooled(hist, out.omega);

  std::vector<double> offset(T);  // log c_n - log Z_n
  for (std::size_t n = 0; n < T; ++n) offset[n] = std::log(hist.proportions[n]) - hist.log_Z[n];
  std::vector<double> terms(T);
  for (std::size_t k = 0; k < T; ++k) {
    for (std::size_t i = 0; i < hist.log_lik[k].size(); ++i) {
      const double ll = hist.log_lik[k][i];
      if (hist.log_prior[k][i] == kNegInf || std::isnan(ll)) {
        out.sample.log_weights.push_back(kNegInf);
        ++out.zero_denominators;
        continue;
      }
      // The prior is common to numerator and every mixture component.
      for (std::size_t n = 0; n < T; ++n) {
        terms[n] = offset[n] + (hist.phis[n] == 0.0 ? 0.0 : hist.phis[n] * ll);
      }
      const double denom = logsumexp(terms);
      if (!std::isfinite(denom)) {
        out.sample.log_weights.push_back(kNegInf);
        ++out.zero_denominators;
        continue;
      }
      out.sample.log_weights.push_back(ll - denom);
    }
  }
  out.pooled_ess = finish(out.sample, "recycle_demix");
  return out;
}

Vector weighted_expectation(const WeightedSample& ws, const std::function<Vector(const Vector&)>& f) {
  if (ws.log_weights.empty()) throw UsageError("weighted_expectation: empty sample");
  Vector acc;
  for (std::size_t i = 0; i < ws.log_weights.size(); ++i) {
    const Vector v = f(ws.points.row(static_cast<Eigen::Index>(i)).transpose());
    if (i == 0) acc = Vector::Zero(v.size());
    const double w = std::exp(ws.log_weights[i]);
    if (w > 0.0) acc.noalias() += w * v;
  }
  return acc;
}

RecycleReport recycled_estimate_ess(const UniformizedHistory& hist,
                                    const std::function<Vector(const Vector&)>& f, LambdaRule rule,
                                    std::vector<std::size_t> omega) {
  RecycleReport r;
  r.estimator = "ess_" + lambda_rule_name(rule);
  r.detail = recycle_ess(hist, rule, std::move(omega));
  r.estimate = weighted_expectation(r.detail.sample, f);
  return r;
}

RecycleReport demix_estimate(const UniformizedHistory& hist,
                             const std::function<Vector(const Vector&)>& f) {
  RecycleReport r;
  r.estimator = "demix";
  r.detail = recycle_demix(hist);
  r.estimate = weighted_expectation(r.detail.sample, f);
  return r;
}

}  // namespace anneal
