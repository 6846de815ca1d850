#include "anneal/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "anneal/errors.hpp"
#include "json.hpp"

namespace anneal {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> grid_nodes(const GridSpec& g) {
  if (g.resolution < 3 || !(g.hi > g.lo)) throw UsageError("grid: need hi > lo and at least 3 nodes");
  std::vector<double> x(g.resolution);
  const double h = (g.hi - g.lo) / static_cast<double>(g.resolution - 1);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = g.lo + h * static_cast<double>(i);
  x.back() = g.hi;
  return x;
}

// log of the trapezoidal marginal density (unnormalized) at each node along
// `axis`, integrating the other coordinate.
std::vector<double> log_marginal(const TemperedModel& t, std::size_t axis, const std::vector<double>& x) {
  const double h = x[1] - x[0];
  std::vector<double> logw(x.size(), std::log(h));
  logw.front() = logw.back() = std::log(0.5 * h);
  std::vector<double> out(x.size()), row(x.size());
  Vector th(2);
  for (std::size_t i = 0; i < x.size(); ++i) {
    th[static_cast<Eigen::Index>(axis)] = x[i];
    for (std::size_t j = 0; j < x.size(); ++j) {
      th[static_cast<Eigen::Index>(1 - axis)] = x[j];
      row[j] = tempered_logdensity(t, th, 1.0) + logw[j];
    }
    out[i] = logsumexp(row);
  }
  return out;
}

double log_trapezoid(const std::vector<double>& logp, double h) {
  std::vector<double> v(logp);
  for (double& e : v) e += std::log(h);
  v.front() += std::log(0.5);
  v.back() += std::log(0.5);
  return logsumexp(v);
}

TemperedModel student_target(const StudentTModel& m) {
  if (m.H.cols() != 2) throw UsageError("grid integration needs a 2-parameter model");
  return to_tempered(std::make_shared<const StudentTModel>(m));
}

double sample_mean(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  long double s = 0;
  for (double x : v) s += x;
  return static_cast<double>(s / v.size());
}

double sample_var(const std::vector<double>& v) {
  if (v.size() < 2) return v.empty() ? kNaN : 0.0;
  const double m = sample_mean(v);
  long double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return static_cast<double>(s / (v.size() - 1));
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
}  // namespace

// ---------------------------------------------------------------------------

double TabulatedCdf::operator()(double v) const {
  if (x.empty()) throw UsageError("TabulatedCdf: empty table");
  if (v < x.front()) return 0.0;
  if (v >= x.back()) return 1.0;
  const auto it = std::upper_bound(x.begin(), x.end(), v);
  const auto i = static_cast<std::size_t>(it - x.begin());
  const double t = (v - x[i - 1]) / (x[i] - x[i - 1]);
  return F[i - 1] + t * (F[i] - F[i - 1]);
}

double TabulatedCdf::quantile(double p) const {
  const auto it = std::lower_bound(F.begin(), F.end(), p);
  if (it == F.end()) return x.back();
  return x[static_cast<std::size_t>(it - F.begin())];
}

GridIntegral grid_posterior(const StudentTModel& m, const GridSpec& grid) {
  const auto t = student_target(m);
  const auto x = grid_nodes(grid);
  const double h = x[1] - x[0];
  GridIntegral out;
  out.mean = Vector::Zero(2);
  for (std::size_t axis = 0; axis < 2; ++axis) {
    const auto lp = log_marginal(t, axis, x);
    const double lz = log_trapezoid(lp, h);
    if (axis == 0) out.log_mass = lz;
    std::vector<double> f(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) f[i] = x[i] * std::exp(lp[i] - lz);
    double s = 0.5 * (f.front() + f.back());
    for (std::size_t i = 1; i + 1 < f.size(); ++i) s += f[i];
    out.mean[static_cast<Eigen::Index>(axis)] = s * h;
  }
  return out;
}

TabulatedCdf grid_marginal_cdf(const StudentTModel& m, std::size_t axis, const GridSpec& grid,
                               std::size_t is_draws, std::uint64_t is_seed) {
  if (axis > 1) throw UsageError("grid_marginal_cdf: axis must be 0 or 1");
  const auto t = student_target(m);
  const auto x = grid_nodes(grid);
  const double h = x[1] - x[0];
  const auto lp = log_marginal(t, axis, x);
  const double lz = log_trapezoid(lp, h);

  // Evidence by prior importance sampling: mean of the likelihood.
  if (is_draws >= 2) {
    auto rng = Rng::stream(is_seed, StreamTag::auxiliary, 7);
    std::vector<double> ll(is_draws);
    for (auto& v : ll) v = t.log_likelihood(t.sample_prior(rng));
    const double shift = *std::max_element(ll.begin(), ll.end());
    std::vector<double> w(is_draws);
    for (std::size_t i = 0; i < is_draws; ++i) w[i] = std::exp(ll[i] - shift);
    const double mean = sample_mean(w);
    const double se = std::sqrt(sample_var(w) / static_cast<double>(is_draws));
    const double grid_mass = std::exp(lz - shift);
    if (grid_mass < 0.999 * (mean - 3.0 * se)) {
      throw DomainError("grid_marginal_cdf: grid bounds too small, grid holds " + fmt(grid_mass / mean) +
                        " of the importance-sampling evidence");
    }
  }

  TabulatedCdf cdf;
  cdf.x = x;
  cdf.F.assign(x.size(), 0.0);
  for (std::size_t i = 1; i < x.size(); ++i) {
    cdf.F[i] = cdf.F[i - 1] + 0.5 * h * (std::exp(lp[i - 1] - lz) + std::exp(lp[i] - lz));
  }
  const double total = cdf.F.back();
  for (double& f : cdf.F) f /= total;
  cdf.F.back() = 1.0;
  return cdf;
}

TabulatedCdf gaussian_marginal_cdf(const Gaussian& g, std::size_t axis, std::size_t nodes) {
  if (axis >= g.dim()) throw UsageError("gaussian_marginal_cdf: axis out of range");
  if (nodes < 3) throw UsageError("gaussian_marginal_cdf: need at least 3 nodes");
  const auto a = static_cast<Eigen::Index>(axis);
  const double mu = g.mean[a];
  const double sd = std::sqrt(g.cov(a, a));
  TabulatedCdf cdf;
  for (std::size_t i = 0; i < nodes; ++i) {
    const double z = -10.0 + 20.0 * static_cast<double>(i) / static_cast<double>(nodes - 1);
    cdf.x.push_back(mu + sd * z);
    cdf.F.push_back(0.5 * std::erfc(-z / std::sqrt(2.0)));
  }
  cdf.F.front() = 0.0;
  cdf.F.back() = 1.0;
  return cdf;
}

double ks_distance(std::span<const double> values, std::span<const double> log_weights,
                   const TabulatedCdf& truth) {
  const auto n = values.size();
  if (n == 0) throw UsageError("ks_distance: empty sample");
  if (!log_weights.empty() && log_weights.size() != n) throw UsageError("ks_distance: weight count mismatch");
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  if (!log_weights.empty()) {
    const double lse = logsumexp(log_weights);
    for (std::size_t i = 0; i < n; ++i) w[i] = std::exp(log_weights[i] - lse);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<double> sorted(n), cum(n);
  double c = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sorted[k] = values[order[k]];
    c += w[order[k]];
    cum[k] = c;
  }
  for (double& v : cum) v /= c;

  double d = 0.0;
  for (std::size_t k = 0; k < n;) {
    std::size_t e = k;
    while (e + 1 < n && sorted[e + 1] == sorted[k]) ++e;
    const double f = truth(sorted[k]);
    const double before = k == 0 ? 0.0 : cum[k - 1];
    d = std::max({d, std::abs(before - f), std::abs(cum[e] - f)});
    k = e + 1;
  }
  for (std::size_t i = 0; i < truth.x.size(); ++i) {
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), truth.x[i]);
    const double fn = it == sorted.begin() ? 0.0 : cum[static_cast<std::size_t>(it - sorted.begin()) - 1];
    d = std::max(d, std::abs(fn - truth.F[i]));
  }
  return d;
}

// ---------------------------------------------------------------------------

namespace {

std::string short_fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string ScheduleSpec::label() const {
  using S = CoolingSchedule::Strategy;
  switch (strategy) {
    case S::parametric:
      return "parametric(" + short_fmt(gamma) + ")";
    case S::cess:
      return "cess(" + short_fmt(cess_target) + ")";
    default:
      return strategy_name(strategy);
  }
}

std::string estimator_name(Estimator e) {
  switch (e) {
    case Estimator::none:
      return "none";
    case Estimator::ess_naive:
      return "ess_naive";
    case Estimator::ess_optimal:
      return "ess_optimal";
    case Estimator::demix:
      return "demix";
  }
  return "none";
}

Estimator parse_estimator(const std::string& name) {
  for (auto e : {Estimator::none, Estimator::ess_naive, Estimator::ess_optimal, Estimator::demix}) {
    if (estimator_name(e) == name) return e;
  }
  throw ConfigError("unknown estimator '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (schema_version != 1) throw ConfigError("unsupported schema_version " + std::to_string(schema_version));
  if (replicates < 1) throw ConfigError("replicates must be at least 1");
  if (particles < 2) throw ConfigError("particles must be at least 2");
  if (iterations < 2) throw ConfigError("iterations must be at least 2");
  if (schedules.empty()) throw ConfigError("no schedules configured");
  if (estimators.empty()) throw ConfigError("no estimators configured");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (!(ess_threshold > 0.0 && ess_threshold <= 1.0)) throw ConfigError("ess_threshold must lie in (0, 1]");
  for (const auto& s : schedules) {
    if (s.strategy == CoolingSchedule::Strategy::cess && !(s.cess_target > 0.0 && s.cess_target < 1.0)) {
      throw ConfigError("cess target must lie in (0, 1)");
    }
  }
  if (ks_axis) {
    const auto dim = std::visit([](const auto& m) -> std::size_t {
      using M = std::decay_t<decltype(m)>;
      if constexpr (std::is_same_v<M, PoissonRegressionModel>) {
        return m.dim();
      } else {
        return static_cast<std::size_t>(m.H.cols());
      }
    }, model.spec);
    if (*ks_axis >= dim) throw ConfigError("ks_axis outside the parameter dimension");
  }
}

void MetricsRow::summarize() {
  std::vector<double> lz, z, se, k, wall;
  failures = 0;
  for (std::size_t r = 0; r < ok.size(); ++r) {
    if (!ok[r]) {
      ++failures;
      continue;
    }
    lz.push_back(log_evidence[r]);
    z.push_back(std::exp(log_evidence[r]));
    if (!std::isnan(sq_error[r])) se.push_back(sq_error[r]);
    if (!std::isnan(ks[r])) k.push_back(ks[r]);
    wall.push_back(wall_seconds[r]);
  }
  log_evidence_mean = sample_mean(lz);
  log_evidence_var = sample_var(lz);
  evidence_var = sample_var(z);
  mse = sample_mean(se);
  ks_mean = sample_mean(k);
  ks_std = std::sqrt(sample_var(k));
  wall_mean = sample_mean(wall);
}

std::optional<CoolingSchedule> resolve_schedule(const ScheduleSpec& spec, const TemperedModel& m,
                                                std::size_t T) {
  using S = CoolingSchedule::Strategy;
  switch (spec.strategy) {
    case S::linear:
      return linear_schedule(T);
    case S::parametric:
      return parametric_schedule(spec.gamma, T);
    case S::fixed: {
      CoolingSchedule s{spec.phis, S::fixed, 0.0};
      s.validate();
      return s;
    }
    case S::optimal: {
      const auto seq = approximate_sequence(m, spec.approximation);
      const auto best = optimize_gamma(seq, T);
      auto s = parametric_schedule(best.gamma, T);
      s.strategy = S::optimal;
      s.parameter = best.gamma;
      return s;
    }
    case S::cess:
      return std::nullopt;
  }
  return std::nullopt;
}

namespace {

SmcConfig replicate_config(const ExperimentConfig& cfg, const ScheduleSpec& spec,
                           const std::optional<CoolingSchedule>& schedule, std::uint64_t seed) {
  SmcConfig sc;
  sc.n_particles = cfg.particles;
  sc.ess_threshold_fraction = cfg.ess_threshold;
  if (schedule) {
    sc.schedule = *schedule;
  } else {
    sc.cess_fraction = spec.cess_target;
  }
  sc.kernel = cfg.kernel;
  sc.resampling = cfg.resampling;
  sc.seed = seed;
  return sc;
}

}  // namespace

RunTrace run_replicate(const ExperimentConfig& cfg, std::size_t schedule_index, std::size_t replicate) {
  cfg.validate();
  if (schedule_index >= cfg.schedules.size()) throw ConfigError("schedule index out of range");
  if (replicate >= cfg.replicates) throw ConfigError("replicate index out of range");
  const TemperedModel model = to_tempered(cfg.model);
  const auto& spec = cfg.schedules[schedule_index];
  return smc_run(model, replicate_config(cfg, spec, resolve_schedule(spec, model, cfg.iterations),
                                         cfg.seed + replicate + 1));
}

std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const TemperedModel model = to_tempered(cfg.model);

  std::optional<Vector> truth = cfg.true_mean;
  std::optional<TabulatedCdf> marginal;
  if (const auto* g = std::get_if<GaussianLinearModel>(&cfg.model.spec)) {
    const auto post = gauss_posterior(*g);
    if (!truth) truth = post.mean;
    if (cfg.ks_axis) marginal = gaussian_marginal_cdf(post, *cfg.ks_axis);
  } else if (const auto* s = std::get_if<StudentTModel>(&cfg.model.spec)) {
    if (!truth) truth = grid_posterior(*s, cfg.grid).mean;
    if (cfg.ks_axis) marginal = grid_marginal_cdf(*s, *cfg.ks_axis, cfg.grid, 200000, cfg.seed);
  } else if (cfg.ks_axis) {
    throw ConfigError("ks_axis needs a model with a tabulated marginal (linear_gaussian or student_t)");
  }
  if (truth && static_cast<std::size_t>(truth->size()) != model.dim) {
    throw ConfigError("true_mean has the wrong dimension");
  }

  struct Resolved {
    ScheduleSpec spec;
    std::optional<CoolingSchedule> schedule;
  };
  std::vector<Resolved> schedules;
  for (const auto& s : cfg.schedules) schedules.push_back({s, resolve_schedule(s, model, cfg.iterations)});

  const std::size_t E = cfg.estimators.size();
  const std::size_t R = cfg.replicates;
  std::vector<MetricsRow> rows(schedules.size() * E);
  for (std::size_t s = 0; s < schedules.size(); ++s) {
    for (std::size_t e = 0; e < E; ++e) {
      auto& row = rows[s * E + e];
      row.experiment = cfg.name;
      row.schedule = schedules[s].spec.label();
      row.schedule_parameter = schedules[s].schedule ? schedules[s].schedule->parameter
                                                     : schedules[s].spec.cess_target;
      if (schedules[s].spec.strategy == CoolingSchedule::Strategy::linear) row.schedule_parameter = 0.0;
      row.estimator = estimator_name(cfg.estimators[e]);
      row.seeds.resize(R);
      row.ok.assign(R, false);
      row.errors.assign(R, "");
      row.log_evidence.assign(R, kNaN);
      row.sq_error.assign(R, kNaN);
      row.ks.assign(R, kNaN);
      row.wall_seconds.assign(R, kNaN);
      row.iterations.assign(R, 0);
    }
  }

  auto task = [&](std::size_t s, std::size_t r) {
    const std::uint64_t seed = cfg.seed + r + 1;
    const auto start = std::chrono::steady_clock::now();
    auto mark_all = [&](auto&& fn) {
      for (std::size_t e = 0; e < E; ++e) fn(rows[s * E + e]);
    };
    mark_all([&](MetricsRow& row) { row.seeds[r] = seed; });
    try {
      const auto trace = smc_run(model, replicate_config(cfg, schedules[s].spec, schedules[s].schedule, seed));
      const double lz = log_evidence(trace);
      std::optional<UniformizedHistory> hist;
      auto identity = [](const Vector& v) { return v; };
      for (std::size_t e = 0; e < E; ++e) {
        auto& row = rows[s * E + e];
        WeightedSample ws;
        if (cfg.estimators[e] == Estimator::none) {
          const auto& last = trace.clouds.back();
          ws = WeightedSample{last.positions, last.log_weights};
        } else {
          if (!hist) hist = uniformize(trace);
          ws = cfg.estimators[e] == Estimator::demix
                   ? recycle_demix(*hist).sample
                   : recycle_ess(*hist, cfg.estimators[e] == Estimator::ess_naive ? LambdaRule::naive
                                                                                   : LambdaRule::optimal)
                         .sample;
        }
        row.log_evidence[r] = lz;
        row.iterations[r] = trace.iterations();
        if (truth) row.sq_error[r] = (weighted_expectation(ws, identity) - *truth).squaredNorm();
        if (marginal) {
          std::vector<double> v(ws.log_weights.size());
          for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = ws.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(*cfg.ks_axis));
          }
          row.ks[r] = ks_distance(v, ws.log_weights, *marginal);
        }
        row.ok[r] = true;
      }
    } catch (const std::exception& ex) {
      mark_all([&](MetricsRow& row) {
        row.ok[r] = false;
        row.errors[r] = ex.what();
      });
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    mark_all([&](MetricsRow& row) { row.wall_seconds[r] = secs; });
  };

  const std::size_t total = schedules.size() * R;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) task(i / R, i % R);
  };
  const std::size_t n_threads = std::min(cfg.threads, total);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& row : rows) row.summarize();
  return rows;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& summary_columns() {
  static const std::vector<std::string> cols{
      "experiment", "schedule",        "schedule_parameter", "estimator",    "replicates",
      "failures",   "log_evidence_mean", "log_evidence_var", "evidence_var", "mse",
      "ks_mean",    "ks_std",          "wall_mean"};
  return cols;
}

const std::vector<std::string>& replicate_columns() {
  static const std::vector<std::string> cols{
      "experiment", "schedule", "schedule_parameter", "estimator", "replicate", "seed", "ok",
      "iterations", "log_evidence", "sq_error", "ks", "wall_seconds", "error"};
  return cols;
}

std::vector<std::filesystem::path> emit(const std::vector<MetricsRow>& rows, OutputFormat format,
                                        const std::filesystem::path& dir, const std::string& stem) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  const std::string ext = format == OutputFormat::csv ? ".csv" : ".json";
  const auto summary_path = dir / (stem + "_summary" + ext);
  const auto replicate_path = dir / (stem + "_replicates" + ext);
  std::ofstream summary(summary_path), replicates(replicate_path);
  if (!summary || !replicates) throw IoError("cannot write results under " + dir.string());

  if (format == OutputFormat::csv) {
    auto header = [](std::ostream& os, const std::vector<std::string>& cols) {
      for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
      os << '\n';
    };
    header(summary, summary_columns());
    header(replicates, replicate_columns());
    for (const auto& row : rows) {
      const std::size_t n_ok = row.ok.size() - row.failures;
      summary << csv_quote(row.experiment) << ',' << csv_quote(row.schedule) << ','
              << fmt(row.schedule_parameter) << ',' << row.estimator << ',' << n_ok << ','
              << row.failures << ',' << fmt(row.log_evidence_mean) << ',' << fmt(row.log_evidence_var)
              << ',' << fmt(row.evidence_var) << ',' << fmt(row.mse) << ',' << fmt(row.ks_mean) << ','
              << fmt(row.ks_std) << ',' << fmt(row.wall_mean) << '\n';
      for (std::size_t r = 0; r < row.ok.size(); ++r) {
        replicates << csv_quote(row.experiment) << ',' << csv_quote(row.schedule) << ','
                   << fmt(row.schedule_parameter) << ',' << row.estimator << ',' << r + 1 << ','
                   << row.seeds[r] << ',' << (row.ok[r] ? 1 : 0) << ',' << row.iterations[r] << ','
                   << fmt(row.log_evidence[r]) << ',' << fmt(row.sq_error[r]) << ','
                   << fmt(row.ks[r]) << ',' << fmt(row.wall_seconds[r]) << ','
                   << csv_quote(row.errors[r]) << '\n';
      }
    }
  } else {
    nlohmann::json s = nlohmann::json::array(), p = nlohmann::json::array();
    for (const auto& row : rows) {
      s.push_back({{"experiment", row.experiment},
                   {"schedule", row.schedule},
                   {"schedule_parameter", num(row.schedule_parameter)},
                   {"estimator", row.estimator},
                   {"replicates", row.ok.size() - row.failures},
                   {"failures", row.failures},
                   {"log_evidence_mean", num(row.log_evidence_mean)},
                   {"log_evidence_var", num(row.log_evidence_var)},
                   {"evidence_var", num(row.evidence_var)},
                   {"mse", num(row.mse)},
                   {"ks_mean", num(row.ks_mean)},
                   {"ks_std", num(row.ks_std)},
                   {"wall_mean", num(row.wall_mean)}});
      for (std::size_t r = 0; r < row.ok.size(); ++r) {
        p.push_back({{"experiment", row.experiment},
                     {"schedule", row.schedule},
                     {"schedule_parameter", num(row.schedule_parameter)},
                     {"estimator", row.estimator},
                     {"replicate", r + 1},
                     {"seed", row.seeds[r]},
                     {"ok", static_cast<bool>(row.ok[r])},
                     {"iterations", row.iterations[r]},
                     {"log_evidence", num(row.log_evidence[r])},
                     {"sq_error", num(row.sq_error[r])},
                     {"ks", num(row.ks[r])},
                     {"wall_seconds", num(row.wall_seconds[r])},
                     {"error", row.errors[r]}});
      }
    }
    summary << s.dump(2) << '\n';
    replicates << p.dump(2) << '\n';
  }
  if (!summary || !replicates) throw IoError("failed while writing results under " + dir.string());
  return {summary_path, replicate_path};
}

}  // namespace anneal
