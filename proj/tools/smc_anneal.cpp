// smc-anneal: experiment runner and oracle tool.
#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "anneal/bench.hpp"
#include "anneal/errors.hpp"
#include "anneal/json_io.hpp"
#include "anneal/recycle.hpp"
#include "anneal/schedule.hpp"

namespace {

using namespace anneal;

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

int cmd_run(const std::string& config_path, const std::string& out_dir, std::optional<std::size_t> threads,
            std::optional<std::uint64_t> seed, const std::string& format) {
  const std::filesystem::path path(config_path);
  auto cfg = experiment_from_json(load_json(path), path.parent_path());
  if (threads) cfg.threads = *threads;
  if (seed) cfg.seed = *seed;
  cfg.validate();
  const auto rows = run_experiment(cfg);
  const auto dir = out_dir.empty() ? std::filesystem::path(cfg.output) : std::filesystem::path(out_dir);
  const auto files = emit(rows, format == "json" ? OutputFormat::json : OutputFormat::csv, dir, cfg.name);
  std::size_t failures = 0;
  for (const auto& r : rows) {
    failures += r.failures;
    std::fprintf(stderr, "%-28s %-12s var(logZ)=%.6g mse=%.6g ks=%.6g failures=%zu\n", r.schedule.c_str(),
                 r.estimator.c_str(), r.log_evidence_var, r.mse, r.ks_mean, r.failures);
  }
  for (const auto& f : files) std::cout << f.string() << '\n';
  return failures == 0 ? 0 : kExitNumeric;
}

int cmd_schedule(const std::string& model_path, std::size_t T, const std::string& method, std::uint64_t seed) {
  const auto inst = model_from_json(load_json(model_path));
  ApproxOptions opts;
  opts.method = parse_approx_method(method);
  opts.seed = seed;
  const auto m = to_tempered(inst);
  const auto seq = approximate_sequence(m, opts);
  const auto opt = optimize_gamma(seq, T);
  const auto sched = parametric_schedule(opt.gamma, T);
  json out = schedule_to_json(sched);
  out["strategy"] = "optimal";
  out["gamma"] = opt.gamma;
  out["asymptotic_variance"] = opt.variance;
  out["linear_asymptotic_variance"] = asymptotic_variance(seq, linear_schedule(T));
  out["approximation"] = seq.method;
  out["clipped_eigenvalues"] = seq.clipped_eigenvalues;
  out["warnings"] = seq.warnings;
  std::cout << out.dump(1) << '\n';
  return 0;
}

int cmd_truth(const std::string& model_path, const GridSpec& grid) {
  const auto inst = model_from_json(load_json(model_path));
  json out;
  out["kind"] = model_kind(inst.spec);
  if (const auto* g = std::get_if<GaussianLinearModel>(&inst.spec)) {
    const auto post = gauss_posterior(*g);
    out["source"] = "analytic";
    out["log_evidence"] = gauss_log_evidence(*g);
    out["posterior_mean"] = vector_to_json(post.mean);
    out["posterior_cov"] = matrix_to_json(post.cov);
  } else if (const auto* s = std::get_if<StudentTModel>(&inst.spec)) {
    const auto gi = grid_posterior(*s, grid);
    out["source"] = "grid";
    out["grid"] = {{"lo", grid.lo}, {"hi", grid.hi}, {"resolution", grid.resolution}};
    out["log_evidence"] = gi.log_mass;
    out["posterior_mean"] = vector_to_json(gi.mean);
  } else {
    out["source"] = "none";
  }
  std::cout << out.dump(1) << '\n';
  return 0;
}

int cmd_trace(const std::string& config_path, std::size_t schedule, std::size_t replicate,
              const std::string& out_path) {
  const std::filesystem::path path(config_path);
  const auto cfg = experiment_from_json(load_json(path), path.parent_path());
  save_json(out_path, trace_to_json(run_replicate(cfg, schedule, replicate)));
  std::cout << out_path << '\n';
  return 0;
}

int cmd_recycle(const std::string& trace_path, const std::string& estimator, std::uint64_t seed) {
  const auto trace = trace_from_json(load_json(trace_path));
  const auto hist = uniformize(trace, seed);
  const auto identity = [](const Vector& x) { return x; };
  RecycleReport r;
  if (estimator == "demix") {
    r = demix_estimate(hist, identity);
  } else if (estimator == "ess_naive") {
    r = recycled_estimate_ess(hist, identity, LambdaRule::naive);
  } else if (estimator == "ess_optimal") {
    r = recycled_estimate_ess(hist, identity, LambdaRule::optimal);
  } else {
    throw ConfigError("unknown estimator '" + estimator + "'");
  }
  std::cout << report_to_json(r).dump(1) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tempered SMC samplers with optimized cooling schedules and sample recycling"};
  app.require_subcommand(1);

  std::string config, out_dir, format = "csv";
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "Run an experiment and write metrics");
  run->add_option("--config", config, "Experiment file (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (overrides the config)");
  run->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Root seed (overrides the config)");
  run->add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "json"}));

  std::string model;
  std::size_t T = 25;
  std::string method = "automatic";
  std::uint64_t approx_seed = 0;
  auto* sched = app.add_subcommand("schedule", "Print the optimized parametric schedule as JSON");
  sched->add_option("--model", model, "Model file (JSON)")->required()->check(CLI::ExistingFile);
  sched->add_option("--T", T, "Number of temperatures")->check(CLI::Range(2, 1000000));
  sched->add_option("--method", method, "Gaussian approximation")
      ->check(CLI::IsMember({"automatic", "exact", "laplace", "moment_match", "pilot"}));
  sched->add_option("--seed", approx_seed, "Seed for sampling-based approximations");

  GridSpec grid;
  auto* truth = app.add_subcommand("truth", "Print analytic or grid oracles as JSON");
  truth->add_option("--model", model, "Model file (JSON)")->required()->check(CLI::ExistingFile);
  truth->add_option("--grid-lo", grid.lo);
  truth->add_option("--grid-hi", grid.hi);
  truth->add_option("--grid-resolution", grid.resolution);

  std::string trace_out;
  std::size_t trace_schedule = 0, trace_replicate = 0;
  auto* trace = app.add_subcommand("trace", "Rerun one replicate and save its full trace as JSON");
  trace->add_option("--config", config, "Experiment file (JSON)")->required()->check(CLI::ExistingFile);
  trace->add_option("--schedule", trace_schedule, "Schedule index in the config (0-based)");
  trace->add_option("--replicate", trace_replicate, "Replicate index (0-based)");
  trace->add_option("--out", trace_out, "Trace file to write")->required();

  std::string trace_path, estimator = "demix";
  std::uint64_t recycle_seed = 0;
  auto* recycle = app.add_subcommand("recycle", "Recycled posterior mean from a saved trace");
  recycle->add_option("--trace", trace_path, "Trace file (JSON)")->required()->check(CLI::ExistingFile);
  recycle->add_option("--estimator", estimator)->check(CLI::IsMember({"demix", "ess_naive", "ess_optimal"}));
  recycle->add_option("--seed", recycle_seed, "Seed for uniformizing weighted clouds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config, out_dir, threads, seed, format);
    if (*sched) return cmd_schedule(model, T, method, approx_seed);
    if (*truth) return cmd_truth(model, grid);
    if (*trace) return cmd_trace(config, trace_schedule, trace_replicate, trace_out);
    if (*recycle) return cmd_recycle(trace_path, estimator, recycle_seed);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitConfig;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
