#include <filesystem>
#include <fstream>

#include "anneal/errors.hpp"
#include "anneal/json_io.hpp"
#include "doctest.h"

using namespace anneal;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / "anneal_json_io";
  std::filesystem::create_directories(d);
  return d / name;
}

}  // namespace

TEST_CASE("matrices are arrays of rows") {
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const auto j = matrix_to_json(m);
  CHECK(j.dump() == "[[1.0,2.0,3.0],[4.0,5.0,6.0]]");
  CHECK(matrix_from_json(j, "m") == m);
  CHECK_THROWS_AS(matrix_from_json(json::parse("[[1,2],[3]]"), "m"), ConfigError);
  CHECK_THROWS_AS(matrix_from_json(json::parse("[1,2]"), "m"), ConfigError);
  CHECK_THROWS_AS(vector_from_json(json::parse("[1,\"a\"]"), "v"), ConfigError);
}

TEST_CASE("model instances round trip") {
  std::vector<ModelInstance> models;
  models.push_back({make_linear_gaussian(3, 4, 9), even_blocks(3, 2)});
  models.push_back({make_student_t(0.2), {}});
  models.push_back({make_poisson_regression(30, 7), {}});
  for (const auto& inst : models) {
    const auto j = model_to_json(inst);
    const auto back = model_from_json(json::parse(j.dump()));
    CHECK(model_to_json(back) == j);
    const auto a = to_tempered(inst), b = to_tempered(back);
    CHECK(a.dim == b.dim);
    CHECK(a.blocks == b.blocks);
    Rng rng(3);
    const Vector th = a.sample_prior(rng);
    CHECK(a.log_prior(th) == b.log_prior(th));
    CHECK(a.log_likelihood(th) == b.log_likelihood(th));
  }
}

TEST_CASE("generated models match their constructors") {
  const auto g = model_from_json(json::parse(R"({"kind":"linear_gaussian","generate":{"d":10,"n":20,"seed":2024},"blocks":5})"));
  const auto& lg = std::get<GaussianLinearModel>(g.spec);
  CHECK(lg.H == make_linear_gaussian(10, 20, 2024).H);
  CHECK(g.blocks == even_blocks(10, 5));
  const auto s = model_from_json(json::parse(R"({"kind":"student_t","dof":7})"));
  CHECK(std::get<StudentTModel>(s.spec).dof == 7.0);
  const auto p = model_from_json(json::parse(R"({"kind":"poisson_regression","generate":{"n":100,"seed":7}})"));
  CHECK(std::get<PoissonRegressionModel>(p.spec).counts == make_poisson_regression(100, 7).counts);
}

TEST_CASE("malformed models are configuration errors") {
  CHECK_THROWS_AS(model_from_json(json::parse(R"({"kind":"cauchy"})")), ConfigError);
  CHECK_THROWS_AS(model_from_json(json::parse(R"({"kind":"student_t"})")), ConfigError);
  CHECK_THROWS_AS(model_from_json(json::parse(R"({"kind":"student_t","dof":-1})")), ConfigError);
  CHECK_THROWS_AS(model_from_json(json::parse(R"({"kind":"student_t","dof":1,"blocks":[[0,1]]})")), ConfigError);
  CHECK_THROWS_AS(model_from_json(json::parse(R"({"kind":"linear_gaussian","H":[[1]]})")), ConfigError);
  CHECK_THROWS_AS(model_from_json(json::parse("[]")), ConfigError);
}

TEST_CASE("schedules round trip and replay exactly") {
  const auto s = parametric_schedule(5.606, 25);
  const auto back = schedule_from_json(json::parse(schedule_to_json(s).dump()));
  CHECK(back.phis == s.phis);
  CHECK(back.strategy == s.strategy);
  CHECK(back.parameter == s.parameter);
  CHECK(schedule_from_json(json::parse("[0, 0.5, 1]")).phis == std::vector<double>{0.0, 0.5, 1.0});
  CHECK_THROWS_AS(schedule_from_json(json::parse("[0, 0.7, 0.5, 1]")), ConfigError);
  CHECK_THROWS_AS(schedule_from_json(json::parse("[0.1, 1]")), ConfigError);
}

TEST_CASE("traces round trip and recycle identically") {
  const auto m = to_tempered(ModelInstance{make_student_t(0.2), {}});
  SmcConfig cfg;
  cfg.n_particles = 40;
  cfg.schedule = linear_schedule(7);
  cfg.seed = 5;
  const auto tr = smc_run(m, cfg);
  const auto path = scratch("trace.json");
  save_json(path, trace_to_json(tr));
  const auto back = trace_from_json(load_json(path));
  REQUIRE(back.iterations() == tr.iterations());
  CHECK(back.seed == tr.seed);
  CHECK(back.resampled == tr.resampled);
  CHECK(back.log_Z_increments == tr.log_Z_increments);
  for (std::size_t t = 0; t < tr.iterations(); ++t) {
    CHECK(back.clouds[t].positions == tr.clouds[t].positions);
    CHECK(back.clouds[t].log_weights == tr.clouds[t].log_weights);
    CHECK(back.clouds[t].log_lik == tr.clouds[t].log_lik);
    CHECK(back.clouds[t].phi == tr.clouds[t].phi);
  }
  const auto id = [](const Vector& x) { return x; };
  CHECK(demix_estimate(uniformize(back), id).estimate == demix_estimate(uniformize(tr), id).estimate);

  const auto hdr = trace_to_json(tr)["header"];
  CHECK(hdr["N"] == 40);
  CHECK(hdr["T"] == 7);
  CHECK(hdr["d"] == 2);
  CHECK(hdr["seed"] == 5);
}

TEST_CASE("recycle report") {
  const auto m = to_tempered(ModelInstance{make_student_t(7.0), {}});
  SmcConfig cfg;
  cfg.n_particles = 30;
  cfg.schedule = linear_schedule(5);
  const auto h = uniformize(smc_run(m, cfg));
  const auto r = recycled_estimate_ess(h, [](const Vector& x) { return x; }, LambdaRule::optimal);
  const auto j = report_to_json(r);
  CHECK(j["estimator"] == "ess_optimal");
  CHECK(j["estimate"].size() == 2);
  CHECK(j["lambda"].size() == 5);
  CHECK(j["omega"].size() == 5);
  CHECK(j["pooled_ess"].get<double>() == r.detail.pooled_ess);
}

TEST_CASE("experiment configuration") {
  const auto model_path = scratch("model.json");
  save_json(model_path, json::parse(R"({"kind":"student_t","dof":0.2})"));
  const auto j = json::parse(R"({
    "schema_version": 1, "name": "t", "model": "model.json", "particles": 200, "iterations": 100,
    "replicates": 3, "seed": 9, "threads": 2, "ess_threshold": 0.4, "resampling": "systematic",
    "kernel": {"type": "mwg", "n_mcmc": 10, "blocks": 2},
    "schedules": [{"strategy": "linear"}, {"strategy": "parametric", "gamma": 6},
                  {"strategy": "cess", "target": 0.8},
                  {"strategy": "optimal", "approximation": {"method": "moment_match", "n_draws": 5000}},
                  {"strategy": "fixed", "phis": [0, 0.5, 1]}],
    "estimators": ["none", "ess_naive", "ess_optimal", "demix"],
    "ks_axis": 0, "grid": {"resolution": 500}
  })");
  const auto c = experiment_from_json(j, model_path.parent_path());
  CHECK(c.particles == 200);
  CHECK(c.iterations == 100);
  CHECK(c.threads == 2);
  CHECK(c.resampling == Resampling::systematic);
  CHECK(std::get<MwgSettings>(c.kernel).n_mcmc == 10);
  REQUIRE(c.schedules.size() == 5);
  CHECK(c.schedules[1].gamma == 6.0);
  CHECK(c.schedules[2].cess_target == 0.8);
  CHECK(c.schedules[3].approximation.method == ApproxMethod::moment_match);
  CHECK(c.schedules[3].approximation.n_draws == 5000);
  CHECK(c.schedules[3].approximation.seed == 9);
  CHECK(c.schedules[4].phis.size() == 3);
  CHECK(c.estimators.size() == 4);
  CHECK(c.ks_axis == 0u);
  CHECK(c.grid.resolution == 500);

  auto bad = j;
  bad["schema_version"] = 2;
  CHECK_THROWS_AS(experiment_from_json(bad, model_path.parent_path()), ConfigError);
  bad = j;
  bad["schedules"][1].erase("gamma");
  CHECK_THROWS_AS(experiment_from_json(bad, model_path.parent_path()), ConfigError);
  bad = j;
  bad["particles"] = "many";
  CHECK_THROWS_AS(experiment_from_json(bad, model_path.parent_path()), ConfigError);
  bad = j;
  bad["kernel"]["type"] = "hmc";
  CHECK_THROWS_AS(experiment_from_json(bad, model_path.parent_path()), ConfigError);
  bad = j;
  bad["model"] = "missing.json";
  CHECK_THROWS_AS(experiment_from_json(bad, model_path.parent_path()), IoError);
}

TEST_CASE("unreadable and malformed files") {
  CHECK_THROWS_AS(load_json(scratch("does_not_exist.json")), IoError);
  const auto p = scratch("broken.json");
  std::ofstream(p) << "{ not json";
  CHECK_THROWS_AS(load_json(p), ConfigError);
}
