// Order-of-magnitude comparison with reference Student-t evidence variances
// (linear schedule, T = 25, N = 50, N_MCMC = 10, B = 2).
#include <cmath>

#include "anneal/bench.hpp"
#include "anneal/schedule.hpp"
#include "doctest.h"

using namespace anneal;

namespace {

double linear_variance(double dof) {
  ExperimentConfig c;
  c.name = "reference";
  c.model.spec = make_student_t(dof);
  c.particles = 50;
  c.iterations = 25;
  ScheduleSpec lin;
  lin.strategy = CoolingSchedule::Strategy::linear;
  c.schedules = {lin};
  MwgSettings k;
  k.n_mcmc = 10;
  k.blocks = 2;
  c.kernel = k;
  c.replicates = 200;
  c.seed = 1;
  return run_experiment(c)[0].log_evidence_var;
}

double perfect_mixing_prediction(double dof) {
  ApproxOptions o;
  o.seed = 1;
  const auto seq = approximate_sequence(to_tempered(ModelInstance{make_student_t(dof), {}}), o);
  return asymptotic_variance(seq, linear_schedule(25)) / 50.0;
}

}  // namespace

TEST_CASE("Student-t log-evidence variance, dof 0.2") {
  const double v = linear_variance(0.2);
  MESSAGE("empirical ", v, ", perfect-mixing prediction ", perfect_mixing_prediction(0.2), ", reference 0.0026");
  CHECK(v > 0.0026 / 10.0);
  CHECK(v < 0.0026 * 10.0);
}

TEST_CASE("Student-t log-evidence variance, dof 7") {
  const double v = linear_variance(7.0);
  MESSAGE("empirical ", v, ", perfect-mixing prediction ", perfect_mixing_prediction(7.0), ", reference 0.0146");
  CHECK(v > 0.0146 / 10.0);
  CHECK(v < 0.0146 * 10.0);
}
