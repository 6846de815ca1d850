#include "anneal/json_io.hpp"

#include <fstream>
#include <sstream>

#include "anneal/errors.hpp"

namespace anneal {

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  return j.at(key);
}

double to_double(const json& v, const char* what) {
  if (!v.is_number()) throw ConfigError(std::string(what) + ": expected a number");
  return v.get<double>();
}

json blocks_to_json(const std::vector<BlockRange>& blocks) {
  json out = json::array();
  for (const auto& b : blocks) out.push_back({b.begin, b.end});
  return out;
}

std::vector<BlockRange> blocks_from_json(const json& j, std::size_t dim) {
  if (j.is_number_integer()) {
    const auto count = j.get<std::size_t>();
    if (count == 0 || count > dim) throw ConfigError("blocks: count must lie in [1, dim]");
    return even_blocks(dim, count);
  }
  if (!j.is_array()) throw ConfigError("blocks: expected a count or a list of [begin, end) pairs");
  std::vector<BlockRange> out;
  for (const auto& b : j) {
    if (!b.is_array() || b.size() != 2) throw ConfigError("blocks: each block is [begin, end)");
    out.push_back({b[0].get<std::size_t>(), b[1].get<std::size_t>()});
  }
  return out;
}

json gaussian_to_json(const Gaussian& g) {
  return {{"mean", vector_to_json(g.mean)}, {"cov", matrix_to_json(g.cov)}};
}

Gaussian gaussian_from_json(const json& j, const char* what) {
  return {vector_from_json(require(j, "mean"), what), matrix_from_json(require(j, "cov"), what)};
}

MwgSettings mwg_from_json(const json& j) {
  MwgSettings s;
  s.n_mcmc = get_or(j, "n_mcmc", s.n_mcmc);
  s.blocks = get_or<std::size_t>(j, "blocks", s.blocks);
  s.rate_high = get_or(j, "rate_high", s.rate_high);
  s.rate_low = get_or(j, "rate_low", s.rate_low);
  s.factor_up = get_or(j, "factor_up", s.factor_up);
  s.factor_down = get_or(j, "factor_down", s.factor_down);
  if (s.n_mcmc < 1) throw ConfigError("kernel.n_mcmc must be at least 1");
  return s;
}

ApproxOptions approx_from_json(const json& j, std::uint64_t seed) {
  ApproxOptions o;
  o.seed = seed;
  if (j.is_null()) return o;
  o.method = parse_approx_method(get_or<std::string>(j, "method", "automatic"));
  o.n_draws = get_or<std::size_t>(j, "n_draws", o.n_draws);
  o.seed = get_or<std::uint64_t>(j, "seed", seed);
  o.pilot_particles = get_or<std::size_t>(j, "pilot_particles", o.pilot_particles);
  o.pilot_cess = get_or(j, "pilot_cess", o.pilot_cess);
  if (j.contains("pilot_kernel")) o.pilot_kernel = mwg_from_json(j.at("pilot_kernel"));
  return o;
}

}  // namespace

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void save_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw IoError("failed while writing " + path.string());
}

json matrix_to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    out.push_back(std::move(row));
  }
  return out;
}

Matrix matrix_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    throw ConfigError(std::string(what) + ": expected a non-empty array of rows");
  }
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != j[0].size()) throw ConfigError(std::string(what) + ": ragged rows");
    for (std::size_t k = 0; k < j[i].size(); ++k) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = to_double(j[i][k], what);
    }
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (double x : v) out.push_back(x);
  return out;
}

Vector vector_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = to_double(j[i], what);
  return v;
}

json model_to_json(const ModelInstance& inst) {
  json j;
  j["kind"] = model_kind(inst.spec);
  if (const auto* g = std::get_if<GaussianLinearModel>(&inst.spec)) {
    j["H"] = matrix_to_json(g->H);
    j["prior"] = gaussian_to_json(g->prior);
    j["noise_cov"] = matrix_to_json(g->noise_cov);
    j["y"] = vector_to_json(g->y);
  } else if (const auto* s = std::get_if<StudentTModel>(&inst.spec)) {
    j["H"] = matrix_to_json(s->H);
    j["prior"] = gaussian_to_json(s->prior);
    j["scale"] = matrix_to_json(s->scale);
    j["dof"] = s->dof;
    j["y"] = vector_to_json(s->y);
  } else {
    const auto& p = std::get<PoissonRegressionModel>(inst.spec);
    j["x"] = p.x;
    j["counts"] = p.counts;
    j["centers"] = p.centers;
    j["radius"] = p.radius;
    j["q"] = p.q;
    j["ig_shape"] = p.ig_shape;
    j["ig_scale"] = p.ig_scale;
  }
  if (!inst.blocks.empty()) j["blocks"] = blocks_to_json(inst.blocks);
  return j;
}

ModelInstance model_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("model: expected an object");
  const auto kind = get_or<std::string>(j, "kind", "");
  ModelInstance inst;
  try {
    if (kind == "linear_gaussian") {
      GaussianLinearModel g;
      if (j.contains("generate")) {
        const auto& gen = j.at("generate");
        g = make_linear_gaussian(get_or<std::size_t>(gen, "d", 10), get_or<std::size_t>(gen, "n", 20),
                                 get_or<std::uint64_t>(gen, "seed", 2024));
      } else if (get_or<bool>(j, "scalar", false)) {
        g = make_scalar_linear_gaussian();
      } else {
        g.H = matrix_from_json(require(j, "H"), "H");
        g.prior = gaussian_from_json(require(j, "prior"), "prior");
        g.noise_cov = matrix_from_json(require(j, "noise_cov"), "noise_cov");
        g.y = vector_from_json(require(j, "y"), "y");
      }
      g.validate();
      inst.spec = std::move(g);
    } else if (kind == "student_t") {
      StudentTModel s;
      if (j.contains("H")) {
        s.H = matrix_from_json(j.at("H"), "H");
        s.prior = gaussian_from_json(require(j, "prior"), "prior");
        s.scale = matrix_from_json(require(j, "scale"), "scale");
        s.dof = to_double(require(j, "dof"), "dof");
        s.y = vector_from_json(require(j, "y"), "y");
      } else {
        s = make_student_t(to_double(require(j, "dof"), "dof"));
      }
      s.validate();
      inst.spec = std::move(s);
    } else if (kind == "poisson_regression") {
      PoissonRegressionModel p;
      if (j.contains("generate")) {
        const auto& gen = j.at("generate");
        p = make_poisson_regression(get_or<std::size_t>(gen, "n", 100), get_or<std::uint64_t>(gen, "seed", 7));
      } else {
        p.x = require(j, "x").get<std::vector<double>>();
        p.counts = require(j, "counts").get<std::vector<long>>();
        p.centers = require(j, "centers").get<std::vector<double>>();
        p.radius = get_or(j, "radius", p.radius);
        p.q = get_or(j, "q", p.q);
        p.ig_shape = get_or(j, "ig_shape", p.ig_shape);
        p.ig_scale = get_or(j, "ig_scale", p.ig_scale);
      }
      p.validate();
      inst.spec = std::move(p);
    } else {
      throw ConfigError("model: unknown kind '" + kind + "'");
    }
  } catch (const UsageError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  if (j.contains("blocks")) {
    const auto dim = to_tempered(ModelInstance{inst.spec, {}}).dim;
    inst.blocks = blocks_from_json(j.at("blocks"), dim);
    try {
      to_tempered(inst);
    } catch (const UsageError& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
  }
  return inst;
}

json schedule_to_json(const CoolingSchedule& s) {
  return {{"strategy", strategy_name(s.strategy)}, {"parameter", s.parameter}, {"phis", s.phis}};
}

CoolingSchedule schedule_from_json(const json& j) {
  CoolingSchedule s;
  try {
    if (j.is_array()) {
      s.phis = j.get<std::vector<double>>();
    } else {
      s.phis = require(j, "phis").get<std::vector<double>>();
      s.strategy = parse_strategy(get_or<std::string>(j, "strategy", "fixed"));
      s.parameter = get_or(j, "parameter", 0.0);
    }
    s.validate();
  } catch (const UsageError& e) {
    throw ConfigError(e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
  return s;
}

json trace_to_json(const RunTrace& trace) {
  json j;
  const auto& first = trace.clouds.front();
  j["header"] = {{"N", first.size()}, {"T", trace.iterations()}, {"d", first.dim()}, {"seed", trace.seed}};
  j["schedule"] = schedule_to_json(trace.schedule);
  json its = json::array();
  for (std::size_t t = 0; t < trace.iterations(); ++t) {
    const auto& c = trace.clouds[t];
    json rows = json::array();
    for (Eigen::Index i = 0; i < c.positions.rows(); ++i) {
      rows.push_back(std::vector<double>(c.positions.row(i).begin(), c.positions.row(i).end()));
    }
    auto finite_or_null = [](const std::vector<double>& v) {
      json a = json::array();
      for (double x : v) a.push_back(std::isfinite(x) ? json(x) : json(nullptr));
      return a;
    };
    its.push_back({{"phi", c.phi},
                   {"resampled", static_cast<bool>(trace.resampled[t])},
                   {"log_Z_increment", t == 0 ? json(nullptr) : json(trace.log_Z_increments[t - 1])},
                   {"acceptance", trace.acceptance.size() > t ? trace.acceptance[t] : 1.0},
                   {"positions", rows},
                   {"log_weights", finite_or_null(c.log_weights)},
                   {"log_prior", finite_or_null(c.log_prior)},
                   {"log_lik", finite_or_null(c.log_lik)}});
  }
  j["iterations"] = std::move(its);
  return j;
}

RunTrace trace_from_json(const json& j) {
  RunTrace tr;
  try {
    const auto& h = require(j, "header");
    const auto n = require(h, "N").get<std::size_t>();
    const auto d = require(h, "d").get<std::size_t>();
    tr.seed = require(h, "seed").get<std::uint64_t>();
    tr.schedule = schedule_from_json(require(j, "schedule"));
    auto reals = [](const json& a) {
      std::vector<double> v;
      for (const auto& x : a) v.push_back(x.is_null() ? -std::numeric_limits<double>::infinity() : x.get<double>());
      return v;
    };
    std::size_t t = 0;
    for (const auto& it : require(j, "iterations")) {
      ParticleCloud c;
      c.phi = require(it, "phi").get<double>();
      c.iteration = ++t;
      c.positions.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
      const auto& rows = require(it, "positions");
      if (rows.size() != n) throw ConfigError("trace: iteration " + std::to_string(t) + " has the wrong N");
      for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != d) throw ConfigError("trace: particle with the wrong dimension");
        for (std::size_t k = 0; k < d; ++k) {
          c.positions(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k].get<double>();
        }
      }
      c.log_weights = reals(require(it, "log_weights"));
      c.log_prior = reals(require(it, "log_prior"));
      c.log_lik = reals(require(it, "log_lik"));
      tr.resampled.push_back(require(it, "resampled").get<bool>());
      tr.acceptance.push_back(get_or(it, "acceptance", 1.0));
      if (t > 1) tr.log_Z_increments.push_back(require(it, "log_Z_increment").get<double>());
      c.validate();
      tr.clouds.push_back(std::move(c));
    }
    tr.validate();
  } catch (const UsageError& e) {
    throw ConfigError(std::string("trace: ") + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("trace: ") + e.what());
  }
  return tr;
}

json report_to_json(const RecycleReport& r) {
  json j;
  j["estimator"] = r.estimator;
  j["estimate"] = vector_to_json(r.estimate);
  j["omega"] = r.detail.omega;
  j["lambda"] = r.detail.lambda;
  j["pooled_ess"] = r.detail.pooled_ess;
  j["zero_denominators"] = r.detail.zero_denominators;
  return j;
}

ExperimentConfig experiment_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("experiment: expected an object");
  ExperimentConfig c;
  try {
    c.schema_version = get_or(j, "schema_version", 0);
    if (c.schema_version != 1) {
      throw ConfigError("experiment: schema_version must be 1 (got " + std::to_string(c.schema_version) + ")");
    }
    c.name = get_or<std::string>(j, "name", c.name);
    const auto& m = require(j, "model");
    c.model = m.is_string() ? model_from_json(load_json(base_dir / m.get<std::string>())) : model_from_json(m);
    c.particles = get_or<std::size_t>(j, "particles", c.particles);
    c.iterations = get_or<std::size_t>(j, "iterations", c.iterations);
    c.replicates = get_or<std::size_t>(j, "replicates", c.replicates);
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    c.threads = get_or<std::size_t>(j, "threads", c.threads);
    c.ess_threshold = get_or(j, "ess_threshold", c.ess_threshold);
    c.output = get_or<std::string>(j, "output", c.output);

    const auto resampling = get_or<std::string>(j, "resampling", "multinomial");
    if (resampling == "multinomial") {
      c.resampling = Resampling::multinomial;
    } else if (resampling == "systematic") {
      c.resampling = Resampling::systematic;
    } else {
      throw ConfigError("unknown resampling scheme '" + resampling + "'");
    }

    if (j.contains("kernel")) {
      const auto& k = j.at("kernel");
      const auto type = get_or<std::string>(k, "type", "mwg");
      if (type == "mwg") {
        c.kernel = mwg_from_json(k);
      } else if (type == "perfect") {
        c.kernel = PerfectMixing{};
      } else {
        throw ConfigError("unknown kernel type '" + type + "'");
      }
    }

    for (const auto& s : require(j, "schedules")) {
      ScheduleSpec spec;
      spec.strategy = parse_strategy(get_or<std::string>(s, "strategy", ""));
      spec.gamma = get_or(s, "gamma", 0.0);
      spec.cess_target = get_or(s, "target", spec.cess_target);
      spec.phis = get_or(s, "phis", std::vector<double>{});
      spec.approximation = approx_from_json(s.contains("approximation") ? s.at("approximation") : json(), c.seed);
      if (spec.strategy == CoolingSchedule::Strategy::parametric && !s.contains("gamma")) {
        throw ConfigError("parametric schedule needs 'gamma'");
      }
      c.schedules.push_back(std::move(spec));
    }

    if (j.contains("estimators")) {
      c.estimators.clear();
      for (const auto& e : j.at("estimators")) c.estimators.push_back(parse_estimator(e.get<std::string>()));
    }
    if (j.contains("true_mean")) c.true_mean = vector_from_json(j.at("true_mean"), "true_mean");
    if (j.contains("ks_axis")) c.ks_axis = j.at("ks_axis").get<std::size_t>();
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      c.grid.lo = get_or(g, "lo", c.grid.lo);
      c.grid.hi = get_or(g, "hi", c.grid.hi);
      c.grid.resolution = get_or<std::size_t>(g, "resolution", c.grid.resolution);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace anneal
