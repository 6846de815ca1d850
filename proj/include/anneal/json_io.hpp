#pragma once

#include <filesystem>

#include "anneal/bench.hpp"
#include "anneal/recycle.hpp"
#include "anneal/smc.hpp"
#include "json.hpp"

namespace anneal {

using nlohmann::json;

/// Reads and parses a JSON file. IoError if unreadable, ConfigError if malformed.
json load_json(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const json& j);

// Matrices are arrays of rows; blocks are [begin, end) pairs.
json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j, const char* what);
json vector_to_json(const Vector& v);
Vector vector_from_json(const json& j, const char* what);

/// {"kind": "linear_gaussian" | "student_t" | "poisson_regression", ...}.
/// Explicit instances list every field; a "generate" object (or just "dof"
/// for student_t) builds the documented instance instead.
json model_to_json(const ModelInstance& inst);
ModelInstance model_from_json(const json& j);

json schedule_to_json(const CoolingSchedule& s);
CoolingSchedule schedule_from_json(const json& j);

/// Header {N, T, d, seed}, the schedule, then one block per iteration.
json trace_to_json(const RunTrace& trace);
RunTrace trace_from_json(const json& j);

json report_to_json(const RecycleReport& r);

/// Experiment description (schema_version 1). A "model" given as a string is
/// a path to a model file, resolved against `base_dir`.
ExperimentConfig experiment_from_json(const json& j, const std::filesystem::path& base_dir = {});

}  // namespace anneal
