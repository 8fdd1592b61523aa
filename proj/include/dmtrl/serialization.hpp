#pragma once

#include <string>

#include <json.hpp>

#include "dmtrl/core.hpp"

// JSON encodings of the core types. Doubles are written in shortest
// round-trip form, so decode(encode(x)) reproduces every bit.
namespace dmtrl {

nlohmann::json to_json_value(const TaskData& task);
nlohmann::json to_json_value(const MultiTaskProblem& problem);
nlohmann::json to_json_value(const TaskCovariance& cov);
nlohmann::json to_json_value(const DualState& state);
nlohmann::json to_json_value(const RunConfig& config);

TaskData task_from_json(const nlohmann::json& j);
MultiTaskProblem problem_from_json(const nlohmann::json& j);
TaskCovariance covariance_from_json(const nlohmann::json& j);
DualState dual_state_from_json(const nlohmann::json& j);
RunConfig run_config_from_json(const nlohmann::json& j);

}  // namespace dmtrl
