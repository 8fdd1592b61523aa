#include "dmtrl/serialization.hpp"

namespace dmtrl {

using nlohmann::json;

namespace {

json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

// Stored row by row regardless of the in-memory layout.
template <typename M>
json matrix_json(const M& mat) {
  json rows = json::array();
  for (Index r = 0; r < mat.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(mat.cols()));
    for (Index c = 0; c < mat.cols(); ++c) row[static_cast<std::size_t>(c)] = mat(r, c);
    rows.push_back(row);
  }
  return json{{"rows", mat.rows()}, {"cols", mat.cols()}, {"data", rows}};
}

template <typename M>
M matrix_from(const json& j) {
  M mat(j.at("rows").get<Index>(), j.at("cols").get<Index>());
  const json& data = j.at("data");
  for (Index r = 0; r < mat.rows(); ++r) {
    const auto row = data.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
    if (static_cast<Index>(row.size()) != mat.cols()) throw Error(ErrorCode::ParseError, "ragged matrix row");
    for (Index c = 0; c < mat.cols(); ++c) mat(r, c) = row[static_cast<std::size_t>(c)];
  }
  return mat;
}

}  // namespace

json to_json_value(const TaskData& task) {
  return json{{"task_id", task.task_id}, {"features", matrix_json(task.features)}, {"labels", vector_json(task.labels)}};
}

json to_json_value(const MultiTaskProblem& problem) {
  json tasks = json::array();
  for (const auto& t : problem.tasks) tasks.push_back(to_json_value(t));
  return json{{"d", problem.d}, {"lambda", problem.lambda}, {"loss", std::string(to_string(problem.loss))}, {"tasks", tasks}};
}

json to_json_value(const TaskCovariance& cov) {
  return json{{"sigma", matrix_json(cov.sigma())},
              {"omega", matrix_json(cov.omega())},
              {"basis", matrix_json(cov.basis())},
              {"eigenvalues", vector_json(cov.sigma_eigenvalues())}};
}

json to_json_value(const DualState& state) {
  json alpha = json::array();
  for (const auto& a : state.alpha) alpha.push_back(vector_json(a));
  return json{{"alpha", alpha}, {"b", matrix_json(state.b)}, {"w", matrix_json(state.w)}};
}

json to_json_value(const RunConfig& c) {
  return json{{"eta", c.eta},
              {"T", c.T},
              {"H", {{"value", c.H.value}, {"per_sample", c.H.per_sample}}},
              {"P", c.P},
              {"gap_tol", c.gap_tol},
              {"seed", c.seed},
              {"rho_mode", c.rho_mode == RhoMode::bound ? "bound" : "fixed"},
              {"rho_fixed", c.rho_fixed},
              {"omega_step", c.omega_step},
              {"execution", c.execution == Execution::serial ? "serial" : "parallel"},
              {"threads", c.threads},
              {"gap_stride", c.gap_stride},
              {"clock", c.clock == Clock::simulated ? "simulated" : "wall"}};
}

TaskData task_from_json(const json& j) {
  TaskData t;
  t.task_id = j.at("task_id").get<int>();
  t.features = matrix_from<Matrix>(j.at("features"));
  t.labels = vector_from(j.at("labels"));
  return t;
}

MultiTaskProblem problem_from_json(const json& j) {
  MultiTaskProblem p;
  p.d = j.at("d").get<Index>();
  p.lambda = j.at("lambda").get<double>();
  p.loss = parse_loss(j.at("loss").get<std::string>());
  for (const auto& t : j.at("tasks")) p.tasks.push_back(task_from_json(t));
  return p;
}

TaskCovariance covariance_from_json(const json& j) {
  // Rebuilt from the stored spectrum; the stored matrices are checked to
  // match so a hand-edited file cannot silently disagree with itself.
  TaskCovariance cov = TaskCovariance::from_spectrum(matrix_from<ColMatrix>(j.at("basis")), vector_from(j.at("eigenvalues")));
  const ColMatrix sigma = matrix_from<ColMatrix>(j.at("sigma"));
  if (sigma.rows() != cov.m() || (sigma - cov.sigma()).cwiseAbs().maxCoeff() > 1e-12) {
    throw Error(ErrorCode::ParseError, "stored sigma disagrees with its spectrum");
  }
  return cov;
}

DualState dual_state_from_json(const json& j) {
  DualState s;
  for (const auto& a : j.at("alpha")) s.alpha.push_back(vector_from(a));
  s.b = matrix_from<ColMatrix>(j.at("b"));
  s.w = matrix_from<ColMatrix>(j.at("w"));
  return s;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  c.eta = j.at("eta").get<double>();
  c.T = j.at("T").get<int>();
  c.H.value = j.at("H").at("value").get<double>();
  c.H.per_sample = j.at("H").at("per_sample").get<bool>();
  c.P = j.at("P").get<int>();
  c.gap_tol = j.at("gap_tol").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.rho_mode = j.at("rho_mode").get<std::string>() == "bound" ? RhoMode::bound : RhoMode::fixed;
  c.rho_fixed = j.at("rho_fixed").get<double>();
  c.omega_step = j.at("omega_step").get<bool>();
  c.execution = j.at("execution").get<std::string>() == "serial" ? Execution::serial : Execution::parallel;
  c.threads = j.at("threads").get<int>();
  c.gap_stride = j.at("gap_stride").get<int>();
  c.clock = j.at("clock").get<std::string>() == "simulated" ? Clock::simulated : Clock::wall;
  return c;
}

}  // namespace dmtrl
