#include "dmtrl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace dmtrl {

namespace fs = std::filesystem;

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::dmtrl: return "dmtrl";
    case Mode::stl: return "stl";
    case Mode::ssdca: return "ssdca";
    case Mode::centralized: return "centralized";
  }
  return "?";
}

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& why) {
  throw Error(ErrorCode::BadConfig, "'" + key + "=" + value + "': " + why);
}

double to_real(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    bad(key, value, "expected a number");
  }
  if (used != value.size() || !std::isfinite(v)) bad(key, value, "expected a number");
  return v;
}

long long to_integer(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &used);
  } catch (const std::exception&) {
    bad(key, value, "expected an integer");
  }
  if (used != value.size()) bad(key, value, "expected an integer");
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad(key, value, "expected true or false");
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

bool is_preset(const std::string& name) {
  const auto names = synthetic_preset_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

}  // namespace

bool ExperimentConfig::uses_preset() const { return is_preset(dataset); }

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  try {
    if (key == "mode") {
      if (value == "dmtrl") mode = Mode::dmtrl;
      else if (value == "stl") mode = Mode::stl;
      else if (value == "ssdca") mode = Mode::ssdca;
      else if (value == "centralized") mode = Mode::centralized;
      else bad(key, value, "expected dmtrl, stl, ssdca or centralized");
    } else if (key == "dataset") {
      dataset = value;
      if (is_preset(value)) synth = synthetic_preset(value);
    } else if (key == "format") {
      format = parse_format(value);
    } else if (key == "loss") {
      loss = parse_loss(value);
    } else if (key == "lambda") {
      lambda = to_real(key, value);
    } else if (key == "train_fraction") {
      train_fraction = to_real(key, value);
    } else if (key == "eta") {
      run.eta = to_real(key, value);
    } else if (key == "T") {
      run.T = static_cast<int>(to_integer(key, value));
    } else if (key == "H") {
      run.H = LocalIterations::parse(value);
    } else if (key == "P") {
      run.P = static_cast<int>(to_integer(key, value));
    } else if (key == "gap_tol") {
      run.gap_tol = to_real(key, value);
    } else if (key == "seed") {
      const long long s = to_integer(key, value);
      if (s < 0) bad(key, value, "seed must be non-negative");
      run.seed = static_cast<std::uint64_t>(s);
    } else if (key == "out_dir") {
      out_dir = value;
    } else if (key == "threads") {
      run.threads = static_cast<int>(to_integer(key, value));
    } else if (key == "rho") {
      if (value == "bound") {
        run.rho_mode = RhoMode::bound;
      } else {
        run.rho_mode = RhoMode::fixed;
        run.rho_fixed = to_real(key, value);
      }
    } else if (key == "clock") {
      if (value == "simulated") run.clock = Clock::simulated;
      else if (value == "wall") run.clock = Clock::wall;
      else bad(key, value, "expected simulated or wall");
    } else if (key == "execution") {
      if (value == "serial") run.execution = Execution::serial;
      else if (value == "parallel") run.execution = Execution::parallel;
      else bad(key, value, "expected serial or parallel");
    } else if (key == "gap_stride") {
      run.gap_stride = static_cast<int>(to_integer(key, value));
    } else if (key == "omega_step") {
      run.omega_step = to_bool(key, value);
    } else if (key == "synth.m") {
      synth.m = to_integer(key, value);
    } else if (key == "synth.d") {
      synth.d = to_integer(key, value);
    } else if (key == "synth.n_parents") {
      synth.n_parents = to_integer(key, value);
    } else if (key == "synth.n") {
      synth.n_min = synth.n_max = to_integer(key, value);
    } else if (key == "synth.n_min") {
      synth.n_min = to_integer(key, value);
    } else if (key == "synth.n_max") {
      synth.n_max = to_integer(key, value);
    } else if (key == "synth.test_n") {
      synth.test_n = to_integer(key, value);
    } else if (key == "synth.noise_scale") {
      synth.noise_scale = to_real(key, value);
    } else if (key == "synth.negate_prob") {
      synth.negate_prob = to_real(key, value);
    } else if (key == "synth.label_model") {
      if (value == "logistic") synth.label_model = LabelModel::logistic;
      else if (value == "linear") synth.label_model = LabelModel::linear;
      else bad(key, value, "expected logistic or linear");
    } else {
      bad(key, value, "unknown key");
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::BadConfig) throw;
    bad(key, value, e.what());
  }
}

void ExperimentConfig::validate() const {
  if (dataset.empty()) throw Error(ErrorCode::BadConfig, "dataset is empty");
  if (lambda && !(*lambda > 0.0)) throw Error(ErrorCode::BadLambda, "lambda must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw Error(ErrorCode::BadConfig, "train_fraction must lie in (0, 1)");
  if (uses_preset()) {
    synth.validate();
    if (loss == LossKind::hinge && synth.label_model == LabelModel::linear) {
      throw Error(ErrorCode::BadConfig, "hinge loss needs logistic (+1/-1) labels");
    }
    run.validate(synth.m);
  } else {
    run.validate(1);
  }
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  ExperimentConfig config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::BadConfig, "line " + std::to_string(line_no) + ": expected key=value");
    }
    config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str());
}

std::pair<MultiTaskProblem, MultiTaskProblem> experiment_data(const ExperimentConfig& config, int split, int splits) {
  const std::uint64_t split_seed = derive_seed(config.run.seed, 0x5eed, static_cast<std::uint64_t>(split));
  std::pair<MultiTaskProblem, MultiTaskProblem> data;
  if (config.uses_preset()) {
    SyntheticSpec spec = config.synth;
    spec.seed = config.run.seed;
    SyntheticData gen = gen_synthetic(spec);
    if (splits <= 1) {
      data = {std::move(gen.train), std::move(gen.test)};
    } else {
      const double fraction =
          static_cast<double>(gen.train.total_samples()) /
          static_cast<double>(gen.train.total_samples() + gen.test.total_samples());
      data = random_split(merge_problems(gen.train, gen.test), fraction, split_seed);
    }
  } else {
    MultiTaskProblem pooled = load_problem(config.dataset, config.format);
    pooled.lambda = 1e-3;
    data = random_split(pooled, config.train_fraction, split_seed);
  }
  for (MultiTaskProblem* p : {&data.first, &data.second}) {
    if (config.lambda) p->lambda = *config.lambda;
    if (config.loss) p->loss = *config.loss;
  }
  validate_problem(data.first);
  return data;
}

namespace {

ModelResult fit(const MultiTaskProblem& train, const ExperimentConfig& config) {
  switch (config.mode) {
    case Mode::dmtrl: return run_dmtrl(train, config.run);
    case Mode::stl: return run_stl(train, config.run);
    case Mode::ssdca: return run_ssdca(train, config.run);
    case Mode::centralized: return run_centralized(train, config.run);
  }
  throw Error(ErrorCode::BadConfig, "unknown mode");
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
}

struct Stat {
  double mean = 0.0;
  double std = 0.0;
};

Stat summarize(const std::vector<double>& v) {
  Stat s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

std::vector<std::pair<std::string, double TaskMetrics::*>> regression_metrics() {
  return {{"rmse", &TaskMetrics::rmse}, {"explained_variance", &TaskMetrics::explained_variance}};
}

std::string eval_csv(const std::vector<EvalReport>& evals, LossKind loss) {
  std::string out = "scope,metric,mean,std,splits\n";
  auto row = [&](const std::string& scope, const std::string& metric, const std::vector<double>& values) {
    const Stat s = summarize(values);
    out += scope + "," + metric + "," + format_real(s.mean) + "," + format_real(s.std) + "," +
           std::to_string(values.size()) + "\n";
  };
  const std::size_t m = evals.front().per_task.size();
  if (loss == LossKind::hinge) {
    std::vector<double> pooled;
    for (const auto& e : evals) pooled.push_back(e.error_rate.value_or(0.0));
    row("pooled", "error_rate", pooled);
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> v;
      for (const auto& e : evals) v.push_back(e.per_task[i].error_rate.value_or(0.0));
      row("task_" + std::to_string(i), "error_rate", v);
    }
    return out;
  }
  std::vector<double> rmse;
  std::vector<double> ev;
  for (const auto& e : evals) {
    rmse.push_back(e.rmse);
    ev.push_back(e.explained_variance);
  }
  row("pooled", "rmse", rmse);
  row("pooled", "explained_variance", ev);
  for (std::size_t i = 0; i < m; ++i) {
    for (const auto& [name, field] : regression_metrics()) {
      std::vector<double> v;
      for (const auto& e : evals) v.push_back(e.per_task[i].*field);
      row("task_" + std::to_string(i), name, v);
    }
  }
  return out;
}

}  // namespace

ExperimentOutcome run_model(const ExperimentConfig& config, const ExperimentOptions& options) {
  config.validate();
  if (options.splits < 1) throw Error(ErrorCode::BadConfig, "splits must be at least 1");
  ExperimentOutcome outcome;
  for (int k = 0; k < options.splits; ++k) {
    auto [train, test] = experiment_data(config, k, options.splits);
    config.run.validate(train.m());
    ModelResult model = fit(train, config);
    outcome.evals.push_back(evaluate(model.W, test, train.loss));
    if (k == 0) {
      outcome.model = std::move(model);
      outcome.loss = train.loss;
    }
  }
  return outcome;
}

void run_experiment(const ExperimentConfig& config, const ExperimentOptions& options, std::ostream& log) {
  const ExperimentOutcome outcome = run_model(config, options);
  const ModelResult& model = outcome.model;
  const LossKind loss = outcome.loss;

  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create '" + config.out_dir.string() + "': " + ec.message());
  write_file(config.out_dir / "trace.csv", trace_csv(model.trace));
  write_file(config.out_dir / "sigma.csv", matrix_csv(model.cov.sigma()));
  write_file(config.out_dir / "correlation.csv", matrix_csv(model.cov.correlation()));
  write_file(config.out_dir / "weights.csv", matrix_csv(model.W));
  write_file(config.out_dir / "eval.csv", eval_csv(outcome.evals, loss));

  if (options.svg) {
    std::vector<double> rounds;
    std::vector<double> times;
    std::vector<double> gaps;
    for (const auto& row : model.trace) {
      rounds.push_back(static_cast<double>(row.comm_rounds));
      times.push_back(row.elapsed_ms);
      gaps.push_back(row.gap);
    }
    const std::string title = std::string(to_string(config.mode)) + " on " + config.dataset;
    write_file(config.out_dir / "gap_vs_round.svg",
               svg_line_chart(rounds, gaps, title, "communication rounds", "duality gap (log10)", true));
    write_file(config.out_dir / "gap_vs_time.svg",
               svg_line_chart(times, gaps, title, "elapsed ms", "duality gap (log10)", true));
  }

  log << "mode " << to_string(config.mode) << ", dataset " << config.dataset << ", "
      << model.trace.size() << " trace rows\n";
  if (!model.trace.empty()) {
    const RoundTrace& last = model.trace.back();
    log << "final gap " << format_real(last.gap) << " after " << last.comm_rounds << " rounds\n";
  }
  const EvalReport& e = outcome.evals.front();
  if (loss == LossKind::hinge) {
    log << "test error rate " << format_real(e.error_rate.value_or(0.0)) << "\n";
  } else {
    log << "test rmse " << format_real(e.rmse) << ", explained variance " << format_real(e.explained_variance) << "\n";
  }
  log << "artifacts in " << config.out_dir.string() << "\n";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadConfig:
    case ErrorCode::BadLambda:
      return 1;
    case ErrorCode::IoError:
    case ErrorCode::ManifestError:
    case ErrorCode::ParseError:
      return 3;
    default:
      return 2;
  }
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trace_csv(const std::vector<RoundTrace>& trace) {
  std::string out = "p,t,dual,primal,gap,elapsed_ms,comm_rounds\n";
  for (const auto& r : trace) {
    out += std::to_string(r.p) + "," + std::to_string(r.t) + "," + format_real(r.dual) + "," + format_real(r.primal) +
           "," + format_real(r.gap) + "," + format_real(r.elapsed_ms) + "," + std::to_string(r.comm_rounds) + "\n";
  }
  return out;
}

std::string matrix_csv(const ColMatrix& matrix) {
  std::string out;
  for (Index c = 0; c < matrix.cols(); ++c) out += (c ? ",c" : "c") + std::to_string(c);
  out += "\n";
  for (Index r = 0; r < matrix.rows(); ++r) {
    for (Index c = 0; c < matrix.cols(); ++c) {
      if (c) out += ",";
      out += format_real(matrix(r, c));
    }
    out += "\n";
  }
  return out;
}

}  // namespace dmtrl
