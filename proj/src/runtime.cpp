#include "dmtrl/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include <omp.h>

#include "dmtrl/local_solver.hpp"
#include "dmtrl/losses.hpp"
#include "dmtrl/message.hpp"
#include "dmtrl/objectives.hpp"
#include "dmtrl/server.hpp"

namespace dmtrl {

RunProgress::RunProgress(Clock clock) : clock_(clock), start_(std::chrono::steady_clock::now()) {}

double RunProgress::elapsed_ms() const {
  if (clock_ == Clock::simulated) return simulated_ms_;
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
}

namespace {

// Runs body(i) for every task. Each call touches only task-i state, so the
// serial loop is the reference the OpenMP path must reproduce bit for bit.
// Errors are rethrown for the lowest failing task index.
template <typename Body>
void for_each_task(const RunConfig& config, Index m, Body&& body) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(m));
  if (config.execution == Execution::parallel) {
    const int threads = config.threads > 0 ? config.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (Index i = 0; i < m; ++i) {
      try {
        body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  } else {
    for (Index i = 0; i < m; ++i) {
      try {
        body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::size_t at(Index i) { return static_cast<std::size_t>(i); }

void check_state(const MultiTaskProblem& problem, const TaskCovariance& cov, const DualState& state) {
  validate_problem(problem);
  if (cov.m() != problem.m()) throw Error(ErrorCode::DimensionMismatch, "covariance size differs from task count");
  if (static_cast<Index>(state.alpha.size()) != problem.m() || state.b.rows() != problem.d ||
      state.b.cols() != problem.m() || state.w.rows() != problem.d || state.w.cols() != problem.m()) {
    throw Error(ErrorCode::DimensionMismatch, "dual state does not match the problem");
  }
  for (Index i = 0; i < problem.m(); ++i) {
    if (state.alpha[at(i)].size() != problem.tasks[at(i)].n()) {
      throw Error(ErrorCode::DimensionMismatch, "alpha block " + std::to_string(i) + " has the wrong length");
    }
  }
}

ObjectiveReport evaluate_gap(const MultiTaskProblem& problem, const DualState& state, const TaskCovariance& cov,
                             const RunConfig& config) {
  std::vector<TaskGapTerms> terms(problem.tasks.size());
  for_each_task(config, problem.m(), [&](Index i) {
    terms[at(i)] = task_gap_terms(problem.tasks[at(i)], problem.loss, state.alpha[at(i)], state.w.col(i));
  });
  return assemble_report(problem, terms, state, cov);
}

RoundTrace make_row(const RunProgress& progress, int t, const ObjectiveReport& report, double rho) {
  RoundTrace row;
  row.p = progress.p;
  row.t = t;
  row.dual = report.dual;
  row.primal = report.primal;
  row.gap = report.gap;
  row.elapsed_ms = progress.elapsed_ms();
  row.comm_rounds = progress.comm_rounds;
  row.coordinate_touches = progress.coordinate_touches;
  row.rho = rho;
  return row;
}

double max_task_rows(const MultiTaskProblem& problem) {
  Index n = 0;
  for (const auto& t : problem.tasks) n = std::max(n, t.n());
  return static_cast<double>(n);
}

}  // namespace

WStepResult run_w_step(const MultiTaskProblem& problem, const TaskCovariance& cov, DualState state,
                       const RunConfig& config, double rho, RunProgress& progress) {
  check_state(problem, cov, state);
  config.validate(problem.m());
  if (!(rho > 0.0)) throw Error(ErrorCode::BadConfig, "rho must be positive");

  const Index m = problem.m();
  const Index d = problem.d;
  const double dd = static_cast<double>(d);
  const double md = static_cast<double>(m);

  AggregationState server{state.b, state.w, 0};
  std::vector<Vector> worker_w(at(m));
  std::vector<Index> budget(at(m));
  double max_local_flops = 0.0;
  for (Index i = 0; i < m; ++i) {
    worker_w[at(i)] = state.w.col(i);
    budget[at(i)] = config.H.for_task(problem.tasks[at(i)].n());
    max_local_flops = std::max(max_local_flops, 6.0 * dd * static_cast<double>(budget[at(i)]));
  }

  WStepResult result;
  std::vector<std::vector<std::uint8_t>> uplink(at(m));
  std::vector<Vector> deltas(at(m));

  for (int t = 1; t <= config.T; ++t) {
    const auto round = static_cast<std::uint32_t>(progress.comm_rounds);

    // local updates
    for_each_task(config, m, [&](Index i) {
      const auto started = std::chrono::steady_clock::now();
      const TaskData& task = problem.tasks[at(i)];
      Vector& alpha = state.alpha[at(i)];
      LocalRoundInput in;
      in.alpha = std::span<const double>(alpha.data(), at(alpha.size()));
      in.w = std::span<const double>(worker_w[at(i)].data(), at(d));
      in.sigma_ii = cov.sigma()(i, i);
      in.rho = rho;
      in.lambda = problem.lambda;
      in.loss = problem.loss;
      in.m = m;
      in.H = budget[at(i)];
      in.rng_seed = derive_seed(config.seed, round, static_cast<std::uint64_t>(i));
      LocalRoundOutput out = local_sdca(in, task);
      alpha += config.eta * out.delta_alpha;

      WorkerUpdateMsg msg;
      msg.task_id = static_cast<std::uint32_t>(i);
      msg.round = round;
      msg.delta_b = config.eta * out.delta_b;
      msg.local_obj_gain = out.local_obj_gain;
      msg.wall_micros =
          std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - started).count();
      uplink[at(i)] = encode_msg(msg);
    });

    // barrier: the server consumes exactly one update per task for this round
    for (auto& delta : deltas) delta.resize(0);
    for (Index i = 0; i < m; ++i) {
      Message decoded = decode_msg(uplink[at(i)]);
      auto* msg = std::get_if<WorkerUpdateMsg>(&decoded);
      if (msg == nullptr || msg->round != round || msg->task_id >= static_cast<std::uint32_t>(m) ||
          deltas[msg->task_id].size() != 0) {
        throw Error(ErrorCode::MissingDelta, "bad or duplicate worker update in round " + std::to_string(round));
      }
      deltas[msg->task_id] = std::move(msg->delta_b);
    }
    aggregate_round(server, deltas, cov.sigma(), problem.lambda);

    for (Index i = 0; i < m; ++i) {
      ServerBroadcastMsg msg{static_cast<std::uint32_t>(i), round, server.w.col(i), cov.sigma()(i, i), rho};
      Message received = decode_msg(encode_msg(msg));
      worker_w[at(i)] = std::move(std::get<ServerBroadcastMsg>(received).w);
    }

    ++progress.comm_rounds;
    for (Index h : budget) progress.coordinate_touches += h;
    progress.charge_flops(max_local_flops + 2.0 * dd * md * md);
    ++result.rounds;

    const bool last = t == config.T;
    if (t % config.gap_stride == 0 || last) {
      state.b = server.b;
      state.w = server.w;
      const ObjectiveReport report = evaluate_gap(problem, state, cov, config);
      progress.charge_flops(2.0 * dd * max_task_rows(problem) + 2.0 * dd * md * md);
      result.trace.push_back(make_row(progress, t, report, rho));
      if (report.gap <= config.gap_tol) {
        result.converged = true;
        break;
      }
    }
  }
  state.b = server.b;
  state.w = server.w;
  result.state = std::move(state);
  return result;
}

WStepResult run_w_step(const MultiTaskProblem& problem, const TaskCovariance& cov, DualState state,
                       const RunConfig& config, double rho) {
  RunProgress progress(config.clock);
  return run_w_step(problem, cov, std::move(state), config, rho, progress);
}

WStepResult run_ssdca_w_step(const MultiTaskProblem& problem, const TaskCovariance& cov, DualState state,
                             const RunConfig& config, RunProgress& progress) {
  check_state(problem, cov, state);
  config.validate(problem.m());

  const Index m = problem.m();
  const Index d = problem.d;
  const double dd = static_cast<double>(d);
  const ColMatrix& sigma = cov.sigma();

  // global coordinate g lives in task i with offsets[i] <= g < offsets[i + 1]
  std::vector<Index> offsets(at(m) + 1, 0);
  Index steps_per_round = 0;
  for (Index i = 0; i < m; ++i) {
    offsets[at(i) + 1] = offsets[at(i)] + problem.tasks[at(i)].n();
    steps_per_round += config.H.for_task(problem.tasks[at(i)].n());
  }
  const Index total = offsets.back();

  // Within a round the weights are kept as a snapshot plus per-task
  // accumulators v_i = sum_j Delta alpha_j x_j, which gives the exact current
  // w_i . x for every step and folds into the state like one synchronous round.
  AggregationState server{state.b, state.w, 0};
  std::vector<Vector> delta_alpha(at(m));
  std::vector<Vector> v(at(m));
  std::vector<Vector> deltas(at(m));

  CoordinateState s;
  s.rho = 1.0;
  s.lambda = problem.lambda;

  WStepResult result;
  for (int t = 1; t <= config.T; ++t) {
    for (Index i = 0; i < m; ++i) {
      delta_alpha[at(i)] = Vector::Zero(problem.tasks[at(i)].n());
      v[at(i)] = Vector::Zero(d);
    }
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(progress.comm_rounds), 0));
    for (Index h = 0; h < steps_per_round; ++h) {
      const Index g = rng.uniform_index(total);
      const Index i = static_cast<Index>(std::upper_bound(offsets.begin(), offsets.end(), g) - offsets.begin()) - 1;
      const Index j = g - offsets[at(i)];
      const TaskData& task = problem.tasks[at(i)];
      const auto x = task.features.row(j);
      s.a_cur = state.alpha[at(i)][j] + delta_alpha[at(i)][j];
      s.y = task.labels[j];
      s.q = x.squaredNorm();
      s.wx = x.dot(server.w.col(i));
      for (Index k = 0; k < m; ++k) {
        if (k != i && sigma(i, k) != 0.0) {
          s.wx += sigma(i, k) * x.dot(v[at(k)]) / (problem.lambda * static_cast<double>(problem.tasks[at(k)].n()));
        }
      }
      s.vx = x.dot(v[at(i)]);
      s.n = task.n();
      s.sigma_ii = sigma(i, i);
      const double delta = s.q > 0.0 ? coordinate_delta(problem.loss, s) : zero_row_delta(problem.loss, s.a_cur, s.y);
      if (delta == 0.0) continue;
      delta_alpha[at(i)][j] += delta;
      v[at(i)].noalias() += delta * x.transpose();
    }
    for (Index i = 0; i < m; ++i) {
      state.alpha[at(i)] += 1.0 * delta_alpha[at(i)];
      deltas[at(i)] = 1.0 * (v[at(i)] / static_cast<double>(problem.tasks[at(i)].n()));
    }
    aggregate_round(server, deltas, sigma, problem.lambda);

    ++progress.comm_rounds;
    progress.coordinate_touches += steps_per_round;
    progress.charge_flops(static_cast<double>(steps_per_round) * (6.0 + 2.0 * static_cast<double>(m)) * dd);
    ++result.rounds;

    const bool last = t == config.T;
    if (t % config.gap_stride == 0 || last) {
      state.b = server.b;
      state.w = server.w;
      RunConfig serial = config;
      serial.execution = Execution::serial;
      const ObjectiveReport report = evaluate_gap(problem, state, cov, serial);
      progress.charge_flops(2.0 * dd * static_cast<double>(total));
      result.trace.push_back(make_row(progress, t, report, 1.0));
      if (report.gap <= config.gap_tol) {
        result.converged = true;
        break;
      }
    }
  }
  state.b = server.b;
  state.w = server.w;
  result.state = std::move(state);
  return result;
}

double select_rho(const RunConfig& config, const TaskCovariance& cov) {
  return config.rho_mode == RhoMode::fixed ? config.rho_fixed : rho_bound(cov.sigma(), config.eta);
}

std::optional<int> rounds_to_gap(const std::vector<RoundTrace>& trace, double tol) {
  for (const auto& row : trace) {
    if (row.gap <= tol) return static_cast<int>(row.comm_rounds);
  }
  return std::nullopt;
}

namespace {

enum class Solver { distributed, single_machine };

struct LocalDiagnostics {
  std::optional<double> theta_hat;
  std::optional<double> round_bound;
};

// Theta measured on the largest task at the W-step's starting point, and the
// smooth-loss round bound it implies.
LocalDiagnostics local_diagnostics(const MultiTaskProblem& problem, const TaskCovariance& cov, const DualState& state,
                                   const RunConfig& config, double rho, std::uint64_t round) {
  LocalDiagnostics out;
  const auto mu = conjugate_strong_convexity(problem.loss);
  if (!mu) return out;

  Index largest = 0;
  double n_pi = 0.0;
  for (Index i = 0; i < problem.m(); ++i) {
    const TaskData& t = problem.tasks[at(i)];
    if (t.n() > problem.tasks[at(largest)].n()) largest = i;
    const double q_max = t.features.rowwise().squaredNorm().maxCoeff();
    n_pi = std::max(n_pi, static_cast<double>(t.n()) * pi_upper_bound(cov.sigma()(i, i), q_max, t.n()));
  }
  const TaskData& task = problem.tasks[at(largest)];
  LocalRoundInput in;
  in.alpha = std::span<const double>(state.alpha[at(largest)].data(), at(task.n()));
  const Vector w = state.w.col(largest);
  in.w = std::span<const double>(w.data(), at(problem.d));
  in.sigma_ii = cov.sigma()(largest, largest);
  in.rho = rho;
  in.lambda = problem.lambda;
  in.loss = problem.loss;
  in.m = problem.m();
  in.H = config.H.for_task(task.n());
  in.rng_seed = derive_seed(config.seed, round, static_cast<std::uint64_t>(largest));
  const double theta = estimate_theta(in, task, 10 * in.H);
  out.theta_hat = theta;
  const double eps = std::max(config.gap_tol, 1e-12);
  const ExtendedReal bound =
      theoretical_round_bound(*mu, problem.lambda, rho, n_pi, config.eta, theta, eps, problem.m());
  if (bound.is_finite()) out.round_bound = bound.value();
  return out;
}

ModelResult run_alternating(const MultiTaskProblem& problem, const RunConfig& config, Solver solver,
                            bool learn_covariance) {
  validate_problem(problem);
  config.validate(problem.m());

  ModelResult result;
  result.cov = TaskCovariance::scaled_identity(problem.m());
  result.state = DualState::zeros(problem);
  RunProgress progress(config.clock);
  double rho = select_rho(config, result.cov);
  double previous = std::numeric_limits<double>::infinity();

  for (int p = 1; p <= config.P; ++p) {
    progress.p = p;
    AlternationSummary summary;
    summary.p = p;
    summary.rho = solver == Solver::distributed ? rho : 1.0;
    if (solver == Solver::distributed) {
      const LocalDiagnostics diag = local_diagnostics(problem, result.cov, result.state, config, rho,
                                                      static_cast<std::uint64_t>(progress.comm_rounds));
      summary.theta_hat = diag.theta_hat;
      summary.round_bound = diag.round_bound;
    }

    WStepResult step = solver == Solver::distributed
                           ? run_w_step(problem, result.cov, std::move(result.state), config, rho, progress)
                           : run_ssdca_w_step(problem, result.cov, std::move(result.state), config, progress);
    result.state = std::move(step.state);
    result.trace.insert(result.trace.end(), step.trace.begin(), step.trace.end());
    result.W = result.state.w;
    summary.rounds = step.rounds;
    summary.final_gap = step.trace.empty() ? std::numeric_limits<double>::quiet_NaN() : step.trace.back().gap;

    if (learn_covariance && config.omega_step) {
      try {
        result.cov = omega_step(result.W);
        summary.covariance_updated = true;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ZeroWeights) throw;
      }
      result.state.w = weights_from_duals(result.state.b, result.cov.sigma(), problem.lambda);
      rho = select_rho(config, result.cov);
    }
    summary.objective = primal_objective(problem, result.W, result.cov);
    result.alternations.push_back(summary);

    if (!learn_covariance || !config.omega_step) {
      if (step.converged) break;
    } else if (previous - summary.objective < 1e-9) {
      break;
    }
    previous = summary.objective;
  }
  return result;
}

}  // namespace

ModelResult run_dmtrl(const MultiTaskProblem& problem, const RunConfig& config) {
  return run_alternating(problem, config, Solver::distributed, true);
}

ModelResult run_stl(const MultiTaskProblem& problem, const RunConfig& config) {
  return run_alternating(problem, config, Solver::distributed, false);
}

ModelResult run_ssdca(const MultiTaskProblem& problem, const RunConfig& config) {
  return run_alternating(problem, config, Solver::single_machine, true);
}

ModelResult run_centralized(const MultiTaskProblem& problem, const RunConfig& config) {
  RunConfig tight = config;
  tight.gap_tol = std::min(config.gap_tol, 1e-8);
  tight.T = std::max(config.T, 100000);
  return run_ssdca(problem, tight);
}

}  // namespace dmtrl
