#pragma once

#include <chrono>
#include <optional>
#include <vector>

#include "dmtrl/core.hpp"

namespace dmtrl {

/// One row of the convergence trace.
struct RoundTrace {
  int p = 0;                   // alternating iteration, 1-based
  int t = 0;                   // round within the W-step, 1-based
  double dual = 0.0;
  double primal = 0.0;
  double gap = 0.0;
  double elapsed_ms = 0.0;     // simulated or wall clock, per RunConfig::clock
  Index comm_rounds = 0;       // cumulative over the whole run
  Index coordinate_touches = 0;  // cumulative coordinate updates, all tasks
  double rho = 0.0;
};

/// Counters carried across the W-steps of one run.
class RunProgress {
 public:
  explicit RunProgress(Clock clock = Clock::simulated);

  int p = 1;
  Index comm_rounds = 0;
  Index coordinate_touches = 0;

  /// Charges floating-point work on the critical path to the simulated clock
  /// (nominal 1 GFLOP/s).
  void charge_flops(double flops) { simulated_ms_ += flops * 1e-6; }
  double elapsed_ms() const;

 private:
  Clock clock_;
  double simulated_ms_ = 0.0;
  std::chrono::steady_clock::time_point start_;
};

struct WStepResult {
  DualState state;
  std::vector<RoundTrace> trace;
  bool converged = false;
  int rounds = 0;
};

/// Distributed W-step: T bulk-synchronous rounds (or until gap <= gap_tol) of
/// local SDCA on every task, eta-scaled dual updates, server aggregation of
/// the Delta b messages and weight broadcast. All traffic goes through the
/// binary message codec.
WStepResult run_w_step(const MultiTaskProblem& problem, const TaskCovariance& cov, DualState state,
                       const RunConfig& config, double rho, RunProgress& progress);
WStepResult run_w_step(const MultiTaskProblem& problem, const TaskCovariance& cov, DualState state,
                       const RunConfig& config, double rho);

/// Single-machine SDCA on the global dual: uniformly random coordinates over
/// all tasks, exact maximization of D. One trace round is sum_i H_i steps.
WStepResult run_ssdca_w_step(const MultiTaskProblem& problem, const TaskCovariance& cov, DualState state,
                             const RunConfig& config, RunProgress& progress);

struct AlternationSummary {
  int p = 0;
  double rho = 0.0;              // rho used during this W-step
  int rounds = 0;
  double final_gap = 0.0;
  double objective = 0.0;        // primal objective after the covariance update
  bool covariance_updated = false;
  std::optional<double> theta_hat;    // measured on the largest task at W-step start
  std::optional<double> round_bound;  // smooth losses only
};

struct ModelResult {
  ColMatrix W;  // d x m, from the last W-step
  TaskCovariance cov;
  DualState state;  // weights recomputed under the final covariance
  std::vector<RoundTrace> trace;
  std::vector<AlternationSummary> alternations;
};

/// Alternates distributed W-steps and covariance updates, starting from
/// alpha = 0, Sigma = (1/m) I. rho follows RunConfig::rho_mode.
ModelResult run_dmtrl(const MultiTaskProblem& problem, const RunConfig& config);

/// Independent tasks: Sigma fixed at (1/m) I, no covariance update.
ModelResult run_stl(const MultiTaskProblem& problem, const RunConfig& config);

/// Same alternation as run_dmtrl with single-machine SDCA W-steps.
ModelResult run_ssdca(const MultiTaskProblem& problem, const RunConfig& config);

/// run_ssdca with every W-step driven to gap <= 1e-8.
ModelResult run_centralized(const MultiTaskProblem& problem, const RunConfig& config);

/// rho for a covariance under the configured mode.
double select_rho(const RunConfig& config, const TaskCovariance& cov);

/// First round whose gap is <= tol, or empty.
std::optional<int> rounds_to_gap(const std::vector<RoundTrace>& trace, double tol);

}  // namespace dmtrl
