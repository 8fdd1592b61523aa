#pragma once

#include "dmtrl/core.hpp"

namespace dmtrl {

struct ObjectiveReport {
  double primal = 0.0;
  double dual = 0.0;
  /// Per-sample decomposition; agrees with primal - dual to rounding.
  double gap = 0.0;
  Vector per_task_loss;  // empirical mean loss of each task
  double quad = 0.0;     // alpha^T K alpha
};

/// alpha^T K alpha = sum_{i,i'} sigma_{ii'} <b_i, b_i'>, never forming K.
double quad_form(const ColMatrix& b, const ColMatrix& sigma);

/// w_i = (1/lambda) sum_{i'} sigma_{ii'} b_{i'}.
ColMatrix weights_from_duals(const ColMatrix& b, const ColMatrix& sigma, double lambda);

/// b_i recomputed from the dual blocks.
ColMatrix b_from_alpha(const MultiTaskProblem& problem, const std::vector<Vector>& alpha);

/// Mean loss of each task at the given weights.
Vector per_task_loss(const MultiTaskProblem& problem, const ColMatrix& weights);

/// sum_i mean loss_i + (lambda/2) tr(W Omega W^T), with Omega given directly.
double primal_objective(const MultiTaskProblem& problem, const ColMatrix& weights, const ColMatrix& omega);
/// Same objective; the trace term goes through the covariance spectrum.
double primal_objective(const MultiTaskProblem& problem, const ColMatrix& weights, const TaskCovariance& cov);

/// -(1/(2 lambda)) alpha^T K alpha - sum_i (1/n_i) sum_j l*(-alpha_j).
/// Throws ConjugateDomainViolation when any alpha_j is infeasible.
double dual_objective(const MultiTaskProblem& problem, const std::vector<Vector>& alpha, const ColMatrix& b,
                      const ColMatrix& sigma);

/// Per-task partial sums of the certificate, computable on a worker from its
/// own data, alpha block and w_i.
struct TaskGapTerms {
  double mean_loss = 0.0;       // (1/n) sum l(w.x)
  double mean_conjugate = 0.0;  // (1/n) sum l*(-alpha)
  double mean_gap = 0.0;        // (1/n) sum [l(w.x) + l*(-alpha) + alpha w.x]
};

TaskGapTerms task_gap_terms(const TaskData& task, LossKind loss, const Vector& alpha, const Eigen::Ref<const Vector>& w);

/// Server-side assembly of the report from per-task terms.
ObjectiveReport assemble_report(const MultiTaskProblem& problem, const std::vector<TaskGapTerms>& terms,
                                const DualState& state, const TaskCovariance& cov);

/// Full certificate with per-task terms computed serially.
ObjectiveReport duality_gap(const MultiTaskProblem& problem, const DualState& state, const TaskCovariance& cov);

/// Largest relative deviations of stored b and w from recomputation.
struct ConsistencyError {
  double b = 0.0;
  double w = 0.0;
};
ConsistencyError consistency_error(const MultiTaskProblem& problem, const DualState& state, const ColMatrix& sigma);

}  // namespace dmtrl
