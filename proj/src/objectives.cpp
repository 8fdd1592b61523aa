#include "dmtrl/objectives.hpp"

#include <algorithm>

#include "dmtrl/losses.hpp"

namespace dmtrl {

double quad_form(const ColMatrix& b, const ColMatrix& sigma) {
  const ColMatrix gram = b.transpose() * b;
  return (sigma.array() * gram.array()).sum();
}

ColMatrix weights_from_duals(const ColMatrix& b, const ColMatrix& sigma, double lambda) {
  return (b * sigma) / lambda;
}

ColMatrix b_from_alpha(const MultiTaskProblem& problem, const std::vector<Vector>& alpha) {
  ColMatrix b(problem.d, problem.m());
  for (Index i = 0; i < problem.m(); ++i) {
    const TaskData& t = problem.tasks[static_cast<std::size_t>(i)];
    b.col(i) = t.features.transpose() * alpha[static_cast<std::size_t>(i)] / static_cast<double>(t.n());
  }
  return b;
}

Vector per_task_loss(const MultiTaskProblem& problem, const ColMatrix& weights) {
  Vector out(problem.m());
  for (Index i = 0; i < problem.m(); ++i) {
    const TaskData& t = problem.tasks[static_cast<std::size_t>(i)];
    const Vector pred = t.features * weights.col(i);
    double sum = 0.0;
    for (Index j = 0; j < t.n(); ++j) sum += loss_eval(problem.loss, pred[j], t.labels[j]);
    out[i] = sum / static_cast<double>(t.n());
  }
  return out;
}

double primal_objective(const MultiTaskProblem& problem, const ColMatrix& weights, const ColMatrix& omega) {
  const double trace = (weights * omega * weights.transpose()).trace();
  return per_task_loss(problem, weights).sum() + 0.5 * problem.lambda * trace;
}

double primal_objective(const MultiTaskProblem& problem, const ColMatrix& weights, const TaskCovariance& cov) {
  return per_task_loss(problem, weights).sum() + 0.5 * problem.lambda * cov.regularizer(weights);
}

double dual_objective(const MultiTaskProblem& problem, const std::vector<Vector>& alpha, const ColMatrix& b,
                      const ColMatrix& sigma) {
  double conj = 0.0;
  for (Index i = 0; i < problem.m(); ++i) {
    const TaskData& t = problem.tasks[static_cast<std::size_t>(i)];
    const Vector& a = alpha[static_cast<std::size_t>(i)];
    double sum = 0.0;
    for (Index j = 0; j < t.n(); ++j) sum += loss_conjugate(problem.loss, -a[j], t.labels[j]).value();
    conj += sum / static_cast<double>(t.n());
  }
  return -quad_form(b, sigma) / (2.0 * problem.lambda) - conj;
}

TaskGapTerms task_gap_terms(const TaskData& task, LossKind loss, const Vector& alpha, const Eigen::Ref<const Vector>& w) {
  const Vector pred = task.features * w;
  double loss_sum = 0.0;
  double conj_sum = 0.0;
  double gap_sum = 0.0;
  for (Index j = 0; j < task.n(); ++j) {
    const double l = loss_eval(loss, pred[j], task.labels[j]);
    const double c = loss_conjugate(loss, -alpha[j], task.labels[j]).value();
    loss_sum += l;
    conj_sum += c;
    gap_sum += l + c + alpha[j] * pred[j];
  }
  const double n = static_cast<double>(task.n());
  return {loss_sum / n, conj_sum / n, gap_sum / n};
}

ObjectiveReport assemble_report(const MultiTaskProblem& problem, const std::vector<TaskGapTerms>& terms,
                                const DualState& state, const TaskCovariance& cov) {
  ObjectiveReport r;
  r.per_task_loss.resize(problem.m());
  double loss = 0.0;
  double conj = 0.0;
  double gap = 0.0;
  for (Index i = 0; i < problem.m(); ++i) {
    const TaskGapTerms& t = terms[static_cast<std::size_t>(i)];
    r.per_task_loss[i] = t.mean_loss;
    loss += t.mean_loss;
    conj += t.mean_conjugate;
    gap += t.mean_gap;
  }
  r.quad = quad_form(state.b, cov.sigma());
  r.primal = loss + 0.5 * problem.lambda * cov.regularizer(state.w);
  r.dual = -r.quad / (2.0 * problem.lambda) - conj;
  r.gap = gap;
  return r;
}

ObjectiveReport duality_gap(const MultiTaskProblem& problem, const DualState& state, const TaskCovariance& cov) {
  std::vector<TaskGapTerms> terms;
  terms.reserve(problem.tasks.size());
  for (Index i = 0; i < problem.m(); ++i) {
    terms.push_back(task_gap_terms(problem.tasks[static_cast<std::size_t>(i)], problem.loss,
                                   state.alpha[static_cast<std::size_t>(i)], state.w.col(i)));
  }
  return assemble_report(problem, terms, state, cov);
}

ConsistencyError consistency_error(const MultiTaskProblem& problem, const DualState& state, const ColMatrix& sigma) {
  const ColMatrix b = b_from_alpha(problem, state.alpha);
  const ColMatrix w = weights_from_duals(b, sigma, problem.lambda);
  auto rel = [](const ColMatrix& stored, const ColMatrix& fresh) {
    const double scale = std::max(fresh.cwiseAbs().maxCoeff(), stored.cwiseAbs().maxCoeff());
    return scale == 0.0 ? 0.0 : (stored - fresh).cwiseAbs().maxCoeff() / scale;
  };
  if (b.size() == 0) return {};
  return {rel(state.b, b), rel(state.w, w)};
}

}  // namespace dmtrl
