#include "dmtrl/local_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dmtrl/losses.hpp"

namespace dmtrl {

namespace {

void check_input(const LocalRoundInput& in, const TaskData& task) {
  if (static_cast<Index>(in.alpha.size()) != task.n() || static_cast<Index>(in.w.size()) != task.d()) {
    throw Error(ErrorCode::DimensionMismatch, "local round input does not match task " + std::to_string(task.task_id));
  }
  if (!(in.rho > 0.0) || !(in.sigma_ii > 0.0)) {
    throw Error(ErrorCode::NonPositiveCurvature, "local round needs rho > 0 and sigma_ii > 0");
  }
}

// Runs `steps` coordinate maximizations; steps may be zero here.
LocalRoundOutput run_steps(const LocalRoundInput& in, const TaskData& task, Index steps) {
  const Index n = task.n();
  const auto alpha = Eigen::Map<const Vector>(in.alpha.data(), n);
  const auto w = Eigen::Map<const Vector>(in.w.data(), task.d());

  LocalRoundOutput out;
  out.delta_alpha = Vector::Zero(n);
  Vector v = Vector::Zero(task.d());  // sum_j Delta alpha_j x_j

  CoordinateState s;
  s.n = n;
  s.rho = in.rho;
  s.sigma_ii = in.sigma_ii;
  s.lambda = in.lambda;

  Rng rng(in.rng_seed);
  for (Index h = 0; h < steps; ++h) {
    const Index j = rng.uniform_index(n);
    const auto x = task.features.row(j);
    s.a_cur = alpha[j] + out.delta_alpha[j];
    s.y = task.labels[j];
    s.q = x.squaredNorm();
    s.wx = x.dot(w);
    s.vx = x.dot(v);
    const double delta = s.q > 0.0 ? coordinate_delta(in.loss, s) : zero_row_delta(in.loss, s.a_cur, s.y);
    if (delta == 0.0) continue;
    out.local_obj_gain += coordinate_gain(in.loss, s, delta);
    out.delta_alpha[j] += delta;
    v.noalias() += delta * x.transpose();
  }
  out.delta_b = v / static_cast<double>(n);
  return out;
}

}  // namespace

double local_subproblem_objective(const TaskData& task, const LocalRoundInput& in, const Vector& delta_alpha,
                                  double quad_snapshot) {
  check_input(in, task);
  if (delta_alpha.size() != task.n()) throw Error(ErrorCode::DimensionMismatch, "delta_alpha length");
  const double n = static_cast<double>(task.n());
  const auto alpha = Eigen::Map<const Vector>(in.alpha.data(), task.n());
  const auto w = Eigen::Map<const Vector>(in.w.data(), task.d());

  double conj = 0.0;
  for (Index j = 0; j < task.n(); ++j) {
    conj += loss_conjugate(in.loss, -alpha[j] - delta_alpha[j], task.labels[j]).value();
  }
  const Vector pred = task.features * w;
  const Vector v = task.features.transpose() * delta_alpha;
  return -conj / n - delta_alpha.dot(pred) / n - quad_snapshot / (2.0 * in.lambda * static_cast<double>(in.m)) -
         in.rho / (2.0 * in.lambda) * (in.sigma_ii / (n * n)) * v.squaredNorm();
}

LocalRoundOutput local_sdca(const LocalRoundInput& input, const TaskData& task) {
  check_input(input, task);
  if (input.H < 1) throw Error(ErrorCode::BadConfig, "local SDCA needs H >= 1");
  return run_steps(input, task, input.H);
}

double estimate_theta(const LocalRoundInput& input, const TaskData& task, Index reference_iters) {
  check_input(input, task);
  const double reached = run_steps(input, task, std::max<Index>(input.H, 0)).local_obj_gain;
  const double best = run_steps(input, task, reference_iters).local_obj_gain;
  if (best <= 1e-14) return 0.0;  // already optimal
  const double theta = (best - reached) / best;
  return std::clamp(theta, 0.0, std::nextafter(1.0, 0.0));
}

std::optional<Index> suggested_iterations(LossKind loss, double theta_target, double rho, double sigma_ii,
                                          double q_max, double lambda, Index n_i) {
  const auto mu = conjugate_strong_convexity(loss);
  if (!mu) return std::nullopt;
  if (!(theta_target > 0.0 && theta_target <= 1.0)) {
    throw Error(ErrorCode::BadConfig, "theta target must lie in (0, 1]");
  }
  const double bound = std::log(1.0 / theta_target) * (rho * sigma_ii * q_max + *mu * lambda * static_cast<double>(n_i)) /
                       (*mu * lambda);
  // absorb last-bit rounding before the ceiling
  return static_cast<Index>(std::ceil(bound * (1.0 - 1e-12)));
}

}  // namespace dmtrl
