#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "dmtrl/core.hpp"

namespace dmtrl {

/// What a worker receives for one round: its dual block, its current weight
/// vector, the own-task covariance entry and the separability parameter.
struct LocalRoundInput {
  std::span<const double> alpha;  // alpha_[i], length n_i
  std::span<const double> w;      // w_i, length d
  double sigma_ii = 1.0;
  double rho = 1.0;
  double lambda = 1.0;
  LossKind loss = LossKind::squared;
  Index m = 1;  // number of tasks; only scales the constant term
  Index H = 1;
  std::uint64_t rng_seed = 0;
};

struct LocalRoundOutput {
  Vector delta_alpha;     // Delta alpha_[i]
  Vector delta_b;         // (1/n_i) sum_j Delta alpha_j x_j, before eta scaling
  double local_obj_gain = 0.0;
};

/// D_i^rho(delta_alpha) including the constant -(1/(2 lambda m)) alpha^T K alpha.
double local_subproblem_objective(const TaskData& task, const LocalRoundInput& input, const Vector& delta_alpha,
                                  double quad_snapshot);

/// H steps of stochastic dual coordinate ascent on the local subproblem.
/// Coordinates are drawn from an mt19937_64 seeded with input.rng_seed.
LocalRoundOutput local_sdca(const LocalRoundInput& input, const TaskData& task);

/// Empirical Theta for the H-step solution against a reference run of
/// reference_iters steps on the same random stream. Clamped to [0, 1).
double estimate_theta(const LocalRoundInput& input, const TaskData& task, Index reference_iters);

/// Smooth-loss iteration count that guarantees Theta-approximate local
/// solutions: log(1/Theta) (rho sigma_ii q_max + mu lambda n_i) / (mu lambda).
/// Empty for hinge, whose bound depends on the unknown local optimum.
std::optional<Index> suggested_iterations(LossKind loss, double theta_target, double rho, double sigma_ii,
                                          double q_max, double lambda, Index n_i);

}  // namespace dmtrl
