#pragma once

#include <optional>
#include <span>

#include "dmtrl/core.hpp"
#include "dmtrl/losses.hpp"

namespace dmtrl {

/// Server-held aggregates. w always equals weights_from_duals(b, Sigma, lambda).
struct AggregationState {
  ColMatrix b;  // d x m
  ColMatrix w;  // d x m
  Index round = 0;
};

/// Applies one synchronous round of (already eta-scaled) worker deltas:
/// b_i += db_i and w_i += (1/lambda) sum_{i'} sigma_{ii'} db_{i'}.
/// Throws MissingDelta unless exactly one delta of length d per task arrives.
void aggregate_round(AggregationState& state, std::span<const Vector> deltas, const ColMatrix& sigma, double lambda);

/// Closed-form covariance update for fixed W (d x m):
///   W^T W = U diag(s) U^T,  Sigma = U diag(sqrt s) U^T / sum_k sqrt s_k.
/// sqrt s_k is floored at eps so that Omega = Sigma^{-1} stays finite and
/// Sigma stays positive definite; the default eps is 1e-12 max(sqrt s_max, 1).
/// Throws ZeroWeights when every sqrt s_k <= eps.
TaskCovariance omega_step(const ColMatrix& weights, std::optional<double> eps = std::nullopt);

/// eta * max_i sum_{i'} |sigma_{ii'}| / sigma_ii. Throws DegenerateDiagonal
/// if some sigma_ii <= 0.
double rho_bound(const ColMatrix& sigma, double eta);

/// Upper bound on pi_i (largest eigenvalue of the task's own K block):
/// sigma_ii q_max / n_i, which is sigma_ii / n_i for unit-norm features.
double pi_upper_bound(double sigma_ii, double q_max, Index n_i);

/// Rounds sufficient for expected dual suboptimality eps_target with smooth losses:
///   (1 / (eta (1 - theta))) ((lambda mu + rho n pi) / (lambda mu)) log(m / eps_target).
/// Infinite as theta -> 1.
ExtendedReal theoretical_round_bound(double mu, double lambda, double rho, double n_pi, double eta, double theta,
                                     double eps_target, Index m);

}  // namespace dmtrl
