#include "dmtrl/server.hpp"

#include <algorithm>
#include <cmath>

namespace dmtrl {

void aggregate_round(AggregationState& state, std::span<const Vector> deltas, const ColMatrix& sigma, double lambda) {
  const Index m = state.b.cols();
  const Index d = state.b.rows();
  if (static_cast<Index>(deltas.size()) != m) {
    throw Error(ErrorCode::MissingDelta,
                "expected " + std::to_string(m) + " deltas, got " + std::to_string(deltas.size()));
  }
  ColMatrix db(d, m);
  for (Index i = 0; i < m; ++i) {
    const Vector& delta = deltas[static_cast<std::size_t>(i)];
    if (delta.size() != d) throw Error(ErrorCode::MissingDelta, "no delta of length d for task " + std::to_string(i));
    db.col(i) = delta;
  }
  state.b += db;
  state.w.noalias() += (db * sigma) / lambda;
  ++state.round;
}

TaskCovariance omega_step(const ColMatrix& weights, std::optional<double> eps) {
  const ColMatrix gram = weights.transpose() * weights;
  Eigen::SelfAdjointEigenSolver<ColMatrix> eig(gram);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::ZeroWeights, "eigendecomposition of W^T W failed");

  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const double floor = eps.value_or(1e-12 * std::max(root.maxCoeff(), 1.0));
  if (!(floor > 0.0)) throw Error(ErrorCode::BadConfig, "eigenvalue floor must be positive");
  if ((root.array() <= floor).all()) {
    throw Error(ErrorCode::ZeroWeights, "W is numerically zero; keep the previous covariance");
  }
  const Vector floored = root.cwiseMax(floor);
  return TaskCovariance::from_spectrum(eig.eigenvectors(), floored / floored.sum());
}

double rho_bound(const ColMatrix& sigma, double eta) {
  double worst = 0.0;
  for (Index i = 0; i < sigma.rows(); ++i) {
    const double diag = sigma(i, i);
    if (!(diag > 0.0)) throw Error(ErrorCode::DegenerateDiagonal, "sigma_" + std::to_string(i) + std::to_string(i) + " <= 0");
    worst = std::max(worst, sigma.row(i).cwiseAbs().sum() / diag);
  }
  return eta * worst;
}

double pi_upper_bound(double sigma_ii, double q_max, Index n_i) {
  return sigma_ii * q_max / static_cast<double>(n_i);
}

ExtendedReal theoretical_round_bound(double mu, double lambda, double rho, double n_pi, double eta, double theta,
                                     double eps_target, Index m) {
  if (!(theta < 1.0)) return ExtendedReal::infinity();
  if (!(eps_target > 0.0)) throw Error(ErrorCode::BadConfig, "eps_target must be positive");
  const double contraction = (lambda * mu + rho * n_pi) / (lambda * mu);
  return ExtendedReal(contraction * std::log(static_cast<double>(m) / eps_target) / (eta * (1.0 - theta)));
}

}  // namespace dmtrl
