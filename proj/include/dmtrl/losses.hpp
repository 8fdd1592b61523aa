#pragma once

#include <optional>

#include "dmtrl/core.hpp"

namespace dmtrl {

/// A real number or +infinity. Conjugates return this instead of a float
/// sentinel so an out-of-domain value cannot leak into a sum unnoticed.
class ExtendedReal {
 public:
  explicit ExtendedReal(double v) : value_(v), finite_(true) {}
  static ExtendedReal infinity() { return ExtendedReal(); }

  bool is_finite() const { return finite_; }
  /// Throws ConjugateDomainViolation on infinity.
  double value() const;
  /// +inf as a double, for display only.
  double as_double() const;

 private:
  ExtendedReal() : value_(0.0), finite_(false) {}
  double value_;
  bool finite_;
};

/// hinge: max(0, 1 - y a), 1-Lipschitz.  squared: (a - y)^2, 2-smooth (mu = 1/2).
double loss_eval(LossKind loss, double a, double y);

/// l*(u) for the loss at label y.
ExtendedReal loss_conjugate(LossKind loss, double u, double y);

/// Strong-convexity modulus of the conjugate; empty for hinge.
std::optional<double> conjugate_strong_convexity(LossKind loss);

/// Lipschitz constant of the loss; empty for squared (unbounded slope).
std::optional<double> lipschitz_constant(LossKind loss);

/// Everything the exact one-coordinate maximizer of the local subproblem
/// needs. a_cur is alpha_j + Delta alpha_j; wx = w_i . x_j; vx = v . x_j with
/// v = sum_j Delta alpha_j x_j; q = |x_j|^2.
struct CoordinateState {
  double a_cur = 0.0;
  double y = 0.0;
  double wx = 0.0;
  double vx = 0.0;
  double q = 0.0;
  Index n = 1;
  double rho = 1.0;
  double sigma_ii = 1.0;
  double lambda = 1.0;
};

/// Exact maximizer delta of the local subproblem along coordinate j.
/// Throws NonPositiveCurvature when q <= 0 or rho * sigma_ii <= 0.
double coordinate_delta(LossKind loss, const CoordinateState& s);

/// Maximizer for a zero feature row (q == 0), where the subproblem is
/// separable in the coordinate: the conjugate term alone decides.
double zero_row_delta(LossKind loss, double a_cur, double y);

/// Change of the local subproblem objective when coordinate j moves by delta.
double coordinate_gain(LossKind loss, const CoordinateState& s, double delta);

}  // namespace dmtrl
