#include "dmtrl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dmtrl {

namespace {
// Dual iterates reach the hinge box boundary through sums of rounded
// increments; anything this close to the box is treated as on it.
constexpr double kBoxSlack = 1e-12;
}  // namespace

double ExtendedReal::value() const {
  if (!finite_) throw Error(ErrorCode::ConjugateDomainViolation, "conjugate evaluated outside its domain");
  return value_;
}

double ExtendedReal::as_double() const {
  return finite_ ? value_ : std::numeric_limits<double>::infinity();
}

double loss_eval(LossKind loss, double a, double y) {
  switch (loss) {
    case LossKind::hinge: return std::max(0.0, 1.0 - y * a);
    case LossKind::squared: return (a - y) * (a - y);
  }
  return 0.0;
}

ExtendedReal loss_conjugate(LossKind loss, double u, double y) {
  switch (loss) {
    case LossKind::hinge: {
      // sup_a u a - max(0, 1 - y a) is finite iff u y in [-1, 0], where it equals u y (= u / y).
      const double t = u * y;
      if (t < -1.0 - kBoxSlack || t > kBoxSlack) return ExtendedReal::infinity();
      return ExtendedReal(std::clamp(t, -1.0, 0.0));
    }
    case LossKind::squared:
      return ExtendedReal(0.25 * u * u + u * y);
  }
  return ExtendedReal::infinity();
}

std::optional<double> conjugate_strong_convexity(LossKind loss) {
  if (loss == LossKind::squared) return 0.5;
  return std::nullopt;
}

std::optional<double> lipschitz_constant(LossKind loss) {
  if (loss == LossKind::hinge) return 1.0;
  return std::nullopt;
}

double coordinate_delta(LossKind loss, const CoordinateState& s) {
  const double curvature = s.rho * s.sigma_ii;
  if (!(s.q > 0.0) || !(curvature > 0.0)) {
    throw Error(ErrorCode::NonPositiveCurvature, "coordinate step needs q > 0 and rho * sigma_ii > 0");
  }
  const double n = static_cast<double>(s.n);
  switch (loss) {
    case LossKind::squared: {
      const double c = curvature / (s.lambda * n);
      return ((s.y - 0.5 * s.a_cur - s.wx) - c * s.vx) / (0.5 + c * s.q);
    }
    case LossKind::hinge: {
      const double unconstrained = (s.lambda * n * (s.y - s.wx) / curvature - s.vx) / s.q;
      // box: (a_cur + delta) * y in [0, 1]
      const double target = std::clamp((s.a_cur + unconstrained) * s.y, 0.0, 1.0) * s.y;
      return target - s.a_cur;
    }
  }
  return 0.0;
}

double zero_row_delta(LossKind loss, double a_cur, double y) {
  switch (loss) {
    case LossKind::squared: return 2.0 * y - a_cur;
    case LossKind::hinge: return y - a_cur;
  }
  return 0.0;
}

double coordinate_gain(LossKind loss, const CoordinateState& s, double delta) {
  const double n = static_cast<double>(s.n);
  const double conj_before = loss_conjugate(loss, -s.a_cur, s.y).value();
  const double conj_after = loss_conjugate(loss, -(s.a_cur + delta), s.y).value();
  const double quad = s.rho * s.sigma_ii / (2.0 * s.lambda * n * n) * (2.0 * delta * s.vx + delta * delta * s.q);
  return -(conj_after - conj_before) / n - delta * s.wx / n - quad;
}

}  // namespace dmtrl
