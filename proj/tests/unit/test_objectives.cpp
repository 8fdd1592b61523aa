#include <doctest.h>

#include "dmtrl/losses.hpp"
#include "dmtrl/objectives.hpp"
#include "oracles.hpp"

using namespace dmtrl;

namespace {

DualState state_for(const MultiTaskProblem& p, const std::vector<Vector>& alpha, const ColMatrix& sigma) {
  DualState s;
  s.alpha = alpha;
  s.b = b_from_alpha(p, alpha);
  s.w = weights_from_duals(s.b, sigma, p.lambda);
  return s;
}

}  // namespace

TEST_CASE("quad_form examples") {
  CHECK(quad_form(ColMatrix::Zero(3, 2), ColMatrix::Identity(2, 2)) == 0.0);
  ColMatrix b(2, 2);
  b << 1, 0, 0, 1;
  CHECK(quad_form(b, ColMatrix::Identity(2, 2) / 2.0) == doctest::Approx(1.0));
}

TEST_CASE("quad_form matches an explicit K") {
  std::mt19937_64 gen(10);
  const MultiTaskProblem p = oracle::random_problem(gen, 3, 4, 5, 5, LossKind::squared, 0.5);
  const ColMatrix sigma = oracle::random_trace_one_psd(gen, 3);
  const auto alpha = oracle::random_alpha(gen, p);
  const Vector a = oracle::stack(alpha);
  const double explicit_quad = a.dot(oracle::brute_force_k(p, sigma) * a);
  CHECK(std::abs(quad_form(b_from_alpha(p, alpha), sigma) - explicit_quad) <= 1e-10 * std::max(1.0, explicit_quad));
  CHECK(quad_form(b_from_alpha(p, alpha), sigma) >= -1e-9);
}

TEST_CASE("weights from duals") {
  CHECK(weights_from_duals(ColMatrix::Zero(2, 3), ColMatrix::Identity(3, 3), 1.0).isZero());
  ColMatrix b(2, 1);
  b << 1, 0;
  const ColMatrix w = weights_from_duals(b, ColMatrix::Identity(1, 1), 1.0);
  CHECK(w(0, 0) == 1.0);
  CHECK(w(1, 0) == 0.0);

  std::mt19937_64 gen(11);
  const MultiTaskProblem p = oracle::random_problem(gen, 2, 3, 4, 7, LossKind::squared, 0.3);
  ColMatrix sigma(2, 2);
  sigma << 1, -1, -1, 2;
  sigma /= 3.0;
  const auto alpha = oracle::random_alpha(gen, p);
  const ColMatrix expect = oracle::weights_per_sample(p, alpha, sigma);
  CHECK((weights_from_duals(b_from_alpha(p, alpha), sigma, p.lambda) - expect).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("primal objective special cases") {
  std::mt19937_64 gen(12);
  const MultiTaskProblem p = oracle::random_problem(gen, 3, 4, 5, 9, LossKind::hinge, 0.2);
  const TaskCovariance cov = TaskCovariance::scaled_identity(3);
  CHECK(primal_objective(p, ColMatrix::Zero(4, 3), cov) == doctest::Approx(3.0));
  CHECK(primal_objective(p, ColMatrix::Zero(4, 3), cov.omega()) == doctest::Approx(3.0));

  MultiTaskProblem one;
  one.d = 2;
  one.lambda = 0.5;
  TaskData t;
  t.features = Matrix(1, 2);
  t.features << 1, 2;
  t.labels = Vector::Constant(1, 5.0);
  one.tasks.push_back(t);
  ColMatrix w(2, 1);
  w << 1, 2;  // w.x = 5 = y
  const TaskCovariance c1 = TaskCovariance::scaled_identity(1);
  CHECK(primal_objective(one, w, c1) == doctest::Approx(0.5 / 2.0 * 5.0));
}

TEST_CASE("primal objective matches a naive sum") {
  std::mt19937_64 gen(13);
  for (LossKind kind : {LossKind::hinge, LossKind::squared}) {
    const MultiTaskProblem p = oracle::random_problem(gen, 3, 5, 4, 12, kind, 0.7);
    const TaskCovariance cov = TaskCovariance::from_sigma(oracle::random_trace_one_psd(gen, 3));
    const ColMatrix w = ColMatrix::Random(5, 3);
    double expect = 0.0;
    for (Index i = 0; i < p.m(); ++i) {
      const auto& t = p.tasks[oracle::at(i)];
      double s = 0.0;
      for (Index j = 0; j < t.n(); ++j) {
        double a = 0.0;
        for (Index k = 0; k < p.d; ++k) a += w(k, i) * t.features(j, k);
        s += oracle::loss(kind, a, t.labels[j]);
      }
      expect += s / static_cast<double>(t.n());
    }
    const ColMatrix omega = cov.sigma().inverse();
    double tr = 0.0;
    for (Index i = 0; i < 3; ++i) {
      for (Index i2 = 0; i2 < 3; ++i2) tr += omega(i, i2) * w.col(i).dot(w.col(i2));
    }
    expect += p.lambda / 2.0 * tr;
    CHECK(std::abs(primal_objective(p, w, cov) - expect) <= 1e-10 * std::max(1.0, expect));
    CHECK(std::abs(primal_objective(p, w, cov.omega()) - expect) <= 1e-10 * std::max(1.0, expect));
  }
}

TEST_CASE("dual objective at zero and against explicit K") {
  std::mt19937_64 gen(14);
  for (LossKind kind : {LossKind::hinge, LossKind::squared}) {
    const MultiTaskProblem p = oracle::random_problem(gen, 3, 4, 5, 10, kind, 0.4);
    const ColMatrix sigma = oracle::random_trace_one_psd(gen, 3);
    const DualState zero = DualState::zeros(p);
    CHECK(dual_objective(p, zero.alpha, zero.b, sigma) == 0.0);
    const auto alpha = oracle::random_alpha(gen, p);
    const double expect = oracle::dual_from_k(p, alpha, oracle::brute_force_k(p, sigma));
    CHECK(std::abs(dual_objective(p, alpha, b_from_alpha(p, alpha), sigma) - expect) <= 1e-10 * std::max(1.0, std::abs(expect)));
  }
}

TEST_CASE("infeasible hinge duals are reported") {
  std::mt19937_64 gen(15);
  const MultiTaskProblem p = oracle::random_problem(gen, 2, 3, 4, 4, LossKind::hinge, 0.4);
  auto alpha = oracle::random_alpha(gen, p);
  alpha[0][0] = 3.0 * p.tasks[0].labels[0];
  try {
    dual_objective(p, alpha, b_from_alpha(p, alpha), ColMatrix::Identity(2, 2) / 2.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConjugateDomainViolation);
  }
}

TEST_CASE("duality gap decomposition") {
  std::mt19937_64 gen(16);
  {
    const MultiTaskProblem p = oracle::random_problem(gen, 4, 3, 5, 8, LossKind::hinge, 0.1);
    const ObjectiveReport r = duality_gap(p, DualState::zeros(p), TaskCovariance::scaled_identity(4));
    CHECK(r.gap == doctest::Approx(4.0));
    CHECK(r.primal == doctest::Approx(4.0));
    CHECK(r.dual == 0.0);
  }
  for (LossKind kind : {LossKind::hinge, LossKind::squared}) {
    for (int rep = 0; rep < 20; ++rep) {
      const MultiTaskProblem p = oracle::random_problem(gen, 3, 4, 5, 20, kind, 0.3);
      const TaskCovariance cov = TaskCovariance::from_sigma(oracle::random_trace_one_psd(gen, 3));
      const DualState s = state_for(p, oracle::random_alpha(gen, p), cov.sigma());
      const ObjectiveReport r = duality_gap(p, s, cov);
      const double two_path = primal_objective(p, s.w, cov.omega()) - dual_objective(p, s.alpha, s.b, cov.sigma());
      CHECK(std::abs(r.gap - two_path) <= 1e-8 * std::max(1.0, std::abs(two_path)));
      CHECK(std::abs(r.primal - r.dual - r.gap) <= 1e-9 * std::max(1.0, std::abs(r.primal)));
      CHECK(r.gap >= -1e-9);
      // lambda tr(W Omega W^T) = (1/lambda) alpha^T K alpha for consistent states
      const double lhs = p.lambda * cov.regularizer(s.w);
      CHECK(std::abs(lhs - r.quad / p.lambda) <= 1e-9 * std::max(1.0, std::abs(lhs)));
    }
  }
}

TEST_CASE("consistency error detects drift") {
  std::mt19937_64 gen(17);
  const MultiTaskProblem p = oracle::random_problem(gen, 3, 4, 5, 8, LossKind::squared, 0.3);
  const ColMatrix sigma = oracle::random_trace_one_psd(gen, 3);
  DualState s = state_for(p, oracle::random_alpha(gen, p), sigma);
  CHECK(consistency_error(p, s, sigma).b <= 1e-12);
  CHECK(consistency_error(p, s, sigma).w <= 1e-12);
  s.w(0, 0) += 1.0;
  CHECK(consistency_error(p, s, sigma).w > 1e-3);
}
