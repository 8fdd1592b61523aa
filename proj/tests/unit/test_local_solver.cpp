#include <doctest.h>

#include "dmtrl/local_solver.hpp"
#include "dmtrl/losses.hpp"
#include "dmtrl/objectives.hpp"
#include "oracles.hpp"

using namespace dmtrl;

namespace {

struct Fixture {
  MultiTaskProblem problem;
  std::vector<Vector> alpha;
  Vector w;

  LocalRoundInput input(Index H, std::uint64_t seed = 9) const {
    LocalRoundInput in;
    in.alpha = std::span<const double>(alpha[0].data(), static_cast<std::size_t>(alpha[0].size()));
    in.w = std::span<const double>(w.data(), static_cast<std::size_t>(w.size()));
    in.sigma_ii = 0.6;
    in.rho = 1.7;
    in.lambda = problem.lambda;
    in.loss = problem.loss;
    in.m = 3;
    in.H = H;
    in.rng_seed = seed;
    return in;
  }
};

Fixture make(LossKind kind, std::uint64_t seed, Index n = 12) {
  std::mt19937_64 gen(seed);
  Fixture f;
  f.problem = oracle::random_problem(gen, 1, 4, n, n, kind, 0.3);
  f.alpha = oracle::random_alpha(gen, f.problem);
  f.w = Vector::Random(4);
  return f;
}

}  // namespace

TEST_CASE("local objective at zero step") {
  for (LossKind kind : {LossKind::hinge, LossKind::squared}) {
    const Fixture f = make(kind, 1);
    const auto& t = f.problem.tasks[0];
    const LocalRoundInput in = f.input(1);
    double conj = 0.0;
    for (Index j = 0; j < t.n(); ++j) conj += oracle::conjugate(kind, -f.alpha[0][j], t.labels[j]);
    const double quad = 0.8;
    const double expect = -conj / static_cast<double>(t.n()) - quad / (2.0 * in.lambda * 3.0);
    CHECK(local_subproblem_objective(t, in, Vector::Zero(t.n()), quad) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("local objective matches a term-by-term evaluation") {
  for (LossKind kind : {LossKind::hinge, LossKind::squared}) {
    const Fixture f = make(kind, 2);
    const auto& t = f.problem.tasks[0];
    const LocalRoundInput in = f.input(1);
    // a feasible step: move each hinge dual to a fresh point of its box
    std::mt19937_64 gen(3);
    const Vector target = oracle::random_alpha(gen, f.problem)[0];
    const Vector delta = target - f.alpha[0];
    const double n = static_cast<double>(t.n());
    double conj = 0.0, lin = 0.0;
    Vector v = Vector::Zero(4);
    for (Index j = 0; j < t.n(); ++j) {
      conj += oracle::conjugate(kind, -target[j], t.labels[j]);
      lin += delta[j] * t.features.row(j).dot(f.w);
      v += delta[j] * t.features.row(j).transpose();
    }
    const double expect = -conj / n - lin / n - 0.5 / (2 * in.lambda * 3) - in.rho / (2 * in.lambda) * in.sigma_ii / (n * n) * v.squaredNorm();
    CHECK(std::abs(local_subproblem_objective(t, in, delta, 0.5) - expect) <= 1e-10 * std::max(1.0, std::abs(expect)));
  }
}

TEST_CASE("local SDCA gain, delta_b and determinism") {
  for (LossKind kind : {LossKind::hinge, LossKind::squared}) {
    const Fixture f = make(kind, 4);
    const auto& t = f.problem.tasks[0];
    const LocalRoundInput in = f.input(40);
    const LocalRoundOutput a = local_sdca(in, t);
    const LocalRoundOutput b = local_sdca(in, t);
    CHECK(a.delta_alpha == b.delta_alpha);
    CHECK(a.local_obj_gain >= -1e-12);
    const Vector db = t.features.transpose() * a.delta_alpha / static_cast<double>(t.n());
    CHECK((db - a.delta_b).cwiseAbs().maxCoeff() <= 1e-10);
    const double gain = local_subproblem_objective(t, in, a.delta_alpha, 0.0) -
                        local_subproblem_objective(t, in, Vector::Zero(t.n()), 0.0);
    CHECK(a.local_obj_gain == doctest::Approx(gain).epsilon(1e-9));
  }
}

TEST_CASE("local SDCA reaches the exact local optimum") {
  for (LossKind kind : {LossKind::hinge, LossKind::squared}) {
    const Fixture f = make(kind, 5, 8);
    const auto& t = f.problem.tasks[0];
    const LocalRoundInput in = f.input(8 * 50);
    const Vector exact = oracle::exact_local_optimum(t, kind, f.alpha[0], f.w, in.rho, in.sigma_ii, in.lambda);
    const LocalRoundOutput out = local_sdca(in, t);
    CHECK((out.delta_alpha - exact).cwiseAbs().maxCoeff() <= 1e-4);
  }
}

TEST_CASE("local SDCA from the local optimum stays put") {
  const Fixture f = make(LossKind::squared, 6, 8);
  const auto& t = f.problem.tasks[0];
  const LocalRoundInput base = f.input(1);
  // alpha* solves the subproblem with v = 0 only when the step is zero, so
  // build a state whose optimum is zero: shift alpha by the exact optimum and
  // compensate w for the quadratic term
  const Vector exact = oracle::exact_local_optimum(t, LossKind::squared, f.alpha[0], f.w, base.rho, base.sigma_ii, base.lambda);
  Fixture g = f;
  g.alpha[0] = f.alpha[0] + exact;
  const Vector v = t.features.transpose() * exact;
  g.w = f.w + base.rho * base.sigma_ii / (base.lambda * static_cast<double>(t.n())) * v;
  const LocalRoundOutput out = local_sdca(g.input(200), t);
  CHECK(out.delta_alpha.cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("local SDCA rejects a zero budget") {
  const Fixture f = make(LossKind::squared, 7);
  CHECK_THROWS_AS(local_sdca(f.input(0), f.problem.tasks[0]), Error);
}

TEST_CASE("empirical theta") {
  const Fixture f = make(LossKind::squared, 8, 20);
  const auto& t = f.problem.tasks[0];
  CHECK(estimate_theta(f.input(200), t, 200) == 0.0);
  const double none = estimate_theta(f.input(0), t, 200);
  CHECK(none < 1.0);
  CHECK(none > 0.999);
  double sum_short = 0.0, sum_long = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    sum_short += estimate_theta(f.input(20, s), t, 2000);
    sum_long += estimate_theta(f.input(40, s), t, 2000);
  }
  CHECK(sum_long <= sum_short);
}

TEST_CASE("suggested iterations") {
  CHECK(suggested_iterations(LossKind::squared, std::exp(-1.0), 1, 1, 1, 1, 10).value() == 12);
  CHECK(suggested_iterations(LossKind::squared, 1.0, 1, 1, 1, 1, 10).value() == 0);
  CHECK_FALSE(suggested_iterations(LossKind::hinge, 0.5, 1, 1, 1, 1, 10).has_value());
}
