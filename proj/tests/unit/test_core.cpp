#include <doctest.h>

#include "dmtrl/core.hpp"
#include "dmtrl/serialization.hpp"
#include "oracles.hpp"

using namespace dmtrl;

namespace {

MultiTaskProblem two_tasks() {
  MultiTaskProblem p;
  p.d = 3;
  p.lambda = 0.1;
  for (int i = 0; i < 2; ++i) {
    TaskData t;
    t.task_id = i;
    t.features = Matrix::Random(4, 3);
    t.labels = Vector::Ones(4);
    p.tasks.push_back(t);
  }
  return p;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("validate_problem accepts a consistent problem") {
  const MultiTaskProblem p = two_tasks();
  CHECK(&validate_problem(p) == &p);
}

TEST_CASE("validate_problem rejects broken invariants") {
  MultiTaskProblem p = two_tasks();
  p.tasks[1].features = Matrix::Zero(4, 4);
  CHECK(code_of([&] { validate_problem(p); }) == ErrorCode::DimensionMismatch);

  p = two_tasks();
  p.loss = LossKind::hinge;
  p.tasks[0].labels[2] = 0.5;
  CHECK(code_of([&] { validate_problem(p); }) == ErrorCode::BadLabel);

  p = two_tasks();
  p.tasks[0].features.resize(0, 3);
  p.tasks[0].labels.resize(0);
  CHECK(code_of([&] { validate_problem(p); }) == ErrorCode::EmptyTask);

  p = two_tasks();
  p.lambda = 0.0;
  CHECK(code_of([&] { validate_problem(p); }) == ErrorCode::BadLambda);

  p = two_tasks();
  p.tasks.clear();
  CHECK(code_of([&] { validate_problem(p); }) == ErrorCode::EmptyTask);
}

TEST_CASE("error messages start with the code name") {
  const Error e(ErrorCode::ManifestError, "missing");
  CHECK(std::string(e.what()).rfind("ManifestError", 0) == 0);
}

TEST_CASE("identity feature map leaves rows unchanged") {
  const MultiTaskProblem p = two_tasks();
  const MultiTaskProblem q = FeatureMap{}.apply(p);
  for (std::size_t i = 0; i < p.tasks.size(); ++i) CHECK(q.tasks[i].features == p.tasks[i].features);
}

TEST_CASE("scaled identity covariance") {
  const TaskCovariance c = TaskCovariance::scaled_identity(4);
  CHECK(c.sigma().isApprox(ColMatrix::Identity(4, 4) / 4.0));
  CHECK(c.omega().isApprox(ColMatrix::Identity(4, 4) * 4.0));
  CHECK(c.sigma().trace() == doctest::Approx(1.0));
  CHECK(c.correlation().isApprox(ColMatrix::Identity(4, 4)));
}

TEST_CASE("covariance from sigma keeps the inverse pair") {
  std::mt19937_64 gen(5);
  const ColMatrix s = oracle::random_trace_one_psd(gen, 5);
  const TaskCovariance c = TaskCovariance::from_sigma(s);
  CHECK((c.sigma() * c.omega() - ColMatrix::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-8);
  const ColMatrix w = ColMatrix::Random(3, 5);
  CHECK(c.regularizer(w) == doctest::Approx((w * c.omega() * w.transpose()).trace()).epsilon(1e-10));
}

TEST_CASE("local iteration budget parsing") {
  CHECK(LocalIterations::parse("250").for_task(1000) == 250);
  CHECK(LocalIterations::parse("0.5n").for_task(1000) == 500);
  CHECK(LocalIterations::parse("1n").for_task(37) == 37);
  CHECK(LocalIterations::parse("0.1n").for_task(3) == 1);
  CHECK(LocalIterations::parse("0.5n").str() == "0.5n");
  CHECK_THROWS_AS(LocalIterations::parse("abc"), Error);
  CHECK_THROWS_AS(LocalIterations::parse("2.5"), Error);
  CHECK_THROWS_AS(LocalIterations::parse("0"), Error);
}

TEST_CASE("run config bounds") {
  RunConfig c;
  CHECK_NOTHROW(c.validate(4));
  c.eta = 0.25;
  CHECK_NOTHROW(c.validate(4));
  c.eta = 0.2;
  CHECK(code_of([&] { c.validate(4); }) == ErrorCode::BadConfig);
  c = RunConfig{};
  c.T = 0;
  CHECK_THROWS_AS(c.validate(2), Error);
  c = RunConfig{};
  c.gap_tol = -1;
  CHECK_THROWS_AS(c.validate(2), Error);
}

TEST_CASE("derived seeds depend on round and task only") {
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
  CHECK(derive_seed(1, 2, 3) != derive_seed(2, 2, 3));
  Rng a(derive_seed(7, 0, 0));
  Rng b(derive_seed(7, 0, 0));
  for (int k = 0; k < 100; ++k) CHECK(a.uniform_index(13) == b.uniform_index(13));
}

TEST_CASE("bounded draws cover the range uniformly") {
  Rng r(11);
  std::vector<int> counts(7, 0);
  for (int k = 0; k < 70000; ++k) ++counts[static_cast<std::size_t>(r.uniform_index(7))];
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("serialization round-trips every core type") {
  std::mt19937_64 gen(3);
  const MultiTaskProblem p = oracle::random_problem(gen, 3, 4, 2, 6, LossKind::hinge, 0.37);
  const MultiTaskProblem p2 = problem_from_json(nlohmann::json::parse(to_json_value(p).dump()));
  REQUIRE(p2.m() == p.m());
  CHECK(p2.d == p.d);
  CHECK(p2.lambda == p.lambda);
  CHECK(p2.loss == p.loss);
  for (Index i = 0; i < p.m(); ++i) {
    CHECK(p2.tasks[oracle::at(i)].features == p.tasks[oracle::at(i)].features);
    CHECK(p2.tasks[oracle::at(i)].labels == p.tasks[oracle::at(i)].labels);
    CHECK(p2.tasks[oracle::at(i)].task_id == p.tasks[oracle::at(i)].task_id);
  }

  const TaskCovariance c = TaskCovariance::from_sigma(oracle::random_trace_one_psd(gen, 3));
  const TaskCovariance c2 = covariance_from_json(nlohmann::json::parse(to_json_value(c).dump()));
  CHECK(c2.sigma() == c.sigma());
  CHECK(c2.omega() == c.omega());

  DualState s = DualState::zeros(p);
  s.alpha = oracle::random_alpha(gen, p);
  s.b = ColMatrix::Random(4, 3);
  s.w = ColMatrix::Random(4, 3);
  const DualState s2 = dual_state_from_json(nlohmann::json::parse(to_json_value(s).dump()));
  CHECK(s2.b == s.b);
  CHECK(s2.w == s.w);
  for (std::size_t i = 0; i < s.alpha.size(); ++i) CHECK(s2.alpha[i] == s.alpha[i]);

  RunConfig rc;
  rc.eta = 0.5;
  rc.T = 17;
  rc.H = LocalIterations::times_n(0.25);
  rc.seed = 0xdeadbeefcafeULL;
  rc.rho_mode = RhoMode::fixed;
  rc.rho_fixed = 2.5;
  const RunConfig rc2 = run_config_from_json(nlohmann::json::parse(to_json_value(rc).dump()));
  CHECK(rc2.eta == rc.eta);
  CHECK(rc2.T == rc.T);
  CHECK(rc2.H.value == rc.H.value);
  CHECK(rc2.H.per_sample == rc.H.per_sample);
  CHECK(rc2.seed == rc.seed);
  CHECK(rc2.rho_mode == rc.rho_mode);
  CHECK(rc2.rho_fixed == rc.rho_fixed);
}
