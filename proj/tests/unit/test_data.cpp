#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dmtrl/data.hpp"
#include "dmtrl/server.hpp"

using namespace dmtrl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dmtrl_unit_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  out << text;
}

ErrorCode load_error(const fs::path& file, DataFormat format) {
  try {
    load_problem(file, format);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("dense single-task file") {
  const fs::path dir = scratch("dense");
  write(dir / "t.txt", "1 2\n0.5 1.0 2.0\n");
  const MultiTaskProblem p = load_problem(dir / "t.txt", DataFormat::dense);
  REQUIRE(p.m() == 1);
  CHECK(p.d == 2);
  CHECK(p.tasks[0].labels[0] == 0.5);
  CHECK(p.tasks[0].features(0, 0) == 1.0);
  CHECK(p.tasks[0].features(0, 1) == 2.0);
}

TEST_CASE("sparse rows through a manifest") {
  const fs::path dir = scratch("sparse");
  write(dir / "a.txt", "1 3:2.0\n-1 1:0.5 2:-1\n");
  write(dir / "b.txt", "# comment\n1 2:4\n");
  write(dir / "manifest.txt", "d 3\ntask a.txt\ntask b.txt\n");
  const MultiTaskProblem p = load_problem(dir / "manifest.txt", DataFormat::sparse);
  REQUIRE(p.m() == 2);
  CHECK(p.d == 3);
  CHECK(p.tasks[0].features.row(0) == Eigen::RowVector3d(0, 0, 2));
  CHECK(p.tasks[0].labels[0] == 1.0);
  CHECK(p.tasks[0].features.row(1) == Eigen::RowVector3d(0.5, -1, 0));
  CHECK(p.tasks[1].features.row(0) == Eigen::RowVector3d(0, 4, 0));
  CHECK(p.tasks[1].task_id == 1);
}

TEST_CASE("loader errors") {
  const fs::path dir = scratch("errors");
  write(dir / "zero.txt", "1 0:2.0\n");
  CHECK(load_error(dir / "zero.txt", DataFormat::sparse) == ErrorCode::ParseError);
  write(dir / "wide.txt", "1 4:2.0\n");
  write(dir / "m.txt", "d 3\ntask wide.txt\n");
  CHECK(load_error(dir / "m.txt", DataFormat::sparse) == ErrorCode::ParseError);
  write(dir / "short.txt", "2 2\n1 1 1\n");
  CHECK(load_error(dir / "short.txt", DataFormat::dense) == ErrorCode::ParseError);
  write(dir / "bad.txt", "1 2\n1 x 1\n");
  CHECK(load_error(dir / "bad.txt", DataFormat::dense) == ErrorCode::ParseError);
  CHECK(load_error(dir / "missing.txt", DataFormat::dense) == ErrorCode::ManifestError);
  write(dir / "m2.txt", "task nowhere.txt\n");
  CHECK(load_error(dir / "m2.txt", DataFormat::dense) == ErrorCode::ManifestError);
  write(dir / "m3.txt", "task zero.txt\n");
  CHECK(load_error(dir / "m3.txt", DataFormat::sparse) == ErrorCode::ManifestError);

  try {
    load_problem(dir / "bad.txt", DataFormat::dense);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("bad.txt:2") != std::string::npos);
  }
}

TEST_CASE("write and load round trip") {
  SyntheticSpec spec = synthetic_preset("small-regression");
  const MultiTaskProblem p = gen_synthetic(spec).train;
  const fs::path dir = scratch("roundtrip");
  write_problem(p, dir / "a");
  const MultiTaskProblem q = load_problem(dir / "a" / "manifest.txt", DataFormat::dense);
  REQUIRE(q.m() == p.m());
  for (Index i = 0; i < p.m(); ++i) {
    CHECK(q.tasks[static_cast<std::size_t>(i)].features == p.tasks[static_cast<std::size_t>(i)].features);
    CHECK(q.tasks[static_cast<std::size_t>(i)].labels == p.tasks[static_cast<std::size_t>(i)].labels);
  }
  write_problem(q, dir / "b");
  for (const char* f : {"manifest.txt", "task_000.txt", "task_003.txt"}) CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
}

TEST_CASE("synthetic generator structure") {
  SyntheticSpec spec = synthetic_preset("synthetic1");
  spec.n_min = 20;
  spec.n_max = 30;
  spec.test_n = 10;
  const SyntheticData a = gen_synthetic(spec);
  const SyntheticData b = gen_synthetic(spec);
  CHECK(a.true_weights == b.true_weights);
  CHECK(a.train.tasks[5].features == b.train.tasks[5].features);
  CHECK(a.train.m() == 16);
  CHECK(a.train.d == 100);
  // parents sit at tasks 0, 5 and 10
  CHECK(a.parent[0] == 0);
  CHECK(a.parent[5] == 1);
  CHECK(a.parent[10] == 2);
  for (Index i = 0; i < 16; ++i) {
    const auto& t = a.train.tasks[static_cast<std::size_t>(i)];
    CHECK(t.n() >= 20);
    CHECK(t.n() <= 30);
    CHECK(a.test.tasks[static_cast<std::size_t>(i)].n() == 10);
    for (Index j = 0; j < t.n(); ++j) CHECK(std::abs(t.labels[j]) == 1.0);
  }
  CHECK(planted_sign(a, 0, 5) == std::nullopt);
  CHECK(planted_sign(a, 0, 0).value() == 1);

  // synthetic2 shares sizes and features, not weights
  SyntheticSpec spec2 = synthetic_preset("synthetic2");
  spec2.n_min = 20;
  spec2.n_max = 30;
  spec2.test_n = 10;
  const SyntheticData c = gen_synthetic(spec2);
  CHECK(c.train.tasks[3].features == a.train.tasks[3].features);
  CHECK(c.true_weights != a.true_weights);
}

TEST_CASE("degenerate recipe gives identical tasks") {
  SyntheticSpec spec = synthetic_preset("synthetic1");
  spec.m = 4;
  spec.n_parents = 1;
  spec.noise_scale = 0;
  spec.negate_prob = 0;
  const SyntheticData a = gen_synthetic(spec);
  for (Index i = 1; i < 4; ++i) CHECK(a.true_weights.col(i) == a.true_weights.col(0));
}

TEST_CASE("scaled identity gives the diagonal rho bound") {
  const SyntheticData a = gen_synthetic(synthetic_preset("small-regression"));
  CHECK(rho_bound(TaskCovariance::scaled_identity(a.train.m()).sigma(), 0.7) == doctest::Approx(0.7));
}

TEST_CASE("evaluation metrics") {
  SyntheticSpec spec = synthetic_preset("small-regression");
  const SyntheticData a = gen_synthetic(spec);
  // noiseless labels
  MultiTaskProblem exact = a.test;
  for (Index i = 0; i < exact.m(); ++i) {
    auto& t = exact.tasks[static_cast<std::size_t>(i)];
    t.labels = t.features * a.true_weights.col(i);
  }
  const EvalReport fit = evaluate(a.true_weights, exact, LossKind::squared);
  CHECK(fit.rmse <= 1e-12);
  CHECK(fit.explained_variance == doctest::Approx(1.0));
  CHECK_FALSE(fit.error_rate.has_value());

  // zero predictor on centered labels
  MultiTaskProblem centered = exact;
  double total = 0.0;
  Index count = 0;
  for (const auto& t : centered.tasks) {
    total += t.labels.sum();
    count += t.n();
  }
  for (auto& t : centered.tasks) t.labels.array() -= total / static_cast<double>(count);
  const EvalReport zero = evaluate(ColMatrix::Zero(exact.d, exact.m()), centered, LossKind::squared);
  CHECK(std::abs(zero.explained_variance) <= 1e-12);

  // classification with W = 0 predicts -1 everywhere
  SyntheticSpec cls = synthetic_preset("synthetic1");
  cls.m = 3;
  cls.d = 5;
  cls.n_min = cls.n_max = 40;
  cls.test_n = 37;
  const SyntheticData c = gen_synthetic(cls);
  Index positives = 0;
  for (const auto& t : c.test.tasks) positives += (t.labels.array() > 0).count();
  const EvalReport z = evaluate(ColMatrix::Zero(5, 3), c.test, LossKind::hinge);
  CHECK(z.error_rate.value() == doctest::Approx(static_cast<double>(positives) / (3 * 37)));
  CHECK(z.per_task.size() == 3);
}

TEST_CASE("random split and merge") {
  const SyntheticData a = gen_synthetic(synthetic_preset("small-regression"));
  const MultiTaskProblem pooled = merge_problems(a.train, a.test);
  CHECK(pooled.tasks[0].n() == 100);
  const auto [tr, te] = random_split(pooled, 0.7, 5);
  CHECK(tr.tasks[0].n() == 70);
  CHECK(te.tasks[0].n() == 30);
  const auto [tr2, te2] = random_split(pooled, 0.7, 5);
  CHECK(tr2.tasks[1].features == tr.tasks[1].features);
  const auto [tr3, te3] = random_split(pooled, 0.7, 6);
  CHECK(tr3.tasks[1].features != tr.tasks[1].features);
  // a split is a permutation of the pooled rows
  CHECK(std::abs(tr.tasks[2].labels.sum() + te.tasks[2].labels.sum() - pooled.tasks[2].labels.sum()) <= 1e-9);
}
