#include "dmtrl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace dmtrl {

namespace fs = std::filesystem;

void SyntheticSpec::validate() const {
  if (m < 1 || d < 1) throw Error(ErrorCode::BadConfig, "synthetic m and d must be positive");
  if (n_parents < 1 || n_parents > m) throw Error(ErrorCode::BadConfig, "n_parents must lie in [1, m]");
  if (n_min < 1 || n_max < n_min) throw Error(ErrorCode::BadConfig, "need 1 <= n_min <= n_max");
  if (test_n < 0) throw Error(ErrorCode::BadConfig, "test_n must be non-negative");
  if (!(noise_scale >= 0.0)) throw Error(ErrorCode::BadConfig, "noise_scale must be non-negative");
  if (!(negate_prob >= 0.0 && negate_prob <= 1.0)) throw Error(ErrorCode::BadConfig, "negate_prob must lie in [0, 1]");
  if (!(lambda > 0.0)) throw Error(ErrorCode::BadLambda, "synthetic lambda must be positive");
}

SyntheticSpec synthetic_preset(const std::string& name) {
  SyntheticSpec spec;
  if (name == "synthetic1") return spec;
  if (name == "synthetic2") {
    spec.n_parents = 1;
    spec.noise_scale = 0.05;
    return spec;
  }
  if (name == "small-regression") {
    spec.m = 4;
    spec.d = 10;
    spec.n_parents = 2;
    spec.n_min = spec.n_max = 50;
    spec.test_n = 50;
    spec.label_model = LabelModel::linear;
    spec.lambda = 1e-2;
    return spec;
  }
  throw Error(ErrorCode::BadConfig, "unknown synthetic preset '" + name + "'");
}

std::vector<std::string> synthetic_preset_names() { return {"synthetic1", "synthetic2", "small-regression"}; }

namespace {

// Independent generator streams, so recipes that differ only in the weight
// construction share sample sizes and features.
enum Stream : std::uint64_t { kSizes = 1, kWeights = 2, kFeatures = 3, kLabels = 4 };

std::size_t at(Index i) { return static_cast<std::size_t>(i); }

}  // namespace

SyntheticData gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const Index m = spec.m;
  const Index d = spec.d;
  SyntheticData out;

  Rng sizes(derive_seed(spec.seed, kSizes, 0));
  std::vector<Index> n_train(at(m));
  for (auto& n : n_train) n = spec.n_min + sizes.uniform_index(spec.n_max - spec.n_min + 1);

  Rng wrng(derive_seed(spec.seed, kWeights, 0));
  ColMatrix parents(d, spec.n_parents);
  for (Index k = 0; k < spec.n_parents; ++k) {
    for (Index r = 0; r < d; ++r) parents(r, k) = wrng.normal();
  }
  std::vector<Index> parent_task(at(spec.n_parents));
  for (Index k = 0; k < spec.n_parents; ++k) parent_task[at(k)] = k * m / spec.n_parents;

  out.true_weights.resize(d, m);
  out.parent.assign(at(m), 0);
  out.sign.assign(at(m), 1);
  for (Index i = 0; i < m; ++i) {
    const auto it = std::find(parent_task.begin(), parent_task.end(), i);
    if (it != parent_task.end()) {
      const Index k = it - parent_task.begin();
      out.true_weights.col(i) = parents.col(k);
      out.parent[at(i)] = k;
      continue;
    }
    const Index k = wrng.uniform_index(spec.n_parents);
    const int s = wrng.uniform01() < spec.negate_prob ? -1 : 1;
    out.parent[at(i)] = k;
    out.sign[at(i)] = s;
    for (Index r = 0; r < d; ++r) out.true_weights(r, i) = s * parents(r, k) + spec.noise_scale * wrng.normal();
  }

  const LossKind loss = spec.label_model == LabelModel::logistic ? LossKind::hinge : LossKind::squared;
  for (MultiTaskProblem* p : {&out.train, &out.test}) {
    p->d = d;
    p->lambda = spec.lambda;
    p->loss = loss;
    p->tasks.resize(at(m));
  }
  for (Index i = 0; i < m; ++i) {
    const Index n = n_train[at(i)] + spec.test_n;
    Rng frng(derive_seed(spec.seed, kFeatures, static_cast<std::uint64_t>(i)));
    Rng lrng(derive_seed(spec.seed, kLabels, static_cast<std::uint64_t>(i)));
    Matrix x(n, d);
    for (Index j = 0; j < n; ++j) {
      for (Index r = 0; r < d; ++r) x(j, r) = frng.normal();
    }
    const Vector score = x * out.true_weights.col(i);
    Vector y(n);
    for (Index j = 0; j < n; ++j) {
      if (spec.label_model == LabelModel::logistic) {
        const double prob = 1.0 / (1.0 + std::exp(-score[j]));
        y[j] = lrng.uniform01() < prob ? 1.0 : -1.0;
      } else {
        y[j] = score[j] + 0.1 * lrng.normal();
      }
    }
    const Index nt = n_train[at(i)];
    out.train.tasks[at(i)] = TaskData{static_cast<int>(i), x.topRows(nt), y.head(nt)};
    out.test.tasks[at(i)] = TaskData{static_cast<int>(i), x.bottomRows(spec.test_n), y.tail(spec.test_n)};
  }
  return out;
}

std::optional<int> planted_sign(const SyntheticData& data, Index i, Index j) {
  if (data.parent[at(i)] != data.parent[at(j)]) return std::nullopt;
  return data.sign[at(i)] * data.sign[at(j)];
}

DataFormat parse_format(std::string_view name) {
  if (name == "dense") return DataFormat::dense;
  if (name == "sparse") return DataFormat::sparse;
  throw Error(ErrorCode::BadConfig, "unknown data format '" + std::string(name) + "'");
}

namespace {

struct LineReader {
  std::ifstream in;
  fs::path path;
  std::size_t line_no = 0;

  // Next non-empty line with '#' comments stripped; false at end of file.
  bool next(std::string& line) {
    while (std::getline(in, line)) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) + ": " + what);
  }
};

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    pos = line.find_first_not_of(" \t\r", pos);
    if (pos == std::string_view::npos) break;
    const std::size_t end = std::min(line.find_first_of(" \t\r", pos), line.size());
    out.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view text, T& value) {
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size();
}

double parse_real(LineReader& r, std::string_view text) {
  double v = 0.0;
  if (!parse_number(text, v) || !std::isfinite(v)) r.fail("bad number '" + std::string(text) + "'");
  return v;
}

TaskData read_dense(LineReader& r) {
  std::string line;
  if (!r.next(line)) r.fail("missing header 'n d'");
  const auto head = tokens(line);
  Index n = 0;
  Index d = 0;
  if (head.size() != 2 || !parse_number(head[0], n) || !parse_number(head[1], d) || n < 0 || d < 1) {
    r.fail("header must be 'n d'");
  }
  TaskData task;
  task.features.resize(n, d);
  task.labels.resize(n);
  for (Index j = 0; j < n; ++j) {
    if (!r.next(line)) r.fail("expected " + std::to_string(n) + " rows, file ends after " + std::to_string(j));
    const auto tok = tokens(line);
    if (static_cast<Index>(tok.size()) != d + 1) {
      r.fail("expected " + std::to_string(d + 1) + " fields, got " + std::to_string(tok.size()));
    }
    task.labels[j] = parse_real(r, tok[0]);
    for (Index k = 0; k < d; ++k) task.features(j, k) = parse_real(r, tok[at(k) + 1]);
  }
  if (r.next(line)) r.fail("unexpected data after " + std::to_string(n) + " rows");
  return task;
}

struct SparseRow {
  double y = 0.0;
  std::vector<std::pair<Index, double>> entries;  // 0-based
};

// d_limit <= 0 means any index is accepted.
TaskData read_sparse(LineReader& r, Index d_limit, Index& d_seen) {
  std::vector<SparseRow> rows;
  std::string line;
  while (r.next(line)) {
    const auto tok = tokens(line);
    SparseRow row;
    row.y = parse_real(r, tok[0]);
    for (std::size_t k = 1; k < tok.size(); ++k) {
      const auto colon = tok[k].find(':');
      if (colon == std::string_view::npos) r.fail("expected idx:val, got '" + std::string(tok[k]) + "'");
      Index idx = 0;
      if (!parse_number(tok[k].substr(0, colon), idx)) r.fail("bad index in '" + std::string(tok[k]) + "'");
      if (idx < 1) r.fail("indices are 1-based, got " + std::to_string(idx));
      if (d_limit > 0 && idx > d_limit) r.fail("index " + std::to_string(idx) + " exceeds d=" + std::to_string(d_limit));
      row.entries.emplace_back(idx - 1, parse_real(r, tok[k].substr(colon + 1)));
      d_seen = std::max(d_seen, idx);
    }
    rows.push_back(std::move(row));
  }
  TaskData task;
  const Index d = d_limit > 0 ? d_limit : d_seen;
  task.features = Matrix::Zero(static_cast<Index>(rows.size()), d);
  task.labels.resize(static_cast<Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    task.labels[static_cast<Index>(j)] = rows[j].y;
    for (const auto& [idx, val] : rows[j].entries) task.features(static_cast<Index>(j), idx) = val;
  }
  return task;
}

LineReader open_reader(const fs::path& path, ErrorCode missing) {
  LineReader r{std::ifstream(path), path};
  if (!r.in) throw Error(missing, "cannot open '" + path.string() + "'");
  return r;
}

bool looks_like_manifest(const fs::path& path) {
  LineReader r = open_reader(path, ErrorCode::ManifestError);
  std::string line;
  if (!r.next(line)) return false;
  const auto tok = tokens(line);
  return tok[0] == "task" || tok[0] == "d";
}

}  // namespace

MultiTaskProblem load_problem(const fs::path& path, DataFormat format) {
  MultiTaskProblem problem;
  if (!looks_like_manifest(path)) {
    LineReader r = open_reader(path, ErrorCode::ManifestError);
    Index d_seen = 0;
    TaskData task = format == DataFormat::dense ? read_dense(r) : read_sparse(r, 0, d_seen);
    problem.d = task.d();
    problem.tasks.push_back(std::move(task));
    return problem;
  }

  LineReader manifest = open_reader(path, ErrorCode::ManifestError);
  std::vector<fs::path> files;
  Index d = 0;
  std::string line;
  while (manifest.next(line)) {
    const auto tok = tokens(line);
    if (tok.size() != 2) manifest.fail("manifest lines are 'd N' or 'task PATH'");
    if (tok[0] == "d") {
      if (!parse_number(tok[1], d) || d < 1) manifest.fail("d must be a positive integer");
    } else if (tok[0] == "task") {
      files.push_back(path.parent_path() / fs::path(std::string(tok[1])));
    } else {
      manifest.fail("unknown manifest key '" + std::string(tok[0]) + "'");
    }
  }
  if (files.empty()) throw Error(ErrorCode::ManifestError, path.string() + " lists no tasks");
  if (format == DataFormat::sparse && d == 0) throw Error(ErrorCode::ManifestError, path.string() + " needs a 'd N' line");

  for (std::size_t i = 0; i < files.size(); ++i) {
    LineReader r = open_reader(files[i], ErrorCode::ManifestError);
    Index d_seen = 0;
    TaskData task = format == DataFormat::dense ? read_dense(r) : read_sparse(r, d, d_seen);
    if (d == 0) d = task.d();
    if (task.d() != d) {
      throw Error(ErrorCode::ManifestError, files[i].string() + " has d=" + std::to_string(task.d()) +
                                                ", expected " + std::to_string(d));
    }
    task.task_id = static_cast<int>(i);
    problem.tasks.push_back(std::move(task));
  }
  problem.d = d;
  return problem;
}

std::string dense_task_text(const TaskData& task) {
  std::string out = std::to_string(task.n()) + " " + std::to_string(task.d()) + "\n";
  char buf[32];
  for (Index j = 0; j < task.n(); ++j) {
    std::snprintf(buf, sizeof buf, "%.17g", task.labels[j]);
    out += buf;
    for (Index k = 0; k < task.d(); ++k) {
      std::snprintf(buf, sizeof buf, " %.17g", task.features(j, k));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void write_problem(const MultiTaskProblem& problem, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create '" + dir.string() + "': " + ec.message());
  auto write = [](const fs::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    out << text;
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + file.string() + "'");
  };
  std::string manifest = "d " + std::to_string(problem.d) + "\n";
  for (std::size_t i = 0; i < problem.tasks.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "task_%03zu.txt", i);
    write(dir / name, dense_task_text(problem.tasks[i]));
    manifest += "task " + std::string(name) + "\n";
  }
  write(dir / "manifest.txt", manifest);
}

MultiTaskProblem merge_problems(const MultiTaskProblem& a, const MultiTaskProblem& b) {
  if (a.m() != b.m() || a.d != b.d) throw Error(ErrorCode::DimensionMismatch, "cannot merge problems of different shape");
  MultiTaskProblem out = a;
  for (std::size_t i = 0; i < out.tasks.size(); ++i) {
    TaskData& t = out.tasks[i];
    const TaskData& u = b.tasks[i];
    Matrix x(t.n() + u.n(), out.d);
    x << t.features, u.features;
    Vector y(t.n() + u.n());
    y << t.labels, u.labels;
    t.features = std::move(x);
    t.labels = std::move(y);
  }
  return out;
}

std::pair<MultiTaskProblem, MultiTaskProblem> random_split(const MultiTaskProblem& pooled, double train_fraction,
                                                           std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::BadConfig, "train_fraction must lie in (0, 1)");
  }
  MultiTaskProblem train = pooled;
  MultiTaskProblem test = pooled;
  for (std::size_t i = 0; i < pooled.tasks.size(); ++i) {
    const TaskData& t = pooled.tasks[i];
    const Index n = t.n();
    std::vector<Index> order(at(n));
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng(derive_seed(seed, 0, i));
    for (Index k = n - 1; k > 0; --k) std::swap(order[at(k)], order[at(rng.uniform_index(k + 1))]);
    Index keep = std::llround(train_fraction * static_cast<double>(n));
    if (n >= 2) keep = std::clamp<Index>(keep, 1, n - 1);
    auto take = [&](Index begin, Index end) {
      TaskData part{t.task_id, Matrix(end - begin, t.d()), Vector(end - begin)};
      for (Index k = begin; k < end; ++k) {
        part.features.row(k - begin) = t.features.row(order[at(k)]);
        part.labels[k - begin] = t.labels[order[at(k)]];
      }
      return part;
    };
    train.tasks[i] = take(0, keep);
    test.tasks[i] = take(keep, n);
  }
  return {std::move(train), std::move(test)};
}

EvalReport evaluate(const ColMatrix& weights, const MultiTaskProblem& test, LossKind loss) {
  if (weights.rows() != test.d || weights.cols() != test.m()) {
    throw Error(ErrorCode::DimensionMismatch, "weights do not match the test problem");
  }
  EvalReport report;
  double sse = 0.0;
  double label_sum = 0.0;
  double label_sq = 0.0;
  Index errors = 0;
  Index total = 0;
  for (Index i = 0; i < test.m(); ++i) {
    const TaskData& t = test.tasks[at(i)];
    const Vector pred = t.features * weights.col(i);
    const Vector resid = pred - t.labels;
    TaskMetrics tm;
    tm.n = t.n();
    const double task_sse = resid.squaredNorm();
    Index task_errors = 0;
    for (Index j = 0; j < t.n(); ++j) {
      const double s = pred[j] > 0.0 ? 1.0 : -1.0;
      if (s != t.labels[j]) ++task_errors;
    }
    if (t.n() > 0) {
      tm.rmse = std::sqrt(task_sse / static_cast<double>(t.n()));
      const double mean = t.labels.mean();
      const double sst = (t.labels.array() - mean).square().sum();
      tm.explained_variance = sst > 0.0 ? 1.0 - task_sse / sst : 0.0;
      if (loss == LossKind::hinge) tm.error_rate = static_cast<double>(task_errors) / static_cast<double>(t.n());
    }
    report.per_task.push_back(tm);
    sse += task_sse;
    label_sum += t.labels.sum();
    label_sq += t.labels.squaredNorm();
    errors += task_errors;
    total += t.n();
  }
  if (total > 0) {
    const double nt = static_cast<double>(total);
    report.rmse = std::sqrt(sse / nt);
    const double sst = label_sq - label_sum * label_sum / nt;
    report.explained_variance = sst > 0.0 ? 1.0 - sse / sst : 0.0;
    if (loss == LossKind::hinge) report.error_rate = static_cast<double>(errors) / nt;
  }
  return report;
}

}  // namespace dmtrl
