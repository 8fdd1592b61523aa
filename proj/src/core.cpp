#include "dmtrl/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace dmtrl {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyTask: return "EmptyTask";
    case ErrorCode::BadLabel: return "BadLabel";
    case ErrorCode::BadLambda: return "BadLambda";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::NonPositiveCurvature: return "NonPositiveCurvature";
    case ErrorCode::ConjugateDomainViolation: return "ConjugateDomainViolation";
    case ErrorCode::NotComputable: return "NotComputable";
    case ErrorCode::MissingDelta: return "MissingDelta";
    case ErrorCode::ZeroWeights: return "ZeroWeights";
    case ErrorCode::DegenerateDiagonal: return "DegenerateDiagonal";
    case ErrorCode::BadTag: return "BadTag";
    case ErrorCode::TruncatedFrame: return "TruncatedFrame";
    case ErrorCode::TrailingBytes: return "TrailingBytes";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ManifestError: return "ManifestError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

std::string_view to_string(LossKind kind) {
  return kind == LossKind::hinge ? "hinge" : "squared";
}

LossKind parse_loss(std::string_view name) {
  if (name == "hinge") return LossKind::hinge;
  if (name == "squared") return LossKind::squared;
  throw Error(ErrorCode::BadConfig, "unknown loss '" + std::string(name) + "'");
}

Index MultiTaskProblem::total_samples() const {
  Index n = 0;
  for (const auto& t : tasks) n += t.n();
  return n;
}

const MultiTaskProblem& validate_problem(const MultiTaskProblem& problem) {
  if (problem.tasks.empty()) throw Error(ErrorCode::EmptyTask, "problem has no tasks");
  if (!(problem.lambda > 0.0) || !std::isfinite(problem.lambda)) {
    throw Error(ErrorCode::BadLambda, "lambda must be positive, got " + std::to_string(problem.lambda));
  }
  for (std::size_t i = 0; i < problem.tasks.size(); ++i) {
    const TaskData& t = problem.tasks[i];
    const std::string where = "task " + std::to_string(i);
    if (t.n() == 0) throw Error(ErrorCode::EmptyTask, where + " has no samples");
    if (t.d() != problem.d) {
      throw Error(ErrorCode::DimensionMismatch,
                  where + " has d=" + std::to_string(t.d()) + ", expected " + std::to_string(problem.d));
    }
    if (t.labels.size() != t.n()) {
      throw Error(ErrorCode::DimensionMismatch, where + " label count differs from row count");
    }
    if (!t.features.allFinite() || !t.labels.allFinite()) {
      throw Error(ErrorCode::DimensionMismatch, where + " contains non-finite values");
    }
    if (problem.loss == LossKind::hinge) {
      for (Index j = 0; j < t.n(); ++j) {
        const double y = t.labels[j];
        if (y != 1.0 && y != -1.0) {
          std::ostringstream msg;
          msg << where << " row " << j << " has label " << y << " (hinge needs -1/+1)";
          throw Error(ErrorCode::BadLabel, msg.str());
        }
      }
    }
  }
  return problem;
}

Matrix FeatureMap::apply(const Matrix& rows) const { return rows; }

MultiTaskProblem FeatureMap::apply(const MultiTaskProblem& problem) const {
  MultiTaskProblem mapped = problem;
  for (auto& t : mapped.tasks) t.features = apply(t.features);
  if (!mapped.tasks.empty()) mapped.d = mapped.tasks.front().d();
  return mapped;
}

TaskCovariance TaskCovariance::scaled_identity(Index m) {
  const double share = 1.0 / static_cast<double>(m);
  return from_spectrum(ColMatrix::Identity(m, m), Vector::Constant(m, share));
}

TaskCovariance TaskCovariance::from_spectrum(const ColMatrix& basis, const Vector& sigma_eigenvalues) {
  if (basis.rows() != basis.cols() || basis.cols() != sigma_eigenvalues.size()) {
    throw Error(ErrorCode::DimensionMismatch, "spectral factors disagree in size");
  }
  if ((sigma_eigenvalues.array() <= 0.0).any()) {
    throw Error(ErrorCode::DegenerateDiagonal, "covariance eigenvalues must be positive");
  }
  TaskCovariance cov;
  cov.basis_ = basis;
  cov.eigenvalues_ = sigma_eigenvalues;
  cov.sigma_ = basis * sigma_eigenvalues.asDiagonal() * basis.transpose();
  cov.omega_ = basis * sigma_eigenvalues.cwiseInverse().asDiagonal() * basis.transpose();
  // exact symmetry
  cov.sigma_ = 0.5 * (cov.sigma_ + cov.sigma_.transpose()).eval();
  cov.omega_ = 0.5 * (cov.omega_ + cov.omega_.transpose()).eval();
  return cov;
}

TaskCovariance TaskCovariance::from_sigma(const ColMatrix& sigma) {
  if (sigma.rows() != sigma.cols()) throw Error(ErrorCode::DimensionMismatch, "sigma must be square");
  Eigen::SelfAdjointEigenSolver<ColMatrix> eig(0.5 * (sigma + sigma.transpose()));
  return from_spectrum(eig.eigenvectors(), eig.eigenvalues());
}

double TaskCovariance::regularizer(const ColMatrix& weights) const {
  const ColMatrix projected = weights * basis_;  // column k = W u_k
  double total = 0.0;
  for (Index k = 0; k < projected.cols(); ++k) total += projected.col(k).squaredNorm() / eigenvalues_[k];
  return total;
}

ColMatrix TaskCovariance::correlation() const {
  const Vector inv_sd = sigma_.diagonal().cwiseMax(0.0).cwiseSqrt().cwiseInverse();
  return inv_sd.asDiagonal() * sigma_ * inv_sd.asDiagonal();
}

DualState DualState::zeros(const MultiTaskProblem& problem) {
  DualState s;
  s.alpha.reserve(problem.tasks.size());
  for (const auto& t : problem.tasks) s.alpha.push_back(Vector::Zero(t.n()));
  s.b = ColMatrix::Zero(problem.d, problem.m());
  s.w = ColMatrix::Zero(problem.d, problem.m());
  return s;
}

Index LocalIterations::for_task(Index n_i) const {
  if (!per_sample) return static_cast<Index>(value);
  return std::max<Index>(1, static_cast<Index>(std::llround(value * static_cast<double>(n_i))));
}

LocalIterations LocalIterations::parse(std::string_view text) {
  bool relative = !text.empty() && text.back() == 'n';
  std::string_view digits = relative ? text.substr(0, text.size() - 1) : text;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || !(value > 0.0)) {
    throw Error(ErrorCode::BadConfig, "H must be a positive count or '<fraction>n', got '" + std::string(text) + "'");
  }
  if (!relative && value != std::floor(value)) {
    throw Error(ErrorCode::BadConfig, "absolute H must be an integer");
  }
  return {value, relative};
}

std::string LocalIterations::str() const {
  std::ostringstream out;
  out << value;
  if (per_sample) out << 'n';
  return out.str();
}

void RunConfig::validate(Index m) const {
  const double lo = 1.0 / static_cast<double>(m);
  if (!(eta >= lo - 1e-15 && eta <= 1.0)) {
    throw Error(ErrorCode::BadConfig, "eta must lie in [1/m, 1], got " + std::to_string(eta));
  }
  if (T < 1 || P < 1) throw Error(ErrorCode::BadConfig, "T and P must be >= 1");
  if (!(H.value > 0.0) || (!H.per_sample && H.value < 1.0)) throw Error(ErrorCode::BadConfig, "H must be >= 1");
  if (!(gap_tol >= 0.0)) throw Error(ErrorCode::BadConfig, "gap_tol must be >= 0");
  if (rho_mode == RhoMode::fixed && !(rho_fixed > 0.0)) throw Error(ErrorCode::BadConfig, "fixed rho must be > 0");
  if (gap_stride < 1) throw Error(ErrorCode::BadConfig, "gap_stride must be >= 1");
}

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t round, std::uint64_t task) {
  return seed ^ splitmix64(splitmix64(round) ^ (task * 0xD6E8FEB86659FD93ULL + 1));
}

Index Rng::uniform_index(Index n) {
  // rejection sampling keeps the draw unbiased for any n
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<Index>(x % range);
}

double Rng::uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() { return normal_(engine_); }

}  // namespace dmtrl
