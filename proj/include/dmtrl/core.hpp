#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dmtrl {

using Index = Eigen::Index;
/// Sample matrices are dense, row-major, one row per instance.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Column-per-task matrices (b-vectors, weights) and the m x m covariances.
using ColMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorCode {
  DimensionMismatch,
  EmptyTask,
  BadLabel,
  BadLambda,
  BadConfig,
  NonPositiveCurvature,
  ConjugateDomainViolation,
  NotComputable,
  MissingDelta,
  ZeroWeights,
  DegenerateDiagonal,
  BadTag,
  TruncatedFrame,
  TrailingBytes,
  ParseError,
  ManifestError,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Every module reports failures through this exception; what() starts with
/// the error code name so the CLI can print it verbatim.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

enum class LossKind { hinge, squared };

std::string_view to_string(LossKind kind);
LossKind parse_loss(std::string_view name);

struct TaskData {
  int task_id = 0;
  Matrix features;  // n_i x d
  Vector labels;    // n_i

  Index n() const { return features.rows(); }
  Index d() const { return features.cols(); }
};

struct MultiTaskProblem {
  std::vector<TaskData> tasks;
  Index d = 0;
  double lambda = 1.0;
  LossKind loss = LossKind::squared;

  Index m() const { return static_cast<Index>(tasks.size()); }
  Index total_samples() const;
};

/// Returns the problem unchanged iff every invariant holds; throws otherwise.
const MultiTaskProblem& validate_problem(const MultiTaskProblem& problem);

/// Row-wise feature map applied before solving. Only the linear (identity)
/// map ships; the seam exists so solvers never look at raw inputs.
struct FeatureMap {
  enum class Kind { identity };
  Kind kind = Kind::identity;

  Matrix apply(const Matrix& rows) const;
  MultiTaskProblem apply(const MultiTaskProblem& problem) const;
};

/// The pair (Sigma, Omega = Sigma^{-1}) kept together with the spectral
/// factors of Sigma. Omega may carry eigenvalues near 1e12 when W is rank
/// deficient, so quadratic forms in Omega are evaluated in the eigenbasis.
class TaskCovariance {
 public:
  TaskCovariance() = default;

  /// Sigma = (1/m) I, Omega = m I.
  static TaskCovariance scaled_identity(Index m);
  /// basis columns are orthonormal eigenvectors; eigenvalues must be > 0.
  static TaskCovariance from_spectrum(const ColMatrix& basis, const Vector& sigma_eigenvalues);
  /// Eigendecomposes a symmetric positive definite Sigma.
  static TaskCovariance from_sigma(const ColMatrix& sigma);

  Index m() const { return sigma_.rows(); }
  const ColMatrix& sigma() const { return sigma_; }
  const ColMatrix& omega() const { return omega_; }
  const ColMatrix& basis() const { return basis_; }
  const Vector& sigma_eigenvalues() const { return eigenvalues_; }

  /// tr(W Omega W^T) for W with one column per task.
  double regularizer(const ColMatrix& weights) const;
  /// Sigma scaled to unit diagonal.
  ColMatrix correlation() const;

 private:
  ColMatrix sigma_;
  ColMatrix omega_;
  ColMatrix basis_;
  Vector eigenvalues_;
};

struct DualState {
  std::vector<Vector> alpha;  // one block per task
  ColMatrix b;                // d x m, b_i = (1/n_i) sum_j alpha_j x_j
  ColMatrix w;                // d x m

  static DualState zeros(const MultiTaskProblem& problem);
};

/// Local iteration budget: either an absolute count or a multiple of n_i.
struct LocalIterations {
  double value = 1.0;
  bool per_sample = true;

  Index for_task(Index n_i) const;
  static LocalIterations absolute(Index h) { return {static_cast<double>(h), false}; }
  static LocalIterations times_n(double fraction) { return {fraction, true}; }
  /// Accepts "250" or "0.5n".
  static LocalIterations parse(std::string_view text);
  std::string str() const;
};

enum class RhoMode { bound, fixed };
enum class Execution { serial, parallel };
enum class Clock { simulated, wall };

struct RunConfig {
  double eta = 1.0;
  int T = 200;
  LocalIterations H;
  int P = 10;
  double gap_tol = 1e-6;
  std::uint64_t seed = 1;
  RhoMode rho_mode = RhoMode::bound;
  double rho_fixed = 1.0;
  bool omega_step = true;
  Execution execution = Execution::parallel;
  int threads = 0;  // 0: OpenMP default
  int gap_stride = 1;
  Clock clock = Clock::simulated;

  void validate(Index m) const;
};

/// Seed for the generator of (round, task); independent of thread order.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t round, std::uint64_t task);

/// mt19937_64 with a bounded-integer draw that does not depend on the
/// standard library's distribution implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  Index uniform_index(Index n);
  double uniform01();
  double normal();
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace dmtrl
