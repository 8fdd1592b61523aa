#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dmtrl/core.hpp"

namespace dmtrl {

enum class LabelModel { logistic, linear };

/// Planted-structure generator: a few parent weight vectors, every other task
/// a (possibly negated) noisy copy of one parent.
struct SyntheticSpec {
  Index m = 16;
  Index d = 100;
  Index n_parents = 3;
  Index n_min = 1500;  // training samples per task, drawn uniformly in [n_min, n_max]
  Index n_max = 2300;
  Index test_n = 500;  // held-out samples per task
  double noise_scale = 0.1;
  double negate_prob = 0.5;
  LabelModel label_model = LabelModel::logistic;
  double lambda = 1e-3;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Named recipes: "synthetic1", "synthetic2", "small-regression".
/// synthetic2 shares synthetic1's sample sizes and features for a given seed
/// and plants stronger correlation (one parent, less noise).
SyntheticSpec synthetic_preset(const std::string& name);
std::vector<std::string> synthetic_preset_names();

struct SyntheticData {
  MultiTaskProblem train;
  MultiTaskProblem test;
  ColMatrix true_weights;       // d x m
  std::vector<Index> parent;    // parent task index of each task
  std::vector<int> sign;        // +1 or -1 relative to the parent
};

SyntheticData gen_synthetic(const SyntheticSpec& spec);

/// +1 / -1 when tasks i and j descend from the same parent, empty otherwise.
std::optional<int> planted_sign(const SyntheticData& data, Index i, Index j);

enum class DataFormat { dense, sparse };
DataFormat parse_format(std::string_view name);

/// Loads a manifest ("d N" and "task PATH" lines, '#' comments; paths relative
/// to the manifest) or a single task file. Dense task files start with
/// "n d" followed by n rows "y v1 ... vd"; sparse rows are "y idx:val ..."
/// with 1-based indices. lambda and loss are left at their defaults.
MultiTaskProblem load_problem(const std::filesystem::path& path, DataFormat format);

/// Writes dir/manifest.txt and one dense file per task with 17 significant digits.
void write_problem(const MultiTaskProblem& problem, const std::filesystem::path& dir);

/// Dense text of one task, as written by write_problem.
std::string dense_task_text(const TaskData& task);

/// Concatenates the samples of two problems with equal task counts and d.
MultiTaskProblem merge_problems(const MultiTaskProblem& a, const MultiTaskProblem& b);

/// Per-task random split; task i keeps round(train_fraction * n_i) samples
/// (at least one on each side when n_i >= 2).
std::pair<MultiTaskProblem, MultiTaskProblem> random_split(const MultiTaskProblem& pooled, double train_fraction,
                                                           std::uint64_t seed);

struct TaskMetrics {
  Index n = 0;
  double rmse = 0.0;
  double explained_variance = 0.0;
  std::optional<double> error_rate;  // hinge loss only
};

struct EvalReport {
  std::vector<TaskMetrics> per_task;
  double rmse = 0.0;                 // pooled over all test points
  double explained_variance = 0.0;   // 1 - SSE/SST, SST around the pooled mean
  std::optional<double> error_rate;  // sign(0) = -1
};

EvalReport evaluate(const ColMatrix& weights, const MultiTaskProblem& test, LossKind loss);

}  // namespace dmtrl
