#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dmtrl/core.hpp"
#include "dmtrl/data.hpp"
#include "dmtrl/runtime.hpp"

namespace dmtrl {

enum class Mode { dmtrl, stl, ssdca, centralized };
std::string_view to_string(Mode mode);

/// Flat key=value experiment description. Keys match the field names; the
/// synthetic generator is tuned through "synth.*" keys.
struct ExperimentConfig {
  Mode mode = Mode::dmtrl;
  std::string dataset = "synthetic1";  // preset name or manifest / task file path
  DataFormat format = DataFormat::dense;
  std::optional<LossKind> loss;     // default: preset's label model, squared for files
  std::optional<double> lambda;     // default: preset's lambda, 1e-3 for files
  double train_fraction = 0.7;      // file datasets and resplits
  RunConfig run;
  SyntheticSpec synth;              // filled from the preset, then synth.* keys
  std::filesystem::path out_dir = "out";

  /// Applies one key=value pair; throws BadConfig for unknown keys or values.
  void set(const std::string& key, const std::string& value);
  void validate() const;
  bool uses_preset() const;
};

/// Parses "key = value" lines ('#' comments). A "dataset" line that names a
/// preset resets the synth.* fields to that preset before later lines apply.
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct ExperimentOptions {
  bool svg = false;
  int splits = 1;
};

/// Train/test pair for split k. With one split, presets use the generated
/// held-out set and files a seeded random_split; more splits resplit the
/// pooled samples per split.
std::pair<MultiTaskProblem, MultiTaskProblem> experiment_data(const ExperimentConfig& config, int split, int splits);

/// Result of the split-0 run plus evaluation of every split.
struct ExperimentOutcome {
  ModelResult model;
  LossKind loss = LossKind::squared;
  std::vector<EvalReport> evals;
};

ExperimentOutcome run_model(const ExperimentConfig& config, const ExperimentOptions& options);

/// Runs, writes trace.csv, sigma.csv, correlation.csv, weights.csv, eval.csv
/// (and SVG charts on request) to out_dir, prints a summary to log.
void run_experiment(const ExperimentConfig& config, const ExperimentOptions& options, std::ostream& log);

/// Process exit code for an error: 1 configuration, 3 input/output, 2 otherwise.
int exit_code_for(ErrorCode code);

/// "%.17g" formatting used by every CSV writer.
std::string format_real(double v);

std::string trace_csv(const std::vector<RoundTrace>& trace);
std::string matrix_csv(const ColMatrix& matrix);

/// Standalone SVG line chart. With log_y, non-positive values are drawn at
/// the smallest positive value in the series.
std::string svg_line_chart(const std::vector<double>& x, const std::vector<double>& y, const std::string& title,
                           const std::string& x_label, const std::string& y_label, bool log_y);

}  // namespace dmtrl
