// Command-line driver: run experiments, generate synthetic data, check configs.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "dmtrl/data.hpp"
#include "dmtrl/experiment.hpp"

namespace {

using dmtrl::Error;

// Extra "--key=value" arguments left over by the parser become overrides.
void apply_overrides(dmtrl::ExperimentConfig& config, const std::vector<std::string>& pairs) {
  for (std::string item : pairs) {
    if (item.rfind("--", 0) == 0) item.erase(0, 2);
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(dmtrl::ErrorCode::BadConfig, "override '" + item + "' is not key=value");
    }
    config.set(item.substr(0, eq), item.substr(eq + 1));
  }
}

int gen_synthetic_command(const std::string& preset, const std::string& out, std::uint64_t seed) {
  dmtrl::SyntheticSpec spec = dmtrl::synthetic_preset(preset);
  spec.seed = seed;
  const dmtrl::SyntheticData data = dmtrl::gen_synthetic(spec);
  const std::filesystem::path dir(out);
  dmtrl::write_problem(data.train, dir / "train");
  dmtrl::write_problem(data.test, dir / "test");
  std::ofstream truth(dir / "true_weights.csv", std::ios::binary);
  truth << dmtrl::matrix_csv(data.true_weights);
  if (!truth) throw Error(dmtrl::ErrorCode::IoError, "cannot write true_weights.csv");
  std::cout << "wrote " << data.train.m() << " tasks (d=" << data.train.d << ", "
            << data.train.total_samples() << " train / " << data.test.total_samples() << " test samples) to "
            << dir.string() << "\n";
  return 0;
}

int validate_command(const std::string& path) {
  dmtrl::ExperimentConfig config = dmtrl::load_experiment_config(path);
  config.validate();
  const auto [train, test] = dmtrl::experiment_data(config, 0, 1);
  config.run.validate(train.m());
  std::cout << "ok: mode " << dmtrl::to_string(config.mode) << ", " << train.m() << " tasks, d=" << train.d
            << ", loss " << dmtrl::to_string(train.loss) << ", lambda " << dmtrl::format_real(train.lambda) << ", "
            << train.total_samples() << " train / " << test.total_samples() << " test samples\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed multi-task relationship learning"};
  app.require_subcommand(1);

  std::string config_path;
  bool svg = false;
  int splits = 1;
  std::vector<std::string> overrides;
  CLI::App* run = app.add_subcommand("run", "Run an experiment from a key=value config");
  run->add_option("--config", config_path, "Config file")->required();
  run->add_flag("--svg", svg, "Also write gap-vs-round and gap-vs-time charts");
  run->add_option("--splits", splits, "Number of random train/test splits")->check(CLI::PositiveNumber);
  run->add_option("--override", overrides, "key=value, repeatable");
  run->allow_extras();

  std::string preset;
  std::string out_dir;
  std::uint64_t seed = 1;
  CLI::App* gen = app.add_subcommand("gen-synthetic", "Write a synthetic preset as dense task files");
  gen->add_option("--preset", preset, "Preset name")->required();
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_option("--seed", seed, "Generator seed");

  std::string validate_path;
  CLI::App* validate = app.add_subcommand("validate", "Parse a config and load its dataset");
  validate->add_option("--config", validate_path, "Config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) {
      dmtrl::ExperimentConfig config = dmtrl::load_experiment_config(config_path);
      apply_overrides(config, overrides);
      apply_overrides(config, run->remaining());
      dmtrl::run_experiment(config, {svg, splits}, std::cout);
      return 0;
    }
    if (*gen) return gen_synthetic_command(preset, out_dir, seed);
    return validate_command(validate_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return dmtrl::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
