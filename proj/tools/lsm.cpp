// lsm: train, evaluate and inspect smoothness-regularized networks.
//
//   lsm train --config run.json --seed 3 --out runs/a
//   lsm eval --config run.json --checkpoint runs/a/checkpoint.lsm --attack gaussian --param 15
//   lsm inspect --config run.json --checkpoint runs/a/checkpoint.lsm --m 2 --out runs/a/inspect
//   lsm print-config --config run.json

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lsm/checkpoint.hpp"
#include "lsm/config.hpp"
#include "lsm/data_io.hpp"
#include "lsm/errors.hpp"
#include "lsm/training.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> subset;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "flat JSON config (defaults when omitted)");
  cmd->add_option("--seed", o.seed, "override the config seed");
  cmd->add_option("--subset", o.subset, "use the first N training examples");
  cmd->add_option("--threads", o.threads, "evaluation threads");
}

lsm::TrainConfig resolve(const CommonOptions& o) {
  lsm::TrainConfig c = o.config_path.empty() ? lsm::TrainConfig{} : lsm::TrainConfig::load(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.subset) c.dataset.train_subset = *o.subset;
  if (o.threads) c.threads = *o.threads;
  c.validate();
  return c;
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-smoothness regularized training and robustness evaluation"};
  app.require_subcommand(1);

  CommonOptions train_opt, eval_opt, inspect_opt, print_opt;
  std::string out_dir = ".";
  bool print_only = false;
  auto* train_cmd = app.add_subcommand("train", "train a model, write checkpoint.lsm and metrics.json");
  add_common(train_cmd, train_opt);
  train_cmd->add_option("--out", out_dir, "output directory");
  train_cmd->add_flag("--print-config", print_only, "print the resolved config and exit");

  std::string checkpoint;
  lsm::AttackSpec attack;
  std::vector<std::uint64_t> seeds{1};
  std::string report_path = "report.json";
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint under a deformation");
  add_common(eval_cmd, eval_opt);
  eval_cmd->add_option("--checkpoint", checkpoint, "LSM1 checkpoint")->required();
  eval_cmd->add_option("--attack", attack.kind, "deformation kind")
      ->check(CLI::IsMember(lsm::attack_kinds()));
  eval_cmd->add_option("--param", attack.param, "SNR dB, epsilon, p, bits or max steps");
  eval_cmd->add_option("--seeds", seeds, "comma separated seeds")->delimiter(',');
  eval_cmd->add_option("--out", report_path, "report path");

  int power_m = 2;
  std::string inspect_dir = "inspect";
  auto* inspect_cmd = app.add_subcommand("inspect", "export Laplacian and smoothness CSVs");
  add_common(inspect_cmd, inspect_opt);
  inspect_cmd->add_option("--checkpoint", checkpoint, "LSM1 checkpoint")->required();
  inspect_cmd->add_option("--m", power_m, "Laplacian power")->check(CLI::PositiveNumber);
  inspect_cmd->add_option("--out", inspect_dir, "output directory");

  auto* print_cmd = app.add_subcommand("print-config", "print the resolved config as JSON");
  add_common(print_cmd, print_opt);

  lsm::data::SyntheticSpec synth;
  std::size_t synth_test = 1000;
  std::string synth_dir = "data";
  auto* synth_cmd = app.add_subcommand("synth", "write the synthetic dataset as IDX files");
  synth_cmd->add_option("--count", synth.count, "training examples");
  synth_cmd->add_option("--test-count", synth_test, "test examples");
  synth_cmd->add_option("--side", synth.side, "image side");
  synth_cmd->add_option("--seed", synth.prototype_seed, "prototype seed");
  synth_cmd->add_option("--out", synth_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*print_cmd || (*train_cmd && print_only)) {
      const auto c = resolve(*print_cmd ? print_opt : train_opt);
      std::cout << c.to_json().dump(2) << '\n';
      return 0;
    }
    if (*train_cmd) {
      const auto c = resolve(train_opt);
      const auto data = lsm::load_data(c);
      const auto result = lsm::train(c, data, &std::clog);
      fs::create_directories(out_dir);
      lsm::save_checkpoint(result.model, fs::path(out_dir) / "checkpoint.lsm");
      write_json(result.metrics_json(c), fs::path(out_dir) / "metrics.json");
      return 0;
    }
    if (*eval_cmd) {
      const auto c = resolve(eval_opt);
      const auto model = lsm::load_checkpoint(checkpoint);
      const auto data = lsm::load_data(c);
      const auto report = lsm::evaluate(model, data, attack, seeds, c.threads);
      write_json(report.to_json(), report_path);
      return 0;
    }
    if (*inspect_cmd) {
      const auto c = resolve(inspect_opt);
      const auto model = lsm::load_checkpoint(checkpoint);
      const auto data = lsm::load_data(c);
      lsm::inspect(model, data, c, power_m, inspect_dir);
      return 0;
    }
    if (*synth_cmd) {
      fs::create_directories(synth_dir);
      const fs::path dir(synth_dir);
      const auto train = lsm::data::make_synthetic(synth);
      auto test_spec = synth;
      test_spec.count = synth_test;
      test_spec.sample_seed = 2;
      const auto test = lsm::data::make_synthetic(test_spec);
      lsm::data::write_idx(train, dir / "train-images.idx", dir / "train-labels.idx");
      lsm::data::write_idx(test, dir / "test-images.idx", dir / "test-labels.idx");
      return 0;
    }
  } catch (const lsm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 3;
  } catch (const lsm::FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return 4;
  } catch (const lsm::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
