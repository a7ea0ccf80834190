#include "lsm/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "lsm/errors.hpp"

namespace lsm {

namespace {

using nlohmann::json;

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "epochs", "batch_size", "lr", "lr_final", "lr_drop_fraction", "momentum", "weight_decay",
      "gamma", "power_m", "k", "beta", "alpha", "parseval", "clamp_negative_similarities",
      "seed", "threads", "num_classes", "model", "renormalize_conv", "monitor_batches",
      "dataset", "train_images", "train_labels", "test_images", "test_labels", "cifar_train",
      "cifar_test", "train_subset", "test_subset", "synthetic_side", "synthetic_noise",
      "synthetic_seed"};
  return keys;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  for (auto [name, v] : {std::pair{"lr", lr}, {"lr_final", lr_final}, {"momentum", momentum},
                         {"weight_decay", weight_decay}}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be >= 0");
  }
  if (!(lr_drop_fraction >= 0.0 && lr_drop_fraction <= 1.0))
    throw ConfigError("lr_drop_fraction must lie in [0, 1]");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  regularizer.validate();
  const auto hidden = ModelSpec::parse_layers(model);
  if (regularizer.gamma > 0.0) {
    if (batch_size < 2) throw ConfigError("batch_size must be >= 2 when gamma > 0");
    if (hidden.size() < 2) throw ConfigError("gamma > 0 needs at least 2 hidden layers");
    if (regularizer.k > batch_size) throw ConfigError("k must not exceed batch_size");
  }
  if (dataset.format == "idx") {
    if (dataset.train_images.empty() || dataset.train_labels.empty() ||
        dataset.test_images.empty() || dataset.test_labels.empty())
      throw ConfigError("idx dataset needs train/test image and label paths");
  } else if (dataset.format == "cifar") {
    if (dataset.cifar_train.empty() || dataset.cifar_test.empty())
      throw ConfigError("cifar dataset needs cifar_train and cifar_test files");
  } else if (dataset.format == "synthetic") {
    if (dataset.synthetic_side < 4) throw ConfigError("synthetic_side must be >= 4");
    if (dataset.train_subset == 0 || dataset.test_subset == 0)
      throw ConfigError("synthetic dataset needs nonzero train_subset and test_subset");
  } else {
    throw ConfigError("dataset must be one of synthetic, idx, cifar (got '" + dataset.format + "')");
  }
}

double TrainConfig::learning_rate(int epoch) const {
  const double drop_at = lr_drop_fraction * static_cast<double>(epochs);
  return static_cast<double>(epoch) < drop_at ? lr : lr_final;
}

ModelSpec TrainConfig::model_spec(const Shape& input_shape) const {
  ModelSpec spec;
  spec.input_shape = input_shape;
  spec.hidden = ModelSpec::parse_layers(model);
  spec.num_classes = static_cast<std::size_t>(num_classes);
  spec.renormalize_conv = renormalize_conv;
  spec.residual_alpha = regularizer.alpha;
  return spec;
}

nlohmann::json TrainConfig::to_json() const {
  return json{
      {"epochs", epochs},
      {"batch_size", batch_size},
      {"lr", lr},
      {"lr_final", lr_final},
      {"lr_drop_fraction", lr_drop_fraction},
      {"momentum", momentum},
      {"weight_decay", weight_decay},
      {"gamma", regularizer.gamma},
      {"power_m", regularizer.power_m},
      {"k", regularizer.k},
      {"beta", regularizer.beta},
      {"alpha", regularizer.alpha},
      {"parseval", regularizer.parseval_enabled},
      {"clamp_negative_similarities", regularizer.clamp_negative_similarities},
      {"seed", seed},
      {"threads", threads},
      {"num_classes", num_classes},
      {"model", model},
      {"renormalize_conv", renormalize_conv},
      {"monitor_batches", monitor_batches},
      {"dataset", dataset.format},
      {"train_images", dataset.train_images},
      {"train_labels", dataset.train_labels},
      {"test_images", dataset.test_images},
      {"test_labels", dataset.test_labels},
      {"cifar_train", dataset.cifar_train},
      {"cifar_test", dataset.cifar_test},
      {"train_subset", dataset.train_subset},
      {"test_subset", dataset.test_subset},
      {"synthetic_side", dataset.synthetic_side},
      {"synthetic_noise", dataset.synthetic_noise},
      {"synthetic_seed", dataset.synthetic_seed},
  };
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known_keys().contains(key)) throw ConfigError("unknown config key '" + key + "'");

  TrainConfig c;
  read(j, "epochs", c.epochs);
  read(j, "batch_size", c.batch_size);
  read(j, "lr", c.lr);
  read(j, "lr_final", c.lr_final);
  read(j, "lr_drop_fraction", c.lr_drop_fraction);
  read(j, "momentum", c.momentum);
  read(j, "weight_decay", c.weight_decay);
  read(j, "gamma", c.regularizer.gamma);
  read(j, "power_m", c.regularizer.power_m);
  read(j, "k", c.regularizer.k);
  read(j, "beta", c.regularizer.beta);
  read(j, "alpha", c.regularizer.alpha);
  read(j, "parseval", c.regularizer.parseval_enabled);
  read(j, "clamp_negative_similarities", c.regularizer.clamp_negative_similarities);
  read(j, "seed", c.seed);
  read(j, "threads", c.threads);
  read(j, "num_classes", c.num_classes);
  read(j, "model", c.model);
  read(j, "renormalize_conv", c.renormalize_conv);
  read(j, "monitor_batches", c.monitor_batches);
  read(j, "dataset", c.dataset.format);
  read(j, "train_images", c.dataset.train_images);
  read(j, "train_labels", c.dataset.train_labels);
  read(j, "test_images", c.dataset.test_images);
  read(j, "test_labels", c.dataset.test_labels);
  read(j, "cifar_train", c.dataset.cifar_train);
  read(j, "cifar_test", c.dataset.cifar_test);
  read(j, "train_subset", c.dataset.train_subset);
  read(j, "test_subset", c.dataset.test_subset);
  read(j, "synthetic_side", c.dataset.synthetic_side);
  read(j, "synthetic_noise", c.dataset.synthetic_noise);
  read(j, "synthetic_seed", c.dataset.synthetic_seed);
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace lsm
