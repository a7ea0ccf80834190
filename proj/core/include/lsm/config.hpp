#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsm/network.hpp"
#include "lsm/regularizers.hpp"

namespace lsm {

struct DatasetConfig {
  std::string format = "synthetic";  // synthetic | idx | cifar
  std::string train_images;          // idx
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
  std::vector<std::string> cifar_train;  // cifar
  std::vector<std::string> cifar_test;
  std::size_t train_subset = 2000;  // 0 keeps everything
  std::size_t test_subset = 1000;
  std::size_t synthetic_side = 12;
  double synthetic_noise = 0.15;
  std::uint64_t synthetic_seed = 7;
};

/// Everything a run depends on. Serialized as one flat JSON object.
struct TrainConfig {
  int epochs = 10;
  std::size_t batch_size = 100;
  double lr = 0.1;
  double lr_final = 0.001;
  double lr_drop_fraction = 0.5;  // lr_final from this fraction of the epochs on
  double momentum = 0.9;
  double weight_decay = 0.0005;
  RegularizerConfig regularizer;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  int num_classes = 10;
  std::string model = "conv:8,sconv:16,sconv:16";
  bool renormalize_conv = false;
  std::size_t monitor_batches = 2;  // test batches averaged into the smoothness profile
  DatasetConfig dataset;

  /// Throws ConfigError on the first invalid field.
  void validate() const;
  double learning_rate(int epoch) const;  // epoch counted from 0
  ModelSpec model_spec(const Shape& input_shape) const;

  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::json& j);
  static TrainConfig load(const std::filesystem::path& path);
};

}  // namespace lsm
