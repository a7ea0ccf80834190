#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsm/config.hpp"
#include "lsm/data_io.hpp"
#include "lsm/label_signals.hpp"
#include "lsm/network.hpp"
#include "lsm/robustness.hpp"

namespace lsm {

/// Normalized train/test splits plus the training-split statistics.
struct PreparedData {
  data::Dataset train;
  data::Dataset test;
  data::NormalizationStats stats;
};

PreparedData load_data(const TrainConfig& config);
PreparedData prepare(const data::Dataset& raw_train, const data::Dataset& raw_test);

struct EpochMetrics {
  int epoch = 0;  // 1-based
  double lr = 0.0;
  double cce = 0.0;           // mean over the epoch's batches
  double weight_decay = 0.0;  // lambda / 2 * |theta|^2 at the end of the epoch
  double regularizer = 0.0;   // mean gamma^m * Delta over the epoch's batches
  double eval_cce = 0.0;      // full pass over the training split after the epoch
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double delta = 0.0;  // mean consecutive gap of the smoothness profile
  SmoothnessProfile profile;
};

struct TrainResult {
  NetworkModel<float> model;
  double initial_cce = 0.0;
  double initial_test_accuracy = 0.0;
  std::vector<EpochMetrics> epochs;

  nlohmann::json metrics_json(const TrainConfig& config) const;
};

/// Label-signal smoothness at every monitored point for one batch, using the
/// configured neighbor count and normalized L^m.
SmoothnessProfile batch_profile(const NetworkModel<float>& model, const DenseTensor<float>& images,
                                std::span<const int> labels, int num_classes,
                                const RegularizerConfig& cfg);

/// Average of batch_profile over the first `batches` batches of a split.
SmoothnessProfile split_profile(const NetworkModel<float>& model, const data::Dataset& split,
                                std::size_t batch_size, std::size_t batches,
                                const RegularizerConfig& cfg);

/// Mean softmax cross-entropy over a whole split.
double mean_cross_entropy(const NetworkModel<float>& model, const data::Dataset& split);

/// Seeded SGD training. `log`, when set, receives one line per epoch.
TrainResult train(const TrainConfig& config, const PreparedData& data, std::ostream* log = nullptr);

/// Deformation evaluated by `evaluate`.
///   clean              param ignored
///   gaussian           SNR in dB
///   fgsm / fgsm-before epsilon in normalized / raw pixel units
///   fgsm-snr / fgsm-snr-before   SNR in dB, epsilon derived per image
///   dropout            drop probability
///   quantize           bit width
///   minimal-l2         maximum doubling steps
struct AttackSpec {
  std::string kind = "clean";
  double param = 0.0;
};

inline const std::vector<std::string>& attack_kinds() {
  static const std::vector<std::string> kinds = {
      "clean", "gaussian", "fgsm", "fgsm-before", "fgsm-snr", "fgsm-snr-before",
      "dropout", "quantize", "minimal-l2"};
  return kinds;
}

robustness::AttackReport evaluate(const NetworkModel<float>& model, const PreparedData& data,
                                  const AttackSpec& attack, std::span<const std::uint64_t> seeds,
                                  std::size_t threads);

struct InspectOutput {
  std::vector<std::filesystem::path> laplacians;
  std::vector<std::filesystem::path> powers;
  std::filesystem::path smoothness;
};

/// Writes, per monitored point, L and normalized L^m over the first batch of
/// the test split ordered by (label, index), plus the smoothness-vs-depth CSV.
InspectOutput inspect(const NetworkModel<float>& model, const PreparedData& data,
                      const TrainConfig& config, int power_m, const std::filesystem::path& out_dir);

}  // namespace lsm
