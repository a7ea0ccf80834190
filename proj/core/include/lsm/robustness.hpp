#pragma once

// Deformations and faults applied at evaluation time.
//
// Every per-image random draw comes from a stream keyed by (seed, global
// image index), so results do not depend on batching or thread count.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsm/data_io.hpp"
#include "lsm/network.hpp"
#include "lsm/tensor.hpp"

namespace lsm::robustness {

inline constexpr double kInfiniteSnr = std::numeric_limits<double>::infinity();

struct NoiseResult {
  DenseTensor<float> images;
  std::vector<bool> degenerate;  // all-zero images, returned unchanged
};

/// Adds unit-normal noise rescaled per image so that
/// 10 log10(signal power / noise power) equals snr_db. Powers are pixel means
/// of squares. snr_db = +inf leaves the images untouched.
NoiseResult gaussian_noise_at_snr(const DenseTensor<float>& images, double snr_db,
                                  std::uint64_t seed, std::size_t first_index = 0);

/// 10 log10(mean(clean^2) / mean((noisy - clean)^2))
double measured_snr_db(std::span<const float> clean, std::span<const float> noisy);

double mean_power(std::span<const float> image);

/// epsilon * sign(g) with sign(0) = 0.
std::vector<float> sign_perturbation(std::span<const float> grad, double epsilon);

/// Epsilon whose sign perturbation has the given SNR against a signal power.
double epsilon_for_snr(double signal_power, double snr_db);

struct FgsmOptions {
  double epsilon = 0.0;
  std::optional<double> target_snr_db;  // per-image epsilon from the SNR instead
  bool before_normalization = false;    // perturb raw pixels, then re-normalize
  const data::NormalizationStats* stats = nullptr;  // required for before_normalization
};

struct FgsmResult {
  DenseTensor<float> images;        // perturbed, in the model's (normalized) input space
  DenseTensor<float> perturbation;  // epsilon * sign(grad), in the space it was applied
  std::vector<double> epsilons;     // per image
};

/// One forward and one backward pass; x' = x + eps sign(d loss / d x).
FgsmResult fgsm(const NetworkModel<float>& model, const DenseTensor<float>& images,
                std::span<const int> labels, const FgsmOptions& options);

/// Gradient of the mean cross-entropy with respect to the input batch.
DenseTensor<float> input_gradient(const NetworkModel<float>& model,
                                  const DenseTensor<float>& images, std::span<const int> labels);

struct MinimalL2Result {
  DenseTensor<float> adversarial;  // (1, input...)
  double epsilon = 0.0;            // step along the sign direction
  double distance = 0.0;           // mean squared pixel difference
  bool censored = false;           // no misclassification found within max_steps
  bool bracket_certified = false;  // epsilon misclassifies and epsilon / 2 does not
  std::vector<float> direction;
};

/// Stand-in for a worst-case attack: doubling search along the gradient-sign
/// direction (refreshing the direction at each doubling), then bisection.
MinimalL2Result minimal_l2_search(const NetworkModel<float>& model, const DenseTensor<float>& image,
                                  int label, int max_steps, double initial_epsilon = 1e-3);

/// Predictions with every monitored activation independently zeroed with
/// probability p, without rescaling.
std::vector<int> fault_dropout_eval(const NetworkModel<float>& model,
                                    const DenseTensor<float>& images, double p,
                                    std::uint64_t seed, std::size_t threads = 1);

/// Per-layer uniform min-max quantization of the weights (biases untouched);
/// ties go to the lower level.
NetworkModel<float> quantize_weights(const NetworkModel<float>& model, int bits);
void quantize_values(std::span<float> values, int bits);

std::vector<int> predict(const NetworkModel<float>& model, const DenseTensor<float>& images,
                         std::size_t threads = 1);
double accuracy(std::span<const int> predictions, std::span<const int> labels);

struct AttackReport {
  struct Entry {
    std::string attack;
    double param = 0.0;
    std::uint64_t seed = 0;
    std::string metric;
    double value = 0.0;
  };
  std::vector<Entry> entries;

  /// JSON array of {attack, param, seed, metric, value}.
  nlohmann::json to_json() const;
};

inline constexpr const char* kMinimalL2AttackName = "minimal-l2-fgsm-search";

}  // namespace lsm::robustness
