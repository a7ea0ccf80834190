#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lsm/graph.hpp"
#include "lsm/label_signals.hpp"
#include "lsm/matrix.hpp"
#include "lsm/network.hpp"
#include "lsm/tensor.hpp"

namespace lsm {

struct RegularizerConfig {
  double gamma = 0.01;
  int power_m = 2;
  std::size_t k = 0;  // 0 means k = batch size (complete graph)
  double beta = 0.01;
  double alpha = 0.5;
  bool parseval_enabled = false;
  bool clamp_negative_similarities = true;

  /// gamma^m, the weight applied to Delta.
  double effective_coefficient() const;
  std::size_t neighbors(std::size_t batch_size) const { return k == 0 ? batch_size : k; }
  void validate() const;
};

/// Per-point quantities held constant when differentiating: the edge support
/// (kNN selection plus sign clamp) and the max-abs normalizer of L^m.
struct FrozenGraph {
  graph::EdgeSupport support;
  double normalizer = 1.0;
};

struct RegularizerResult {
  double value = 0.0;               // gamma^m * Delta
  double delta = 0.0;               // mean |gap|
  std::vector<double> layer_sums;   // sum_c s_c^T P s_c per monitored point
  std::vector<double> gaps;         // |sum[l+1] - sum[l]|
  std::vector<Matrix> grads;        // d value / d representation, b x d each (empty if not requested)
  std::vector<FrozenGraph> frozen;  // what was held constant
};

/// Smoothness-gap regularizer over the monitored representations of one batch.
///
/// Gradients are exact on the region where the kNN support and the L^m
/// normalizer do not change: both are taken as constants, while cosine edge
/// weights, D - A and the matrix power are differentiated. The subgradient of
/// |x| at 0 is 0. Passing `frozen` reuses a previous support/normalizer.
RegularizerResult smoothness_regularizer(std::span<const Matrix> representations,
                                         const LabelSignalSet& signals,
                                         const RegularizerConfig& cfg, bool with_gradients = true,
                                         const std::vector<FrozenGraph>* frozen = nullptr);

template <typename T>
RegularizerResult smoothness_regularizer(const ForwardTrace<T>& trace,
                                         const LabelSignalSet& signals,
                                         const RegularizerConfig& cfg,
                                         bool with_gradients = true,
                                         const std::vector<FrozenGraph>* frozen = nullptr) {
  std::vector<Matrix> reps;
  for (std::size_t p = 0; p < trace.monitored.size(); ++p) reps.push_back(trace.representation(p));
  return smoothness_regularizer(reps, signals, cfg, with_gradients, frozen);
}

/// One step of W <- (1 + beta) W - beta W W^T W on a rows x cols view.
template <typename T>
void parseval_retraction(std::span<T> weights, std::size_t rows, std::size_t cols, double beta);

/// Applies the retraction to every layer, conv kernels reshaped to (out, fan_in).
template <typename T>
void parseval_retraction(NetworkModel<T>& model, double beta);

/// 1 / sqrt(2 k_s + 1)
double conv_renormalization_factor(std::size_t kernel_size);

/// Scaled copy of a conv kernel as used by the forward pass.
template <typename T>
DenseTensor<T> conv_renormalization(const DenseTensor<T>& kernel, std::size_t kernel_size);

/// Elementwise sum of alpha_i * branch_i. An empty alphas list means 1 for a
/// single branch and 0.5 each for two branches.
template <typename T>
DenseTensor<T> convex_combine(std::span<const DenseTensor<T>> branches,
                              std::span<const double> alphas = {});

}  // namespace lsm
