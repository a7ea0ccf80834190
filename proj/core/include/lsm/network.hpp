#pragma once

// Small deterministic feed-forward network with manual backpropagation.
//
// A model is an ordered list of layers. Every layer but the last is a hidden
// layer (dense, 3x3 conv or strided 3x3 conv) usually followed by a ReLU; the
// last layer is the dense classifier producing logits. Hidden ReLU outputs are
// the monitored points on which similarity graphs are built.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsm/matrix.hpp"
#include "lsm/tensor.hpp"

namespace lsm {

enum class LayerKind : std::uint8_t { kDense = 0, kConv3x3 = 1, kConv3x3Strided = 2 };
enum class Activation : std::uint8_t { kNone = 0, kRelu = 1 };

inline constexpr std::size_t kKernelSize = 3;
inline constexpr double kDefaultResidualAlpha = 0.5;

template <typename T>
struct Layer {
  LayerKind kind = LayerKind::kDense;
  Activation activation = Activation::kRelu;
  // Output is alpha * h(z) + (1 - alpha) * x; input and output shapes must agree.
  bool residual = false;
  double residual_alpha = kDefaultResidualAlpha;
  // Conv forward uses W / sqrt(2 k_s + 1); the stored W stays unscaled.
  bool renormalize = false;
  // Dense layer fed by a spatial tensor: average over H x W first.
  bool pool_input = false;

  DenseTensor<T> weights;  // dense (out, in); conv (out_c, in_c, 3, 3)
  DenseTensor<T> bias;     // (out) or (out_c)

  bool is_conv() const noexcept { return kind != LayerKind::kDense; }
  std::size_t stride() const noexcept { return kind == LayerKind::kConv3x3Strided ? 2 : 1; }
  /// Weight matrix viewed as (rows, fan_in).
  std::size_t rows() const { return weights.dim(0); }
  std::size_t fan_in() const { return weights.size() / weights.dim(0); }
};

struct HiddenSpec {
  LayerKind kind = LayerKind::kConv3x3;
  std::size_t width = 8;
  bool residual = false;
};

/// Architecture description. Layer grammar: comma separated tokens
/// "conv:N", "sconv:N" (stride 2), "dense:N", each optionally suffixed ":res".
struct ModelSpec {
  Shape input_shape;  // per example, e.g. (1, 12, 12) or (64)
  std::vector<HiddenSpec> hidden;
  std::size_t num_classes = 10;
  bool renormalize_conv = false;
  double residual_alpha = kDefaultResidualAlpha;

  static std::vector<HiddenSpec> parse_layers(std::string_view text);
  static std::string format_layers(std::span<const HiddenSpec> hidden);
};

template <typename T>
class NetworkModel {
 public:
  NetworkModel() = default;
  NetworkModel(Shape input_shape, std::vector<Layer<T>> layers);

  const Shape& input_shape() const noexcept { return input_shape_; }
  std::span<const Layer<T>> layers() const noexcept { return layers_; }
  std::span<Layer<T>> layers() noexcept { return layers_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }

  /// Per-example output shape of a layer.
  const Shape& output_shape(std::size_t layer) const { return output_shapes_.at(layer); }
  const Shape& layer_input_shape(std::size_t layer) const {
    return layer == 0 ? input_shape_ : output_shapes_.at(layer - 1);
  }

  /// Indices of hidden layers whose (post-ReLU) output is monitored.
  const std::vector<std::size_t>& monitored_points() const noexcept { return monitored_; }
  std::size_t num_classes() const { return layers_.back().rows(); }

  template <typename U>
  NetworkModel<U> cast() const;

 private:
  Shape input_shape_;
  std::vector<Layer<T>> layers_;
  std::vector<Shape> output_shapes_;
  std::vector<std::size_t> monitored_;
};

/// He-uniform weights, zero biases, drawn from the given seed.
template <typename T>
NetworkModel<T> make_model(const ModelSpec& spec, std::uint64_t seed);

template <typename T>
struct ForwardTrace {
  DenseTensor<T> input;                 // (b, input...)
  std::vector<DenseTensor<T>> pre;      // per layer pre-activation (b, out...)
  std::vector<DenseTensor<T>> outputs;  // per layer output; the last is the logits
  std::vector<std::size_t> monitored;   // layer indices

  std::size_t batch_size() const { return input.dim(0); }
  const DenseTensor<T>& logits() const { return outputs.back(); }
  /// Flattened b x d representation at a monitored point, as doubles.
  Matrix representation(std::size_t point) const;
};

/// Called on every example's activations right after each monitored block.
template <typename T>
using ActivationHook =
    std::function<void(std::size_t point, std::size_t example, std::span<T> values)>;

template <typename T>
ForwardTrace<T> forward_with_trace(const NetworkModel<T>& model, const DenseTensor<T>& batch,
                                   const ActivationHook<T>& hook = {});

template <typename T>
struct Gradients {
  std::vector<DenseTensor<T>> weights;
  std::vector<DenseTensor<T>> biases;
  DenseTensor<T> input;
};

/// Reverse pass. monitored_grads, when non-empty, holds one b x d gradient per
/// monitored point that is added to the upstream gradient at that point.
template <typename T>
Gradients<T> backward(const NetworkModel<T>& model, const ForwardTrace<T>& trace,
                      const DenseTensor<T>& grad_logits,
                      std::span<const Matrix> monitored_grads = {});

template <typename T>
struct LossAndGrad {
  double loss = 0.0;
  DenseTensor<T> grad;
};

/// Mean softmax cross-entropy over the batch; grad = (softmax - onehot) / b.
template <typename T>
LossAndGrad<T> softmax_cross_entropy(const DenseTensor<T>& logits, std::span<const int> labels);

template <typename T>
std::vector<int> argmax_rows(const DenseTensor<T>& logits);

/// v <- momentum v + g + weight_decay p;  p <- p - lr v
template <typename T>
void sgd_momentum_step(std::span<T> params, std::span<const T> grads, std::span<T> velocity,
                       double lr, double momentum, double weight_decay);

template <typename T>
struct SgdState {
  std::vector<std::vector<T>> weight_velocity;
  std::vector<std::vector<T>> bias_velocity;
};

template <typename T>
void sgd_momentum_step(NetworkModel<T>& model, const Gradients<T>& grads, SgdState<T>& state,
                       double lr, double momentum, double weight_decay);

/// 0.5 * sum of squared parameters (weights and biases).
template <typename T>
double half_squared_norm(const NetworkModel<T>& model);

}  // namespace lsm
