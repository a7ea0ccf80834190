#include "lsm/network.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lsm/errors.hpp"
#include "lsm/rng.hpp"

namespace lsm {

namespace {

template <typename T>
double weight_scale(const Layer<T>& layer) {
  return (layer.is_conv() && layer.renormalize)
             ? 1.0 / std::sqrt(2.0 * static_cast<double>(kKernelSize) + 1.0)
             : 1.0;
}

Shape with_batch(std::size_t b, const Shape& shape) {
  Shape out{b};
  out.insert(out.end(), shape.begin(), shape.end());
  return out;
}

// --- convolution (3x3, padding 1) -------------------------------------------

template <typename T>
void conv_forward(const Layer<T>& layer, std::span<const T> in, const Shape& in_shape,
                  std::span<T> out, const Shape& out_shape) {
  const std::size_t cin = in_shape[0], h = in_shape[1], w = in_shape[2];
  const std::size_t cout = out_shape[0], ho = out_shape[1], wo = out_shape[2];
  const std::size_t stride = layer.stride();
  const T scale = static_cast<T>(weight_scale(layer));
  const auto wt = layer.weights.data();
  const auto bias = layer.bias.data();

  for (std::size_t o = 0; o < cout; ++o) {
    T* plane = out.data() + o * ho * wo;
    std::fill(plane, plane + ho * wo, bias[o]);
    for (std::size_t c = 0; c < cin; ++c) {
      const T* src = in.data() + c * h * w;
      for (std::size_t ky = 0; ky < kKernelSize; ++ky)
        for (std::size_t kx = 0; kx < kKernelSize; ++kx) {
          const T wv = scale * wt[((o * cin + c) * kKernelSize + ky) * kKernelSize + kx];
          for (std::size_t y = 0; y < ho; ++y) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * stride + ky) - 1;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            const T* srow = src + static_cast<std::size_t>(iy) * w;
            T* orow = plane + y * wo;
            for (std::size_t x = 0; x < wo; ++x) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x * stride + kx) - 1;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              orow[x] += wv * srow[ix];
            }
          }
        }
    }
  }
}

template <typename T>
void conv_backward(const Layer<T>& layer, std::span<const T> in, const Shape& in_shape,
                   std::span<const T> grad_out, const Shape& out_shape, std::span<T> grad_w,
                   std::span<T> grad_b, std::span<T> grad_in) {
  const std::size_t cin = in_shape[0], h = in_shape[1], w = in_shape[2];
  const std::size_t cout = out_shape[0], ho = out_shape[1], wo = out_shape[2];
  const std::size_t stride = layer.stride();
  const T scale = static_cast<T>(weight_scale(layer));
  const auto wt = layer.weights.data();

  for (std::size_t o = 0; o < cout; ++o) {
    const T* gplane = grad_out.data() + o * ho * wo;
    T gb = 0;
    for (std::size_t i = 0; i < ho * wo; ++i) gb += gplane[i];
    grad_b[o] += gb;
    for (std::size_t c = 0; c < cin; ++c) {
      const T* src = in.data() + c * h * w;
      T* gsrc = grad_in.data() + c * h * w;
      for (std::size_t ky = 0; ky < kKernelSize; ++ky)
        for (std::size_t kx = 0; kx < kKernelSize; ++kx) {
          const std::size_t widx = ((o * cin + c) * kKernelSize + ky) * kKernelSize + kx;
          const T wv = scale * wt[widx];
          T gw = 0;
          for (std::size_t y = 0; y < ho; ++y) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * stride + ky) - 1;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            const T* srow = src + static_cast<std::size_t>(iy) * w;
            T* gsrow = gsrc + static_cast<std::size_t>(iy) * w;
            const T* grow = gplane + y * wo;
            for (std::size_t x = 0; x < wo; ++x) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x * stride + kx) - 1;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              gw += grow[x] * srow[ix];
              gsrow[ix] += wv * grow[x];
            }
          }
          grad_w[widx] += scale * gw;
        }
    }
  }
}

// --- dense -------------------------------------------------------------------

// Input of a dense layer as a flat feature vector (pooled when requested).
template <typename T>
std::vector<T> dense_input(const Layer<T>& layer, std::span<const T> in, const Shape& in_shape) {
  if (!layer.pool_input) return {in.begin(), in.end()};
  const std::size_t channels = in_shape[0];
  const std::size_t area = in.size() / channels;
  std::vector<T> pooled(channels, T{0});
  for (std::size_t c = 0; c < channels; ++c) {
    T sum = 0;
    for (std::size_t i = 0; i < area; ++i) sum += in[c * area + i];
    pooled[c] = sum / static_cast<T>(area);
  }
  return pooled;
}

template <typename T>
void dense_forward(const Layer<T>& layer, std::span<const T> x, std::span<T> out) {
  const std::size_t rows = layer.rows(), cols = layer.fan_in();
  const auto wt = layer.weights.data();
  for (std::size_t o = 0; o < rows; ++o) {
    T acc = layer.bias[o];
    const T* wrow = wt.data() + o * cols;
    for (std::size_t i = 0; i < cols; ++i) acc += wrow[i] * x[i];
    out[o] = acc;
  }
}

}  // namespace

// --- ModelSpec -----------------------------------------------------------------

std::vector<HiddenSpec> ModelSpec::parse_layers(std::string_view text) {
  std::vector<HiddenSpec> hidden;
  std::stringstream stream{std::string(text)};
  std::string token;
  while (std::getline(stream, token, ',')) {
    if (token.empty()) continue;
    std::vector<std::string> parts;
    std::stringstream ts(token);
    std::string part;
    while (std::getline(ts, part, ':')) parts.push_back(part);
    if (parts.size() < 2 || parts.size() > 3)
      throw ConfigError("model layers: malformed token '" + token + "'");
    HiddenSpec h;
    if (parts[0] == "conv") h.kind = LayerKind::kConv3x3;
    else if (parts[0] == "sconv") h.kind = LayerKind::kConv3x3Strided;
    else if (parts[0] == "dense") h.kind = LayerKind::kDense;
    else throw ConfigError("model layers: unknown layer kind '" + parts[0] + "'");
    try {
      h.width = static_cast<std::size_t>(std::stoul(parts[1]));
    } catch (const std::exception&) {
      throw ConfigError("model layers: bad width in '" + token + "'");
    }
    if (h.width == 0) throw ConfigError("model layers: zero width in '" + token + "'");
    if (parts.size() == 3) {
      if (parts[2] != "res") throw ConfigError("model layers: unknown suffix in '" + token + "'");
      h.residual = true;
    }
    hidden.push_back(h);
  }
  return hidden;
}

std::string ModelSpec::format_layers(std::span<const HiddenSpec> hidden) {
  std::string out;
  for (const auto& h : hidden) {
    if (!out.empty()) out += ",";
    out += h.kind == LayerKind::kDense ? "dense" : h.kind == LayerKind::kConv3x3 ? "conv" : "sconv";
    out += ":" + std::to_string(h.width);
    if (h.residual) out += ":res";
  }
  return out;
}

// --- NetworkModel -------------------------------------------------------------

template <typename T>
NetworkModel<T>::NetworkModel(Shape input_shape, std::vector<Layer<T>> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
  if (layers_.empty()) throw InputError("NetworkModel: need at least the classifier layer");
  if (input_shape_.empty() || input_shape_.size() > 3)
    throw InputError("NetworkModel: input shape must have rank 1..3");

  Shape current = input_shape_;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer<T>& layer = layers_[l];
    const bool last = l + 1 == layers_.size();
    const std::string where = "NetworkModel: layer " + std::to_string(l) + ": ";
    if (layer.bias.rank() != 1 || layer.bias.dim(0) != layer.weights.dim(0))
      throw InputError(where + "bias shape does not match weights");

    Shape out;
    if (layer.is_conv()) {
      if (current.size() != 3) throw InputError(where + "conv layer needs a (C,H,W) input");
      const Shape& ws = layer.weights.shape();
      if (ws.size() != 4 || ws[1] != current[0] || ws[2] != kKernelSize || ws[3] != kKernelSize)
        throw InputError(where + "conv weights must be (out, " + std::to_string(current[0]) +
                         ", 3, 3), got " + shape_string(ws));
      const std::size_t s = layer.stride();
      out = {ws[0], (current[1] - 1) / s + 1, (current[2] - 1) / s + 1};
    } else {
      const Shape& ws = layer.weights.shape();
      const std::size_t in_features =
          layer.pool_input ? (current.size() == 3 ? current[0] : 0) : shape_size(current);
      if (ws.size() != 2 || ws[1] != in_features)
        throw InputError(where + "dense weights must be (out, " + std::to_string(in_features) +
                         "), got " + shape_string(ws));
      out = {ws[0]};
    }
    if (layer.residual && out != current)
      throw InputError(where + "residual layer must preserve its input shape");
    if (last && (layer.is_conv() || layer.activation != Activation::kNone || layer.residual))
      throw InputError(where + "the last layer must be a plain dense classifier");
    if (!last && layer.activation == Activation::kRelu) monitored_.push_back(l);
    output_shapes_.push_back(out);
    current = out;
  }
}

template <typename T>
template <typename U>
NetworkModel<U> NetworkModel<T>::cast() const {
  std::vector<Layer<U>> out;
  for (const auto& layer : layers_) {
    Layer<U> l;
    l.kind = layer.kind;
    l.activation = layer.activation;
    l.residual = layer.residual;
    l.residual_alpha = layer.residual_alpha;
    l.renormalize = layer.renormalize;
    l.pool_input = layer.pool_input;
    std::vector<U> w(layer.weights.data().begin(), layer.weights.data().end());
    std::vector<U> b(layer.bias.data().begin(), layer.bias.data().end());
    l.weights = DenseTensor<U>(layer.weights.shape(), std::move(w));
    l.bias = DenseTensor<U>(layer.bias.shape(), std::move(b));
    out.push_back(std::move(l));
  }
  return NetworkModel<U>(input_shape_, std::move(out));
}

template <typename T>
NetworkModel<T> make_model(const ModelSpec& spec, std::uint64_t seed) {
  Rng rng = make_rng(seed, "init");
  auto he_uniform = [&](DenseTensor<T>& w, std::size_t fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (T& v : w.data()) v = static_cast<T>((2.0 * uniform01(rng) - 1.0) * limit);
  };

  std::vector<Layer<T>> layers;
  Shape current = spec.input_shape;
  for (const auto& h : spec.hidden) {
    Layer<T> layer;
    layer.kind = h.kind;
    layer.activation = Activation::kRelu;
    layer.residual = h.residual;
    layer.residual_alpha = spec.residual_alpha;
    if (h.kind == LayerKind::kDense) {
      const std::size_t in = shape_size(current);
      layer.weights = DenseTensor<T>({h.width, in});
      he_uniform(layer.weights, in);
      current = {h.width};
    } else {
      if (current.size() != 3) throw ConfigError("make_model: conv layer after a dense layer");
      layer.renormalize = spec.renormalize_conv;
      layer.weights = DenseTensor<T>({h.width, current[0], kKernelSize, kKernelSize});
      he_uniform(layer.weights, current[0] * kKernelSize * kKernelSize);
      const std::size_t s = layer.stride();
      current = {h.width, (current[1] - 1) / s + 1, (current[2] - 1) / s + 1};
    }
    layer.bias = DenseTensor<T>({h.width});
    layers.push_back(std::move(layer));
  }

  Layer<T> head;
  head.kind = LayerKind::kDense;
  head.activation = Activation::kNone;
  head.pool_input = current.size() == 3;
  const std::size_t in = head.pool_input ? current[0] : shape_size(current);
  head.weights = DenseTensor<T>({spec.num_classes, in});
  he_uniform(head.weights, in);
  head.bias = DenseTensor<T>({spec.num_classes});
  layers.push_back(std::move(head));
  return NetworkModel<T>(spec.input_shape, std::move(layers));
}

// --- forward / backward ---------------------------------------------------------

template <typename T>
Matrix ForwardTrace<T>::representation(std::size_t point) const {
  const DenseTensor<T>& t = outputs.at(monitored.at(point));
  const std::size_t b = t.dim(0), d = t.stride0();
  Matrix m(b, d);
  auto src = t.data();
  auto dst = m.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<double>(src[i]);
  return m;
}

template <typename T>
ForwardTrace<T> forward_with_trace(const NetworkModel<T>& model, const DenseTensor<T>& batch,
                                   const ActivationHook<T>& hook) {
  if (batch.rank() < 1 || batch.dim(0) == 0) throw InputError("forward: empty batch");
  const Shape example_shape(batch.shape().begin() + 1, batch.shape().end());
  if (example_shape != model.input_shape())
    throw InputError("forward: batch example shape " + shape_string(example_shape) +
                     " does not match model input " + shape_string(model.input_shape()));

  const std::size_t b = batch.dim(0);
  ForwardTrace<T> trace;
  trace.input = batch;
  trace.monitored = model.monitored_points();
  const auto layers = model.layers();
  std::size_t point = 0;

  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Layer<T>& layer = layers[l];
    const DenseTensor<T>& in = l == 0 ? trace.input : trace.outputs[l - 1];
    const Shape& in_shape = model.layer_input_shape(l);
    const Shape& out_shape = model.output_shape(l);
    DenseTensor<T> z(with_batch(b, out_shape));
    for (std::size_t n = 0; n < b; ++n) {
      if (layer.is_conv()) {
        conv_forward(layer, in.slice(n), in_shape, z.slice(n), out_shape);
      } else {
        const std::vector<T> x = dense_input(layer, in.slice(n), in_shape);
        dense_forward<T>(layer, x, z.slice(n));
      }
    }

    DenseTensor<T> out = z;
    if (layer.activation == Activation::kRelu)
      for (T& v : out.data()) v = v > T{0} ? v : T{0};
    if (layer.residual) {
      const T a = static_cast<T>(layer.residual_alpha);
      const T skip = static_cast<T>(1.0 - layer.residual_alpha);
      auto od = out.data();
      auto id = in.data();
      for (std::size_t i = 0; i < od.size(); ++i) od[i] = a * od[i] + skip * id[i];
    }
    const bool monitored = point < trace.monitored.size() && trace.monitored[point] == l;
    if (monitored && hook)
      for (std::size_t n = 0; n < b; ++n) hook(point, n, out.slice(n));
    if (monitored) ++point;

    trace.pre.push_back(std::move(z));
    trace.outputs.push_back(std::move(out));
  }
  return trace;
}

template <typename T>
Gradients<T> backward(const NetworkModel<T>& model, const ForwardTrace<T>& trace,
                      const DenseTensor<T>& grad_logits, std::span<const Matrix> monitored_grads) {
  const auto layers = model.layers();
  if (trace.pre.size() != layers.size() || trace.outputs.size() != layers.size())
    throw InputError("backward: trace does not belong to this model (layer count)");
  const std::size_t b = trace.batch_size();
  for (std::size_t l = 0; l < layers.size(); ++l)
    if (trace.outputs[l].shape() != with_batch(b, model.output_shape(l)))
      throw InputError("backward: trace does not belong to this model (layer " +
                       std::to_string(l) + " shape)");
  if (grad_logits.shape() != trace.logits().shape())
    throw InputError("backward: logits gradient has the wrong shape");
  if (!monitored_grads.empty() && monitored_grads.size() != trace.monitored.size())
    throw InputError("backward: need one gradient per monitored point");

  Gradients<T> grads;
  for (const auto& layer : layers) {
    grads.weights.emplace_back(layer.weights.shape());
    grads.biases.emplace_back(layer.bias.shape());
  }

  DenseTensor<T> upstream = grad_logits;
  std::ptrdiff_t point = static_cast<std::ptrdiff_t>(trace.monitored.size()) - 1;

  for (std::size_t li = layers.size(); li-- > 0;) {
    const Layer<T>& layer = layers[li];
    const DenseTensor<T>& in = li == 0 ? trace.input : trace.outputs[li - 1];
    const Shape& in_shape = model.layer_input_shape(li);
    const Shape& out_shape = model.output_shape(li);

    if (point >= 0 && trace.monitored[static_cast<std::size_t>(point)] == li) {
      if (!monitored_grads.empty()) {
        const Matrix& g = monitored_grads[static_cast<std::size_t>(point)];
        if (g.rows() != b || g.cols() != upstream.stride0())
          throw InputError("backward: monitored gradient " + std::to_string(point) +
                           " has the wrong shape");
        auto ud = upstream.data();
        auto gd = g.data();
        for (std::size_t i = 0; i < ud.size(); ++i) ud[i] += static_cast<T>(gd[i]);
      }
      --point;
    }

    DenseTensor<T> grad_in(in.shape());
    // Through the residual merge and the activation.
    DenseTensor<T> gz = upstream;
    if (layer.residual) {
      const T a = static_cast<T>(layer.residual_alpha);
      const T skip = static_cast<T>(1.0 - layer.residual_alpha);
      auto gi = grad_in.data();
      auto gzd = gz.data();
      for (std::size_t i = 0; i < gzd.size(); ++i) {
        gi[i] += skip * gzd[i];
        gzd[i] *= a;
      }
    }
    if (layer.activation == Activation::kRelu) {
      auto gzd = gz.data();
      auto zd = trace.pre[li].data();
      for (std::size_t i = 0; i < gzd.size(); ++i)
        if (!(zd[i] > T{0})) gzd[i] = T{0};
    }

    auto gw = grads.weights[li].data();
    auto gb = grads.biases[li].data();
    for (std::size_t n = 0; n < b; ++n) {
      if (layer.is_conv()) {
        conv_backward(layer, in.slice(n), in_shape, std::as_const(gz).slice(n), out_shape, gw, gb,
                      grad_in.slice(n));
        continue;
      }
      const std::vector<T> x = dense_input(layer, in.slice(n), in_shape);
      const auto g = gz.slice(n);
      const std::size_t rows = layer.rows(), cols = layer.fan_in();
      std::vector<T> gx(cols, T{0});
      const auto wt = layer.weights.data();
      for (std::size_t o = 0; o < rows; ++o) {
        const T go = g[o];
        if (go == T{0}) continue;
        gb[o] += go;
        T* gwrow = gw.data() + o * cols;
        const T* wrow = wt.data() + o * cols;
        for (std::size_t i = 0; i < cols; ++i) {
          gwrow[i] += go * x[i];
          gx[i] += go * wrow[i];
        }
      }
      auto gi = grad_in.slice(n);
      if (layer.pool_input) {
        const std::size_t area = gi.size() / cols;
        for (std::size_t c = 0; c < cols; ++c) {
          const T share = gx[c] / static_cast<T>(area);
          for (std::size_t i = 0; i < area; ++i) gi[c * area + i] += share;
        }
      } else {
        for (std::size_t i = 0; i < cols; ++i) gi[i] += gx[i];
      }
    }
    upstream = std::move(grad_in);
  }
  grads.input = std::move(upstream);
  return grads;
}

// --- loss / optimizer -------------------------------------------------------

template <typename T>
LossAndGrad<T> softmax_cross_entropy(const DenseTensor<T>& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw InputError("softmax_cross_entropy: logits must be (b, C)");
  const std::size_t b = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != b) throw InputError("softmax_cross_entropy: label count mismatch");

  LossAndGrad<T> out{0.0, DenseTensor<T>(logits.shape())};
  std::vector<double> p(classes);
  for (std::size_t n = 0; n < b; ++n) {
    const int label = labels[n];
    if (label < 0 || static_cast<std::size_t>(label) >= classes)
      throw InputError("softmax_cross_entropy: label out of range at " + std::to_string(n));
    const auto z = logits.slice(n);
    double zmax = static_cast<double>(z[0]);
    for (std::size_t c = 1; c < classes; ++c) zmax = std::max(zmax, static_cast<double>(z[c]));
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      p[c] = std::exp(static_cast<double>(z[c]) - zmax);
      sum += p[c];
    }
    out.loss += std::log(sum) + zmax - static_cast<double>(z[static_cast<std::size_t>(label)]);
    auto g = out.grad.slice(n);
    for (std::size_t c = 0; c < classes; ++c) {
      const double onehot = static_cast<std::size_t>(label) == c ? 1.0 : 0.0;
      g[c] = static_cast<T>((p[c] / sum - onehot) / static_cast<double>(b));
    }
  }
  out.loss /= static_cast<double>(b);
  return out;
}

template <typename T>
std::vector<int> argmax_rows(const DenseTensor<T>& logits) {
  std::vector<int> out(logits.dim(0));
  for (std::size_t n = 0; n < out.size(); ++n) {
    const auto z = logits.slice(n);
    out[n] = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
  }
  return out;
}

template <typename T>
void sgd_momentum_step(std::span<T> params, std::span<const T> grads, std::span<T> velocity,
                       double lr, double momentum, double weight_decay) {
  if (params.size() != grads.size() || params.size() != velocity.size())
    throw InputError("sgd_momentum_step: parameter, gradient and velocity sizes differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double p = static_cast<double>(params[i]);
    const double v = momentum * static_cast<double>(velocity[i]) +
                     static_cast<double>(grads[i]) + weight_decay * p;
    velocity[i] = static_cast<T>(v);
    params[i] = static_cast<T>(p - lr * v);
  }
}

template <typename T>
void sgd_momentum_step(NetworkModel<T>& model, const Gradients<T>& grads, SgdState<T>& state,
                       double lr, double momentum, double weight_decay) {
  auto layers = model.layers();
  if (grads.weights.size() != layers.size())
    throw InputError("sgd_momentum_step: gradients do not match the model");
  if (state.weight_velocity.empty()) {
    for (const auto& layer : layers) {
      state.weight_velocity.emplace_back(layer.weights.size(), T{0});
      state.bias_velocity.emplace_back(layer.bias.size(), T{0});
    }
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    sgd_momentum_step<T>(layers[l].weights.data(), grads.weights[l].data(),
                         state.weight_velocity[l], lr, momentum, weight_decay);
    sgd_momentum_step<T>(layers[l].bias.data(), grads.biases[l].data(), state.bias_velocity[l],
                         lr, momentum, weight_decay);
  }
}

template <typename T>
double half_squared_norm(const NetworkModel<T>& model) {
  double s = 0.0;
  for (const auto& layer : model.layers()) {
    for (T v : layer.weights.data()) s += static_cast<double>(v) * static_cast<double>(v);
    for (T v : layer.bias.data()) s += static_cast<double>(v) * static_cast<double>(v);
  }
  return 0.5 * s;
}

#define LSM_INSTANTIATE_NETWORK(T)                                                            \
  template class NetworkModel<T>;                                                             \
  template struct ForwardTrace<T>;                                                            \
  template NetworkModel<T> make_model<T>(const ModelSpec&, std::uint64_t);                    \
  template ForwardTrace<T> forward_with_trace<T>(const NetworkModel<T>&, const DenseTensor<T>&, \
                                                 const ActivationHook<T>&);                   \
  template Gradients<T> backward<T>(const NetworkModel<T>&, const ForwardTrace<T>&,           \
                                    const DenseTensor<T>&, std::span<const Matrix>);          \
  template LossAndGrad<T> softmax_cross_entropy<T>(const DenseTensor<T>&, std::span<const int>); \
  template std::vector<int> argmax_rows<T>(const DenseTensor<T>&);                            \
  template void sgd_momentum_step<T>(std::span<T>, std::span<const T>, std::span<T>, double,  \
                                     double, double);                                         \
  template void sgd_momentum_step<T>(NetworkModel<T>&, const Gradients<T>&, SgdState<T>&,     \
                                     double, double, double);                                 \
  template double half_squared_norm<T>(const NetworkModel<T>&);

LSM_INSTANTIATE_NETWORK(float)
LSM_INSTANTIATE_NETWORK(double)

template NetworkModel<double> NetworkModel<float>::cast<double>() const;
template NetworkModel<float> NetworkModel<double>::cast<float>() const;
template NetworkModel<float> NetworkModel<float>::cast<float>() const;
template NetworkModel<double> NetworkModel<double>::cast<double>() const;

}  // namespace lsm
