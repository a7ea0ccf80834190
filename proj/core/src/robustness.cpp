#include "lsm/robustness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <thread>

#include "lsm/errors.hpp"
#include "lsm/rng.hpp"

namespace lsm::robustness {

namespace {

constexpr std::size_t kEvalChunk = 100;
constexpr int kBisectionSteps = 40;

// Runs fn(first, count) over contiguous chunks, spread across threads. Each
// chunk writes only its own outputs, so the result is independent of threads.
void for_each_chunk(std::size_t n, std::size_t threads,
                    const std::function<void(std::size_t, std::size_t)>& fn) {
  const std::size_t chunks = (n + kEvalChunk - 1) / kEvalChunk;
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(chunks, 1));
  auto worker = [&](std::size_t t) {
    for (std::size_t c = t; c < chunks; c += threads) {
      const std::size_t first = c * kEvalChunk;
      fn(first, std::min(kEvalChunk, n - first));
    }
  };
  if (threads == 1) {
    worker(0);
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker, t);
}

DenseTensor<float> slice_batch(const DenseTensor<float>& images, std::size_t first,
                               std::size_t count) {
  Shape shape = images.shape();
  shape[0] = count;
  DenseTensor<float> out(shape);
  const std::size_t stride = images.stride0();
  std::copy_n(images.data().begin() + static_cast<std::ptrdiff_t>(first * stride), count * stride,
              out.data().begin());
  return out;
}

float sign_of(float g) { return g > 0.0f ? 1.0f : (g < 0.0f ? -1.0f : 0.0f); }

bool misclassified(const NetworkModel<float>& model, const DenseTensor<float>& image, int label) {
  return argmax_rows(forward_with_trace(model, image).logits())[0] != label;
}

}  // namespace

double mean_power(std::span<const float> image) {
  double s = 0.0;
  for (float v : image) s += static_cast<double>(v) * static_cast<double>(v);
  return image.empty() ? 0.0 : s / static_cast<double>(image.size());
}

NoiseResult gaussian_noise_at_snr(const DenseTensor<float>& images, double snr_db,
                                  std::uint64_t seed, std::size_t first_index) {
  NoiseResult out{images, std::vector<bool>(images.dim(0), false)};
  if (std::isinf(snr_db) && snr_db > 0.0) return out;

  const double ratio = std::pow(10.0, snr_db / 10.0);
  std::vector<double> noise(images.stride0());
  for (std::size_t n = 0; n < images.dim(0); ++n) {
    const auto clean = images.slice(n);
    const double signal = mean_power(clean);
    if (signal == 0.0) {
      out.degenerate[n] = true;
      continue;
    }
    Rng rng = make_rng(seed, "noise", first_index + n);
    double raw = 0.0;
    for (double& v : noise) {
      v = standard_normal(rng);
      raw += v * v;
    }
    raw /= static_cast<double>(noise.size());
    const double scale = std::sqrt(signal / ratio / raw);
    auto dst = out.images.slice(n);
    for (std::size_t i = 0; i < noise.size(); ++i)
      dst[i] = static_cast<float>(static_cast<double>(clean[i]) + scale * noise[i]);
  }
  return out;
}

double measured_snr_db(std::span<const float> clean, std::span<const float> noisy) {
  if (clean.size() != noisy.size()) throw InputError("measured_snr_db: size mismatch");
  double noise = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double d = static_cast<double>(noisy[i]) - static_cast<double>(clean[i]);
    noise += d * d;
  }
  noise /= static_cast<double>(clean.size());
  return 10.0 * std::log10(mean_power(clean) / noise);
}

std::vector<float> sign_perturbation(std::span<const float> grad, double epsilon) {
  std::vector<float> out(grad.size());
  const float eps = static_cast<float>(epsilon);
  for (std::size_t i = 0; i < grad.size(); ++i) out[i] = eps * sign_of(grad[i]);
  return out;
}

double epsilon_for_snr(double signal_power, double snr_db) {
  return std::sqrt(signal_power / std::pow(10.0, snr_db / 10.0));
}

DenseTensor<float> input_gradient(const NetworkModel<float>& model,
                                  const DenseTensor<float>& images, std::span<const int> labels) {
  const auto trace = forward_with_trace(model, images);
  const auto loss = softmax_cross_entropy(trace.logits(), labels);
  return backward(model, trace, loss.grad).input;
}

FgsmResult fgsm(const NetworkModel<float>& model, const DenseTensor<float>& images,
                std::span<const int> labels, const FgsmOptions& options) {
  if (options.before_normalization && options.stats == nullptr)
    throw InputError("fgsm: before_normalization needs normalization statistics");
  if (!options.target_snr_db && !(options.epsilon >= 0.0))
    throw InputError("fgsm: epsilon must be >= 0");

  // Sign of d loss / d raw equals the sign of d loss / d normalized (std > 0).
  const DenseTensor<float> grad = input_gradient(model, images, labels);
  DenseTensor<float> space =
      options.before_normalization ? data::denormalize(images, *options.stats) : images;

  FgsmResult result{DenseTensor<float>(), DenseTensor<float>(images.shape()),
                    std::vector<double>(images.dim(0), options.epsilon)};
  for (std::size_t n = 0; n < images.dim(0); ++n) {
    auto x = space.slice(n);
    if (options.target_snr_db)
      result.epsilons[n] = epsilon_for_snr(mean_power(x), *options.target_snr_db);
    const auto delta = sign_perturbation(grad.slice(n), result.epsilons[n]);
    auto p = result.perturbation.slice(n);
    for (std::size_t i = 0; i < x.size(); ++i) {
      p[i] = delta[i];
      x[i] += delta[i];
    }
  }
  result.images =
      options.before_normalization ? data::normalize_images(space, *options.stats) : std::move(space);
  return result;
}

MinimalL2Result minimal_l2_search(const NetworkModel<float>& model, const DenseTensor<float>& image,
                                  int label, int max_steps, double initial_epsilon) {
  if (image.rank() < 1 || image.dim(0) != 1)
    throw InputError("minimal_l2_search: expects a single-image batch");
  if (max_steps < 1) throw ParameterError("minimal_l2_search: max_steps must be >= 1");
  if (!(initial_epsilon > 0.0)) throw ParameterError("minimal_l2_search: initial epsilon must be > 0");

  MinimalL2Result result;
  result.adversarial = image;
  if (misclassified(model, image, label)) {
    result.bracket_certified = true;
    return result;
  }

  const std::array<int, 1> labels{label};
  auto step = [&](const std::vector<float>& dir, double eps) {
    DenseTensor<float> x = image;
    auto xd = x.data();
    for (std::size_t i = 0; i < xd.size(); ++i) xd[i] += static_cast<float>(eps) * dir[i];
    return x;
  };

  std::vector<float> dir = sign_perturbation(input_gradient(model, image, labels).data(), 1.0);
  double eps = initial_epsilon;
  double hi = 0.0;
  for (int s = 0; s < max_steps; ++s) {
    if (s > 0)
      dir = sign_perturbation(input_gradient(model, step(dir, eps / 2.0), labels).data(), 1.0);
    if (misclassified(model, step(dir, eps), label)) {
      hi = eps;
      break;
    }
    if (s + 1 < max_steps) eps *= 2.0;
  }

  result.direction = dir;
  const double pixels = static_cast<double>(image.size());
  double nonzero = 0.0;
  for (float d : dir) nonzero += d != 0.0f ? 1.0 : 0.0;

  if (hi == 0.0) {
    result.censored = true;
    result.epsilon = eps;
    result.adversarial = step(dir, eps);
    result.distance = eps * eps * nonzero / pixels;
    return result;
  }

  double lo = 0.0;
  for (int it = 0; it < kBisectionSteps; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (misclassified(model, step(dir, mid), label)) hi = mid;
    else lo = mid;
  }
  result.epsilon = hi;
  result.adversarial = step(dir, hi);
  result.distance = hi * hi * nonzero / pixels;
  result.bracket_certified = !misclassified(model, step(dir, hi / 2.0), label);
  return result;
}

std::vector<int> fault_dropout_eval(const NetworkModel<float>& model,
                                    const DenseTensor<float>& images, double p,
                                    std::uint64_t seed, std::size_t threads) {
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("fault_dropout_eval: p must lie in [0, 1]");
  std::vector<int> predictions(images.dim(0));
  for_each_chunk(images.dim(0), threads, [&](std::size_t first, std::size_t count) {
    std::vector<Rng> streams;
    for (std::size_t n = 0; n < count; ++n) streams.push_back(make_rng(seed, "dropout", first + n));
    const ActivationHook<float> hook = [&](std::size_t, std::size_t example,
                                           std::span<float> values) {
      Rng& rng = streams[example];
      for (float& v : values)
        if (uniform01(rng) < p) v = 0.0f;
    };
    const auto trace = forward_with_trace(model, slice_batch(images, first, count), hook);
    const auto pred = argmax_rows(trace.logits());
    std::copy(pred.begin(), pred.end(), predictions.begin() + static_cast<std::ptrdiff_t>(first));
  });
  return predictions;
}

void quantize_values(std::span<float> values, int bits) {
  if (bits < 1 || bits > 32) throw ParameterError("quantize: bits must lie in [1, 32]");
  if (values.empty()) return;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  const float lo_f = *lo_it, hi_f = *hi_it;
  if (hi == lo) return;
  const double top = std::ldexp(1.0, bits) - 1.0;
  const double step = (hi - lo) / top;
  for (float& v : values) {
    const double t = (static_cast<double>(v) - lo) / step;
    const double level = std::clamp(std::ceil(t - 0.5), 0.0, top);
    if (level == 0.0) v = lo_f;
    else if (level == top) v = hi_f;
    else v = static_cast<float>(lo + level * step);
  }
}

NetworkModel<float> quantize_weights(const NetworkModel<float>& model, int bits) {
  if (bits < 1 || bits > 32) throw ParameterError("quantize_weights: bits must lie in [1, 32]");
  NetworkModel<float> out = model;
  for (auto& layer : out.layers()) quantize_values(layer.weights.data(), bits);
  return out;
}

std::vector<int> predict(const NetworkModel<float>& model, const DenseTensor<float>& images,
                         std::size_t threads) {
  std::vector<int> predictions(images.dim(0));
  for_each_chunk(images.dim(0), threads, [&](std::size_t first, std::size_t count) {
    const auto pred = argmax_rows(forward_with_trace(model, slice_batch(images, first, count)).logits());
    std::copy(pred.begin(), pred.end(), predictions.begin() + static_cast<std::ptrdiff_t>(first));
  });
  return predictions;
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw InputError("accuracy: size mismatch");
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

nlohmann::json AttackReport::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : entries)
    out.push_back({{"attack", e.attack},
                   {"param", e.param},
                   {"seed", e.seed},
                   {"metric", e.metric},
                   {"value", e.value}});
  return out;
}

}  // namespace lsm::robustness
