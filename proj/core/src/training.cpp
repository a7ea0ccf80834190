#include "lsm/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include "lsm/errors.hpp"
#include "lsm/graph.hpp"
#include "lsm/regularizers.hpp"
#include "lsm/rng.hpp"

namespace lsm {

namespace {

constexpr std::size_t kEvalChunk = 100;
constexpr int kDefaultSearchSteps = 20;

data::Dataset load_split(const TrainConfig& config, bool training) {
  const DatasetConfig& d = config.dataset;
  const std::size_t limit = training ? d.train_subset : d.test_subset;
  data::Dataset ds;
  if (d.format == "synthetic") {
    data::SyntheticSpec spec;
    spec.count = limit;
    spec.side = d.synthetic_side;
    spec.num_classes = config.num_classes;
    spec.pixel_noise = d.synthetic_noise;
    spec.prototype_seed = d.synthetic_seed;
    spec.sample_seed = training ? 1 : 2;
    return data::make_synthetic(spec);
  }
  if (d.format == "idx") {
    ds = training ? data::load_idx(d.train_images, d.train_labels)
                  : data::load_idx(d.test_images, d.test_labels);
  } else {
    std::vector<std::filesystem::path> paths;
    for (const auto& p : training ? d.cifar_train : d.cifar_test) paths.emplace_back(p);
    ds = data::load_cifar_bin(paths);
  }
  for (int label : ds.labels)
    if (label >= config.num_classes)
      throw ConfigError("dataset label " + std::to_string(label) + " exceeds num_classes");
  ds.num_classes = config.num_classes;
  return limit == 0 ? ds : data::subset(ds, 0, limit);
}

struct SplitStats {
  double cce = 0.0;
  double accuracy = 0.0;
};

SplitStats split_stats(const NetworkModel<float>& model, const data::Dataset& split) {
  double loss = 0.0;
  std::size_t hits = 0;
  for (std::size_t first = 0; first < split.size(); first += kEvalChunk) {
    const std::size_t count = std::min(kEvalChunk, split.size() - first);
    const auto trace = forward_with_trace(model, split.batch(first, count));
    const std::span<const int> labels(split.labels.data() + first, count);
    loss += softmax_cross_entropy(trace.logits(), labels).loss * static_cast<double>(count);
    const auto pred = argmax_rows(trace.logits());
    for (std::size_t i = 0; i < count; ++i) hits += pred[i] == labels[i];
  }
  const double n = static_cast<double>(std::max<std::size_t>(split.size(), 1));
  return {loss / n, static_cast<double>(hits) / n};
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, "shuffle", static_cast<std::uint64_t>(epoch));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

void average_into(SmoothnessProfile& acc, const SmoothnessProfile& add,
                  std::vector<std::map<int, int>>& counts) {
  if (acc.per_layer.empty()) {
    acc.power_m = add.power_m;
    acc.per_layer.resize(add.per_layer.size());
    counts.resize(add.per_layer.size());
    for (std::size_t l = 0; l < add.per_layer.size(); ++l)
      acc.per_layer[l].layer_index = add.per_layer[l].layer_index;
  }
  for (std::size_t l = 0; l < add.per_layer.size(); ++l) {
    for (const auto& [c, v] : add.per_layer[l].per_class) {
      acc.per_layer[l].per_class[c] += v;
      ++counts[l][c];
    }
    acc.per_layer[l].total += add.per_layer[l].total;
  }
}

double mean_or_zero(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void write_matrix(const Matrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  write_csv(out, m);
}

}  // namespace

PreparedData prepare(const data::Dataset& raw_train, const data::Dataset& raw_test) {
  PreparedData out;
  out.stats = data::compute_normalization(raw_train);
  out.train = data::normalize(raw_train, out.stats);
  out.test = data::normalize(raw_test, out.stats);
  return out;
}

PreparedData load_data(const TrainConfig& config) {
  return prepare(load_split(config, true), load_split(config, false));
}

SmoothnessProfile batch_profile(const NetworkModel<float>& model, const DenseTensor<float>& images,
                                std::span<const int> labels, int num_classes,
                                const RegularizerConfig& cfg) {
  const auto trace = forward_with_trace(model, images);
  const auto signals = make_label_signals(labels, num_classes);
  const std::size_t b = images.dim(0);
  SmoothnessProfile profile;
  profile.power_m = cfg.power_m;
  for (std::size_t p = 0; p < trace.monitored.size(); ++p) {
    const auto sim =
        graph::build_similarity_matrix(trace.representation(p), graph::ZeroRowPolicy::kZeroSimilarity);
    const auto g =
        graph::knn_adjacency(sim, std::min(cfg.neighbors(b), b), cfg.clamp_negative_similarities);
    const auto power = graph::laplacian_power_normalized(g.laplacian, cfg.power_m).power;
    SmoothnessProfile::Layer layer;
    layer.layer_index = trace.monitored[p];
    for (int c : signals.classes_present) {
      const double s = graph::smoothness(power, signals.signal(c));
      layer.per_class[c] = s;
      layer.total += s;
    }
    profile.per_layer.push_back(std::move(layer));
  }
  return profile;
}

SmoothnessProfile split_profile(const NetworkModel<float>& model, const data::Dataset& split,
                                std::size_t batch_size, std::size_t batches,
                                const RegularizerConfig& cfg) {
  SmoothnessProfile acc;
  std::vector<std::map<int, int>> counts;
  std::size_t used = 0;
  for (std::size_t k = 0; k < batches; ++k) {
    const std::size_t first = k * batch_size;
    if (first + 2 > split.size()) break;
    const std::size_t count = std::min(batch_size, split.size() - first);
    const std::span<const int> labels(split.labels.data() + first, count);
    average_into(acc, batch_profile(model, split.batch(first, count), labels, split.num_classes, cfg),
                 counts);
    ++used;
  }
  for (std::size_t l = 0; l < acc.per_layer.size(); ++l) {
    for (auto& [c, v] : acc.per_layer[l].per_class) v /= counts[l][c];
    acc.per_layer[l].total /= static_cast<double>(used);
  }
  return acc;
}

double mean_cross_entropy(const NetworkModel<float>& model, const data::Dataset& split) {
  return split_stats(model, split).cce;
}

TrainResult train(const TrainConfig& config, const PreparedData& data, std::ostream* log) {
  config.validate();
  if (data.train.size() == 0) throw ConfigError("training split is empty");
  const RegularizerConfig& reg = config.regularizer;
  const bool regularize = reg.gamma > 0.0;

  TrainResult result;
  result.model = make_model<float>(config.model_spec(data.train.example_shape()), config.seed);
  NetworkModel<float>& model = result.model;
  if (regularize && model.monitored_points().size() < 2)
    throw ConfigError("gamma > 0 needs at least two monitored points");

  const auto initial = split_stats(model, data.train);
  result.initial_cce = initial.cce;
  result.initial_test_accuracy =
      robustness::accuracy(robustness::predict(model, data.test.images, config.threads), data.test.labels);

  SgdState<float> state;
  const std::size_t n = data.train.size();
  const std::size_t b = std::min(config.batch_size, n);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    EpochMetrics m;
    m.epoch = epoch + 1;
    m.lr = config.learning_rate(epoch);
    const auto order = shuffled_order(n, config.seed, epoch);
    std::size_t steps = 0;
    for (std::size_t first = 0; first < n; first += b) {
      const std::size_t count = std::min(b, n - first);
      if (regularize && count < 2) break;
      const std::span<const std::size_t> idx(order.data() + first, count);
      const auto images = data.train.gather(idx);
      const auto labels = data.train.gather_labels(idx);

      const auto trace = forward_with_trace(model, images);
      const auto ce = softmax_cross_entropy(trace.logits(), labels);
      m.cce += ce.loss;
      Gradients<float> grads;
      if (regularize) {
        const auto signals = make_label_signals(labels, data.train.num_classes);
        const auto r = smoothness_regularizer(trace, signals, reg);
        m.regularizer += r.value;
        grads = backward(model, trace, ce.grad, r.grads);
      } else {
        grads = backward(model, trace, ce.grad);
      }
      sgd_momentum_step(model, grads, state, m.lr, config.momentum, config.weight_decay);
      if (reg.parseval_enabled) parseval_retraction(model, reg.beta);
      ++steps;
    }
    if (steps > 0) {
      m.cce /= static_cast<double>(steps);
      m.regularizer /= static_cast<double>(steps);
    }
    m.weight_decay = config.weight_decay * half_squared_norm(model);
    const auto after = split_stats(model, data.train);
    m.eval_cce = after.cce;
    m.train_accuracy = after.accuracy;
    m.test_accuracy =
        robustness::accuracy(robustness::predict(model, data.test.images, config.threads), data.test.labels);
    if (model.monitored_points().size() >= 1 && data.test.size() >= 2) {
      m.profile = split_profile(model, data.test, b, config.monitor_batches, reg);
      const auto gaps = m.profile.gaps();
      m.delta = mean_or_zero(gaps);
    }
    if (log)
      *log << "epoch " << m.epoch << " lr " << m.lr << " cce " << m.cce << " reg " << m.regularizer
           << " train_acc " << m.train_accuracy << " test_acc " << m.test_accuracy << " delta "
           << m.delta << '\n';
    result.epochs.push_back(std::move(m));
  }
  return result;
}

nlohmann::json TrainResult::metrics_json(const TrainConfig& config) const {
  using nlohmann::json;
  json epochs_json = json::array();
  json rows_json = json::array();
  for (const auto& e : epochs) {
    epochs_json.push_back({{"epoch", e.epoch},
                           {"lr", e.lr},
                           {"cce", e.cce},
                           {"weight_decay", e.weight_decay},
                           {"regularizer", e.regularizer},
                           {"eval_cce", e.eval_cce},
                           {"train_accuracy", e.train_accuracy},
                           {"test_accuracy", e.test_accuracy},
                           {"delta", e.delta}});
    for (const auto& row : profile_rows(e.profile, e.epoch))
      rows_json.push_back({{"epoch", row.epoch},
                           {"layer_index", row.layer_index},
                           {"power_m", row.power_m},
                           {"class_id", row.class_id},
                           {"smoothness", row.smoothness}});
  }
  return json{{"config", config.to_json()},
              {"monitored_points", model.monitored_points()},
              {"initial", {{"cce", initial_cce}, {"test_accuracy", initial_test_accuracy}}},
              {"epochs", epochs_json},
              {"smoothness", rows_json},
              {"final_test_accuracy", epochs.empty() ? initial_test_accuracy : epochs.back().test_accuracy}};
}

robustness::AttackReport evaluate(const NetworkModel<float>& model, const PreparedData& data,
                                  const AttackSpec& attack, std::span<const std::uint64_t> seeds,
                                  std::size_t threads) {
  namespace rb = robustness;
  const auto& kinds = attack_kinds();
  if (std::find(kinds.begin(), kinds.end(), attack.kind) == kinds.end())
    throw ParameterError("unknown attack kind '" + attack.kind + "'");
  if (seeds.empty()) throw ParameterError("evaluate: at least one seed is required");
  const data::Dataset& test = data.test;
  rb::AttackReport report;
  auto add = [&](std::uint64_t seed, const std::string& metric, double value) {
    report.entries.push_back({attack.kind == "minimal-l2" ? std::string(rb::kMinimalL2AttackName)
                                                          : attack.kind,
                              attack.param, seed, metric, value});
  };

  for (std::uint64_t seed : seeds) {
    if (attack.kind == "clean") {
      add(seed, "accuracy", rb::accuracy(rb::predict(model, test.images, threads), test.labels));
    } else if (attack.kind == "gaussian") {
      const auto noisy = rb::gaussian_noise_at_snr(test.images, attack.param, seed, 0);
      add(seed, "accuracy", rb::accuracy(rb::predict(model, noisy.images, threads), test.labels));
    } else if (attack.kind.starts_with("fgsm")) {
      rb::FgsmOptions opt;
      if (attack.kind.starts_with("fgsm-snr")) opt.target_snr_db = attack.param;
      else opt.epsilon = attack.param;
      opt.before_normalization = attack.kind.ends_with("-before");
      opt.stats = &data.stats;
      std::vector<int> pred;
      for (std::size_t first = 0; first < test.size(); first += kEvalChunk) {
        const std::size_t count = std::min(kEvalChunk, test.size() - first);
        const std::span<const int> labels(test.labels.data() + first, count);
        const auto adv = rb::fgsm(model, test.batch(first, count), labels, opt);
        const auto p = rb::predict(model, adv.images, threads);
        pred.insert(pred.end(), p.begin(), p.end());
      }
      add(seed, "accuracy", rb::accuracy(pred, test.labels));
    } else if (attack.kind == "dropout") {
      add(seed, "accuracy",
          rb::accuracy(rb::fault_dropout_eval(model, test.images, attack.param, seed, threads),
                       test.labels));
    } else if (attack.kind == "quantize") {
      const double bits = attack.param;
      if (bits != std::floor(bits)) throw ParameterError("quantize: bits must be an integer");
      const auto q = rb::quantize_weights(model, static_cast<int>(bits));
      add(seed, "accuracy", rb::accuracy(rb::predict(q, test.images, threads), test.labels));
    } else {
      const int steps = attack.param > 0.0 ? static_cast<int>(attack.param) : kDefaultSearchSteps;
      const auto clean = rb::predict(model, test.images, threads);
      double total = 0.0;
      std::size_t attacked = 0, censored = 0;
      for (std::size_t i = 0; i < test.size(); ++i) {
        if (clean[i] != test.labels[i]) continue;
        const auto r = rb::minimal_l2_search(model, test.batch(i, 1), test.labels[i], steps);
        total += r.distance;
        ++attacked;
        censored += r.censored;
      }
      const double denom = static_cast<double>(std::max<std::size_t>(attacked, 1));
      add(seed, "mean_l2_distance", total / denom);
      add(seed, "censored_fraction", static_cast<double>(censored) / denom);
    }
  }
  return report;
}

InspectOutput inspect(const NetworkModel<float>& model, const PreparedData& data,
                      const TrainConfig& config, int power_m, const std::filesystem::path& out_dir) {
  if (power_m < 1) throw ParameterError("inspect: m must be >= 1");
  const data::Dataset& test = data.test;
  const std::size_t b = std::min(config.batch_size, test.size());
  if (b < 2) throw InputError("inspect: need at least two test examples");
  std::vector<std::size_t> idx(b);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t c) { return test.labels[a] < test.labels[c]; });
  const auto images = test.gather(idx);
  const auto labels = test.gather_labels(idx);

  RegularizerConfig cfg = config.regularizer;
  cfg.power_m = power_m;
  std::filesystem::create_directories(out_dir);
  InspectOutput out;
  const auto trace = forward_with_trace(model, images);
  for (std::size_t p = 0; p < trace.monitored.size(); ++p) {
    const auto sim =
        graph::build_similarity_matrix(trace.representation(p), graph::ZeroRowPolicy::kZeroSimilarity);
    const auto g = graph::knn_adjacency(sim, std::min(cfg.neighbors(b), b),
                                        cfg.clamp_negative_similarities);
    const std::string stem = "layer" + std::to_string(trace.monitored[p]);
    out.laplacians.push_back(out_dir / (stem + "_laplacian.csv"));
    out.powers.push_back(out_dir / (stem + "_laplacian_pow" + std::to_string(power_m) + ".csv"));
    write_matrix(g.laplacian, out.laplacians.back());
    write_matrix(graph::laplacian_power_normalized(g.laplacian, power_m).power, out.powers.back());
  }
  out.smoothness = out_dir / "smoothness.csv";
  std::ofstream csv(out.smoothness);
  if (!csv) throw InputError("cannot write " + out.smoothness.string());
  const auto rows = profile_rows(batch_profile(model, images, labels, test.num_classes, cfg), 0);
  write_profile_csv(csv, rows);
  return out;
}

}  // namespace lsm
