#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "lsm/checkpoint.hpp"
#include "lsm/errors.hpp"
#include "lsm/graph.hpp"
#include "lsm/rng.hpp"
#include "lsm/training.hpp"

using namespace lsm;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 8;
  c.lr = 0.05;
  c.lr_final = 0.01;
  c.model = "conv:4,sconv:4";
  c.num_classes = 4;
  c.regularizer.gamma = 0.3;
  c.dataset.train_subset = 16;
  c.dataset.test_subset = 16;
  c.dataset.synthetic_side = 8;
  return c;
}

std::vector<std::vector<double>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("prepared data uses training statistics only") {
  const auto config = tiny_config();
  const auto d = load_data(config);
  CHECK(d.train.size() == 16);
  CHECK(d.test.size() == 16);
  CHECK(d.train.num_classes == 4);

  data::SyntheticSpec spec;
  spec.count = 30;
  spec.side = 8;
  const auto raw_train = data::make_synthetic(spec);
  spec.sample_seed = 5;
  auto raw_test = data::make_synthetic(spec);
  const auto a = prepare(raw_train, raw_test);
  for (float& v : raw_test.images.data()) v = v * 3.0f + 1.0f;
  const auto b = prepare(raw_train, raw_test);
  CHECK(a.stats.mean == b.stats.mean);
  CHECK(a.stats.std == b.stats.std);
  CHECK(a.stats.mean == data::compute_normalization(raw_train).mean);
  CHECK(a.train.images == b.train.images);
}

TEST_CASE("training lowers the training loss on a tiny fixture") {
  for (double gamma : {0.0, 0.3}) {
    auto config = tiny_config();
    config.regularizer.gamma = gamma;
    config.epochs = 3;
    const auto data = load_data(config);
    const auto r = train(config, data);
    REQUIRE(r.epochs.size() == 3);
    CHECK(r.epochs[0].eval_cce < r.initial_cce);
    CHECK(r.epochs.back().eval_cce < r.initial_cce);
    for (const auto& e : r.epochs) {
      CHECK(std::isfinite(e.cce));
      CHECK(e.weight_decay > 0.0);
      CHECK((e.regularizer > 0.0) == (gamma > 0.0));
      CHECK(e.profile.per_layer.size() == 2);
    }
  }
}

TEST_CASE("zero gamma training equals a plain SGD loop") {
  auto config = tiny_config();
  config.regularizer.gamma = 0.0;
  const auto data = load_data(config);
  const auto r = train(config, data);

  auto model = make_model<float>(config.model_spec(data.train.example_shape()), config.seed);
  SgdState<float> state;
  const std::size_t n = data.train.size(), b = config.batch_size;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(config.seed, "shuffle", static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    for (std::size_t first = 0; first < n; first += b) {
      const std::span<const std::size_t> idx(order.data() + first, std::min(b, n - first));
      const auto trace = forward_with_trace(model, data.train.gather(idx));
      const auto labels = data.train.gather_labels(idx);
      const auto ce = softmax_cross_entropy(trace.logits(), labels);
      sgd_momentum_step(model, backward(model, trace, ce.grad), state, config.learning_rate(epoch),
                        config.momentum, config.weight_decay);
    }
  }
  CHECK(serialize_checkpoint(model) == serialize_checkpoint(r.model));

  auto regularized = config;
  regularized.regularizer.gamma = 0.5;
  CHECK(serialize_checkpoint(train(regularized, data).model) != serialize_checkpoint(r.model));
}

TEST_CASE("identical seeded runs give byte-identical checkpoints") {
  auto config = tiny_config();
  config.regularizer.parseval_enabled = true;
  const auto data = load_data(config);
  const auto a = serialize_checkpoint(train(config, data).model);
  const auto b = serialize_checkpoint(train(config, data).model);
  CHECK(a == b);
  config.seed = 2;
  CHECK(serialize_checkpoint(train(config, data).model) != a);
}

TEST_CASE("metrics JSON layout") {
  const auto config = tiny_config();
  const auto data = load_data(config);
  std::ostringstream log;
  const auto r = train(config, data, &log);
  const std::string lines = log.str();
  CHECK(std::count(lines.begin(), lines.end(), '\n') == config.epochs);
  const auto j = r.metrics_json(config);
  CHECK(j["config"] == config.to_json());
  CHECK(j["monitored_points"] == nlohmann::json::array({0, 1}));
  CHECK(j["epochs"].size() == 2);
  CHECK(j["epochs"][1]["epoch"] == 2);
  CHECK(j["final_test_accuracy"] == r.epochs.back().test_accuracy);
  std::set<int> classes(data.test.labels.begin(), data.test.labels.begin() + 8);
  CHECK(j["smoothness"].size() == 2 * 2 * classes.size());
  for (const auto& row : j["smoothness"]) {
    CHECK(row["power_m"] == 2);
    CHECK(row["smoothness"].get<double>() >= 0.0);
  }
}

TEST_CASE("split profile averages batch profiles") {
  const auto config = tiny_config();
  const auto data = load_data(config);
  const auto model = make_model<float>(config.model_spec(data.train.example_shape()), 3);
  const auto p0 = batch_profile(model, data.test.batch(0, 8),
                                std::span<const int>(data.test.labels.data(), 8), 4, config.regularizer);
  const auto p1 = batch_profile(model, data.test.batch(8, 8),
                                std::span<const int>(data.test.labels.data() + 8, 8), 4, config.regularizer);
  const auto avg = split_profile(model, data.test, 8, 2, config.regularizer);
  for (std::size_t l = 0; l < 2; ++l)
    CHECK(avg.per_layer[l].total == Approx((p0.per_layer[l].total + p1.per_layer[l].total) / 2));
  CHECK(avg.gaps().size() == 1);
  const auto one = split_profile(model, data.test, 8, 1, config.regularizer);
  CHECK(one.per_layer[0].total == Approx(p0.per_layer[0].total));
  CHECK(mean_cross_entropy(model, data.test) > 0.0);
}

TEST_CASE("inspect writes sorted-batch Laplacians and the smoothness table") {
  const auto config = tiny_config();
  const auto data = load_data(config);
  const auto model = train(config, data).model;
  const fs::path dir = fs::temp_directory_path() / "lsm_test_inspect";
  fs::remove_all(dir);
  const auto out = inspect(model, data, config, 3, dir);
  REQUIRE(out.laplacians.size() == 2);
  CHECK(out.laplacians[0].filename() == "layer0_laplacian.csv");
  CHECK(out.powers[1].filename() == "layer1_laplacian_pow3.csv");
  for (std::size_t p = 0; p < 2; ++p) {
    const auto l = read_csv(out.laplacians[p]);
    REQUIRE(l.size() == 8);
    for (const auto& row : l) {
      REQUIRE(row.size() == 8);
      CHECK(std::abs(std::accumulate(row.begin(), row.end(), 0.0)) <= 1e-9);
    }
    const auto pw = read_csv(out.powers[p]);
    double top = 0.0;
    for (const auto& row : pw)
      for (double v : row) top = std::max(top, std::abs(v));
    CHECK(top == Approx(1.0).epsilon(1e-12));
  }
  std::ifstream csv(out.smoothness);
  std::string header;
  std::getline(csv, header);
  CHECK(header == "epoch,layer_index,power_m,class_id,smoothness");
  std::string first;
  std::getline(csv, first);
  CHECK(first.rfind("0,0,3,", 0) == 0);
  CHECK_THROWS_AS(inspect(model, data, config, 0, dir), ParameterError);
}

TEST_CASE("evaluate: clean accuracy and attack dispatch") {
  const auto config = tiny_config();
  const auto data = load_data(config);
  const auto r = train(config, data);
  const std::vector<std::uint64_t> seeds{1, 2};
  const auto clean = evaluate(r.model, data, {"clean", 0.0}, seeds, 1);
  REQUIRE(clean.entries.size() == 2);
  CHECK(clean.entries[0].value == r.epochs.back().test_accuracy);
  CHECK(clean.entries[1].seed == 2);

  for (const auto& kind : attack_kinds()) {
    const double param = kind == "quantize" ? 5.0 : kind == "dropout" ? 0.25
                         : kind.find("snr") != std::string::npos || kind == "gaussian" ? 20.0
                         : kind == "minimal-l2" ? 10.0 : 0.05;
    const auto one = evaluate(r.model, data, {kind, param}, std::vector<std::uint64_t>{3}, 2);
    CAPTURE(kind);
    REQUIRE(!one.entries.empty());
    for (const auto& e : one.entries) {
      CHECK(std::isfinite(e.value));
      CHECK(e.param == param);
    }
    CHECK(one.to_json() == evaluate(r.model, data, {kind, param}, std::vector<std::uint64_t>{3}, 1).to_json());
    if (kind == "minimal-l2") {
      CHECK(one.entries[0].attack == "minimal-l2-fgsm-search");
      CHECK(one.entries[0].metric == "mean_l2_distance");
      CHECK(one.entries[1].metric == "censored_fraction");
    } else {
      CHECK(one.entries[0].attack == kind);
      CHECK(one.entries[0].metric == "accuracy");
    }
  }
  CHECK_THROWS_AS(evaluate(r.model, data, {"blur", 1.0}, seeds, 1), ParameterError);
  CHECK_THROWS_AS(evaluate(r.model, data, {"clean", 0.0}, std::vector<std::uint64_t>{}, 1), ParameterError);
  CHECK_THROWS_AS(evaluate(r.model, data, {"quantize", 4.5}, seeds, 1), ParameterError);
}

TEST_CASE("training rejects unusable configurations") {
  auto config = tiny_config();
  const auto data = load_data(config);
  config.model = "conv:4";
  CHECK_THROWS_AS(train(config, data), ConfigError);
  config = tiny_config();
  config.num_classes = 1;
  CHECK_THROWS_AS(train(config, data), ConfigError);
}
