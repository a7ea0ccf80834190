#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "gradcheck.hpp"
#include "lsm/errors.hpp"
#include "lsm/label_signals.hpp"
#include "lsm/regularizers.hpp"
#include "oracles.hpp"

using namespace lsm;
using doctest::Approx;

namespace {

std::vector<Matrix> random_points(std::mt19937_64& rng, std::size_t b, std::vector<std::size_t> dims,
                                  bool nonnegative) {
  std::vector<Matrix> out;
  for (std::size_t d : dims) {
    auto m = oracle::random_matrix(rng, b, d);
    if (nonnegative)
      for (auto& row : m)
        for (double& v : row) v = std::abs(v);
    out.push_back(oracle::to(m));
  }
  return out;
}

std::vector<int> balanced_labels(std::mt19937_64& rng, std::size_t b, int classes) {
  std::vector<int> labels(b);
  for (std::size_t i = 0; i < b; ++i) labels[i] = static_cast<int>(i % static_cast<std::size_t>(classes));
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

// Independent value: cosine graph, kNN union, sign clamp, L^m with max-abs scaling.
double oracle_value(const std::vector<Matrix>& reps, const std::vector<int>& labels,
                    const RegularizerConfig& cfg) {
  std::vector<double> sums;
  for (const auto& x : reps) {
    const auto sim = oracle::similarity(oracle::from(x));
    const std::size_t b = sim.size();
    const auto mask = oracle::knn_mask(sim, cfg.k == 0 ? b : cfg.k);
    auto a = oracle::zeros(b, b);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < b; ++j)
        if (i != j && mask[i][j] != 0.0)
          a[i][j] = cfg.clamp_negative_similarities ? std::max(sim[i][j], 0.0) : sim[i][j];
    auto p = oracle::power(oracle::laplacian(a), cfg.power_m);
    const double top = cfg.power_m >= 2 ? oracle::max_abs(p) : 1.0;
    double s = 0.0;
    for (int c : std::set<int>(labels.begin(), labels.end())) {
      std::vector<double> sig(b);
      for (std::size_t i = 0; i < b; ++i) sig[i] = labels[i] == c ? 1.0 : 0.0;
      s += oracle::quad(p, sig);
    }
    sums.push_back(s / (top > 0.0 ? top : 1.0));
  }
  double delta = 0.0;
  for (std::size_t i = 1; i < sums.size(); ++i) delta += std::abs(sums[i] - sums[i - 1]);
  delta /= static_cast<double>(sums.size() - 1);
  return std::pow(cfg.gamma, cfg.power_m) * delta;
}

double frobenius_gap(const Matrix& w) {
  const Matrix g = matmul(transpose(w), w);
  double s = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) {
      const double d = g(i, j) - (i == j ? 1.0 : 0.0);
      s += d * d;
    }
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("regularizer config validation") {
  RegularizerConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.effective_coefficient() == Approx(1e-4));
  cfg.gamma = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.power_m = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.beta = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  CHECK(cfg.neighbors(7) == 7);
  cfg.k = 3;
  CHECK(cfg.neighbors(7) == 3);
}

TEST_CASE("regularizer: two-point brute force on three examples") {
  const std::vector<int> labels{0, 0, 1};
  const auto signals = make_label_signals(labels, 2);
  const std::vector<Matrix> reps{Matrix{{1, 0}, {1, 0}, {0, 1}}, Matrix{{1, 0}, {0, 1}, {1, 0}}};
  RegularizerConfig cfg;
  cfg.gamma = 0.5;
  cfg.power_m = 1;
  const auto r = smoothness_regularizer(reps, signals, cfg);
  REQUIRE(r.layer_sums.size() == 2);
  CHECK(r.layer_sums[0] == Approx(0.0).scale(1.0));
  CHECK(r.layer_sums[1] == Approx(2.0));
  CHECK(r.gaps == std::vector<double>{2.0});
  CHECK(r.delta == Approx(2.0));
  CHECK(r.value == Approx(1.0));
  REQUIRE(r.grads.size() == 2);
  CHECK(r.grads[0].rows() == 3);
  CHECK(r.grads[0].cols() == 2);
}

TEST_CASE("regularizer: identical representations give zero") {
  std::mt19937_64 rng(1);
  const auto x = random_points(rng, 6, {4}, true)[0];
  const auto labels = balanced_labels(rng, 6, 3);
  RegularizerConfig cfg;
  cfg.gamma = 0.9;
  for (int m : {1, 2, 3}) {
    cfg.power_m = m;
    const auto r = smoothness_regularizer(std::vector<Matrix>{x, x, x}, make_label_signals(labels, 3), cfg);
    CHECK(r.delta == 0.0);
    CHECK(r.value == 0.0);
    for (const auto& g : r.grads)
      for (double v : g.data()) CHECK(v == 0.0);
  }
}

TEST_CASE("regularizer value matches an independent recomputation") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t b = 4 + rng() % 9;
    const auto reps = random_points(rng, b, {3 + rng() % 4, 2 + rng() % 5, 5}, trial % 2 == 0);
    const auto labels = balanced_labels(rng, b, 2 + static_cast<int>(rng() % 3));
    RegularizerConfig cfg;
    cfg.gamma = 0.7;
    cfg.power_m = 1 + trial % 3;
    cfg.k = rng() % (b + 1);
    cfg.clamp_negative_similarities = trial % 4 != 1;
    const auto r = smoothness_regularizer(reps, make_label_signals(labels, 5), cfg, false);
    CAPTURE(trial);
    CHECK(r.value == Approx(oracle_value(reps, labels, cfg)).epsilon(1e-10).scale(1e-12));
    CHECK(r.grads.empty());
    CHECK(r.gaps.size() == 2);
  }
}

TEST_CASE("regularizer gradient matches central differences with the support frozen") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t b = 5 + rng() % 4;
    auto reps = random_points(rng, b, {4, 3, 5}, trial % 2 == 0);
    const auto labels = balanced_labels(rng, b, 3);
    const auto signals = make_label_signals(labels, 3);
    RegularizerConfig cfg;
    cfg.gamma = 0.8;
    cfg.power_m = 1 + trial % 3;
    cfg.k = 1 + rng() % b;
    const auto r = smoothness_regularizer(reps, signals, cfg);
    const double h = 1e-6;
    for (std::size_t p = 0; p < reps.size(); ++p) {
      for (std::size_t i = 0; i < reps[p].data().size(); ++i) {
        double& v = reps[p].data()[i];
        const double saved = v;
        auto eval = [&]() {
          std::vector<oracle::Mat> ms;
          for (const auto& m : reps) ms.push_back(oracle::from(m));
          return gradcheck::oracle_regularizer(ms, labels, cfg, r.frozen);
        };
        v = saved + h;
        const double fp = eval();
        v = saved - h;
        const double fm = eval();
        v = saved;
        const double numeric = (fp - fm) / (2 * h);
        CAPTURE(trial);
        CAPTURE(p);
        const double analytic = r.grads[p].data()[i];
        CHECK(std::abs(analytic - numeric) <= 1e-6 * std::max(std::abs(analytic), std::abs(numeric)) + 1e-8);
      }
    }
  }
}

TEST_CASE("regularizer: frozen state reproduces the value at the same point") {
  std::mt19937_64 rng(4);
  const auto reps = random_points(rng, 8, {4, 4}, true);
  const auto labels = balanced_labels(rng, 8, 2);
  RegularizerConfig cfg;
  cfg.gamma = 0.5;
  cfg.power_m = 2;
  cfg.k = 3;
  const auto signals = make_label_signals(labels, 2);
  const auto r = smoothness_regularizer(reps, signals, cfg);
  const auto again = smoothness_regularizer(reps, signals, cfg, true, &r.frozen);
  CHECK(again.value == r.value);
  std::vector<FrozenGraph> short_state(r.frozen.begin(), r.frozen.begin() + 1);
  CHECK_THROWS_AS(smoothness_regularizer(reps, signals, cfg, true, &short_state), InputError);
}

TEST_CASE("regularizer: zero gamma is neutral") {
  std::mt19937_64 rng(5);
  const auto reps = random_points(rng, 6, {3, 5}, false);
  const auto labels = balanced_labels(rng, 6, 2);
  RegularizerConfig cfg;
  cfg.gamma = 0.0;
  const auto r = smoothness_regularizer(reps, make_label_signals(labels, 2), cfg);
  CHECK(r.value == 0.0);
  for (const auto& g : r.grads)
    for (double v : g.data()) CHECK(v == 0.0);
}

TEST_CASE("property: regularizer is invariant to batch permutation") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t b = 8;
    const auto reps = random_points(rng, b, {5, 4, 6}, true);
    const auto labels = balanced_labels(rng, b, 3);
    std::vector<std::size_t> perm(b);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Matrix> preps;
    for (const auto& x : reps) {
      Matrix y(x.rows(), x.cols());
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) y(i, j) = x(perm[i], j);
      preps.push_back(y);
    }
    std::vector<int> plabels(b);
    for (std::size_t i = 0; i < b; ++i) plabels[i] = labels[perm[i]];
    RegularizerConfig cfg;
    cfg.gamma = 0.6;
    cfg.power_m = 1 + trial % 3;
    cfg.k = 3;
    const auto a = smoothness_regularizer(reps, make_label_signals(labels, 3), cfg, false);
    const auto c = smoothness_regularizer(preps, make_label_signals(plabels, 3), cfg, false);
    CHECK(c.value == Approx(a.value).epsilon(1e-10).scale(1e-12));
  }
}

TEST_CASE("regularizer input errors") {
  const std::vector<int> labels{0, 1, 0};
  const auto signals = make_label_signals(labels, 2);
  RegularizerConfig cfg;
  const Matrix x{{1, 0}, {0, 1}, {1, 1}};
  CHECK_THROWS_AS(smoothness_regularizer(std::vector<Matrix>{x}, signals, cfg), ConfigError);
  CHECK_THROWS_AS(smoothness_regularizer(std::vector<Matrix>{x, Matrix{{1, 0}, {0, 1}}}, signals, cfg),
                  InputError);
  const std::vector<int> one{0};
  const Matrix single{{1, 0}};
  CHECK_THROWS_AS(
      smoothness_regularizer(std::vector<Matrix>{single, single}, make_label_signals(one, 2), cfg),
      InputError);
  cfg.power_m = 0;
  CHECK_THROWS_AS(smoothness_regularizer(std::vector<Matrix>{x, x}, signals, cfg), ConfigError);
}

TEST_CASE("parseval retraction examples") {
  std::vector<double> scalar{2.0};
  parseval_retraction<double>(scalar, 1, 1, 0.01);
  CHECK(scalar[0] == Approx(1.94).epsilon(1e-15));

  const double c = std::cos(0.3), s = std::sin(0.3);
  std::vector<double> rot{c, -s, s, c};
  const auto before = rot;
  parseval_retraction<double>(rot, 2, 2, 0.01);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(rot[i] - before[i]) <= 1e-12);

  std::vector<double> rows{1, 0, 0, 0, 0, 1};
  parseval_retraction<double>(rows, 2, 3, 0.5);
  CHECK(rows == std::vector<double>{1, 0, 0, 0, 0, 1});

  std::vector<float> any{1.0f, 2.0f};
  parseval_retraction<float>(any, 1, 2, 0.0);
  CHECK(any == std::vector<float>{1.0f, 2.0f});
  CHECK_THROWS_AS(parseval_retraction<float>(any, 2, 2, 0.1), InputError);
}

TEST_CASE("property: parseval retraction moves towards orthonormality") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t r = 2 + rng() % 4, c = 2 + rng() % 4;
    Matrix w = oracle::to(oracle::random_matrix(rng, r, c, 1.0 / std::sqrt(static_cast<double>(c))));
    double prev = frobenius_gap(w);
    for (int it = 0; it < 20; ++it) {
      parseval_retraction<double>(w.data(), r, c, 0.01);
      const double now = frobenius_gap(w);
      CHECK(now < prev);
      prev = now;
    }
  }
}

TEST_CASE("parseval retraction over a model reshapes conv kernels") {
  ModelSpec spec;
  spec.input_shape = {2, 4, 4};
  spec.hidden = ModelSpec::parse_layers("conv:3,dense:4");
  spec.num_classes = 2;
  auto model = make_model<double>(spec, 3);
  const auto copy = model;
  parseval_retraction(model, 0.02);
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    const auto& layer = copy.layers()[l];
    std::vector<double> w(layer.weights.data().begin(), layer.weights.data().end());
    parseval_retraction<double>(w, layer.rows(), layer.fan_in(), 0.02);
    const auto got = model.layers()[l].weights.data();
    CHECK(std::equal(w.begin(), w.end(), got.begin()));
    CHECK(model.layers()[l].bias == layer.bias);
  }
}

TEST_CASE("convolution renormalization") {
  CHECK(conv_renormalization_factor(3) == Approx(1.0 / std::sqrt(7.0)).epsilon(1e-15));
  CHECK(conv_renormalization_factor(1) == Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
  const DenseTensor<double> k({1, 1, 3, 3}, std::vector<double>(9, std::sqrt(7.0)));
  const auto scaled = conv_renormalization(k, 3);
  for (double v : scaled.data()) CHECK(v == Approx(1.0).epsilon(1e-15));
  const DenseTensor<float> zero({2, 1, 3, 3});
  const auto still_zero = conv_renormalization(zero, 3);
  for (float v : still_zero.data()) CHECK(v == 0.0f);
}

TEST_CASE("convex combination of branches") {
  const DenseTensor<double> a({2}, std::vector<double>{1.0, 2.0});
  const DenseTensor<double> b({2}, std::vector<double>{3.0, -2.0});
  const std::vector<DenseTensor<double>> both{a, b};
  CHECK(convex_combine<double>(both).data()[0] == Approx(2.0));
  CHECK(convex_combine<double>(both).data()[1] == Approx(0.0).scale(1.0));
  const std::vector<double> alphas{0.25, 0.75};
  const auto mixed = convex_combine<double>(both, alphas);
  CHECK(mixed.data()[0] == Approx(2.5));
  CHECK(mixed.data()[1] == Approx(-1.0));
  const std::vector<DenseTensor<double>> single{a};
  CHECK(convex_combine<double>(single) == a);
  CHECK_THROWS_AS(convex_combine<double>(std::vector<DenseTensor<double>>{}), InputError);
  const std::vector<double> three{0.2, 0.3, 0.5};
  CHECK_THROWS_AS(convex_combine<double>(both, three), InputError);
  const std::vector<DenseTensor<double>> mismatch{a, DenseTensor<double>({3})};
  CHECK_THROWS_AS(convex_combine<double>(mismatch), InputError);
}
