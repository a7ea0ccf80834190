#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "gradcheck.hpp"
#include "lsm/errors.hpp"
#include "lsm/network.hpp"

using namespace lsm;
using doctest::Approx;

namespace {

Layer<double> dense(std::size_t out, std::size_t in, std::vector<double> w, bool relu) {
  Layer<double> l;
  l.kind = LayerKind::kDense;
  l.activation = relu ? Activation::kRelu : Activation::kNone;
  l.weights = DenseTensor<double>({out, in}, std::move(w));
  l.bias = DenseTensor<double>({out});
  return l;
}

DenseTensor<double> random_batch(std::mt19937_64& rng, Shape shape) {
  DenseTensor<double> t(std::move(shape));
  std::normal_distribution<double> n;
  for (double& v : t.data()) v = n(rng);
  return t;
}

}  // namespace

TEST_CASE("dense tensor validates rank and data length") {
  CHECK_THROWS_AS(DenseTensor<float>(Shape{}), InputError);
  CHECK_THROWS_AS(DenseTensor<float>(Shape{1, 2, 3, 4, 5}), InputError);
  CHECK_THROWS_AS(DenseTensor<float>(Shape{2, 2}, std::vector<float>(3)), InputError);
  const DenseTensor<float> t({2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
  CHECK(t.stride0() == 3);
  CHECK(t.slice(1)[2] == 6.0f);
}

TEST_CASE("layer grammar round trips and rejects bad tokens") {
  const auto h = ModelSpec::parse_layers("conv:8,sconv:16,dense:32,conv:16:res");
  REQUIRE(h.size() == 4);
  CHECK(h[1].kind == LayerKind::kConv3x3Strided);
  CHECK(h[2].width == 32);
  CHECK(h[3].residual);
  CHECK(ModelSpec::format_layers(h) == "conv:8,sconv:16,dense:32,conv:16:res");
  CHECK_THROWS_AS(ModelSpec::parse_layers("pool:3"), ConfigError);
  CHECK_THROWS_AS(ModelSpec::parse_layers("conv:x"), ConfigError);
  CHECK_THROWS_AS(ModelSpec::parse_layers("conv:0"), ConfigError);
  CHECK_THROWS_AS(ModelSpec::parse_layers("conv:4:skip"), ConfigError);
}

TEST_CASE("model construction validates shapes") {
  CHECK_THROWS_AS(NetworkModel<double>({2}, {dense(2, 3, std::vector<double>(6), false)}), InputError);
  CHECK_THROWS_AS(NetworkModel<double>({2}, {dense(2, 2, std::vector<double>(4), true)}), InputError);
  auto res = dense(3, 2, std::vector<double>(6), true);
  res.residual = true;
  CHECK_THROWS_AS(NetworkModel<double>({2}, {res, dense(2, 3, std::vector<double>(6), false)}),
                  InputError);
}

TEST_CASE("make_model builds a pooled classifier with He-uniform weights") {
  ModelSpec spec;
  spec.input_shape = {1, 12, 12};
  spec.hidden = ModelSpec::parse_layers("conv:8,sconv:16,sconv:16");
  spec.num_classes = 10;
  const auto m = make_model<float>(spec, 3);
  CHECK(m.layer_count() == 4);
  CHECK(m.monitored_points() == std::vector<std::size_t>{0, 1, 2});
  CHECK(m.output_shape(1) == Shape{16, 6, 6});
  CHECK(m.output_shape(2) == Shape{16, 3, 3});
  CHECK(m.layers()[3].pool_input);
  CHECK(m.num_classes() == 10);
  for (const auto& layer : m.layers()) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.fan_in()));
    for (float v : layer.weights.data()) CHECK(std::abs(v) <= limit);
    for (float v : layer.bias.data()) CHECK(v == 0.0f);
  }
  const auto again = make_model<float>(spec, 3);
  const auto other = make_model<float>(spec, 4);
  CHECK(again.layers()[0].weights == m.layers()[0].weights);
  CHECK(!(other.layers()[0].weights == m.layers()[0].weights));
}

TEST_CASE("forward: identity dense layer with ReLU") {
  NetworkModel<double> model({2}, {dense(2, 2, {1, 0, 0, 1}, true), dense(2, 2, {1, 0, 0, 1}, false)});
  const auto trace = forward_with_trace(model, DenseTensor<double>({1, 2}, std::vector<double>{1, -1}));
  CHECK(trace.representation(0) == Matrix{{1, 0}});
}

TEST_CASE("forward: zero-weight model gives zero representations and uniform softmax") {
  ModelSpec spec;
  spec.input_shape = {1, 5, 5};
  spec.hidden = ModelSpec::parse_layers("conv:3,dense:4");
  spec.num_classes = 10;
  auto model = make_model<double>(spec, 1);
  for (auto& layer : model.layers())
    for (double& v : layer.weights.data()) v = 0.0;
  std::mt19937_64 rng(1);
  const auto trace = forward_with_trace(model, random_batch(rng, {3, 1, 5, 5}));
  for (std::size_t p = 0; p < 2; ++p) {
    const Matrix r = trace.representation(p);
    for (double v : r.data()) CHECK(v == 0.0);
  }
  for (double v : trace.logits().data()) CHECK(v == 0.0);
  const std::vector<int> labels{0, 4, 9};
  CHECK(softmax_cross_entropy(trace.logits(), labels).loss == Approx(std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("forward matches an independent step-by-step recomputation") {
  const std::vector<std::pair<Shape, std::string>> archs = {
      {{2, 5, 5}, "conv:3,sconv:4"},
      {{1, 6, 6}, "sconv:2,conv:2:res,dense:5"},
      {{7}, "dense:4,dense:4:res"},
  };
  std::mt19937_64 rng(2);
  for (bool renorm : {false, true}) {
    for (const auto& [shape, layers] : archs) {
      ModelSpec spec;
      spec.input_shape = shape;
      spec.hidden = ModelSpec::parse_layers(layers);
      spec.num_classes = 3;
      spec.renormalize_conv = renorm;
      auto model = make_model<double>(spec, 5);
      std::uniform_real_distribution<double> u(-0.3, 0.3);
      for (auto& layer : model.layers())
        for (double& v : layer.bias.data()) v = u(rng);
      Shape bs{4};
      bs.insert(bs.end(), shape.begin(), shape.end());
      const auto x = random_batch(rng, bs);
      const auto trace = forward_with_trace(model, x);
      const std::vector<double> in(x.data().begin(), x.data().end());
      const auto ref = gradcheck::oracle_forward(model, in, 4);
      for (std::size_t l = 0; l < model.layer_count(); ++l) {
        const auto got = trace.outputs[l].data();
        REQUIRE(got.size() == ref.post[l].size());
        for (std::size_t i = 0; i < got.size(); ++i)
          CHECK(got[i] == Approx(ref.post[l][i]).epsilon(1e-12).scale(1.0));
      }
    }
  }
}

TEST_CASE("forward rejects shape mismatches and empty batches") {
  NetworkModel<double> model({2}, {dense(2, 2, {1, 0, 0, 1}, true), dense(2, 2, {1, 0, 0, 1}, false)});
  CHECK_THROWS_AS(forward_with_trace(model, DenseTensor<double>({1, 3})), InputError);
  CHECK_THROWS_AS(forward_with_trace(model, DenseTensor<double>({0, 2})), InputError);
}

TEST_CASE("property: monitored ReLU representations are nonnegative") {
  ModelSpec spec;
  spec.input_shape = {1, 6, 6};
  spec.hidden = ModelSpec::parse_layers("conv:4,sconv:4,dense:6");
  spec.num_classes = 4;
  std::mt19937_64 rng(3);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto model = make_model<float>(spec, seed);
    DenseTensor<float> x({5, 1, 6, 6});
    std::normal_distribution<float> n;
    for (float& v : x.data()) v = n(rng);
    const auto trace = forward_with_trace(model, x);
    for (std::size_t p = 0; p < trace.monitored.size(); ++p) {
      const Matrix r = trace.representation(p);
      for (double v : r.data()) CHECK(v >= 0.0);
    }
  }
}

TEST_CASE("activation hook sees every monitored block") {
  ModelSpec spec;
  spec.input_shape = {4};
  spec.hidden = ModelSpec::parse_layers("dense:3,dense:3");
  spec.num_classes = 2;
  const auto model = make_model<double>(spec, 1);
  std::size_t calls = 0;
  const ActivationHook<double> zero = [&](std::size_t, std::size_t, std::span<double> v) {
    ++calls;
    for (double& x : v) x = 0.0;
  };
  std::mt19937_64 rng(4);
  const auto trace = forward_with_trace(model, random_batch(rng, {3, 4}), zero);
  CHECK(calls == 6);
  for (double v : trace.logits().data()) CHECK(v == 0.0);
}

TEST_CASE("softmax cross-entropy examples") {
  const DenseTensor<double> uniform({2, 10});
  const std::vector<int> labels{3, 7};
  const auto u = softmax_cross_entropy(uniform, labels);
  CHECK(u.loss == Approx(2.302585).epsilon(1e-6));

  DenseTensor<double> sharp({2, 3});
  sharp.data()[1] = 1e4;
  sharp.data()[3 + 2] = 1e4;
  const std::vector<int> hit{1, 2};
  CHECK(softmax_cross_entropy(sharp, hit).loss == Approx(0.0).scale(1.0).epsilon(1e-12));
  const std::vector<int> out_of_range{1, 3};
  CHECK_THROWS_AS(softmax_cross_entropy(sharp, out_of_range), InputError);
}

TEST_CASE("softmax cross-entropy gradient matches central differences") {
  std::mt19937_64 rng(5);
  auto logits = random_batch(rng, {3, 4});
  const std::vector<int> labels{2, 0, 3};
  const auto r = softmax_cross_entropy(logits, labels);
  const double h = 1e-6;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double saved = logits.data()[i];
    logits.data()[i] = saved + h;
    const double lp = softmax_cross_entropy(logits, labels).loss;
    logits.data()[i] = saved - h;
    const double lm = softmax_cross_entropy(logits, labels).loss;
    logits.data()[i] = saved;
    const double numeric = (lp - lm) / (2 * h);
    CHECK(r.grad.data()[i] == Approx(numeric).epsilon(1e-6));
  }
}

TEST_CASE("backward: zero upstream gradient gives zero parameter gradients") {
  ModelSpec spec;
  spec.input_shape = {1, 5, 5};
  spec.hidden = ModelSpec::parse_layers("conv:2,sconv:3");
  spec.num_classes = 3;
  const auto model = make_model<double>(spec, 2);
  std::mt19937_64 rng(6);
  const auto trace = forward_with_trace(model, random_batch(rng, {4, 1, 5, 5}));
  const auto g = backward(model, trace, DenseTensor<double>(trace.logits().shape()));
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    for (double v : g.weights[l].data()) CHECK(v == 0.0);
    for (double v : g.biases[l].data()) CHECK(v == 0.0);
  }
}

TEST_CASE("backward: hand-derived gradient of a quadratic toy loss") {
  // loss = 1/2 |W2 relu(W1 x)|^2 summed over the batch, so dloss/dlogits = logits.
  const std::vector<double> w1{0.5, -1.0, 0.25, 0.75, 1.0, 0.5};
  const std::vector<double> w2{1.0, -0.5, 2.0, 0.25, 0.5, -1.0};
  NetworkModel<double> model({2}, {dense(3, 2, w1, true), dense(2, 3, w2, false)});
  const DenseTensor<double> x({2, 2}, std::vector<double>{1.0, 0.5, -0.5, 2.0});
  const auto trace = forward_with_trace(model, x);
  const auto g = backward(model, trace, trace.logits());

  std::vector<double> gw1(6, 0.0), gw2(6, 0.0), gb1(3, 0.0), gb2(2, 0.0);
  for (std::size_t n = 0; n < 2; ++n) {
    const double x0 = x.data()[2 * n], x1 = x.data()[2 * n + 1];
    double h[3], z[3];
    for (std::size_t o = 0; o < 3; ++o) {
      z[o] = w1[2 * o] * x0 + w1[2 * o + 1] * x1;
      h[o] = z[o] > 0 ? z[o] : 0.0;
    }
    double y[2];
    for (std::size_t o = 0; o < 2; ++o) y[o] = w2[3 * o] * h[0] + w2[3 * o + 1] * h[1] + w2[3 * o + 2] * h[2];
    for (std::size_t o = 0; o < 2; ++o) {
      gb2[o] += y[o];
      for (std::size_t i = 0; i < 3; ++i) gw2[3 * o + i] += y[o] * h[i];
    }
    for (std::size_t i = 0; i < 3; ++i) {
      const double gh = (z[i] > 0) ? (w2[i] * y[0] + w2[3 + i] * y[1]) : 0.0;
      gb1[i] += gh;
      gw1[2 * i] += gh * x0;
      gw1[2 * i + 1] += gh * x1;
    }
  }
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(g.weights[0].data()[i] == Approx(gw1[i]).epsilon(1e-14));
    CHECK(g.weights[1].data()[i] == Approx(gw2[i]).epsilon(1e-14));
  }
  for (std::size_t i = 0; i < 3; ++i) CHECK(g.biases[0].data()[i] == Approx(gb1[i]).epsilon(1e-14));
  for (std::size_t i = 0; i < 2; ++i) CHECK(g.biases[1].data()[i] == Approx(gb2[i]).epsilon(1e-14));
}

TEST_CASE("backward routes injected monitored gradients") {
  // d <G, X_point> / d theta against central differences on a random model.
  ModelSpec spec;
  spec.input_shape = {1, 5, 5};
  spec.hidden = ModelSpec::parse_layers("conv:2,sconv:3,dense:4");
  spec.num_classes = 3;
  auto model = make_model<double>(spec, 9);
  std::mt19937_64 rng(7);
  const auto x = random_batch(rng, {3, 1, 5, 5});
  const auto trace = forward_with_trace(model, x);
  std::vector<Matrix> gs;
  for (std::size_t p = 0; p < trace.monitored.size(); ++p) {
    const auto r = trace.representation(p);
    Matrix g(r.rows(), r.cols());
    std::normal_distribution<double> n;
    for (double& v : g.data()) v = n(rng);
    gs.push_back(g);
  }
  const auto grads = backward(model, trace, DenseTensor<double>(trace.logits().shape()), gs);
  auto objective = [&]() {
    const auto t = forward_with_trace(model, x);
    double s = 0.0;
    for (std::size_t p = 0; p < gs.size(); ++p) {
      const Matrix r = t.representation(p);
      s += dot(gs[p].data(), r.data());
    }
    return s;
  };
  const double h = 1e-6;
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    auto w = model.layers()[l].weights.data();
    for (std::size_t i = 0; i < w.size(); i += 3) {
      const double saved = w[i];
      w[i] = saved + h;
      const double fp = objective();
      w[i] = saved - h;
      const double fm = objective();
      w[i] = saved;
      CHECK(grads.weights[l].data()[i] == Approx((fp - fm) / (2 * h)).epsilon(1e-5).scale(1e-6));
    }
  }
  CHECK_THROWS_AS(backward(model, trace, DenseTensor<double>(trace.logits().shape()),
                           std::span<const Matrix>(gs.data(), 1)),
                  InputError);
}

TEST_CASE("backward rejects a trace from another model") {
  ModelSpec a;
  a.input_shape = {4};
  a.hidden = ModelSpec::parse_layers("dense:3,dense:3");
  a.num_classes = 2;
  ModelSpec b = a;
  b.hidden = ModelSpec::parse_layers("dense:5,dense:3");
  const auto ma = make_model<double>(a, 1);
  const auto mb = make_model<double>(b, 1);
  std::mt19937_64 rng(8);
  const auto trace = forward_with_trace(ma, random_batch(rng, {2, 4}));
  CHECK_THROWS_AS(backward(mb, trace, trace.logits()), InputError);
  CHECK_THROWS_AS(backward(ma, trace, DenseTensor<double>({2, 5})), InputError);
}

TEST_CASE("full-loss gradients with the regularizer match central differences") {
  for (std::uint64_t t = 0; t < 6; ++t) {
    const auto rep = gradcheck::check(gradcheck::random_problem(t));
    CAPTURE(t);
    CAPTURE(rep.worst_where);
    CHECK(rep.checked > 0);
    CHECK(rep.worst_rel <= 1e-4);
  }
}

TEST_CASE("sgd momentum examples") {
  std::vector<double> p{1.0, -2.0}, v(2, 0.0);
  const std::vector<double> zero(2, 0.0);
  sgd_momentum_step<double>(p, zero, v, 0.1, 0.9, 0.0);
  CHECK(p == std::vector<double>{1.0, -2.0});

  std::vector<double> s{1.0}, vel{0.0};
  const std::vector<double> g{0.5};
  sgd_momentum_step<double>(s, g, vel, 0.1, 0.9, 0.01);
  CHECK(vel[0] == Approx(0.51).epsilon(1e-15));
  CHECK(s[0] == Approx(0.949).epsilon(1e-15));
  sgd_momentum_step<double>(s, g, vel, 0.1, 0.9, 0.01);
  CHECK(vel[0] == Approx(0.96849).epsilon(1e-14));
  CHECK(s[0] == Approx(0.852151).epsilon(1e-14));

  std::vector<double> bad(3);
  CHECK_THROWS_AS(sgd_momentum_step<double>(p, bad, v, 0.1, 0.9, 0.0), InputError);
}

TEST_CASE("property: training steps are deterministic") {
  ModelSpec spec;
  spec.input_shape = {1, 6, 6};
  spec.hidden = ModelSpec::parse_layers("conv:3,sconv:4");
  spec.num_classes = 3;
  std::mt19937_64 rng(9);
  DenseTensor<float> x({6, 1, 6, 6});
  std::normal_distribution<float> n;
  for (float& v : x.data()) v = n(rng);
  const std::vector<int> labels{0, 1, 2, 0, 1, 2};
  auto run = [&]() {
    auto model = make_model<float>(spec, 11);
    SgdState<float> state;
    for (int step = 0; step < 5; ++step) {
      const auto trace = forward_with_trace(model, x);
      const auto ce = softmax_cross_entropy(trace.logits(), labels);
      sgd_momentum_step(model, backward(model, trace, ce.grad), state, 0.1, 0.9, 0.0005);
    }
    return model;
  };
  const auto a = run(), b = run();
  for (std::size_t l = 0; l < a.layer_count(); ++l) {
    CHECK(a.layers()[l].weights == b.layers()[l].weights);
    CHECK(a.layers()[l].bias == b.layers()[l].bias);
  }
}

TEST_CASE("half squared norm and precision casts") {
  NetworkModel<double> model({2}, {dense(2, 2, {1, 2, 3, 4}, true), dense(1, 2, {0.5, 0.5}, false)});
  CHECK(half_squared_norm(model) == Approx(0.5 * (1 + 4 + 9 + 16 + 0.25 + 0.25)));
  const auto f = model.cast<float>();
  CHECK(f.layers()[0].weights.data()[3] == 4.0f);
  CHECK(f.monitored_points() == model.monitored_points());
  CHECK(f.cast<double>().layers()[1].weights == model.layers()[1].weights);
}

TEST_CASE("argmax picks the first maximum") {
  const DenseTensor<float> logits({2, 3}, std::vector<float>{0.1f, 0.5f, 0.5f, 2.0f, -1.0f, 0.0f});
  CHECK(argmax_rows(logits) == std::vector<int>{1, 0});
}
