#include "lsm/regularizers.hpp"

#include <cmath>
#include <string>

#include "lsm/errors.hpp"

namespace lsm {

double RegularizerConfig::effective_coefficient() const {
  return std::pow(gamma, static_cast<double>(power_m));
}

void RegularizerConfig::validate() const {
  if (!(gamma >= 0.0)) throw ConfigError("regularizer: gamma must be >= 0");
  if (power_m < 1) throw ConfigError("regularizer: power_m must be >= 1");
  if (!(beta >= 0.0)) throw ConfigError("regularizer: beta must be >= 0");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("regularizer: alpha must lie in (0, 1]");
}

namespace {

struct PointState {
  std::vector<double> norms;
  Matrix unit;                 // b x d unit rows (zero rows stay zero)
  graph::EdgeSupport support;  // effective support
  std::vector<Matrix> powers;  // L^0 .. L^m
  double normalizer = 1.0;
  double sum = 0.0;
};

PointState evaluate_point(const Matrix& x, const Matrix& same_class, const RegularizerConfig& cfg,
                          const FrozenGraph* frozen) {
  const std::size_t b = x.rows(), d = x.cols();
  const int m = cfg.power_m;
  PointState st;
  st.norms.resize(b);
  st.unit = Matrix(b, d);
  for (std::size_t i = 0; i < b; ++i) {
    st.norms[i] = std::sqrt(dot(x.row(i), x.row(i)));
    if (st.norms[i] == 0.0) continue;
    auto u = st.unit.row(i);
    auto xr = x.row(i);
    for (std::size_t j = 0; j < d; ++j) u[j] = xr[j] / st.norms[i];
  }

  graph::SimilarityMatrix sim{Matrix(b, b)};
  for (std::size_t i = 0; i < b; ++i) {
    sim.values(i, i) = 1.0;
    for (std::size_t j = i + 1; j < b; ++j) {
      const double s = dot(st.unit.row(i), st.unit.row(j));
      sim.values(i, j) = s;
      sim.values(j, i) = s;
    }
  }

  if (frozen) {
    if (frozen->support.size() != b * b)
      throw InputError("smoothness_regularizer: frozen support does not match the batch");
    st.support = frozen->support;
  } else {
    st.support = graph::knn_support(sim, cfg.neighbors(b));
    if (cfg.clamp_negative_similarities)
      for (std::size_t i = 0; i < b * b; ++i)
        if (st.support[i] && sim.values.data()[i] < 0.0) st.support[i] = 0;
  }

  Matrix a(b, b);
  for (std::size_t i = 0; i < b * b; ++i)
    if (st.support[i]) a.data()[i] = sim.values.data()[i];
  const Matrix l = graph::laplacian(a);

  st.powers.push_back(Matrix::identity(b));
  for (int r = 1; r <= m; ++r) st.powers.push_back(r == 1 ? l : matmul(st.powers.back(), l));

  if (frozen) {
    st.normalizer = frozen->normalizer;
  } else if (m >= 2) {
    const double scale = max_abs(st.powers.back());
    st.normalizer = scale > 0.0 ? scale : 1.0;
  }

  // sum_c s_c^T P s_c = <P, Q> with Q the same-class indicator matrix.
  double total = 0.0;
  const auto pd = st.powers.back().data();
  const auto qd = same_class.data();
  for (std::size_t i = 0; i < pd.size(); ++i) total += pd[i] * qd[i];
  st.sum = total / st.normalizer;
  return st;
}

// d sum / d X for one point, scaled by `weight`.
Matrix point_gradient(const Matrix& x, const PointState& st, const Matrix& same_class,
                      int m, double weight) {
  const std::size_t b = x.rows(), d = x.cols();

  // d <Q, L^m> / dL = sum_r L^(m-1-r) Q L^r
  Matrix gl(b, b);
  for (int r = 0; r < m; ++r)
    gl = gl + matmul(matmul(st.powers[static_cast<std::size_t>(m - 1 - r)], same_class),
                     st.powers[static_cast<std::size_t>(r)]);
  const double scale = weight / st.normalizer;

  // L = diag(A 1) - A  =>  dA[i,j] = dL[i,i] - dL[i,j]; restricted to the support.
  Matrix gm(b, b);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j)
      if (st.support[i * b + j]) gm(i, j) = scale * (gl(i, i) - gl(i, j));

  // M = U U^T  =>  dU = (G + G^T) U
  Matrix gsym(b, b);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) gsym(i, j) = gm(i, j) + gm(j, i);
  const Matrix gu = matmul(gsym, st.unit);

  // u = x / |x|  =>  dx = (du - (du . u) u) / |x|
  Matrix gx(b, d);
  for (std::size_t i = 0; i < b; ++i) {
    if (st.norms[i] == 0.0) continue;
    const auto u = st.unit.row(i);
    const auto g = gu.row(i);
    const double proj = dot(g, u);
    auto out = gx.row(i);
    for (std::size_t j = 0; j < d; ++j) out[j] = (g[j] - proj * u[j]) / st.norms[i];
  }
  return gx;
}

double sign_or_zero(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

RegularizerResult smoothness_regularizer(std::span<const Matrix> representations,
                                         const LabelSignalSet& signals,
                                         const RegularizerConfig& cfg, bool with_gradients,
                                         const std::vector<FrozenGraph>* frozen) {
  cfg.validate();
  const std::size_t points = representations.size();
  if (points < 2)
    throw ConfigError("smoothness_regularizer: need at least two monitored points, got " +
                      std::to_string(points));
  if (frozen && frozen->size() != points)
    throw InputError("smoothness_regularizer: frozen state does not match the monitored points");
  const std::size_t b = signals.batch_size;
  for (const auto& x : representations)
    if (x.rows() != b)
      throw InputError("smoothness_regularizer: representation rows differ from the batch size");
  if (b < 2) throw InputError("smoothness_regularizer: need a batch of at least 2");

  const Matrix same_class = signals.same_class_matrix();

  std::vector<PointState> states;
  RegularizerResult result;
  for (std::size_t p = 0; p < points; ++p) {
    states.push_back(evaluate_point(representations[p], same_class, cfg,
                                    frozen ? &(*frozen)[p] : nullptr));
    result.layer_sums.push_back(states.back().sum);
    result.frozen.push_back({states.back().support, states.back().normalizer});
  }

  std::vector<double> signed_gaps;
  for (std::size_t p = 1; p < points; ++p) {
    signed_gaps.push_back(result.layer_sums[p] - result.layer_sums[p - 1]);
    result.gaps.push_back(smoothness_gap(result.layer_sums[p - 1], result.layer_sums[p]));
  }
  result.delta = delta_total(result.gaps);
  const double coefficient = cfg.effective_coefficient();
  result.value = coefficient * result.delta;

  if (!with_gradients) return result;

  // d value / d sum_p
  const double per_gap = coefficient / static_cast<double>(signed_gaps.size());
  std::vector<double> dsum(points, 0.0);
  for (std::size_t g = 0; g < signed_gaps.size(); ++g) {
    const double s = sign_or_zero(signed_gaps[g]) * per_gap;
    dsum[g + 1] += s;
    dsum[g] -= s;
  }
  for (std::size_t p = 0; p < points; ++p) {
    const Matrix& x = representations[p];
    if (dsum[p] == 0.0) {
      result.grads.emplace_back(x.rows(), x.cols());
      continue;
    }
    result.grads.push_back(point_gradient(x, states[p], same_class, cfg.power_m, dsum[p]));
  }
  return result;
}

template <typename T>
void parseval_retraction(std::span<T> weights, std::size_t rows, std::size_t cols, double beta) {
  if (weights.size() != rows * cols)
    throw InputError("parseval_retraction: view size does not match rows x cols");
  Matrix w(rows, cols);
  for (std::size_t i = 0; i < weights.size(); ++i) w.data()[i] = static_cast<double>(weights[i]);
  const Matrix wwtw = matmul(matmul(w, transpose(w)), w);
  for (std::size_t i = 0; i < weights.size(); ++i)
    weights[i] = static_cast<T>((1.0 + beta) * w.data()[i] - beta * wwtw.data()[i]);
}

template <typename T>
void parseval_retraction(NetworkModel<T>& model, double beta) {
  for (auto& layer : model.layers())
    parseval_retraction<T>(layer.weights.data(), layer.rows(), layer.fan_in(), beta);
}

double conv_renormalization_factor(std::size_t kernel_size) {
  return 1.0 / std::sqrt(2.0 * static_cast<double>(kernel_size) + 1.0);
}

template <typename T>
DenseTensor<T> conv_renormalization(const DenseTensor<T>& kernel, std::size_t kernel_size) {
  DenseTensor<T> out = kernel;
  const double f = conv_renormalization_factor(kernel_size);
  for (T& v : out.data()) v = static_cast<T>(static_cast<double>(v) * f);
  return out;
}

template <typename T>
DenseTensor<T> convex_combine(std::span<const DenseTensor<T>> branches,
                              std::span<const double> alphas) {
  if (branches.empty()) throw InputError("convex_combine: no branches");
  std::vector<double> weights(alphas.begin(), alphas.end());
  if (weights.empty()) weights.assign(branches.size(), 1.0 / static_cast<double>(branches.size()));
  if (weights.size() != branches.size())
    throw InputError("convex_combine: one alpha per branch required");
  DenseTensor<T> out(branches[0].shape());
  for (std::size_t b = 0; b < branches.size(); ++b) {
    if (branches[b].shape() != out.shape())
      throw InputError("convex_combine: branch " + std::to_string(b) + " shape " +
                       shape_string(branches[b].shape()) + " differs from " +
                       shape_string(out.shape()));
    const auto src = branches[b].data();
    auto dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i)
      dst[i] = static_cast<T>(static_cast<double>(dst[i]) + weights[b] * static_cast<double>(src[i]));
  }
  return out;
}

#define LSM_INSTANTIATE_REGULARIZERS(T)                                                     \
  template void parseval_retraction<T>(std::span<T>, std::size_t, std::size_t, double);     \
  template void parseval_retraction<T>(NetworkModel<T>&, double);                           \
  template DenseTensor<T> conv_renormalization<T>(const DenseTensor<T>&, std::size_t);      \
  template DenseTensor<T> convex_combine<T>(std::span<const DenseTensor<T>>, std::span<const double>);

LSM_INSTANTIATE_REGULARIZERS(float)
LSM_INSTANTIATE_REGULARIZERS(double)

}  // namespace lsm
