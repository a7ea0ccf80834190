#include "lsm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lsm/errors.hpp"

namespace lsm::graph {

namespace {

constexpr double kSymmetryTolerance = 1e-9;
constexpr double kSignThreshold = 1e-10;
constexpr int kMaxJacobiSweeps = 100;

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

}  // namespace

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("cosine_similarity: vectors differ in length");
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na == 0.0) throw DegenerateInputError("cosine_similarity: first vector has zero norm", 0);
  if (nb == 0.0) throw DegenerateInputError("cosine_similarity: second vector has zero norm", 1);
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

SimilarityMatrix build_similarity_matrix(const Matrix& representations, ZeroRowPolicy policy) {
  const std::size_t b = representations.rows();
  if (b < 2) throw InputError("build_similarity_matrix: need at least 2 rows");

  std::vector<double> norms(b);
  for (std::size_t i = 0; i < b; ++i) {
    norms[i] = norm2(representations.row(i));
    if (norms[i] == 0.0 && policy == ZeroRowPolicy::kThrow)
      throw DegenerateInputError(
          "build_similarity_matrix: row " + std::to_string(i) + " is all zeros", i);
  }

  SimilarityMatrix m{Matrix(b, b)};
  for (std::size_t i = 0; i < b; ++i) {
    m.values(i, i) = 1.0;
    for (std::size_t j = i + 1; j < b; ++j) {
      double s = 0.0;
      if (norms[i] > 0.0 && norms[j] > 0.0)
        s = std::clamp(dot(representations.row(i), representations.row(j)) / (norms[i] * norms[j]),
                       -1.0, 1.0);
      m.values(i, j) = s;
      m.values(j, i) = s;
    }
  }
  return m;
}

EdgeSupport knn_support(const SimilarityMatrix& m, std::size_t k) {
  const std::size_t b = m.batch_size();
  if (k < 1 || k > b)
    throw ParameterError("knn: k must lie in [1, " + std::to_string(b) + "], got " +
                         std::to_string(k));

  EdgeSupport support(b * b, 0);
  const std::size_t keep = std::min(k, b - 1);
  std::vector<std::size_t> candidates;
  candidates.reserve(b);
  for (std::size_t i = 0; i < b; ++i) {
    candidates.clear();
    for (std::size_t j = 0; j < b; ++j)
      if (j != i) candidates.push_back(j);
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), [&](std::size_t x, std::size_t y) {
                        const double vx = m.values(i, x);
                        const double vy = m.values(i, y);
                        if (vx != vy) return vx > vy;
                        return x < y;
                      });
    for (std::size_t n = 0; n < keep; ++n) {
      const std::size_t j = candidates[n];
      support[i * b + j] = 1;
      support[j * b + i] = 1;
    }
  }
  return support;
}

SimilarityGraph knn_adjacency(const SimilarityMatrix& m, std::size_t k, bool clamp_negative) {
  const std::size_t b = m.batch_size();
  const EdgeSupport support = knn_support(m, k);
  Matrix a(b, b);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) {
      if (!support[i * b + j]) continue;
      const double w = m.values(i, j);
      a(i, j) = (clamp_negative && w < 0.0) ? 0.0 : w;
    }
  return graph_from_adjacency(std::move(a), k);
}

SimilarityGraph graph_from_adjacency(Matrix adjacency, std::size_t k) {
  if (adjacency.rows() != adjacency.cols())
    throw InputError("graph_from_adjacency: adjacency must be square");
  SimilarityGraph g;
  g.k = k;
  g.degree.assign(adjacency.rows(), 0.0);
  for (std::size_t i = 0; i < adjacency.rows(); ++i)
    for (double w : adjacency.row(i)) g.degree[i] += w;
  g.laplacian = laplacian(adjacency);
  g.adjacency = std::move(adjacency);
  return g;
}

Matrix laplacian(const Matrix& adjacency) {
  const std::size_t b = adjacency.rows();
  Matrix l(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    double degree = 0.0;
    for (std::size_t j = 0; j < b; ++j) {
      if (j == i) continue;
      degree += adjacency(i, j);
      l(i, j) = -adjacency(i, j);
    }
    l(i, i) = degree;
  }
  return l;
}

const Matrix& laplacian(const SimilarityGraph& graph) { return graph.laplacian; }

Matrix matrix_power(const Matrix& a, int m) {
  if (m < 1) throw ParameterError("matrix_power: exponent must be >= 1");
  Matrix p = a;
  for (int i = 1; i < m; ++i) p = matmul(p, a);
  return p;
}

NormalizedPower laplacian_power_normalized(const Matrix& l, int m) {
  if (m < 1) throw ParameterError("laplacian_power_normalized: m must be >= 1");
  NormalizedPower out{matrix_power(l, m), 1.0};
  if (m >= 2) {
    const double scale = max_abs(out.power);
    if (scale > 0.0) {
      out.normalizer = scale;
      for (double& v : out.power.data()) v /= scale;
    }
  }
  return out;
}

Spectrum eigendecompose(const Matrix& input) {
  const std::size_t n = input.rows();
  if (input.cols() != n) throw InputError("eigendecompose: matrix must be square");
  const double scale = std::max(1.0, max_abs(input));
  if (!is_symmetric(input, kSymmetryTolerance * scale))
    throw InputError("eigendecompose: matrix is not symmetric");

  Matrix a = input;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (a(i, j) + a(j, i));
  Matrix v = Matrix::identity(n);

  const double tolerance = 1e-12 * std::max(1.0, frobenius_norm(a));
  for (int sweep = 0; sweep < kMaxJacobiSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) off += a(i, j) * a(i, j);
    if (std::sqrt(off) < tolerance) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::hypot(theta, 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });

  Spectrum spectrum{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    spectrum.eigenvalues[c] = a(order[c], order[c]);
    double sign = 1.0;
    for (std::size_t r = 0; r < n; ++r) {
      if (std::abs(v(r, order[c])) > kSignThreshold) {
        sign = v(r, order[c]) < 0.0 ? -1.0 : 1.0;
        break;
      }
    }
    for (std::size_t r = 0; r < n; ++r) spectrum.eigenvectors(r, c) = sign * v(r, order[c]);
  }

  // Laplacian case: pin the nullspace vector to the exact constant vector.
  if (n >= 2) {
    bool zero_row_sums = true;
    for (std::size_t i = 0; i < n && zero_row_sums; ++i) {
      double sum = 0.0;
      for (double x : input.row(i)) sum += x;
      zero_row_sums = std::abs(sum) <= kSymmetryTolerance * scale;
    }
    const double eig_tol = 1e-8 * scale;
    if (zero_row_sums && std::abs(spectrum.eigenvalues[0]) <= eig_tol &&
        spectrum.eigenvalues[1] > eig_tol) {
      const double c = 1.0 / std::sqrt(static_cast<double>(n));
      for (std::size_t r = 0; r < n; ++r) spectrum.eigenvectors(r, 0) = c;
    }
  }
  return spectrum;
}

std::vector<double> gft(const Spectrum& spectrum, std::span<const double> s) {
  const std::size_t n = spectrum.eigenvectors.rows();
  if (s.size() != n) throw InputError("gft: signal length does not match the graph");
  std::vector<double> hat(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const auto frow = spectrum.eigenvectors.row(r);
    for (std::size_t c = 0; c < n; ++c) hat[c] += frow[c] * s[r];
  }
  return hat;
}

double smoothness(const Matrix& laplacian_power, std::span<const double> s) {
  if (laplacian_power.rows() != s.size() || laplacian_power.cols() != s.size())
    throw InputError("smoothness: signal length does not match the graph");
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == 0.0) continue;
    total += s[i] * dot(laplacian_power.row(i), s);
  }
  return total;
}

double bandwidth_estimate(const Matrix& l, std::span<const double> s, int m) {
  if (m < 1) throw ParameterError("bandwidth_estimate: m must be >= 1");
  if (l.rows() != s.size() || l.cols() != s.size())
    throw InputError("bandwidth_estimate: signal length does not match the graph");
  const double energy = dot(s, s);
  if (energy == 0.0) throw DegenerateInputError("bandwidth_estimate: zero signal", 0);

  std::vector<double> v(s.begin(), s.end());
  for (int i = 0; i < m; ++i) v = matvec(l, v);
  const double ratio = std::max(0.0, dot(s, v) / energy);
  return std::pow(ratio, 1.0 / static_cast<double>(m));
}

}  // namespace lsm::graph
