#pragma once

// Batch similarity graphs and the spectral quantities defined on them.
//
// Every routine here works in double precision regardless of the precision
// the network trains in. All functions are pure and may be called
// concurrently.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lsm/matrix.hpp"

namespace lsm::graph {

/// Cosine similarities between the rows of a b x d representation matrix.
/// Symmetric, unit diagonal for nonzero rows.
struct SimilarityMatrix {
  Matrix values;

  std::size_t batch_size() const noexcept { return values.rows(); }
};

/// Symmetric weighted kNN graph over a batch, with its degree vector and
/// combinatorial Laplacian D - A.
struct SimilarityGraph {
  Matrix adjacency;
  std::vector<double> degree;
  Matrix laplacian;
  std::size_t k = 0;

  std::size_t batch_size() const noexcept { return adjacency.rows(); }
};

/// Eigenvalues ascending, eigenvectors as matching orthonormal columns.
struct Spectrum {
  std::vector<double> eigenvalues;
  Matrix eigenvectors;
};

/// L^m scaled by 1 / normalizer. normalizer is 1 for m = 1.
struct NormalizedPower {
  Matrix power;
  double normalizer = 1.0;
};

/// What to do with an all-zero representation row.
enum class ZeroRowPolicy {
  kThrow,           ///< raise DegenerateInputError naming the row
  kZeroSimilarity,  ///< similarity 0 with every other node (dead ReLU rows mid-training)
};

/// Edge-selection mask of the kNN union graph; 1 where an edge is kept.
/// Row-major b x b, zero diagonal, symmetric.
using EdgeSupport = std::vector<std::uint8_t>;

double cosine_similarity(std::span<const double> a, std::span<const double> b);

SimilarityMatrix build_similarity_matrix(const Matrix& representations,
                                         ZeroRowPolicy policy = ZeroRowPolicy::kThrow);

/// Edge (i,j) is kept when j is among the k largest off-diagonal entries of
/// row i, or i among those of row j. Ties prefer the smaller node index.
EdgeSupport knn_support(const SimilarityMatrix& m, std::size_t k);

/// Weighted kNN union graph. With clamp_negative, negative similarities on
/// kept edges are zeroed so the Laplacian stays positive semidefinite.
SimilarityGraph knn_adjacency(const SimilarityMatrix& m, std::size_t k,
                              bool clamp_negative = false);

/// Graph from an explicit symmetric adjacency (used for hand-built graphs).
SimilarityGraph graph_from_adjacency(Matrix adjacency, std::size_t k = 0);

Matrix laplacian(const Matrix& adjacency);
const Matrix& laplacian(const SimilarityGraph& graph);

Matrix matrix_power(const Matrix& a, int m);

/// L^m divided by its largest absolute entry when m >= 2. A zero matrix is
/// returned unscaled.
NormalizedPower laplacian_power_normalized(const Matrix& l, int m);

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Eigenvectors follow a sign convention: the first component whose
/// magnitude exceeds 1e-10 is positive. When the input has zero row sums and
/// a simple zero eigenvalue, the first eigenvector is exactly 1/sqrt(b).
Spectrum eigendecompose(const Matrix& l);

/// Graph Fourier transform F^T s.
std::vector<double> gft(const Spectrum& spectrum, std::span<const double> s);

/// Quadratic form s^T P s.
double smoothness(const Matrix& laplacian_power, std::span<const double> s);

/// (s^T L^m s / s^T s)^(1/m) on the unnormalized power.
double bandwidth_estimate(const Matrix& l, std::span<const double> s, int m);

}  // namespace lsm::graph
