#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "cutcluster/types.hpp"

namespace cutcluster {

/// Node-attributed undirected graph. The adjacency is stored as given by the
/// loader; the Laplacian builder checks symmetry and binarity.
struct AttributedGraph {
  int n_nodes = 0;
  SparseMatrix adjacency;
  Matrix features;
  std::optional<Labels> labels;
  std::optional<int> n_classes;

  int n_features() const { return static_cast<int>(features.cols()); }

  /// Number of undirected edges, self-loops counted once.
  long long n_edges() const {
    long long off = 0;
    long long loops = 0;
    for (int i = 0; i < adjacency.outerSize(); ++i) {
      for (SparseMatrix::InnerIterator it(adjacency, i); it; ++it) {
        if (it.col() == i) {
          ++loops;
        } else {
          ++off;
        }
      }
    }
    return off / 2 + loops;
  }
};

/// Builds a symmetric binary adjacency from an undirected edge list.
/// Duplicates collapse to a single entry.
inline SparseMatrix adjacency_from_edges(int n_nodes,
                                         const std::vector<std::pair<int, int>>& edges) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(edges.size() * 2);
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= n_nodes || v >= n_nodes) {
      throw Error(ErrorKind::out_of_range,
                  "edge (" + std::to_string(u) + ", " + std::to_string(v) +
                      ") outside [0, " + std::to_string(n_nodes) + ")");
    }
    triplets.emplace_back(u, v, 1.0);
    if (u != v) triplets.emplace_back(v, u, 1.0);
  }
  SparseMatrix a(n_nodes, n_nodes);
  // Duplicate triplets are combined by keeping a single 1.
  a.setFromTriplets(triplets.begin(), triplets.end(),
                    [](double, double) { return 1.0; });
  a.makeCompressed();
  return a;
}

inline void validate_labels(const AttributedGraph& g) {
  if (!g.labels) return;
  if (static_cast<int>(g.labels->size()) != g.n_nodes) {
    throw Error(ErrorKind::shape_mismatch, "labels length " +
                                               std::to_string(g.labels->size()) +
                                               " != n_nodes " + std::to_string(g.n_nodes));
  }
  const int k = g.n_classes.value_or(0);
  for (std::size_t i = 0; i < g.labels->size(); ++i) {
    const int y = (*g.labels)[i];
    if (y < 0 || (k > 0 && y >= k)) {
      throw Error(ErrorKind::out_of_range,
                  "label " + std::to_string(y) + " of node " + std::to_string(i) +
                      " outside [0, " + std::to_string(k) + ")");
    }
  }
}

/// I - D^{-1/2} A D^{-1/2}. Isolated nodes get D^{-1/2} = 0, which leaves
/// their row equal to the identity row.
struct StructureLaplacian {
  SparseMatrix matrix;
  Vector degrees;

  Eigen::Index size() const { return matrix.rows(); }
  Matrix apply(const Matrix& h) const { return matrix * h; }
};

inline StructureLaplacian build_normalized_laplacian(const AttributedGraph& g) {
  const SparseMatrix& a = g.adjacency;
  const int n = g.n_nodes;
  if (a.rows() != n || a.cols() != n) {
    throw Error(ErrorKind::shape_mismatch, "adjacency is " + std::to_string(a.rows()) +
                                               "x" + std::to_string(a.cols()) +
                                               ", expected " + std::to_string(n) + "x" +
                                               std::to_string(n));
  }

  Vector deg = Vector::Zero(n);
  for (int i = 0; i < a.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
      const double v = it.value();
      if (v != 0.0 && v != 1.0) {
        throw Error(ErrorKind::non_binary, "adjacency entry (" + std::to_string(i) + ", " +
                                               std::to_string(it.col()) + ") = " +
                                               std::to_string(v));
      }
      if (a.coeff(it.col(), i) != v) {
        throw Error(ErrorKind::non_symmetric,
                    "adjacency not symmetric at (" + std::to_string(i) + ", " +
                        std::to_string(it.col()) + ")");
      }
      deg[i] += v;
    }
  }

  Vector inv_sqrt(n);
  for (int i = 0; i < n; ++i) inv_sqrt[i] = deg[i] > 0.0 ? 1.0 / std::sqrt(deg[i]) : 0.0;

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(a.nonZeros()) + static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) triplets.emplace_back(i, i, 1.0);
  for (int i = 0; i < a.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
      if (it.value() == 0.0) continue;
      const int j = static_cast<int>(it.col());
      triplets.emplace_back(i, j, -inv_sqrt[i] * it.value() * inv_sqrt[j]);
    }
  }
  StructureLaplacian lap;
  lap.matrix.resize(n, n);
  lap.matrix.setFromTriplets(triplets.begin(), triplets.end());
  lap.matrix.makeCompressed();
  lap.degrees = std::move(deg);
  return lap;
}

/// Laplacian of the cosine attribute graph S[i,j] = (1 + cos(x_i, x_j)) / 2,
/// held as S = (1 1^T + U U^T) / 2 with U the row-normalized features.
/// Nothing of size N x N is ever allocated.
struct ImplicitAttributeLaplacian {
  Matrix unit_features;
  Vector inv_sqrt_rowsum;

  Eigen::Index size() const { return unit_features.rows(); }

  double similarity(Eigen::Index i, Eigen::Index j) const {
    return 0.5 * (1.0 + unit_features.row(i).dot(unit_features.row(j)));
  }

  Vector rowsums() const { return inv_sqrt_rowsum.array().square().inverse().matrix(); }

  /// S * G computed through the factorization in O(N d F).
  Matrix apply_similarity(const Matrix& g) const {
    const Eigen::RowVectorXd col_sums = g.colwise().sum();
    Matrix out = unit_features * (unit_features.transpose() * g);
    out.rowwise() += col_sums;
    out *= 0.5;
    return out;
  }

  /// L_S * H = H - D^{-1/2} S D^{-1/2} H.
  Matrix apply(const Matrix& h) const {
    const Matrix scaled = inv_sqrt_rowsum.asDiagonal() * h;
    return h - inv_sqrt_rowsum.asDiagonal() * apply_similarity(scaled);
  }
};

inline ImplicitAttributeLaplacian build_attribute_laplacian(const AttributedGraph& g) {
  const Matrix& x = g.features;
  const Eigen::Index n = x.rows();
  if (n != g.n_nodes) {
    throw Error(ErrorKind::shape_mismatch, "features have " + std::to_string(n) +
                                               " rows, expected " +
                                               std::to_string(g.n_nodes));
  }
  ImplicitAttributeLaplacian lap;
  lap.unit_features.resize(n, x.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!x.row(i).allFinite()) {
      throw Error(ErrorKind::non_finite,
                  "feature row of node " + std::to_string(i) + " is not finite");
    }
    const double norm = x.row(i).norm();
    if (norm > 0.0) {
      lap.unit_features.row(i) = x.row(i) / norm;
    } else {
      lap.unit_features.row(i).setZero();
    }
  }
  const Vector s = lap.unit_features.colwise().sum().transpose();
  const Vector rowsum =
      (0.5 * static_cast<double>(n) + 0.5 * (lap.unit_features * s).array()).matrix();
  // S[i,j] >= 0 and either S[i,i] = 1 or the row is all 1/2, so rowsum > 0
  // up to rounding.
  lap.inv_sqrt_rowsum = rowsum.array().max(1e-300).rsqrt().matrix();
  return lap;
}

struct QuadraticForm {
  double value = 0.0;
  Matrix grad;
};

/// Tr(H^T L H) and its gradient 2 L H.
inline QuadraticForm structure_quadratic(const StructureLaplacian& lap, const Matrix& h) {
  require_rows(h, lap.size(), "H");
  QuadraticForm q;
  const Matrix lh = lap.apply(h);
  q.value = h.cwiseProduct(lh).sum();
  q.grad = 2.0 * lh;
  return q;
}

inline QuadraticForm attribute_quadratic(const ImplicitAttributeLaplacian& lap,
                                         const Matrix& h) {
  require_rows(h, lap.size(), "H");
  QuadraticForm q;
  const Matrix lh = lap.apply(h);
  q.value = h.cwiseProduct(lh).sum();
  q.grad = 2.0 * lh;
  return q;
}

/// Exact normalized cut (1/2) sum_k cut(V_k) / vol(V_k). Only used to check
/// the trace relaxation; training never calls it.
inline double normalized_cut(const AttributedGraph& g, const Labels& partition) {
  if (static_cast<int>(partition.size()) != g.n_nodes) {
    throw Error(ErrorKind::shape_mismatch, "partition length " +
                                               std::to_string(partition.size()) +
                                               " != n_nodes " + std::to_string(g.n_nodes));
  }
  int k = 0;
  for (int b : partition) {
    if (b < 0) throw Error(ErrorKind::invalid_argument, "negative block id");
    k = std::max(k, b + 1);
  }
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  std::vector<double> cut(static_cast<std::size_t>(k), 0.0);
  std::vector<double> vol(static_cast<std::size_t>(k), 0.0);
  for (int b : partition) ++sizes[static_cast<std::size_t>(b)];
  for (int i = 0; i < g.adjacency.outerSize(); ++i) {
    const auto bi = static_cast<std::size_t>(partition[static_cast<std::size_t>(i)]);
    for (SparseMatrix::InnerIterator it(g.adjacency, i); it; ++it) {
      vol[bi] += it.value();
      if (partition[static_cast<std::size_t>(it.col())] != static_cast<int>(bi)) {
        cut[bi] += it.value();
      }
    }
  }
  double total = 0.0;
  for (int b = 0; b < k; ++b) {
    const auto bb = static_cast<std::size_t>(b);
    if (sizes[bb] == 0) {
      throw Error(ErrorKind::empty_block, "block " + std::to_string(b) + " is empty");
    }
    if (vol[bb] <= 0.0) {
      throw Error(ErrorKind::zero_volume, "block " + std::to_string(b) + " has zero volume");
    }
    total += cut[bb] / vol[bb];
  }
  return 0.5 * total;
}

}  // namespace cutcluster
