#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "cutcluster/types.hpp"

namespace cutcluster {

namespace detail {

// Kuhn-Munkres with row/column potentials, O(m^3). Returns row -> column.
inline std::vector<int> solve_assignment(const Matrix& cost) {
  const int m = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(m + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (int i = 1; i <= m; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(static_cast<std::size_t>(m), 0);
  for (int j = 1; j <= m; ++j) row_to_col[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  return row_to_col;
}

inline double assignment_cost(const Matrix& cost, const std::vector<int>& perm) {
  double total = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    total += cost(static_cast<Eigen::Index>(i), perm[i]);
  }
  return total;
}

inline Matrix drop_row_col(const Matrix& m, Eigen::Index r, Eigen::Index c) {
  const Eigen::Index n = m.rows();
  Matrix out(n - 1, n - 1);
  for (Eigen::Index i = 0, oi = 0; i < n; ++i) {
    if (i == r) continue;
    for (Eigen::Index j = 0, oj = 0; j < n; ++j) {
      if (j == c) continue;
      out(oi, oj++) = m(i, j);
    }
    ++oi;
  }
  return out;
}

}  // namespace detail

/// Optimal assignment for a square cost matrix, returned as row -> column.
/// Among optimal permutations the lexicographically smallest is returned,
/// so ties resolve toward low column indices.
inline std::vector<int> hungarian(const Matrix& cost) {
  if (cost.rows() != cost.cols()) {
    throw Error(ErrorKind::shape_mismatch, "cost matrix must be square");
  }
  if (!cost.allFinite()) throw Error(ErrorKind::non_finite, "cost matrix has non-finite entries");
  const Eigen::Index m = cost.rows();
  if (m == 0) return {};

  const std::vector<int> first = detail::solve_assignment(cost);
  const double optimum = detail::assignment_cost(cost, first);
  const double tol = 1e-9 * (1.0 + cost.cwiseAbs().maxCoeff() * static_cast<double>(m));

  // Fix rows one at a time to the lowest column that still admits an
  // optimal completion.
  std::vector<int> result(static_cast<std::size_t>(m), -1);
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(m));
  std::vector<Eigen::Index> cols(static_cast<std::size_t>(m));
  std::iota(rows.begin(), rows.end(), 0);
  std::iota(cols.begin(), cols.end(), 0);
  Matrix rest = cost;
  double remaining = optimum;
  for (Eigen::Index r = 0; r < m; ++r) {
    const Eigen::Index size = rest.rows();
    for (Eigen::Index c = 0; c < size; ++c) {
      double value = rest(0, c);
      Matrix sub;
      if (size > 1) {
        sub = detail::drop_row_col(rest, 0, c);
        value += detail::assignment_cost(sub, detail::solve_assignment(sub));
      }
      if (value <= remaining + tol) {
        result[static_cast<std::size_t>(rows[static_cast<std::size_t>(r)])] =
            static_cast<int>(cols[static_cast<std::size_t>(c)]);
        remaining -= rest(0, c);
        cols.erase(cols.begin() + c);
        rest = std::move(sub);
        break;
      }
    }
  }
  return result;
}

/// Counts of (predicted cluster, true class) pairs.
struct ContingencyTable {
  Eigen::MatrixXi counts;
  long long n = 0;
};

inline void check_label_pair(const Labels& pred, const Labels& truth) {
  if (pred.size() != truth.size()) {
    throw Error(ErrorKind::shape_mismatch, "prediction length " + std::to_string(pred.size()) +
                                               " != truth length " +
                                               std::to_string(truth.size()));
  }
  if (pred.empty()) throw Error(ErrorKind::invalid_argument, "empty labelling");
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || truth[i] < 0) {
      throw Error(ErrorKind::out_of_range, "negative label at index " + std::to_string(i));
    }
  }
}

inline ContingencyTable contingency(const Labels& pred, const Labels& truth) {
  check_label_pair(pred, truth);
  const int kp = *std::max_element(pred.begin(), pred.end()) + 1;
  const int kt = *std::max_element(truth.begin(), truth.end()) + 1;
  ContingencyTable t;
  t.counts = Eigen::MatrixXi::Zero(kp, kt);
  for (std::size_t i = 0; i < pred.size(); ++i) ++t.counts(pred[i], truth[i]);
  t.n = static_cast<long long>(pred.size());
  return t;
}

/// Maps each predicted cluster id to a class id via the optimal matching
/// of the contingency table; clusters left unmatched map to -1. Among
/// matchings with the same number of hits the one with the larger summed
/// pair F1 2 n_kc / (|k| + |c|) wins, so the result does not depend on how
/// clusters happen to be numbered.
inline std::vector<int> best_cluster_mapping(const ContingencyTable& t) {
  const Eigen::Index kp = t.counts.rows();
  const Eigen::Index kt = t.counts.cols();
  const Eigen::Index m = std::max(kp, kt);
  const Eigen::VectorXi pred_sizes = t.counts.rowwise().sum();
  const Eigen::VectorXi true_sizes = t.counts.colwise().sum().transpose();
  // Hit counts are integers and the F1 sum is below m, so this weight never
  // trades a hit for F1.
  const double f1_weight = 1.0 / static_cast<double>(m + 1);
  Matrix cost = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < kp; ++i) {
    for (Eigen::Index j = 0; j < kt; ++j) {
      const double nij = t.counts(i, j);
      const double size = static_cast<double>(pred_sizes[i] + true_sizes[j]);
      const double f1 = size > 0 ? 2.0 * nij / size : 0.0;
      cost(i, j) = -nij - f1_weight * f1;
    }
  }
  const std::vector<int> perm = hungarian(cost);
  std::vector<int> mapping(static_cast<std::size_t>(kp), -1);
  for (Eigen::Index i = 0; i < kp; ++i) {
    const int c = perm[static_cast<std::size_t>(i)];
    if (c < kt) mapping[static_cast<std::size_t>(i)] = c;
  }
  return mapping;
}

inline Labels remap_predictions(const Labels& pred, const Labels& truth) {
  const std::vector<int> mapping = best_cluster_mapping(contingency(pred, truth));
  Labels out(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out[i] = mapping[static_cast<std::size_t>(pred[i])];
  }
  return out;
}

inline double accuracy(const Labels& pred, const Labels& truth) {
  const Labels mapped = remap_predictions(pred, truth);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += mapped[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

enum class NmiNormalization { geometric, arithmetic };

namespace detail {

inline double entropy(const Eigen::VectorXi& counts, double n) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < counts.size(); ++i) {
    if (counts[i] > 0) {
      const double p = counts[i] / n;
      h -= p * std::log(p);
    }
  }
  return h;
}

inline double choose2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace detail

/// Mutual information over sqrt(H(pred) H(truth)) (or their mean), natural
/// logs. Two single-cluster partitions score 1; one degenerate side scores 0.
inline double nmi(const Labels& pred, const Labels& truth,
                  NmiNormalization norm = NmiNormalization::geometric) {
  const ContingencyTable t = contingency(pred, truth);
  const auto n = static_cast<double>(t.n);
  const Eigen::VectorXi a = t.counts.rowwise().sum();
  const Eigen::VectorXi b = t.counts.colwise().sum().transpose();
  const double hp = detail::entropy(a, n);
  const double ht = detail::entropy(b, n);
  if (hp == 0.0 && ht == 0.0) return 1.0;
  if (hp == 0.0 || ht == 0.0) return 0.0;
  double mi = 0.0;
  for (Eigen::Index i = 0; i < t.counts.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.counts.cols(); ++j) {
      const double nij = t.counts(i, j);
      if (nij > 0) mi += nij / n * std::log(n * nij / (static_cast<double>(a[i]) * b[j]));
    }
  }
  const double denom = norm == NmiNormalization::geometric ? std::sqrt(hp * ht) : 0.5 * (hp + ht);
  return std::clamp(mi / denom, 0.0, 1.0);
}

/// Adjusted Rand index from pair counts of the contingency table.
inline double ari(const Labels& pred, const Labels& truth) {
  const ContingencyTable t = contingency(pred, truth);
  double index = 0.0;
  for (Eigen::Index i = 0; i < t.counts.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.counts.cols(); ++j) index += detail::choose2(t.counts(i, j));
  }
  double sum_a = 0.0;
  double sum_b = 0.0;
  const Eigen::VectorXi a = t.counts.rowwise().sum();
  const Eigen::VectorXi b = t.counts.colwise().sum().transpose();
  for (Eigen::Index i = 0; i < a.size(); ++i) sum_a += detail::choose2(a[i]);
  for (Eigen::Index j = 0; j < b.size(); ++j) sum_b += detail::choose2(b[j]);
  const double total = detail::choose2(static_cast<double>(t.n));
  const double expected = total > 0.0 ? sum_a * sum_b / total : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

/// Unweighted mean F1 over the classes present in truth, after mapping
/// clusters to classes. A class with no true positives scores 0.
inline double macro_f1(const Labels& pred, const Labels& truth) {
  const Labels mapped = remap_predictions(pred, truth);
  const int kt = *std::max_element(truth.begin(), truth.end()) + 1;
  std::vector<long long> tp(static_cast<std::size_t>(kt), 0);
  std::vector<long long> fp(static_cast<std::size_t>(kt), 0);
  std::vector<long long> support(static_cast<std::size_t>(kt), 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++support[static_cast<std::size_t>(truth[i])];
    if (mapped[i] < 0) continue;
    if (mapped[i] == truth[i]) {
      ++tp[static_cast<std::size_t>(truth[i])];
    } else {
      ++fp[static_cast<std::size_t>(mapped[i])];
    }
  }
  double sum = 0.0;
  int classes = 0;
  for (std::size_t c = 0; c < static_cast<std::size_t>(kt); ++c) {
    if (support[c] == 0) continue;
    ++classes;
    if (tp[c] == 0) continue;
    const double precision = static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fp[c]);
    const double recall = static_cast<double>(tp[c]) / static_cast<double>(support[c]);
    sum += 2.0 * precision * recall / (precision + recall);
  }
  return sum / classes;
}

struct Metrics {
  double acc = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
  double f1 = 0.0;
};

inline Metrics evaluate(const Labels& pred, const Labels& truth,
                        NmiNormalization norm = NmiNormalization::geometric) {
  return {accuracy(pred, truth), nmi(pred, truth, norm), ari(pred, truth), macro_f1(pred, truth)};
}

}  // namespace cutcluster
