#pragma once

#include <cmath>
#include <string>

#include "cutcluster/clustering.hpp"
#include "cutcluster/graph.hpp"
#include "cutcluster/types.hpp"

namespace cutcluster {

/// alpha mixes structure and attribute Laplacians, beta weights the
/// orthogonality penalty, gamma weights the clustering loss. trace_scale
/// multiplies both trace terms; 0 disables the cut terms entirely.
struct LossWeights {
  double alpha = 0.5;
  double beta = 1.0;
  double gamma = 1.0;
  double trace_scale = 1.0;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
      throw Error(ErrorKind::invalid_argument, "alpha must lie in [0, 1]");
    }
    if (!(beta >= 0.0)) throw Error(ErrorKind::invalid_argument, "beta must be >= 0");
    if (!(gamma >= 0.0)) throw Error(ErrorKind::invalid_argument, "gamma must be >= 0");
    if (!(trace_scale >= 0.0)) {
      throw Error(ErrorKind::invalid_argument, "trace_scale must be >= 0");
    }
  }
};

/// Smoothing added under the square root of the orthogonality norm.
inline constexpr double kOrthogonalityEpsilon = 1e-12;

struct OrthogonalityPenalty {
  double value = 0.0;
  Matrix grad;
};

/// |H^T H - I|_F and its gradient 2 H (H^T H - I) / sqrt(|H^T H - I|_F^2 + eps).
/// The guard only enters the gradient, so the value is 0 at H^T H = I.
inline OrthogonalityPenalty orthogonality_penalty(const Matrix& h) {
  const Eigen::Index d = h.cols();
  const Matrix m = h.transpose() * h - Matrix::Identity(d, d);
  const double sq = m.squaredNorm();
  OrthogonalityPenalty p;
  p.value = std::sqrt(sq);
  p.grad = (2.0 / std::sqrt(sq + kOrthogonalityEpsilon)) * (h * m);
  return p;
}

struct EncodingLoss {
  double value = 0.0;
  /// Weighted contributions; they sum to value.
  double structure_term = 0.0;
  double attribute_term = 0.0;
  double penalty_term = 0.0;
  Matrix grad_h;
};

/// Tr(H^T (alpha L_G + (1 - alpha) L_S) H) + beta |H^T H - I|_F.
/// A term whose weight is zero is skipped, so it contributes exactly 0.
inline EncodingLoss encoding_loss(const Matrix& h, const StructureLaplacian& lg,
                                  const ImplicitAttributeLaplacian& ls, const LossWeights& w) {
  w.validate();
  require_rows(h, lg.size(), "H");
  require_rows(h, ls.size(), "H");
  EncodingLoss out;
  out.grad_h = Matrix::Zero(h.rows(), h.cols());
  const double ws = w.trace_scale * w.alpha;
  const double wa = w.trace_scale * (1.0 - w.alpha);
  if (ws != 0.0) {
    const QuadraticForm q = structure_quadratic(lg, h);
    out.structure_term = ws * q.value;
    out.grad_h += ws * q.grad;
  }
  if (wa != 0.0) {
    const QuadraticForm q = attribute_quadratic(ls, h);
    out.attribute_term = wa * q.value;
    out.grad_h += wa * q.grad;
  }
  if (w.beta != 0.0) {
    const OrthogonalityPenalty p = orthogonality_penalty(h);
    out.penalty_term = w.beta * p.value;
    out.grad_h += w.beta * p.grad;
  }
  out.value = out.structure_term + out.attribute_term + out.penalty_term;
  return out;
}

struct ClusteringLoss {
  double value = 0.0;
  Matrix grad_q;
};

/// KL(P || Q) = sum p log(p / q) with 0 log 0 = 0. P is a constant target.
inline ClusteringLoss clustering_loss(const Matrix& p, const Matrix& q) {
  require_shape(p, q.rows(), q.cols(), "target P");
  ClusteringLoss out;
  out.grad_q = Matrix::Zero(q.rows(), q.cols());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      const double pij = p(i, j);
      if (pij <= 0.0) continue;
      const double qij = q(i, j);
      if (!(qij > 0.0)) {
        throw Error(ErrorKind::infinite_divergence,
                    "q(" + std::to_string(i) + ", " + std::to_string(j) +
                        ") = 0 where the target is positive");
      }
      out.value += pij * std::log(pij / qij);
      out.grad_q(i, j) = -pij / qij;
    }
  }
  return out;
}

struct TotalLoss {
  double value = 0.0;
  double encoding = 0.0;
  double clustering = 0.0;
  Matrix grad_h;
  Matrix grad_centroids;
};

/// L_GE + gamma L_GC, with the clustering gradient pulled back through the
/// soft assignment into H and the centroids.
inline TotalLoss total_loss(const EncodingLoss& enc, const ClusteringLoss& clus,
                            const LossWeights& w, const Matrix& h, const Matrix& centroids,
                            double theta) {
  w.validate();
  require_shape(enc.grad_h, h.rows(), h.cols(), "encoding gradient");
  TotalLoss out;
  out.encoding = enc.value;
  out.clustering = clus.value;
  out.value = enc.value + w.gamma * clus.value;
  out.grad_h = enc.grad_h;
  out.grad_centroids = Matrix::Zero(centroids.rows(), centroids.cols());
  if (w.gamma != 0.0) {
    const SoftAssignGradients g = soft_assign_backward(h, centroids, theta, clus.grad_q);
    out.grad_h += w.gamma * g.grad_h;
    out.grad_centroids = w.gamma * g.grad_centroids;
  }
  return out;
}

}  // namespace cutcluster
