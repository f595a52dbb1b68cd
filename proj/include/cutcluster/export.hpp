#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <Eigen/Eigenvalues>

#include "cutcluster/types.hpp"

namespace cutcluster {

struct PcaResult {
  Matrix coordinates;  // N x components
  Matrix components;   // d x components, unit columns
  Vector eigenvalues;  // all d covariance eigenvalues, descending
};

/// Principal components of the row-centered data from the covariance
/// eigendecomposition. Each component is signed so its largest-magnitude
/// entry is positive.
inline PcaResult pca_project(const Matrix& h, int n_components = 2) {
  if (h.rows() < 1 || h.cols() < 1) throw Error(ErrorKind::invalid_argument, "empty matrix");
  if (!h.allFinite()) throw Error(ErrorKind::non_finite, "embeddings contain non-finite values");
  const Eigen::Index d = h.cols();
  const Eigen::Index c = std::min<Eigen::Index>(n_components, d);
  const Matrix centered = h.rowwise() - h.colwise().mean();
  const double denom = h.rows() > 1 ? static_cast<double>(h.rows() - 1) : 1.0;
  const Matrix cov = centered.transpose() * centered / denom;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);

  PcaResult r;
  // Eigen returns ascending eigenvalues.
  r.eigenvalues = eig.eigenvalues().reverse();
  r.components = eig.eigenvectors().rowwise().reverse().leftCols(c);
  for (Eigen::Index k = 0; k < c; ++k) {
    Eigen::Index arg = 0;
    r.components.col(k).cwiseAbs().maxCoeff(&arg);
    if (r.components(arg, k) < 0.0) r.components.col(k) *= -1.0;
  }
  r.coordinates = centered * r.components;
  return r;
}

namespace detail {

inline void append_number(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace detail

/// CSV with header node_id,h1..hd[,true_label],pred_label[,pc1,pc2].
inline void export_embeddings(const Matrix& h, const std::optional<Labels>& truth,
                              const Labels& pred, const std::filesystem::path& path,
                              bool project_2d) {
  if (!h.allFinite()) throw Error(ErrorKind::non_finite, "embeddings contain non-finite values");
  const auto n = static_cast<std::size_t>(h.rows());
  if (pred.size() != n || (truth && truth->size() != n)) {
    throw Error(ErrorKind::shape_mismatch, "label vectors do not match the embedding rows");
  }
  std::optional<PcaResult> pca;
  if (project_2d) pca = pca_project(h, 2);

  std::string text = "node_id";
  for (Eigen::Index c = 0; c < h.cols(); ++c) text += ",h" + std::to_string(c + 1);
  if (truth) text += ",true_label";
  text += ",pred_label";
  if (pca) {
    for (Eigen::Index c = 0; c < pca->coordinates.cols(); ++c) text += ",pc" + std::to_string(c + 1);
  }
  text += '\n';
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    text += std::to_string(i);
    for (Eigen::Index c = 0; c < h.cols(); ++c) {
      text += ',';
      detail::append_number(text, h(row, c));
    }
    if (truth) text += ',' + std::to_string((*truth)[i]);
    text += ',' + std::to_string(pred[i]);
    if (pca) {
      for (Eigen::Index c = 0; c < pca->coordinates.cols(); ++c) {
        text += ',';
        detail::append_number(text, pca->coordinates(row, c));
      }
    }
    text += '\n';
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io_error, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::io_error, "write failed for " + path.string());
}

}  // namespace cutcluster
