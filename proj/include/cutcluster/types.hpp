#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cmath>
#include <string>
#include <vector>

#include "cutcluster/error.hpp"

namespace cutcluster {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Labels = std::vector<int>;

inline void require_rows(const Matrix& m, Eigen::Index rows, const char* what) {
  if (m.rows() != rows) {
    throw Error(ErrorKind::shape_mismatch,
                std::string(what) + " has " + std::to_string(m.rows()) +
                    " rows, expected " + std::to_string(rows));
  }
}

inline void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols,
                          const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw Error(ErrorKind::shape_mismatch,
                std::string(what) + " is " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()) + ", expected " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  }
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace cutcluster
