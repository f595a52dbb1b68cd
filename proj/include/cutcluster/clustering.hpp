#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "cutcluster/types.hpp"

namespace cutcluster {

// ---------------------------------------------------------------------------
// K-means
// ---------------------------------------------------------------------------

struct KMeansOptions {
  int restarts = 10;
  int max_iterations = 300;
  std::uint64_t seed = 0;
};

struct KMeansResult {
  Matrix centroids;
  Labels assignments;
  double inertia = 0.0;
  int iterations = 0;
  /// Inertia after every assignment step of the winning restart.
  std::vector<double> inertia_history;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline double assign_points(const Matrix& h, const Matrix& centroids, Labels& labels,
                            Vector& dist) {
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < centroids.rows(); ++k) {
      const double d = (h.row(i) - centroids.row(k)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(k);
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
    dist[i] = best_d;
    inertia += best_d;
  }
  return inertia;
}

inline Matrix kmeanspp_seed(const Matrix& h, int k, std::mt19937_64& rng) {
  const Eigen::Index n = h.rows();
  Matrix c(k, h.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  c.row(0) = h.row(pick(rng));
  Vector closest(n);
  for (Eigen::Index i = 0; i < n; ++i) closest[i] = (h.row(i) - c.row(0)).squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int j = 1; j < k; ++j) {
    const double total = closest.sum();
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      double r = unit(rng) * total;
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        r -= closest[i];
        if (r < 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    c.row(j) = h.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i) {
      closest[i] = std::min(closest[i], (h.row(i) - c.row(j)).squaredNorm());
    }
  }
  return c;
}

inline KMeansResult lloyd(const Matrix& h, int k, int max_iterations, std::mt19937_64& rng) {
  const Eigen::Index n = h.rows();
  KMeansResult r;
  r.centroids = kmeanspp_seed(h, k, rng);
  r.assignments.assign(static_cast<std::size_t>(n), 0);
  Vector dist(n);
  r.inertia = assign_points(h, r.centroids, r.assignments, dist);
  r.inertia_history.push_back(r.inertia);
  for (int it = 0; it < max_iterations; ++it) {
    Matrix sums = Matrix::Zero(k, h.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int a = r.assignments[static_cast<std::size_t>(i)];
      sums.row(a) += h.row(i);
      ++counts[static_cast<std::size_t>(a)];
    }
    for (int j = 0; j < k; ++j) {
      if (counts[static_cast<std::size_t>(j)] > 0) {
        r.centroids.row(j) = sums.row(j) / counts[static_cast<std::size_t>(j)];
      } else {
        // Empty cluster: move it onto the point farthest from its centroid.
        Eigen::Index far = 0;
        dist.maxCoeff(&far);
        r.centroids.row(j) = h.row(far);
        dist[far] = 0.0;
      }
    }
    Labels previous = r.assignments;
    r.inertia = assign_points(h, r.centroids, r.assignments, dist);
    r.inertia_history.push_back(r.inertia);
    r.iterations = it + 1;
    if (previous == r.assignments) break;
  }
  return r;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding; the restart with the lowest
/// inertia wins, ties going to the earlier restart.
inline KMeansResult kmeans(const Matrix& h, int k, const KMeansOptions& opt = {}) {
  if (k <= 0) throw Error(ErrorKind::invalid_argument, "K must be positive");
  if (k > h.rows()) {
    throw Error(ErrorKind::invalid_argument, "K = " + std::to_string(k) + " exceeds N = " +
                                                 std::to_string(h.rows()));
  }
  if (opt.restarts <= 0) throw Error(ErrorKind::invalid_argument, "restarts must be positive");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < opt.restarts; ++r) {
    std::mt19937_64 rng(detail::splitmix64(opt.seed + static_cast<std::uint64_t>(r)));
    KMeansResult run = detail::lloyd(h, k, opt.max_iterations, rng);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Student's t soft assignment
// ---------------------------------------------------------------------------

namespace detail {

inline Matrix squared_distances(const Matrix& h, const Matrix& centroids) {
  Matrix d(h.rows(), centroids.rows());
  for (Eigen::Index j = 0; j < centroids.rows(); ++j) {
    d.col(j) = (h.rowwise() - centroids.row(j)).rowwise().squaredNorm();
  }
  return d;
}

inline void check_soft_assign_args(const Matrix& h, const Matrix& centroids, double theta) {
  if (!(theta > 0.0)) throw Error(ErrorKind::invalid_argument, "theta must be positive");
  if (centroids.cols() != h.cols()) {
    throw Error(ErrorKind::shape_mismatch, "centroids have " +
                                               std::to_string(centroids.cols()) +
                                               " columns, embeddings have " +
                                               std::to_string(h.cols()));
  }
  if (centroids.rows() == 0) throw Error(ErrorKind::invalid_argument, "no centroids");
}

}  // namespace detail

/// q_ij proportional to (1 + |h_i - mu_j|^2 / theta)^(-(1 + theta) / 2),
/// normalized per row. Evaluated as a softmax over log-kernels.
inline Matrix soft_assign(const Matrix& h, const Matrix& centroids, double theta = 1.0) {
  detail::check_soft_assign_args(h, centroids, theta);
  const Matrix d = detail::squared_distances(h, centroids);
  const double power = -(1.0 + theta) / 2.0;
  Matrix q = (power * (d.array() / theta).log1p()).matrix();
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    const double m = q.row(i).maxCoeff();
    q.row(i) = (q.row(i).array() - m).exp();
    q.row(i) /= q.row(i).sum();
  }
  return q;
}

struct SoftAssignGradients {
  Matrix grad_h;
  Matrix grad_centroids;
};

/// Exact gradient of soft_assign w.r.t. embeddings and centroids given
/// dL/dQ. With g_i = <dL/dq_i, q_i>:
///   dL/dd_ij = q_ij (dL/dq_ij - g_i) * (-(1 + theta) / (2 theta)) / (1 + d_ij / theta)
/// and d_ij = |h_i - mu_j|^2.
inline SoftAssignGradients soft_assign_backward(const Matrix& h, const Matrix& centroids,
                                                double theta, const Matrix& d_q) {
  detail::check_soft_assign_args(h, centroids, theta);
  require_shape(d_q, h.rows(), centroids.rows(), "dL/dQ");
  const Matrix d = detail::squared_distances(h, centroids);
  const Matrix q = soft_assign(h, centroids, theta);
  const Vector mean_grad = d_q.cwiseProduct(q).rowwise().sum();
  const double coef = -(1.0 + theta) / (2.0 * theta);
  Matrix d_dist = q.cwiseProduct(d_q.colwise() - mean_grad);
  d_dist = (coef * d_dist.array() / (1.0 + d.array() / theta)).matrix();

  SoftAssignGradients g;
  // sum_j d_dist_ij * 2 (h_i - mu_j) = 2 (rowsum_i h_i - d_dist_i . mu)
  const Vector row_sums = d_dist.rowwise().sum();
  g.grad_h = 2.0 * (row_sums.asDiagonal() * h - d_dist * centroids);
  const Vector col_sums = d_dist.colwise().sum().transpose();
  g.grad_centroids = 2.0 * (col_sums.asDiagonal() * centroids - d_dist.transpose() * h);
  return g;
}

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

/// Cluster proportions from hard assignments. Entries whose frequency falls
/// below `floor` are raised to it and the remaining entries are rescaled to
/// fill the rest of the unit mass, repeating until no entry is below the
/// floor. A negative floor selects the default 1 / (10 K).
inline Vector estimate_proportions(const Labels& assignments, int k, double floor = -1.0) {
  if (k <= 0) throw Error(ErrorKind::invalid_argument, "K must be positive");
  if (assignments.empty()) throw Error(ErrorKind::invalid_argument, "no assignments");
  if (floor < 0.0) floor = 1.0 / (10.0 * k);
  if (floor * k > 1.0 + 1e-12) {
    throw Error(ErrorKind::invalid_argument, "proportion floor exceeds 1 / K");
  }
  Vector counts = Vector::Zero(k);
  for (int a : assignments) {
    if (a < 0 || a >= k) {
      throw Error(ErrorKind::out_of_range, "assignment " + std::to_string(a) +
                                               " outside [0, " + std::to_string(k) + ")");
    }
    counts[a] += 1.0;
  }
  std::vector<bool> floored(static_cast<std::size_t>(k), false);
  Vector pi(k);
  for (;;) {
    double free_count = 0.0;
    int n_floored = 0;
    for (int j = 0; j < k; ++j) {
      if (floored[static_cast<std::size_t>(j)]) {
        ++n_floored;
      } else {
        free_count += counts[j];
      }
    }
    const double free_mass = 1.0 - floor * n_floored;
    bool changed = false;
    for (int j = 0; j < k; ++j) {
      if (floored[static_cast<std::size_t>(j)]) {
        pi[j] = floor;
        continue;
      }
      pi[j] = free_count > 0.0 ? free_mass * counts[j] / free_count : 0.0;
      if (pi[j] < floor) {
        floored[static_cast<std::size_t>(j)] = true;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return pi;
}

struct SinkhornConfig {
  double lambda = 5.0;
  int max_iterations = 1000;
  double marginal_tolerance = 1e-6;
};

struct SinkhornResult {
  Matrix plan;
  int iterations = 0;
  /// max_i |sum_j P_ij - 1|
  double row_residual = 0.0;
  /// max_j |sum_i P_ij - N pi_j|
  double column_residual = 0.0;

  double residual() const { return std::max(row_residual, column_residual); }
};

namespace detail {

inline double log_sum_exp(const double* data, Eigen::Index n, Eigen::Index stride) {
  double m = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) m = std::max(m, data[i * stride]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) s += std::exp(data[i * stride] - m);
  return m + std::log(s);
}

}  // namespace detail

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Plain Sinkhorn sweeps on a fixed log-kernel, starting from the given
// potentials. Stops once both marginals are within tol or the budget runs
// out. Returns the number of sweeps used.
inline int sinkhorn_sweeps(const RowMatrix& kernel, const Vector& log_col_target,
                           const Vector& col_target, Vector& log_u, Vector& log_v, int budget,
                           double tol, SinkhornResult& res) {
  const Eigen::Index n = kernel.rows();
  const Eigen::Index k = kernel.cols();
  RowMatrix scratch(n, k);
  for (int it = 1; it <= budget; ++it) {
    // u = 1 / (M v)
    scratch = kernel.rowwise() + log_v.transpose();
    for (Eigen::Index i = 0; i < n; ++i) log_u[i] = -log_sum_exp(&scratch(i, 0), k, 1);
    // v = N pi / (M^T u)
    scratch = kernel.colwise() + log_u;
    for (Eigen::Index j = 0; j < k; ++j) {
      log_v[j] = log_col_target[j] - log_sum_exp(&scratch(0, j), n, k);
    }
    // Column sums now match up to rounding; measure both anyway.
    double row_res = 0.0;
    Vector col = Vector::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      double row = 0.0;
      for (Eigen::Index j = 0; j < k; ++j) {
        const double p = std::exp(kernel(i, j) + log_u[i] + log_v[j]);
        row += p;
        col[j] += p;
      }
      row_res = std::max(row_res, std::abs(row - 1.0));
    }
    res.row_residual = row_res;
    res.column_residual = (col - col_target).cwiseAbs().maxCoeff();
    if (row_res <= tol && res.column_residual <= tol) return it;
  }
  return budget;
}

// Newton refinement of log_v on the semi-dual
//   F(g) = sum_i logsumexp_j(K_ij + g_j) - sum_j c_j g_j,
// whose gradient is (column sums of the row-normalized plan) - c. log_u is
// kept at its exact Sinkhorn value -logsumexp_j(K_ij + g_j), so rows always
// sum to 1. Backtracking keeps every step a descent step.
inline int sinkhorn_newton(const RowMatrix& kernel, const Vector& col_target, Vector& log_u,
                           Vector& log_v, int budget, double tol, SinkhornResult& res) {
  const Eigen::Index n = kernel.rows();
  const Eigen::Index k = kernel.cols();
  RowMatrix plan(n, k);
  RowMatrix logits(n, k);
  // Semi-dual value at g; also leaves max |column sum - target| in col_res.
  auto evaluate = [&](const Vector& g, Vector& lu, double& col_res) {
    double f = -col_target.dot(g);
    Vector col = Vector::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) logits(i, j) = kernel(i, j) + g[j];
      lu[i] = -log_sum_exp(&logits(i, 0), k, 1);
      f -= lu[i];
      for (Eigen::Index j = 0; j < k; ++j) col[j] += std::exp(logits(i, j) + lu[i]);
    }
    col_res = (col - col_target).cwiseAbs().maxCoeff();
    return f;
  };
  auto measure = [&] {
    plan = ((kernel.colwise() + log_u).rowwise() + log_v.transpose()).array().exp();
    double row_res = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) row_res = std::max(row_res, std::abs(plan.row(i).sum() - 1.0));
    res.row_residual = row_res;
    res.column_residual = (plan.colwise().sum().transpose() - col_target).cwiseAbs().maxCoeff();
    return row_res <= tol && res.column_residual <= tol;
  };
  double col_res = 0.0;
  double f = evaluate(log_v, log_u, col_res);
  if (measure()) return 0;
  Vector trial_u(n);
  for (int it = 1; it <= budget; ++it) {
    const Vector grad = plan.colwise().sum().transpose() - col_target;
    // Hessian sum_i diag(p_i) - p_i p_i^T; it is singular along the all-ones
    // direction (a common shift of g), which the gradient never has a component
    // in, so adding 1 1^T makes it invertible without changing the step.
    Matrix hess = Matrix(plan.colwise().sum().asDiagonal()) - Matrix(plan.transpose() * plan);
    hess.array() += 1.0;
    const Vector step = -hess.ldlt().solve(grad);
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 40 && step.allFinite(); ++ls, t *= 0.5) {
      const Vector trial = log_v + t * step;
      double trial_res = 0.0;
      const double ft = evaluate(trial, trial_u, trial_res);
      // Near the optimum the decrease in F drops below its rounding error,
      // so a step that shrinks the marginal residual is accepted too.
      if (ft <= f + 1e-4 * t * grad.dot(step) || trial_res < res.column_residual) {
        log_v = trial;
        log_u = trial_u;
        f = ft;
        moved = true;
        break;
      }
    }
    if (measure() || !moved) return it;
  }
  return budget;
}

}  // namespace detail

/// Log-domain Sinkhorn scaling of the kernel log_kernel = lambda * log Q
/// toward row sums 1 and column sums N * pi. Exposed separately so that the
/// kernel can be shifted by a constant in tests.
///
/// Large lambda makes plain scaling crawl (tens of thousands of sweeps at
/// lambda = 20). So the kernel is first scaled at lambda / 2^m,
/// lambda / 2^(m-1), ... with plain sweeps to a loose tolerance, carrying the
/// potentials up rescaled by the lambda ratio. The exact problem is then
/// finished with Newton steps on v (u stays at its Sinkhorn value). Every
/// sweep and Newton step counts against max_iterations.
inline SinkhornResult sinkhorn_from_log_kernel(const Matrix& log_kernel, const Vector& pi,
                                               const SinkhornConfig& cfg) {
  const Eigen::Index n = log_kernel.rows();
  const Eigen::Index k = log_kernel.cols();
  if (pi.size() != k) {
    throw Error(ErrorKind::shape_mismatch, "pi has " + std::to_string(pi.size()) +
                                               " entries, expected " + std::to_string(k));
  }
  if (!(pi.array() > 0.0).all()) {
    throw Error(ErrorKind::invalid_argument, "pi must be strictly positive");
  }
  if (std::abs(pi.sum() - 1.0) > 1e-9) {
    throw Error(ErrorKind::invalid_argument, "pi must sum to 1");
  }
  if (!(cfg.lambda > 0.0) || !(cfg.marginal_tolerance > 0.0) || cfg.max_iterations <= 0) {
    throw Error(ErrorKind::invalid_argument, "invalid Sinkhorn configuration");
  }
  const Vector col_target = static_cast<double>(n) * pi;
  const Vector log_col_target = col_target.array().log().matrix();

  // Row-major copy so row reductions are contiguous.
  const detail::RowMatrix kernel = log_kernel;
  Vector log_u = Vector::Zero(n);
  Vector log_v = Vector::Zero(k);
  SinkhornResult res;

  int stages = 0;
  while (cfg.lambda / std::ldexp(1.0, stages) > 1.0) ++stages;
  constexpr double kStageTolerance = 1e-3;
  double prev_scale = 1.0;
  int used = 0;
  for (int s = stages; s > 0 && used < cfg.max_iterations; --s) {
    const double scale = std::ldexp(1.0, -s);
    log_u *= scale / prev_scale;
    log_v *= scale / prev_scale;
    prev_scale = scale;
    const detail::RowMatrix staged = scale * kernel;
    used += detail::sinkhorn_sweeps(staged, log_col_target, col_target, log_u, log_v,
                                    cfg.max_iterations - used, kStageTolerance, res);
  }
  log_u /= prev_scale;
  log_v /= prev_scale;
  if (used < cfg.max_iterations) {
    used += detail::sinkhorn_newton(kernel, col_target, log_u, log_v,
                                    cfg.max_iterations - used, cfg.marginal_tolerance, res);
  }
  res.iterations = used;
  if (res.row_residual <= cfg.marginal_tolerance &&
      res.column_residual <= cfg.marginal_tolerance) {
    res.plan = ((kernel.colwise() + log_u).rowwise() + log_v.transpose()).array().exp();
    return res;
  }
  throw NotConvergedError("Sinkhorn did not reach tolerance " +
                              std::to_string(cfg.marginal_tolerance) + " in " +
                              std::to_string(cfg.max_iterations) +
                              " iterations (residual " + std::to_string(res.residual()) + ")",
                          res.residual(), res.iterations);
}

inline SinkhornResult sinkhorn_target(const Matrix& q, const Vector& pi,
                                      const SinkhornConfig& cfg = {}) {
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      if (!(q(i, j) > 0.0) || !std::isfinite(q(i, j))) {
        throw Error(ErrorKind::invalid_argument, "Q(" + std::to_string(i) + ", " +
                                                     std::to_string(j) +
                                                     ") is not strictly positive");
      }
    }
  }
  const Matrix log_kernel = (cfg.lambda * q.array().log()).matrix();
  return sinkhorn_from_log_kernel(log_kernel, pi, cfg);
}

/// Sharpened self-training target p_ij = (q_ij^2 / f_j) / sum_j' (q_ij'^2 / f_j'),
/// f_j = sum_i q_ij.
inline Matrix sdcn_target(const Matrix& q) {
  const Eigen::RowVectorXd f = q.colwise().sum();
  Matrix p = q.cwiseProduct(q);
  p.array().rowwise() /= f.array();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

/// Row-wise argmax; ties go to the lowest index.
inline Labels hard_assign(const Matrix& q) {
  Labels out(static_cast<std::size_t>(q.rows()), 0);
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    int best = 0;
    for (Eigen::Index j = 1; j < q.cols(); ++j) {
      if (q(i, j) > q(i, best)) best = static_cast<int>(j);
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

}  // namespace cutcluster
