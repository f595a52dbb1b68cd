#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cutcluster/types.hpp"

namespace cutcluster {

enum class Activation { relu };

/// MLP weights plus the trainable cluster centroids. Layer l maps
/// layer_dims[l] -> layer_dims[l+1] as X * W + b; hidden layers use relu,
/// the output layer is linear.
struct EncoderParams {
  std::vector<int> layer_dims;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Activation activation = Activation::relu;
  Matrix centroids;

  std::size_t n_layers() const { return weights.size(); }
  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
};

/// Same layout as the trainable parameters; used for gradients and for the
/// optimizer moments.
struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Matrix centroids;

  static Gradients zeros_like(const EncoderParams& p) {
    Gradients g;
    for (const auto& w : p.weights) g.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
    for (const auto& b : p.biases) g.biases.push_back(Vector::Zero(b.size()));
    g.centroids = Matrix::Zero(p.centroids.rows(), p.centroids.cols());
    return g;
  }
};

inline void check_layer_dims(const std::vector<int>& dims) {
  if (dims.size() < 2) {
    throw Error(ErrorKind::invalid_argument, "encoder needs at least input and output dims");
  }
  for (int d : dims) {
    if (d <= 0) throw Error(ErrorKind::invalid_argument, "layer dims must be positive");
  }
}

/// Scaled-uniform (Glorot) weights, zero biases. n_clusters rows of zero
/// centroids are allocated; K-means fills them before clustering starts.
inline EncoderParams init_encoder(const std::vector<int>& layer_dims, int n_clusters,
                                  std::uint64_t seed) {
  check_layer_dims(layer_dims);
  EncoderParams p;
  p.layer_dims = layer_dims;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const int fan_in = layer_dims[l];
    const int fan_out = layer_dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix w(fan_in, fan_out);
    // Fill row by row so the draw order is independent of Eigen's storage.
    for (int r = 0; r < fan_in; ++r) {
      for (int c = 0; c < fan_out; ++c) w(r, c) = dist(rng);
    }
    p.weights.push_back(std::move(w));
    p.biases.push_back(Vector::Zero(fan_out));
  }
  p.centroids = Matrix::Zero(std::max(n_clusters, 0), layer_dims.back());
  return p;
}

/// Per-layer inputs and the hidden pre-activations, kept for backward.
struct ForwardCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre_activations;
};

inline std::pair<Matrix, ForwardCache> forward(const EncoderParams& p, const Matrix& x) {
  if (x.cols() != p.input_dim()) {
    throw Error(ErrorKind::shape_mismatch, "input has " + std::to_string(x.cols()) +
                                               " columns, encoder expects " +
                                               std::to_string(p.input_dim()));
  }
  ForwardCache cache;
  Matrix act = x;
  const std::size_t last = p.n_layers() - 1;
  for (std::size_t l = 0; l < p.n_layers(); ++l) {
    Matrix z = act * p.weights[l];
    z.rowwise() += p.biases[l].transpose();
    cache.inputs.push_back(std::move(act));
    if (l == last) {
      return {std::move(z), std::move(cache)};
    }
    act = z.cwiseMax(0.0);
    cache.pre_activations.push_back(std::move(z));
  }
  return {act, std::move(cache)};  // unreachable for n_layers >= 1
}

/// Reverse-mode pass through forward(). relu'(0) is taken as 0. The
/// centroid gradient is returned as zeros; it is filled by the clustering
/// backward pass.
inline Gradients backward(const EncoderParams& p, const ForwardCache& cache,
                          const Matrix& d_out) {
  if (cache.inputs.size() != p.n_layers() ||
      cache.pre_activations.size() + 1 != p.n_layers()) {
    throw Error(ErrorKind::shape_mismatch, "cache does not match encoder depth");
  }
  const Eigen::Index n = cache.inputs.front().rows();
  require_shape(d_out, n, p.output_dim(), "dL/dH");

  Gradients g = Gradients::zeros_like(p);
  Matrix delta = d_out;
  for (std::size_t l = p.n_layers(); l-- > 0;) {
    g.weights[l] = cache.inputs[l].transpose() * delta;
    g.biases[l] = delta.colwise().sum().transpose();
    if (l == 0) break;
    Matrix upstream = delta * p.weights[l].transpose();
    const Matrix& z = cache.pre_activations[l - 1];
    delta = upstream.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
  }
  return g;
}

struct AdamState {
  Gradients first_moment;
  Gradients second_moment;
  long long step_count = 0;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const EncoderParams& p, double lr, double wd) {
    AdamState s;
    s.first_moment = Gradients::zeros_like(p);
    s.second_moment = Gradients::zeros_like(p);
    s.learning_rate = lr;
    s.weight_decay = wd;
    return s;
  }

  void reset_centroid_moments() {
    first_moment.centroids.setZero();
    second_moment.centroids.setZero();
  }
};

namespace detail {

template <typename Param>
void adam_update(Param& param, const Param& grad, Param& m, Param& v, double lr,
                 double decay_factor, double beta1, double beta2, double eps,
                 double bias1, double bias2) {
  if (decay_factor != 1.0) param *= decay_factor;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  param.array() -= lr * (m.array() / bias1) / ((v.array() / bias2).sqrt() + eps);
}

template <typename Param>
void require_finite_grad(const Param& g, const std::string& name) {
  if (!g.allFinite()) throw Error(ErrorKind::non_finite, "gradient of " + name);
}

}  // namespace detail

/// One Adam step with decoupled weight decay (param *= 1 - lr * wd before
/// the moment update). Centroids are never decayed.
inline void adam_step(EncoderParams& p, AdamState& s, const Gradients& g) {
  if (g.weights.size() != p.weights.size() || g.biases.size() != p.biases.size()) {
    throw Error(ErrorKind::shape_mismatch, "gradient set does not match parameters");
  }
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    require_shape(g.weights[l], p.weights[l].rows(), p.weights[l].cols(), "weight gradient");
    if (g.biases[l].size() != p.biases[l].size()) {
      throw Error(ErrorKind::shape_mismatch, "bias gradient " + std::to_string(l));
    }
    detail::require_finite_grad(g.weights[l], "weights[" + std::to_string(l) + "]");
    detail::require_finite_grad(g.biases[l], "biases[" + std::to_string(l) + "]");
  }
  require_shape(g.centroids, p.centroids.rows(), p.centroids.cols(), "centroid gradient");
  detail::require_finite_grad(g.centroids, "centroids");

  ++s.step_count;
  const auto t = static_cast<double>(s.step_count);
  const double bias1 = 1.0 - std::pow(s.beta1, t);
  const double bias2 = 1.0 - std::pow(s.beta2, t);
  const double decay = 1.0 - s.learning_rate * s.weight_decay;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    detail::adam_update(p.weights[l], g.weights[l], s.first_moment.weights[l],
                        s.second_moment.weights[l], s.learning_rate, decay, s.beta1,
                        s.beta2, s.epsilon, bias1, bias2);
    detail::adam_update(p.biases[l], g.biases[l], s.first_moment.biases[l],
                        s.second_moment.biases[l], s.learning_rate, decay, s.beta1,
                        s.beta2, s.epsilon, bias1, bias2);
  }
  detail::adam_update(p.centroids, g.centroids, s.first_moment.centroids,
                      s.second_moment.centroids, s.learning_rate, 1.0, s.beta1, s.beta2,
                      s.epsilon, bias1, bias2);
}

}  // namespace cutcluster
