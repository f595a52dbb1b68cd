#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cutcluster/clustering.hpp"
#include "cutcluster/config.hpp"
#include "cutcluster/dataset.hpp"
#include "cutcluster/encoder.hpp"
#include "cutcluster/graph.hpp"
#include "cutcluster/metrics.hpp"
#include "cutcluster/objective.hpp"

namespace cutcluster {

/// Both Laplacians of one graph, built once and shared by every stage.
struct GraphOperators {
  StructureLaplacian structure;
  ImplicitAttributeLaplacian attribute;

  static GraphOperators build(const AttributedGraph& g) {
    return {build_normalized_laplacian(g), build_attribute_laplacian(g)};
  }
};

/// Resolves the graph a config points at: a manifest path or a synthetic spec.
inline AttributedGraph resolve_graph(const RunConfig& cfg,
                                     std::vector<std::string>* warnings = nullptr) {
  if (!cfg.dataset.empty()) return load_dataset(cfg.dataset, warnings);
  if (cfg.synthetic) return generate_synthetic(*cfg.synthetic);
  throw Error(ErrorKind::invalid_argument, "config names neither a dataset nor a synthetic spec");
}

inline int resolve_clusters(const RunConfig& cfg, const AttributedGraph& g) {
  if (cfg.n_clusters > 0) return cfg.n_clusters;
  if (g.n_classes) return *g.n_classes;
  throw Error(ErrorKind::invalid_argument, "number of clusters unknown: set n_clusters");
}

/// Loss weights after applying the ablation switches.
inline LossWeights effective_weights(const RunConfig& cfg) {
  LossWeights w{cfg.alpha, cfg.beta, cfg.gamma, 1.0};
  if (cfg.ablation.no_structure) w.alpha = 0.0;
  if (cfg.ablation.no_attribute) w.alpha = 1.0;
  if (cfg.ablation.no_encoding_trace) w.trace_scale = 0.0;
  if (cfg.ablation.no_orthogonality) w.beta = 0.0;
  return w;
}

inline std::vector<int> encoder_layers(const RunConfig& cfg, int n_features) {
  std::vector<int> dims{n_features};
  dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
  dims.push_back(cfg.embedding_dim);
  return dims;
}

/// Centroids, assignments and targets at the end of clustering.
struct ClusterState {
  Matrix centroids;
  Matrix q;
  Matrix p_hat;
  Vector proportions;
  double dof = 1.0;
};

struct EncodingEpoch {
  double structure = 0.0;
  double attribute = 0.0;
  double penalty = 0.0;
  double value = 0.0;
};

struct TrainEpoch {
  EncodingEpoch encoding;
  double clustering = 0.0;
  double total = 0.0;
  double sinkhorn_residual = 0.0;
  int sinkhorn_iterations = 0;
  std::optional<Metrics> metrics;
};

struct RunReport {
  RunConfig config;
  std::uint64_t seed = 0;
  int n_nodes = 0;
  int n_clusters = 0;
  std::vector<EncodingEpoch> pretrain;
  std::vector<TrainEpoch> train;
  std::optional<Metrics> metrics;
  int sinkhorn_calls = 0;
  double wall_clock_seconds = 0.0;
};

/// Encoder weights together with the optimizer that produced them, so the
/// clustering stage continues the same Adam trajectory.
struct TrainedEncoder {
  EncoderParams params;
  AdamState optimizer;
  std::vector<EncodingEpoch> history;
};

namespace detail {

inline EncodingEpoch record(const EncodingLoss& l) {
  return {l.structure_term, l.attribute_term, l.penalty_term, l.value};
}

inline void require_finite(double v, const char* what, int epoch) {
  if (!std::isfinite(v)) {
    throw Error(ErrorKind::non_finite,
                std::string(what) + " is not finite at epoch " + std::to_string(epoch));
  }
}

}  // namespace detail

/// Stage one: full-batch Adam on the cut-informed encoding loss alone.
inline TrainedEncoder pretrain(const RunConfig& cfg, const AttributedGraph& g,
                               const GraphOperators& ops) {
  cfg.validate();
  const int k = resolve_clusters(cfg, g);
  TrainedEncoder out;
  out.params = init_encoder(encoder_layers(cfg, g.n_features()), k, cfg.seed);
  out.optimizer = AdamState::for_params(out.params, cfg.learning_rate, cfg.weight_decay);
  const LossWeights w = effective_weights(cfg);
  for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    auto [h, cache] = forward(out.params, g.features);
    const EncodingLoss loss = encoding_loss(h, ops.structure, ops.attribute, w);
    detail::require_finite(loss.value, "pretraining loss", epoch);
    out.history.push_back(detail::record(loss));
    Gradients grads = backward(out.params, cache, loss.grad_h);
    try {
      adam_step(out.params, out.optimizer, grads);
    } catch (const Error& e) {
      throw Error(e.kind(), e.detail() + " at pretraining epoch " + std::to_string(epoch));
    }
  }
  return out;
}

inline TrainedEncoder pretrain(const RunConfig& cfg, const AttributedGraph& g) {
  return pretrain(cfg, g, GraphOperators::build(g));
}

struct TrainResult {
  EncoderParams params;
  ClusterState state;
  RunReport report;
  Labels predictions;
  Matrix embeddings;
};

/// Stage two: K-means initialisation, then joint training on
/// L_GE + gamma * KL(P_hat || Q) with the target refreshed every epoch.
inline TrainResult train(const RunConfig& cfg, const AttributedGraph& g,
                         const GraphOperators& ops, TrainedEncoder start) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const int k = resolve_clusters(cfg, g);
  const LossWeights w = effective_weights(cfg);
  const SinkhornConfig sk{cfg.lambda, cfg.sinkhorn_max_iterations, cfg.sinkhorn_tolerance};

  TrainResult out;
  EncoderParams params = std::move(start.params);
  AdamState adam = std::move(start.optimizer);
  out.report.config = cfg;
  out.report.seed = cfg.seed;
  out.report.n_nodes = g.n_nodes;
  out.report.n_clusters = k;
  out.report.pretrain = std::move(start.history);

  Matrix h = forward(params, g.features).first;
  KMeansOptions km_opt;
  km_opt.restarts = cfg.kmeans_restarts;
  km_opt.max_iterations = cfg.kmeans_max_iterations;
  km_opt.seed = detail::splitmix64(cfg.seed ^ 0x6b6d65616e73ULL);
  const KMeansResult km = kmeans(h, k, km_opt);
  params.centroids = km.centroids;
  adam.reset_centroid_moments();

  ClusterState& state = out.state;
  state.dof = cfg.theta;
  state.proportions = estimate_proportions(km.assignments, k, cfg.proportion_floor);
  Labels labels = km.assignments;

  for (int epoch = 0; epoch < cfg.train_epochs; ++epoch) {
    auto [emb, cache] = forward(params, g.features);
    state.q = soft_assign(emb, params.centroids, cfg.theta);
    labels = hard_assign(state.q);
    if (cfg.proportions == ProportionMode::per_epoch) {
      state.proportions = estimate_proportions(labels, k, cfg.proportion_floor);
    }

    TrainEpoch rec;
    if (cfg.ablation.sdcn_target) {
      state.p_hat = sdcn_target(state.q);
    } else {
      try {
        SinkhornResult sr = sinkhorn_target(state.q, state.proportions, sk);
        ++out.report.sinkhorn_calls;
        rec.sinkhorn_residual = sr.residual();
        rec.sinkhorn_iterations = sr.iterations;
        state.p_hat = std::move(sr.plan);
      } catch (const NotConvergedError& e) {
        throw NotConvergedError(e.detail() + " at training epoch " + std::to_string(epoch),
                                e.residual(), e.iterations());
      }
    }

    const EncodingLoss enc = encoding_loss(emb, ops.structure, ops.attribute, w);
    const ClusteringLoss clus = clustering_loss(state.p_hat, state.q);
    const TotalLoss total = total_loss(enc, clus, w, emb, params.centroids, cfg.theta);
    detail::require_finite(total.value, "training loss", epoch);
    rec.encoding = detail::record(enc);
    rec.clustering = clus.value;
    rec.total = total.value;
    if (cfg.record_epoch_metrics && g.labels) {
      rec.metrics = evaluate(labels, *g.labels, cfg.nmi_normalization);
    }
    out.report.train.push_back(rec);

    Gradients grads = backward(params, cache, total.grad_h);
    grads.centroids = total.grad_centroids;
    try {
      adam_step(params, adam, grads);
    } catch (const Error& e) {
      throw Error(e.kind(), e.detail() + " at training epoch " + std::to_string(epoch));
    }
    if (epoch + 1 == cfg.train_epochs) out.embeddings = std::move(emb);
  }
  if (cfg.train_epochs == 0) out.embeddings = std::move(h);

  state.centroids = params.centroids;
  out.predictions = labels;
  if (g.labels) out.report.metrics = evaluate(labels, *g.labels, cfg.nmi_normalization);
  out.params = std::move(params);
  out.report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

/// pretrain followed by train on the same operators.
inline TrainResult run(const RunConfig& cfg, const AttributedGraph& g, const GraphOperators& ops) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult r = train(cfg, g, ops, pretrain(cfg, g, ops));
  r.report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline TrainResult run(const RunConfig& cfg, const AttributedGraph& g) {
  return run(cfg, g, GraphOperators::build(g));
}

// ---------------------------------------------------------------------------
// Ablations and sweeps
// ---------------------------------------------------------------------------

struct Variant {
  std::string name;
  RunConfig config;
};

/// The ablation variants, all sharing the base seed.
inline std::vector<Variant> ablation_variants(const RunConfig& base) {
  auto with = [&](auto&& edit) {
    RunConfig c = base;
    c.ablation = AblationFlags{};
    edit(c.ablation);
    return c;
  };
  return {
      {"full", with([](AblationFlags&) {})},
      {"w/o O", with([](AblationFlags& a) { a.no_structure = true; })},
      {"w/o A", with([](AblationFlags& a) { a.no_attribute = true; })},
      {"w/o OA", with([](AblationFlags& a) { a.no_encoding_trace = true; })},
      {"w/o Orthogonal", with([](AblationFlags& a) { a.no_orthogonality = true; })},
      {"w/o OptTrans", with([](AblationFlags& a) { a.sdcn_target = true; })},
  };
}

struct TableRow {
  std::string key;
  std::map<std::string, double> point;
  RunReport report;
};

namespace detail {

/// Runs independent configs, optionally on worker threads. Rows keep the
/// input order regardless of completion order.
inline std::vector<RunReport> run_all(const std::vector<RunConfig>& configs,
                                      const AttributedGraph& g, const GraphOperators& ops,
                                      int jobs) {
  std::vector<RunReport> out(configs.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < configs.size(); ++i) out[i] = run(configs[i], g, ops).report;
    return out;
  }
  std::size_t next = 0;
  while (next < configs.size()) {
    std::vector<std::future<RunReport>> batch;
    const std::size_t end = std::min(configs.size(), next + static_cast<std::size_t>(jobs));
    for (std::size_t i = next; i < end; ++i) {
      batch.push_back(std::async(std::launch::async,
                                 [&, i] { return run(configs[i], g, ops).report; }));
    }
    for (std::size_t i = next; i < end; ++i) out[i] = batch[i - next].get();
    next = end;
  }
  return out;
}

}  // namespace detail

inline std::vector<TableRow> run_ablation(const RunConfig& base, const AttributedGraph& g,
                                          int jobs = 1) {
  const GraphOperators ops = GraphOperators::build(g);
  const std::vector<Variant> variants = ablation_variants(base);
  std::vector<RunConfig> configs;
  for (const auto& v : variants) configs.push_back(v.config);
  std::vector<RunReport> reports = detail::run_all(configs, g, ops, jobs);
  std::vector<TableRow> rows;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    rows.push_back({variants[i].name, {}, std::move(reports[i])});
  }
  return rows;
}

/// One axis of a sweep: a parameter name in {alpha, beta, gamma, lambda, d}
/// and the values it takes.
struct GridAxis {
  std::string parameter;
  std::vector<double> values;
};

inline void apply_parameter(RunConfig& c, const std::string& name, double value) {
  if (name == "alpha") {
    c.alpha = value;
  } else if (name == "beta") {
    c.beta = value;
  } else if (name == "gamma") {
    c.gamma = value;
  } else if (name == "lambda") {
    c.lambda = value;
  } else if (name == "d") {
    if (value != std::floor(value) || value < 1) {
      throw Error(ErrorKind::invalid_argument, "d must be a positive integer");
    }
    c.embedding_dim = static_cast<int>(value);
  } else {
    throw Error(ErrorKind::invalid_argument, "unknown sweep parameter '" + name + "'");
  }
}

inline std::string format_point(const std::map<std::string, double>& point) {
  std::string key;
  for (const auto& [name, value] : point) {
    if (!key.empty()) key += ",";
    std::ostringstream os;
    os << name << "=" << value;
    key += os.str();
  }
  return key;
}

/// Cartesian product over the axes, one run per point, rows ordered by
/// the grid key. An empty grid (or an axis with no values) yields no rows.
inline std::vector<TableRow> run_sweep(const RunConfig& base, const AttributedGraph& g,
                                       const std::vector<GridAxis>& grid, int jobs = 1) {
  if (grid.empty()) return {};
  for (const auto& axis : grid) {
    if (axis.values.empty()) return {};
    RunConfig probe = base;
    apply_parameter(probe, axis.parameter, axis.values.front());
  }
  std::vector<std::map<std::string, double>> points{{}};
  for (const auto& axis : grid) {
    std::vector<std::map<std::string, double>> next;
    for (const auto& p : points) {
      for (double v : axis.values) {
        auto q = p;
        q[axis.parameter] = v;
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  std::vector<RunConfig> configs;
  for (const auto& p : points) {
    RunConfig c = base;
    for (const auto& [name, value] : p) apply_parameter(c, name, value);
    c.validate();
    configs.push_back(std::move(c));
  }
  const GraphOperators ops = GraphOperators::build(g);
  std::vector<RunReport> reports = detail::run_all(configs, g, ops, jobs);
  std::vector<TableRow> rows;
  for (std::size_t i = 0; i < points.size(); ++i) {
    rows.push_back({format_point(points[i]), points[i], std::move(reports[i])});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const TableRow& a, const TableRow& b) { return a.point < b.point; });
  return rows;
}

}  // namespace cutcluster
