#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cutcluster/dataset.hpp"
#include "cutcluster/error.hpp"
#include "cutcluster/metrics.hpp"

namespace cutcluster {

enum class ProportionMode { fixed, per_epoch };

struct AblationFlags {
  bool no_structure = false;       // alpha forced to 0
  bool no_attribute = false;       // alpha forced to 1
  bool no_encoding_trace = false;  // both trace terms dropped
  bool no_orthogonality = false;   // beta forced to 0
  bool sdcn_target = false;        // sharpened target instead of OT

  bool operator==(const AblationFlags&) const = default;
};

struct RunConfig {
  std::string dataset;                     // manifest path, empty when synthetic
  std::optional<SyntheticSpec> synthetic;  // used when dataset is empty
  int n_clusters = 0;                      // 0 = take n_classes from the data
  int embedding_dim = 16;
  std::vector<int> hidden_dims{256};
  double learning_rate = 0.005;
  double weight_decay = 0.005;
  double alpha = 0.5;
  double beta = 3.0;
  double gamma = 0.5;
  double lambda = 5.0;
  double theta = 1.0;
  int pretrain_epochs = 100;
  int train_epochs = 100;
  std::uint64_t seed = 0;
  AblationFlags ablation;
  ProportionMode proportions = ProportionMode::fixed;
  double proportion_floor = -1.0;  // negative = 1 / (10 K)
  int sinkhorn_max_iterations = 1000;
  double sinkhorn_tolerance = 1e-6;
  int kmeans_restarts = 10;
  int kmeans_max_iterations = 300;
  NmiNormalization nmi_normalization = NmiNormalization::geometric;
  bool record_epoch_metrics = false;
  bool deterministic = true;

  void validate() const {
    auto bad = [](const std::string& what) { throw Error(ErrorKind::invalid_argument, what); };
    if (n_clusters < 0) bad("n_clusters must be >= 0");
    if (embedding_dim <= 0) bad("embedding_dim must be positive");
    for (int h : hidden_dims) {
      if (h <= 0) bad("hidden_dims must be positive");
    }
    if (!(learning_rate > 0.0)) bad("learning_rate must be positive");
    if (!(weight_decay >= 0.0)) bad("weight_decay must be >= 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) bad("alpha must lie in [0, 1]");
    if (!(beta >= 0.0)) bad("beta must be >= 0");
    if (!(gamma >= 0.0)) bad("gamma must be >= 0");
    if (!(lambda > 0.0)) bad("lambda must be positive");
    if (!(theta > 0.0)) bad("theta must be positive");
    if (pretrain_epochs < 0 || train_epochs < 0) bad("epoch counts must be >= 0");
    if (ablation.no_structure && ablation.no_attribute) {
      bad("no_structure and no_attribute are mutually exclusive");
    }
    if (sinkhorn_max_iterations <= 0) bad("sinkhorn_max_iterations must be positive");
    if (!(sinkhorn_tolerance > 0.0)) bad("sinkhorn_tolerance must be positive");
    if (kmeans_restarts <= 0 || kmeans_max_iterations <= 0) bad("k-means limits must be positive");
  }
};

using Json = nlohmann::ordered_json;

inline Json to_json(const SyntheticSpec& s) {
  Json j;
  j["blocks"] = s.blocks;
  j["nodes_per_block"] = s.nodes_per_block;
  j["p_in"] = s.p_in;
  j["p_out"] = s.p_out;
  j["feature_dim"] = s.feature_dim;
  j["feature_separation"] = s.feature_separation;
  j["seed"] = s.seed;
  return j;
}

inline Json to_json(const RunConfig& c) {
  Json j;
  j["dataset"] = c.dataset;
  j["synthetic"] = c.synthetic ? to_json(*c.synthetic) : Json(nullptr);
  j["n_clusters"] = c.n_clusters;
  j["embedding_dim"] = c.embedding_dim;
  j["hidden_dims"] = c.hidden_dims;
  j["learning_rate"] = c.learning_rate;
  j["weight_decay"] = c.weight_decay;
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["gamma"] = c.gamma;
  j["lambda"] = c.lambda;
  j["theta"] = c.theta;
  j["pretrain_epochs"] = c.pretrain_epochs;
  j["train_epochs"] = c.train_epochs;
  j["seed"] = c.seed;
  j["ablation"] = {{"no_structure", c.ablation.no_structure},
                   {"no_attribute", c.ablation.no_attribute},
                   {"no_encoding_trace", c.ablation.no_encoding_trace},
                   {"no_orthogonality", c.ablation.no_orthogonality},
                   {"sdcn_target", c.ablation.sdcn_target}};
  j["proportions"] = c.proportions == ProportionMode::fixed ? "fixed" : "per-epoch";
  j["proportion_floor"] = c.proportion_floor;
  j["sinkhorn_max_iterations"] = c.sinkhorn_max_iterations;
  j["sinkhorn_tolerance"] = c.sinkhorn_tolerance;
  j["kmeans_restarts"] = c.kmeans_restarts;
  j["kmeans_max_iterations"] = c.kmeans_max_iterations;
  j["nmi_normalization"] =
      c.nmi_normalization == NmiNormalization::geometric ? "geometric" : "arithmetic";
  j["record_epoch_metrics"] = c.record_epoch_metrics;
  j["deterministic"] = c.deterministic;
  return j;
}

namespace detail {

template <typename T>
void read_field(const Json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) {
    try {
      out = it->get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::parse_error, std::string("config field '") + key + "': " + e.what());
    }
  }
}

inline void reject_unknown(const Json& j, std::initializer_list<const char*> known,
                           const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::parse_error, where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw Error(ErrorKind::parse_error, where + ": unknown key '" + key + "'");
  }
}

}  // namespace detail

inline SyntheticSpec synthetic_from_json(const Json& j, SyntheticSpec s = {}) {
  detail::reject_unknown(j,
                         {"blocks", "nodes_per_block", "p_in", "p_out", "feature_dim",
                          "feature_separation", "seed"},
                         "synthetic");
  detail::read_field(j, "blocks", s.blocks);
  detail::read_field(j, "nodes_per_block", s.nodes_per_block);
  detail::read_field(j, "p_in", s.p_in);
  detail::read_field(j, "p_out", s.p_out);
  detail::read_field(j, "feature_dim", s.feature_dim);
  detail::read_field(j, "feature_separation", s.feature_separation);
  detail::read_field(j, "seed", s.seed);
  return s;
}

/// Overlays the keys present in `j` onto `base`; missing keys keep their
/// values, unknown keys are an error.
inline RunConfig config_from_json(const Json& j, RunConfig c = {}) {
  detail::reject_unknown(
      j,
      {"dataset", "synthetic", "n_clusters", "embedding_dim", "hidden_dims", "learning_rate",
       "weight_decay", "alpha", "beta", "gamma", "lambda", "theta", "pretrain_epochs",
       "train_epochs", "seed", "ablation", "proportions", "proportion_floor",
       "sinkhorn_max_iterations", "sinkhorn_tolerance", "kmeans_restarts",
       "kmeans_max_iterations", "nmi_normalization", "record_epoch_metrics", "deterministic"},
      "config");
  detail::read_field(j, "dataset", c.dataset);
  if (auto it = j.find("synthetic"); it != j.end()) {
    if (it->is_null()) {
      c.synthetic.reset();
    } else {
      c.synthetic = synthetic_from_json(*it, c.synthetic.value_or(SyntheticSpec{}));
    }
  }
  detail::read_field(j, "n_clusters", c.n_clusters);
  detail::read_field(j, "embedding_dim", c.embedding_dim);
  detail::read_field(j, "hidden_dims", c.hidden_dims);
  detail::read_field(j, "learning_rate", c.learning_rate);
  detail::read_field(j, "weight_decay", c.weight_decay);
  detail::read_field(j, "alpha", c.alpha);
  detail::read_field(j, "beta", c.beta);
  detail::read_field(j, "gamma", c.gamma);
  detail::read_field(j, "lambda", c.lambda);
  detail::read_field(j, "theta", c.theta);
  detail::read_field(j, "pretrain_epochs", c.pretrain_epochs);
  detail::read_field(j, "train_epochs", c.train_epochs);
  detail::read_field(j, "seed", c.seed);
  if (auto it = j.find("ablation"); it != j.end() && !it->is_null()) {
    detail::reject_unknown(*it,
                           {"no_structure", "no_attribute", "no_encoding_trace",
                            "no_orthogonality", "sdcn_target"},
                           "ablation");
    detail::read_field(*it, "no_structure", c.ablation.no_structure);
    detail::read_field(*it, "no_attribute", c.ablation.no_attribute);
    detail::read_field(*it, "no_encoding_trace", c.ablation.no_encoding_trace);
    detail::read_field(*it, "no_orthogonality", c.ablation.no_orthogonality);
    detail::read_field(*it, "sdcn_target", c.ablation.sdcn_target);
  }
  if (auto it = j.find("proportions"); it != j.end() && !it->is_null()) {
    const auto mode = it->get<std::string>();
    if (mode == "fixed") {
      c.proportions = ProportionMode::fixed;
    } else if (mode == "per-epoch") {
      c.proportions = ProportionMode::per_epoch;
    } else {
      throw Error(ErrorKind::parse_error, "proportions must be 'fixed' or 'per-epoch'");
    }
  }
  detail::read_field(j, "proportion_floor", c.proportion_floor);
  detail::read_field(j, "sinkhorn_max_iterations", c.sinkhorn_max_iterations);
  detail::read_field(j, "sinkhorn_tolerance", c.sinkhorn_tolerance);
  detail::read_field(j, "kmeans_restarts", c.kmeans_restarts);
  detail::read_field(j, "kmeans_max_iterations", c.kmeans_max_iterations);
  if (auto it = j.find("nmi_normalization"); it != j.end() && !it->is_null()) {
    const auto mode = it->get<std::string>();
    if (mode == "geometric") {
      c.nmi_normalization = NmiNormalization::geometric;
    } else if (mode == "arithmetic") {
      c.nmi_normalization = NmiNormalization::arithmetic;
    } else {
      throw Error(ErrorKind::parse_error, "nmi_normalization must be 'geometric' or 'arithmetic'");
    }
  }
  detail::read_field(j, "record_epoch_metrics", c.record_epoch_metrics);
  detail::read_field(j, "deterministic", c.deterministic);
  return c;
}

inline std::string serialize(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

inline RunConfig parse_config(const std::string& text, const RunConfig& base = {}) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::parse_error, std::string("config: ") + e.what());
  }
  return config_from_json(j, base);
}

inline RunConfig load_config(const std::filesystem::path& path, const RunConfig& base = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str(), base);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.detail());
  }
}

}  // namespace cutcluster
