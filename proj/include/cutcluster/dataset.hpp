#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cutcluster/graph.hpp"

namespace cutcluster {

// Manifest format (UTF-8, one key=value per line, '#' starts a comment):
//
//   name=cora
//   n_nodes=2708
//   n_features=1433
//   n_classes=7
//   edges_file=cora.edges        one "src<TAB>dst" pair per line, 0-based
//   features_file=cora.features  one row of n_features reals per node
//   labels_file=cora.labels      optional, one 0-based class per line
//
// Relative file paths are resolved against the manifest's directory.

struct DatasetManifest {
  std::string name;
  int n_nodes = 0;
  int n_features = 0;
  int n_classes = 0;
  std::filesystem::path edges_file;
  std::filesystem::path features_file;
  std::filesystem::path labels_file;  // empty when absent
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string where(const std::filesystem::path& file, std::size_t line) {
  return file.string() + ":" + std::to_string(line);
}

template <typename T>
T parse_number(std::string_view token, const std::filesystem::path& file, std::size_t line) {
  T value{};
  const char* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorKind::parse_error,
                where(file, line) + ": cannot parse '" + std::string(token) + "'");
  }
  return value;
}

inline std::ifstream open_input(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + file.string());
  return in;
}

}  // namespace detail

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in = detail::open_input(path);
  std::map<std::string, std::string, std::less<>> kv;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view s = detail::trim(raw);
    if (s.empty() || s.front() == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::parse_error, detail::where(path, line) + ": expected key=value");
    }
    kv[std::string(detail::trim(s.substr(0, eq)))] = std::string(detail::trim(s.substr(eq + 1)));
  }
  auto required = [&](std::string_view key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) {
      throw Error(ErrorKind::parse_error,
                  path.string() + ": missing manifest key '" + std::string(key) + "'");
    }
    return it->second;
  };
  auto as_int = [&](std::string_view key) {
    const int v = detail::parse_number<int>(required(key), path, 0);
    if (v <= 0) {
      throw Error(ErrorKind::parse_error,
                  path.string() + ": '" + std::string(key) + "' must be positive");
    }
    return v;
  };
  const std::filesystem::path base = path.parent_path();
  DatasetManifest m;
  if (auto it = kv.find("name"); it != kv.end()) m.name = it->second;
  m.n_nodes = as_int("n_nodes");
  m.n_features = as_int("n_features");
  m.n_classes = as_int("n_classes");
  m.edges_file = base / required("edges_file");
  m.features_file = base / required("features_file");
  if (auto it = kv.find("labels_file"); it != kv.end() && !it->second.empty()) {
    m.labels_file = base / it->second;
  }
  return m;
}

/// Reads a dataset described by a manifest. Edges are symmetrized,
/// deduplicated and binarized; any weight column or duplicate is reported
/// through `warnings` when given.
inline AttributedGraph load_dataset(const std::filesystem::path& manifest_path,
                                    std::vector<std::string>* warnings = nullptr) {
  const DatasetManifest m = read_manifest(manifest_path);
  AttributedGraph g;
  g.n_nodes = m.n_nodes;
  g.n_classes = m.n_classes;

  {
    std::ifstream in = detail::open_input(m.edges_file);
    std::vector<std::pair<int, int>> edges;
    std::string raw;
    std::size_t line = 0;
    std::size_t weighted = 0;
    while (std::getline(in, raw)) {
      ++line;
      const auto tok = detail::split_ws(raw);
      if (tok.empty() || tok.front().front() == '#') continue;
      if (tok.size() != 2 && tok.size() != 3) {
        throw Error(ErrorKind::parse_error,
                    detail::where(m.edges_file, line) + ": expected 'src<TAB>dst'");
      }
      const auto u = detail::parse_number<long long>(tok[0], m.edges_file, line);
      const auto v = detail::parse_number<long long>(tok[1], m.edges_file, line);
      if (u < 0 || v < 0 || u >= m.n_nodes || v >= m.n_nodes) {
        throw Error(ErrorKind::out_of_range, detail::where(m.edges_file, line) +
                                                 ": node id out of range (" +
                                                 std::to_string(u) + ", " + std::to_string(v) +
                                                 ") with n_nodes=" + std::to_string(m.n_nodes));
      }
      if (tok.size() == 3) {
        const double w = detail::parse_number<double>(tok[2], m.edges_file, line);
        ++weighted;
        if (w == 0.0) continue;
      }
      edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
    }
    g.adjacency = adjacency_from_edges(m.n_nodes, edges);
    if (warnings) {
      if (weighted > 0) {
        warnings->push_back(m.edges_file.string() + ": " + std::to_string(weighted) +
                            " weighted edges binarized");
      }
      // Listing an edge once per direction is normal; repeating the same
      // ordered pair is a multi-edge.
      std::vector<std::pair<int, int>> sorted = edges;
      std::sort(sorted.begin(), sorted.end());
      const auto distinct = static_cast<std::size_t>(
          std::unique(sorted.begin(), sorted.end()) - sorted.begin());
      if (distinct < edges.size()) {
        warnings->push_back(m.edges_file.string() + ": " +
                            std::to_string(edges.size() - distinct) +
                            " repeated edges collapsed");
      }
    }
  }

  {
    std::ifstream in = detail::open_input(m.features_file);
    g.features.resize(m.n_nodes, m.n_features);
    std::string raw;
    std::size_t line = 0;
    int row = 0;
    while (std::getline(in, raw)) {
      ++line;
      const auto tok = detail::split_ws(raw);
      if (tok.empty()) continue;
      if (row >= m.n_nodes) {
        throw Error(ErrorKind::shape_mismatch, detail::where(m.features_file, line) +
                                                   ": more feature rows than n_nodes=" +
                                                   std::to_string(m.n_nodes));
      }
      if (static_cast<int>(tok.size()) != m.n_features) {
        throw Error(ErrorKind::shape_mismatch,
                    detail::where(m.features_file, line) + ": expected " +
                        std::to_string(m.n_features) + " values, found " +
                        std::to_string(tok.size()));
      }
      for (int c = 0; c < m.n_features; ++c) {
        g.features(row, c) =
            detail::parse_number<double>(tok[static_cast<std::size_t>(c)], m.features_file, line);
      }
      ++row;
    }
    if (row != m.n_nodes) {
      throw Error(ErrorKind::shape_mismatch, m.features_file.string() + ": " +
                                                 std::to_string(row) + " feature rows, manifest says " +
                                                 std::to_string(m.n_nodes));
    }
  }

  if (!m.labels_file.empty()) {
    std::ifstream in = detail::open_input(m.labels_file);
    Labels labels;
    labels.reserve(static_cast<std::size_t>(m.n_nodes));
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
      ++line;
      const std::string_view s = detail::trim(raw);
      if (s.empty()) continue;
      const int y = detail::parse_number<int>(s, m.labels_file, line);
      if (y < 0 || y >= m.n_classes) {
        throw Error(ErrorKind::out_of_range, detail::where(m.labels_file, line) + ": label " +
                                                 std::to_string(y) + " outside [0, " +
                                                 std::to_string(m.n_classes) + ")");
      }
      labels.push_back(y);
    }
    if (static_cast<int>(labels.size()) != m.n_nodes) {
      throw Error(ErrorKind::shape_mismatch, m.labels_file.string() + ": " +
                                                 std::to_string(labels.size()) +
                                                 " labels, manifest says " +
                                                 std::to_string(m.n_nodes));
    }
    g.labels = std::move(labels);
  }
  return g;
}

/// Writes `<dir>/<name>.manifest` plus edge/feature/label files. Each
/// undirected edge is written once with src <= dst.
inline std::filesystem::path write_dataset(const AttributedGraph& g,
                                           const std::filesystem::path& dir,
                                           const std::string& name) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  auto open = [](const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw Error(ErrorKind::io_error, "cannot write " + p.string());
    return out;
  };
  {
    std::ofstream out = open(dir / (name + ".edges"));
    for (int i = 0; i < g.adjacency.outerSize(); ++i) {
      for (SparseMatrix::InnerIterator it(g.adjacency, i); it; ++it) {
        if (it.col() >= i && it.value() != 0.0) out << i << '\t' << it.col() << '\n';
      }
    }
  }
  {
    std::ofstream out = open(dir / (name + ".features"));
    out << std::setprecision(17);
    for (Eigen::Index i = 0; i < g.features.rows(); ++i) {
      for (Eigen::Index c = 0; c < g.features.cols(); ++c) {
        if (c) out << ' ';
        out << g.features(i, c);
      }
      out << '\n';
    }
  }
  if (g.labels) {
    std::ofstream out = open(dir / (name + ".labels"));
    for (int y : *g.labels) out << y << '\n';
  }
  const std::filesystem::path manifest = dir / (name + ".manifest");
  std::ofstream out = open(manifest);
  out << "name=" << name << '\n'
      << "n_nodes=" << g.n_nodes << '\n'
      << "n_features=" << g.n_features() << '\n'
      << "n_classes=" << g.n_classes.value_or(1) << '\n'
      << "edges_file=" << name << ".edges\n"
      << "features_file=" << name << ".features\n";
  if (g.labels) out << "labels_file=" << name << ".labels\n";
  return manifest;
}

/// Stochastic block model with Gaussian feature blobs.
struct SyntheticSpec {
  int blocks = 3;
  int nodes_per_block = 20;
  double p_in = 0.9;
  double p_out = 0.05;
  int feature_dim = 8;
  /// Distance between block means, in units of the unit noise deviation.
  double feature_separation = 6.0;
  std::uint64_t seed = 0;
};

inline AttributedGraph generate_synthetic(const SyntheticSpec& spec) {
  if (spec.blocks <= 0 || spec.nodes_per_block <= 0 || spec.feature_dim <= 0) {
    throw Error(ErrorKind::invalid_argument, "blocks, nodes_per_block and feature_dim must be positive");
  }
  if (!(spec.p_out >= 0.0 && spec.p_out < spec.p_in && spec.p_in <= 1.0)) {
    throw Error(ErrorKind::invalid_argument, "need 0 <= p_out < p_in <= 1");
  }
  if (!(spec.feature_separation >= 0.0)) {
    throw Error(ErrorKind::invalid_argument, "feature_separation must be >= 0");
  }
  const int k = spec.blocks;
  const int n = k * spec.nodes_per_block;
  std::mt19937_64 rng(spec.seed);

  AttributedGraph g;
  g.n_nodes = n;
  g.n_classes = k;
  Labels labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i / spec.nodes_per_block;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const bool same = labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)];
      if (unit(rng) < (same ? spec.p_in : spec.p_out)) edges.emplace_back(i, j);
    }
  }
  g.adjacency = adjacency_from_edges(n, edges);

  // Block means sit on scaled coordinate axes when there is room, which
  // puts every pair exactly feature_separation apart; otherwise on random
  // directions of length separation / sqrt(2).
  std::normal_distribution<double> normal(0.0, 1.0);
  const double radius = spec.feature_separation / std::sqrt(2.0);
  Matrix means = Matrix::Zero(k, spec.feature_dim);
  for (int b = 0; b < k; ++b) {
    if (spec.feature_dim >= k) {
      means(b, b) = radius;
    } else {
      Vector dir(spec.feature_dim);
      for (int c = 0; c < spec.feature_dim; ++c) dir[c] = normal(rng);
      means.row(b) = radius * dir.normalized().transpose();
    }
  }
  g.features.resize(n, spec.feature_dim);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < spec.feature_dim; ++c) {
      g.features(i, c) = means(labels[static_cast<std::size_t>(i)], c) + normal(rng);
    }
  }
  g.labels = std::move(labels);
  return g;
}

}  // namespace cutcluster
