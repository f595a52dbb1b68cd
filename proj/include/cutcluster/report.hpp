#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "cutcluster/config.hpp"
#include "cutcluster/pipeline.hpp"

namespace cutcluster {

inline Json to_json(const Metrics& m) {
  return Json{{"acc", m.acc}, {"nmi", m.nmi}, {"ari", m.ari}, {"f1", m.f1}};
}

inline Json to_json(const EncodingEpoch& e) {
  return Json{{"structure", e.structure},
              {"attribute", e.attribute},
              {"penalty", e.penalty},
              {"encoding", e.value}};
}

/// Report document with a fixed field order. Timing is the only field that
/// differs between two identical deterministic runs, so it can be left out
/// for comparisons.
inline Json to_json(const RunReport& r, bool include_timing = true) {
  Json j;
  j["config"] = to_json(r.config);
  j["seed"] = r.seed;
  j["n_nodes"] = r.n_nodes;
  j["n_clusters"] = r.n_clusters;
  j["metrics"] = r.metrics ? to_json(*r.metrics) : Json(nullptr);
  j["sinkhorn_calls"] = r.sinkhorn_calls;
  if (include_timing) j["wall_clock_seconds"] = r.wall_clock_seconds;
  Json pre = Json::array();
  for (std::size_t e = 0; e < r.pretrain.size(); ++e) {
    Json row{{"epoch", e}};
    row.update(to_json(r.pretrain[e]));
    pre.push_back(std::move(row));
  }
  j["pretrain"] = std::move(pre);
  Json tr = Json::array();
  for (std::size_t e = 0; e < r.train.size(); ++e) {
    const TrainEpoch& t = r.train[e];
    Json row{{"epoch", e}};
    row.update(to_json(t.encoding));
    row["clustering"] = t.clustering;
    row["total"] = t.total;
    row["sinkhorn_residual"] = t.sinkhorn_residual;
    row["sinkhorn_iterations"] = t.sinkhorn_iterations;
    if (t.metrics) row["metrics"] = to_json(*t.metrics);
    tr.push_back(std::move(row));
  }
  j["train"] = std::move(tr);
  return j;
}

inline std::string serialize(const RunReport& r, bool include_timing = true) {
  return to_json(r, include_timing).dump(2) + "\n";
}

/// "ACC=<v> NMI=<v> ARI=<v> F1=<v>"
inline std::string metrics_line(const Metrics& m) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "ACC=%.4f NMI=%.4f ARI=%.4f F1=%.4f", m.acc, m.nmi, m.ari, m.f1);
  return buf;
}

inline Json to_json(const std::vector<TableRow>& rows) {
  Json j = Json::array();
  for (const auto& row : rows) {
    Json point = Json::object();
    for (const auto& [k, v] : row.point) point[k] = v;
    j.push_back(Json{{"key", row.key}, {"point", point}, {"report", to_json(row.report)}});
  }
  return j;
}

/// Fixed-width comparison table of final metrics, one row per run.
inline std::string format_table(const std::vector<TableRow>& rows) {
  std::ostringstream os;
  std::size_t width = 8;
  for (const auto& r : rows) width = std::max(width, r.key.size() + 2);
  os << std::left << std::setw(static_cast<int>(width)) << "run" << std::right << std::setw(9)
     << "ACC" << std::setw(9) << "NMI" << std::setw(9) << "ARI" << std::setw(9) << "F1" << '\n';
  os << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(width)) << r.key << std::right;
    if (r.report.metrics) {
      const Metrics& m = *r.report.metrics;
      os << std::setw(9) << m.acc << std::setw(9) << m.nmi << std::setw(9) << m.ari
         << std::setw(9) << m.f1;
    } else {
      os << std::setw(36) << "(no labels)";
    }
    os << '\n';
  }
  return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io_error, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::io_error, "write failed for " + path.string());
}

}  // namespace cutcluster
