#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cutcluster/cutcluster.hpp"

namespace cc = cutcluster;

namespace {

// Values collected from the command line. Only flags the user actually
// passed are applied on top of the config file.
struct Overrides {
  std::string config_path;
  std::string dataset;
  int n_clusters = 0;
  int embedding_dim = 0;
  std::vector<int> hidden_dims;
  double learning_rate = 0, weight_decay = 0, alpha = 0, beta = 0, gamma = 0, lambda = 0,
         theta = 0, proportion_floor = 0;
  int pretrain_epochs = 0, train_epochs = 0;
  std::uint64_t seed = 0;
  std::string proportions, nmi;
  bool deterministic = true;
  bool no_structure = false, no_attribute = false, no_encoding_trace = false,
       no_orthogonality = false, sdcn_target = false, record_epoch_metrics = false;

  bool synthetic = false;
  cc::SyntheticSpec spec;

  // One entry per subcommand that registers the flag.
  std::map<std::string, std::vector<CLI::Option*>> opts;
};

void add_run_flags(CLI::App* app, Overrides& o) {
  auto& m = o.opts;
  m["config"].push_back(app->add_option("--config", o.config_path, "JSON config file"));
  m["dataset"].push_back(app->add_option("--dataset", o.dataset, "dataset manifest"));
  m["n_clusters"].push_back(app->add_option("--n-clusters", o.n_clusters, "number of clusters"));
  m["embedding_dim"].push_back(app->add_option("-d,--embedding-dim", o.embedding_dim));
  m["hidden_dims"].push_back(app->add_option("--hidden-dims", o.hidden_dims)->delimiter(','));
  m["learning_rate"].push_back(app->add_option("--lr,--learning-rate", o.learning_rate));
  m["weight_decay"].push_back(app->add_option("--wd,--weight-decay", o.weight_decay));
  m["alpha"].push_back(app->add_option("--alpha", o.alpha));
  m["beta"].push_back(app->add_option("--beta", o.beta));
  m["gamma"].push_back(app->add_option("--gamma", o.gamma));
  m["lambda"].push_back(app->add_option("--lambda", o.lambda));
  m["theta"].push_back(app->add_option("--theta", o.theta));
  m["pretrain_epochs"].push_back(app->add_option("--pretrain-epochs", o.pretrain_epochs));
  m["train_epochs"].push_back(app->add_option("--train-epochs", o.train_epochs));
  m["seed"].push_back(app->add_option("--seed", o.seed));
  m["proportions"].push_back(app->add_option("--proportions", o.proportions)
                         ->check(CLI::IsMember({"fixed", "per-epoch"})));
  m["proportion_floor"].push_back(app->add_option("--proportion-floor", o.proportion_floor));
  m["nmi"].push_back(app->add_option("--nmi", o.nmi)->check(CLI::IsMember({"geometric", "arithmetic"})));
  m["deterministic"].push_back(app->add_flag("--deterministic,!--no-deterministic", o.deterministic));
  m["no_structure"].push_back(app->add_flag("--no-structure", o.no_structure));
  m["no_attribute"].push_back(app->add_flag("--no-attribute", o.no_attribute));
  m["no_encoding_trace"].push_back(app->add_flag("--no-encoding-trace", o.no_encoding_trace));
  m["no_orthogonality"].push_back(app->add_flag("--no-orthogonality", o.no_orthogonality));
  m["sdcn_target"].push_back(app->add_flag("--sdcn-target", o.sdcn_target));
  m["record_epoch_metrics"].push_back(app->add_flag("--record-epoch-metrics", o.record_epoch_metrics));
}

void add_synthetic_flags(CLI::App* app, Overrides& o) {
  auto& m = o.opts;
  m["synthetic"].push_back(app->add_flag("--synthetic", o.synthetic, "use the synthetic generator"));
  m["blocks"].push_back(app->add_option("--blocks", o.spec.blocks));
  m["nodes_per_block"].push_back(app->add_option("--nodes-per-block", o.spec.nodes_per_block));
  m["p_in"].push_back(app->add_option("--p-in", o.spec.p_in));
  m["p_out"].push_back(app->add_option("--p-out", o.spec.p_out));
  m["feature_dim"].push_back(app->add_option("--feature-dim", o.spec.feature_dim));
  m["feature_separation"].push_back(app->add_option("--feature-separation", o.spec.feature_separation));
  m["synthetic_seed"].push_back(app->add_option("--synthetic-seed", o.spec.seed));
}

bool given(const Overrides& o, const std::string& name) {
  auto it = o.opts.find(name);
  if (it == o.opts.end()) return false;
  for (const CLI::Option* opt : it->second) {
    if (opt->count() > 0) return true;
  }
  return false;
}

cc::SyntheticSpec synthetic_spec(const Overrides& o, cc::SyntheticSpec s) {
  if (given(o, "blocks")) s.blocks = o.spec.blocks;
  if (given(o, "nodes_per_block")) s.nodes_per_block = o.spec.nodes_per_block;
  if (given(o, "p_in")) s.p_in = o.spec.p_in;
  if (given(o, "p_out")) s.p_out = o.spec.p_out;
  if (given(o, "feature_dim")) s.feature_dim = o.spec.feature_dim;
  if (given(o, "feature_separation")) s.feature_separation = o.spec.feature_separation;
  if (given(o, "synthetic_seed")) s.seed = o.spec.seed;
  return s;
}

cc::RunConfig build_config(const Overrides& o) {
  cc::RunConfig c;
  if (given(o, "config")) c = cc::load_config(o.config_path);
  if (given(o, "dataset")) {
    c.dataset = o.dataset;
    c.synthetic.reset();
  }
  if (given(o, "n_clusters")) c.n_clusters = o.n_clusters;
  if (given(o, "embedding_dim")) c.embedding_dim = o.embedding_dim;
  if (given(o, "hidden_dims")) c.hidden_dims = o.hidden_dims;
  if (given(o, "learning_rate")) c.learning_rate = o.learning_rate;
  if (given(o, "weight_decay")) c.weight_decay = o.weight_decay;
  if (given(o, "alpha")) c.alpha = o.alpha;
  if (given(o, "beta")) c.beta = o.beta;
  if (given(o, "gamma")) c.gamma = o.gamma;
  if (given(o, "lambda")) c.lambda = o.lambda;
  if (given(o, "theta")) c.theta = o.theta;
  if (given(o, "pretrain_epochs")) c.pretrain_epochs = o.pretrain_epochs;
  if (given(o, "train_epochs")) c.train_epochs = o.train_epochs;
  if (given(o, "seed")) c.seed = o.seed;
  if (given(o, "proportions")) {
    c.proportions = o.proportions == "fixed" ? cc::ProportionMode::fixed
                                             : cc::ProportionMode::per_epoch;
  }
  if (given(o, "proportion_floor")) c.proportion_floor = o.proportion_floor;
  if (given(o, "nmi")) {
    c.nmi_normalization = o.nmi == "geometric" ? cc::NmiNormalization::geometric
                                               : cc::NmiNormalization::arithmetic;
  }
  if (given(o, "deterministic")) c.deterministic = o.deterministic;
  if (given(o, "no_structure")) c.ablation.no_structure = o.no_structure;
  if (given(o, "no_attribute")) c.ablation.no_attribute = o.no_attribute;
  if (given(o, "no_encoding_trace")) c.ablation.no_encoding_trace = o.no_encoding_trace;
  if (given(o, "no_orthogonality")) c.ablation.no_orthogonality = o.no_orthogonality;
  if (given(o, "sdcn_target")) c.ablation.sdcn_target = o.sdcn_target;
  if (given(o, "record_epoch_metrics")) c.record_epoch_metrics = o.record_epoch_metrics;

  const bool any_synthetic = given(o, "synthetic") || given(o, "blocks") ||
                             given(o, "nodes_per_block") || given(o, "p_in") ||
                             given(o, "p_out") || given(o, "feature_dim") ||
                             given(o, "feature_separation") || given(o, "synthetic_seed");
  if (any_synthetic) {
    c.dataset.clear();
    c.synthetic = synthetic_spec(o, c.synthetic.value_or(cc::SyntheticSpec{}));
  }
  c.validate();
  return c;
}

cc::AttributedGraph load_graph(const cc::RunConfig& cfg) {
  std::vector<std::string> warnings;
  cc::AttributedGraph g = cc::resolve_graph(cfg, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  return g;
}

cc::GridAxis parse_axis(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw cc::Error(cc::ErrorKind::invalid_argument, "grid axis must be name=v1,v2,...: " + text);
  }
  cc::GridAxis axis{text.substr(0, eq), {}};
  std::stringstream rest(text.substr(eq + 1));
  std::string item;
  while (std::getline(rest, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      axis.values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw cc::Error(cc::ErrorKind::parse_error, "bad grid value '" + item + "'");
    }
  }
  return axis;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cut-informed graph embedding and clustering"};
  app.require_subcommand(1);

  Overrides o;
  std::string out;
  bool metrics_only = false;
  bool project_2d = false;
  bool print_config = false;
  int jobs = 1;
  std::vector<std::string> grid;
  std::string out_dir = ".";
  std::string name = "synthetic";

  auto* run = app.add_subcommand("run", "pretrain + train, report metrics");
  add_run_flags(run, o);
  add_synthetic_flags(run, o);
  run->add_option("--out", out, "write the run report (JSON)");
  run->add_flag("--metrics-only", metrics_only, "print only the final metrics line");
  run->add_flag("--print-config", print_config, "print the effective config and exit");

  auto* pre = app.add_subcommand("pretrain", "encoder pretraining only");
  add_run_flags(pre, o);
  add_synthetic_flags(pre, o);
  pre->add_option("--out", out, "write the per-epoch encoding losses (JSON)");

  auto* abl = app.add_subcommand("ablate", "run the ablation variants");
  add_run_flags(abl, o);
  add_synthetic_flags(abl, o);
  abl->add_option("--out", out, "write all reports (JSON)");
  abl->add_option("--jobs", jobs, "concurrent runs")->check(CLI::PositiveNumber);

  auto* swp = app.add_subcommand("sweep", "hyperparameter grid");
  add_run_flags(swp, o);
  add_synthetic_flags(swp, o);
  swp->add_option("--grid", grid, "axis as name=v1,v2 (alpha, beta, gamma, lambda, d)");
  swp->add_option("--out", out, "write all reports (JSON)");
  swp->add_option("--jobs", jobs, "concurrent runs")->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic dataset to disk");
  add_synthetic_flags(gen, o);
  gen->add_option("--out-dir", out_dir, "output directory");
  gen->add_option("--name", name, "dataset name");

  auto* exp = app.add_subcommand("export", "train and write embeddings as CSV");
  add_run_flags(exp, o);
  add_synthetic_flags(exp, o);
  exp->add_option("--out", out, "CSV path")->required();
  exp->add_flag("--project-2d", project_2d, "append the top-2 principal components");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const cc::SyntheticSpec spec = synthetic_spec(o, cc::SyntheticSpec{});
      const auto path = cc::write_dataset(cc::generate_synthetic(spec), out_dir, name);
      std::cout << path.string() << '\n';
      return 0;
    }

    const cc::RunConfig cfg = build_config(o);
    if (print_config) {
      std::cout << cc::serialize(cfg);
      return 0;
    }
    const cc::AttributedGraph g = load_graph(cfg);

    if (run->parsed()) {
      const cc::TrainResult r = cc::run(cfg, g);
      if (!out.empty()) cc::write_text(out, cc::serialize(r.report));
      if (r.report.metrics) {
        std::cout << cc::metrics_line(*r.report.metrics) << '\n';
      } else if (!metrics_only) {
        std::cout << "no ground-truth labels; " << r.predictions.size() << " nodes clustered\n";
      }
      return 0;
    }
    if (pre->parsed()) {
      const cc::TrainedEncoder enc = cc::pretrain(cfg, g);
      cc::Json j = cc::Json::array();
      for (std::size_t e = 0; e < enc.history.size(); ++e) {
        cc::Json row{{"epoch", e}};
        row.update(cc::to_json(enc.history[e]));
        j.push_back(std::move(row));
      }
      if (!out.empty()) cc::write_text(out, j.dump(2) + "\n");
      if (!enc.history.empty()) {
        std::cout << "encoding loss " << enc.history.front().value << " -> "
                  << enc.history.back().value << '\n';
      }
      return 0;
    }
    if (abl->parsed() || swp->parsed()) {
      std::vector<cc::TableRow> rows;
      if (abl->parsed()) {
        rows = cc::run_ablation(cfg, g, jobs);
      } else {
        std::vector<cc::GridAxis> axes;
        for (const auto& a : grid) axes.push_back(parse_axis(a));
        rows = cc::run_sweep(cfg, g, axes, jobs);
      }
      if (!out.empty()) cc::write_text(out, cc::to_json(rows).dump(2) + "\n");
      std::cout << cc::format_table(rows);
      return 0;
    }
    if (exp->parsed()) {
      const cc::TrainResult r = cc::run(cfg, g);
      cc::export_embeddings(r.embeddings, g.labels, r.predictions, out, project_2d);
      if (r.report.metrics) std::cout << cc::metrics_line(*r.report.metrics) << '\n';
      return 0;
    }
  } catch (const cc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
