// Command-line driver: generate datasets, train models, explain predictions,
// benchmark explanation methods, and build class prototypes. Every command is
// a pure function of its inputs and seed; outputs embed config + seed +
// version for provenance.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gnnx/baselines.hpp"
#include "gnnx/evaluation.hpp"
#include "gnnx/explainer.hpp"
#include "gnnx/gnn.hpp"
#include "gnnx/io.hpp"
#include "gnnx/prototype.hpp"
#include "gnnx/synthgen.hpp"

namespace {

using json = nlohmann::json;
using namespace gnnx;

// GNNX_SEED overrides every per-command --seed for whole-run reproducibility.
std::uint64_t effective_seed(std::uint64_t flag_seed) {
  if (const char* env = std::getenv("GNNX_SEED")) return std::stoull(env);
  return flag_seed;
}

bool is_graphset_file(const std::string& text) {
  json j = json::parse(text);
  return j.at("meta").at("kind") == "graphset";
}

int max_label(const std::vector<int>& labels) {
  int out = 0;
  for (int l : labels) out = std::max(out, l);
  return out;
}

// one-line provenance blob stamped into artifacts
std::string provenance_line(const ExperimentConfig& config) {
  json j = json::parse(experiment_to_json(config));
  return j.dump();
}

struct ExplainerFlags {
  ExplainerConfig config;

  void attach(CLI::App* cmd) {
    cmd->add_option("--explainer-epochs", config.epochs, "mask optimization epochs");
    cmd->add_option("--explainer-lr", config.lr, "mask optimization learning rate");
    cmd->add_option("--lambda-size", config.lambda_size, "edge mask size penalty");
    cmd->add_option("--lambda-entropy", config.lambda_entropy, "mask entropy penalty");
    cmd->add_option("--lambda-laplacian", config.lambda_laplacian,
                    "label-smoothness penalty (node tasks)");
    cmd->add_option("--lambda-feat", config.lambda_feat, "feature mask size penalty");
    cmd->add_option("--k-edges", config.k_edges, "edges kept in the explanation");
    cmd->add_option("--k-features", config.k_features, "feature dimensions kept");
    cmd->add_option("--samples-z", config.samples_z, "feature noise draws per epoch");
  }
};

ExperimentConfig make_experiment(const std::string& dataset, std::uint64_t seed,
                                 const GnnConfig& model, const ExplainerConfig& explainer,
                                 const std::vector<std::string>& methods,
                                 const std::string& out_dir) {
  ExperimentConfig c;
  c.dataset = dataset;
  c.seed = seed;
  c.model = model;
  c.explainer = explainer;
  c.methods = methods;
  c.out_dir = out_dir;
  return c;
}

// importance scores wrapped in the explanation container so one exporter
// serves every method; selection is top-k with ties
Explanation scores_as_explanation(const ImportanceScores& scores,
                                  const ComputationGraph& cg, int k_edges,
                                  int predicted) {
  ExplainerMasks masks;
  // exporter expects logits; an increasing map preserves the ranking and
  // sigma maps the typical score range into (0, 1)
  masks.edge_logits = scores.edge_scores.unaryExpr(
      [](double s) { return std::log((s + 1e-12) / (1.0 - std::min(s, 1.0) + 1e-12)); });
  masks.feature_logits = Eigen::VectorXd::Zero(cg.features.cols());
  ExplainerConfig cfg;
  cfg.k_edges = k_edges;
  cfg.k_features = std::max(1, std::min(5, static_cast<int>(cg.features.cols())));
  Explanation ex = extract_explanation_subgraph(masks, cg, cfg, ExtractMode::node_centered);
  ex.edge_scores = scores.edge_scores;  // report raw scores, not sigma(logits)
  ex.predicted_class = predicted;
  return ex;
}

int run_generate(const std::string& dataset, std::uint64_t seed, const std::string& out) {
  if (dataset == "cycliq") {
    write_file(out, graphset_to_json(generate_cycliq(seed)));
  } else {
    write_file(out, dataset_to_json(generate_dataset(dataset, seed)));
  }
  std::cout << "wrote " << out << " (dataset=" << dataset << " seed=" << seed << ")\n";
  return 0;
}

int run_train(const std::string& data_path, const std::string& arch, int epochs,
              double lr, int layers, int hidden, std::optional<std::uint64_t> seed_flag,
              const std::string& out) {
  const std::string text = read_file(data_path);
  GnnConfig cfg;
  cfg.layers = layers;
  cfg.hidden_dim = hidden;
  cfg.arch = arch == "attention" ? Arch::attention : Arch::gcn;

  TrainReport report;
  GnnModel model;
  std::string dataset_name;
  std::uint64_t data_seed = 0;
  if (is_graphset_file(text)) {
    GraphsetBundle gs = graphset_from_json(text);
    if (cfg.arch != Arch::gcn)
      throw std::invalid_argument("graph classification supports the gcn arch only");
    cfg.input_dim = static_cast<int>(gs.graphs.at(0).features.cols());
    cfg.num_classes = max_label(gs.labels) + 1;
    dataset_name = gs.name;
    data_seed = gs.seed;
    const std::uint64_t seed = effective_seed(seed_flag.value_or(data_seed + 1000));
    Rng wr(seed);
    model = make_model(cfg, wr);
    report = train_graphs(model, gs.graphs, gs.labels, gs.split, epochs, lr);
  } else {
    DatasetBundle ds = dataset_from_json(text);
    cfg.input_dim = static_cast<int>(ds.graph.features.cols());
    cfg.num_classes = max_label(ds.graph.labels) + 1;
    dataset_name = ds.name;
    data_seed = ds.seed;
    const std::uint64_t seed = effective_seed(seed_flag.value_or(data_seed + 1000));
    Rng wr(seed);
    model = make_model(cfg, wr);
    report = train(model, ds.graph, ds.split, epochs, lr);
  }

  ExperimentConfig exp =
      make_experiment(dataset_name, data_seed, cfg, ExplainerConfig{}, {}, ".");
  write_file(out, model_to_json(model, provenance_line(exp)));
  std::cout << "train acc " << report.train_accuracy << ", val acc "
            << report.val_accuracy << ", test acc " << report.test_accuracy << "\n";
  std::cout << "wrote " << out << "\n";
  return 0;
}

int run_explain(const std::string& ckpt_path, const std::string& data_path,
                std::optional<int> node, std::optional<int> graph_id,
                const std::string& method, std::uint64_t seed,
                ExplainerConfig explainer, const std::string& out_dir) {
  if (node.has_value() == graph_id.has_value())
    throw std::invalid_argument("give exactly one of --node and --graph-id");
  GnnModel model = model_from_json(read_file(ckpt_path));
  const std::string text = read_file(data_path);
  Rng rng(effective_seed(seed));

  Explanation ex;
  std::vector<Edge> gt_local;
  std::string stem;
  std::string dataset_name;
  std::uint64_t data_seed = 0;
  if (graph_id.has_value()) {
    GraphsetBundle gs = graphset_from_json(text);
    dataset_name = gs.name;
    data_seed = gs.seed;
    const Graph& g = gs.graphs.at(static_cast<std::size_t>(*graph_id));
    if (method != "gnnx")
      throw std::invalid_argument("graph-level explanations support the gnnx method only");
    ex = explain_graph(model, g, explainer, rng);
    gt_local = g.gt_motif_edges;  // whole-graph view: local ids equal global ids
    stem = out_dir + "/explanation_graph_" + std::to_string(*graph_id);
  } else {
    DatasetBundle ds = dataset_from_json(text);
    dataset_name = ds.name;
    data_seed = ds.seed;
    if (method == "gnnx") {
      ex = explain_node(model, ds.graph, *node, explainer, rng);
    } else {
      ComputationGraph cg =
          extract_computation_graph(ds.graph, *node, model.config.layers);
      auto [predicted, probs] = predict_node(model, cg);
      ImportanceScores scores;
      if (method == "grad") {
        scores = grad_saliency(model, cg, predicted);
      } else if (method == "att") {
        scores = attention_importance(model, cg);
      } else if (method == "random") {
        scores = random_importance(cg, rng);
      } else {
        throw std::invalid_argument("unknown method: " + method);
      }
      ex = scores_as_explanation(scores, cg, explainer.k_edges, predicted);
    }
    // map ground truth into the computation graph's local ids
    std::vector<int> to_local(static_cast<std::size_t>(ds.graph.n), -1);
    for (int i = 0; i < ex.comp_graph.size(); ++i)
      to_local[static_cast<std::size_t>(ex.comp_graph.local_to_global[static_cast<std::size_t>(i)])] = i;
    for (const Edge& e : gt_edges_for_node(ds.graph, *node)) {
      const int a = to_local[static_cast<std::size_t>(e.first)];
      const int b = to_local[static_cast<std::size_t>(e.second)];
      if (a >= 0 && b >= 0) gt_local.push_back(make_edge(a, b));
    }
    stem = out_dir + "/explanation_node_" + std::to_string(*node);
  }

  std::filesystem::create_directories(out_dir);
  ExperimentConfig exp = make_experiment(dataset_name, data_seed, model.config,
                                         explainer, {method}, out_dir);
  write_file(stem + ".json", explanation_to_json(ex, provenance_line(exp)));
  write_file(stem + ".dot", explanation_to_dot(ex, gt_local));
  std::cout << "predicted class " << ex.predicted_class << ", "
            << ex.selected_edges.size() << " edges selected\n";
  std::cout << "wrote " << stem << ".json and .dot\n";
  return 0;
}

int run_evaluate(const std::string& ckpt_path, const std::string& data_path,
                 const std::vector<std::string>& methods, const std::string& att_ckpt,
                 std::uint64_t seed, const std::string& nodes, int max_nodes,
                 int workers, ExplainerConfig explainer, const std::string& out) {
  GnnModel model = model_from_json(read_file(ckpt_path));
  DatasetBundle ds = dataset_from_json(read_file(data_path));
  std::optional<GnnModel> att_model;
  if (!att_ckpt.empty()) att_model = model_from_json(read_file(att_ckpt));
  if (workers > 1)
    std::cerr << "note: running single-threaded; results do not depend on --workers\n";

  BenchmarkConfig bc;
  bc.methods = methods;
  bc.explainer = explainer;
  bc.nodes = nodes == "all" ? EvalNodes::all : EvalNodes::test_split;
  bc.max_nodes = max_nodes;
  Rng rng(effective_seed(seed));
  EvalReport report =
      run_benchmark(model, att_model ? &*att_model : nullptr, ds, bc, rng);

  ExperimentConfig exp =
      make_experiment(ds.name, ds.seed, model.config, explainer, methods, ".");
  const std::string prov = "# " + provenance_line(exp) + "\n";
  write_file(out, prov + eval_rows_csv(report));
  write_file(out + ".summary.csv", prov + eval_summary_csv(report));
  for (const auto& [method, auc] : report.mean_auc)
    std::cout << method << ": mean auc " << auc << ", mean acc@k "
              << report.mean_accuracy.at(method) << "\n";
  std::cout << report.evaluated << " nodes evaluated, " << report.skipped
            << " skipped\n";
  std::cout << "wrote " << out << " and " << out << ".summary.csv\n";
  return 0;
}

int run_prototype(const std::string& ckpt_path, const std::string& data_path,
                  int class_id, int max_members, std::uint64_t seed,
                  ExplainerConfig explainer, const std::string& out_dir) {
  GnnModel model = model_from_json(read_file(ckpt_path));
  DatasetBundle ds = dataset_from_json(read_file(data_path));
  Rng rng(effective_seed(seed));
  Prototype proto =
      build_class_prototype(model, ds, class_id, explainer, rng, max_members);

  std::filesystem::create_directories(out_dir);
  ExperimentConfig exp =
      make_experiment(ds.name, ds.seed, model.config, explainer, {"gnnx"}, out_dir);
  const std::string stem = out_dir + "/prototype_class_" + std::to_string(class_id);
  write_file(stem + ".json", prototype_to_json(proto, provenance_line(exp)));
  write_file(stem + ".dot", prototype_to_dot(proto, 0.0));
  std::cout << proto.members.size() << " members, reference node "
            << proto.reference_node << "\n";
  std::cout << "wrote " << stem << ".json and .dot\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic-benchmark GNN training and explanation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolkitVersion));

  // generate
  std::string gen_dataset = "ba-shapes", gen_out = "dataset.json";
  std::uint64_t gen_seed = 0;
  CLI::App* gen = app.add_subcommand("generate", "generate a synthetic benchmark dataset");
  gen->add_option("--dataset", gen_dataset, "ba-shapes|ba-community|tree-cycles|tree-grid|cycliq")
      ->required();
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output JSON path")->required();

  // train
  std::string tr_data, tr_arch = "gcn", tr_out = "model.json";
  int tr_epochs = 1000, tr_layers = 3, tr_hidden = 20;
  double tr_lr = 0.001;
  std::optional<std::uint64_t> tr_seed;
  CLI::App* tr = app.add_subcommand("train", "train a model on a dataset file");
  tr->add_option("--data", tr_data, "dataset JSON")->required();
  tr->add_option("--arch", tr_arch, "gcn|attention")
      ->check(CLI::IsMember({"gcn", "attention"}));
  tr->add_option("--epochs", tr_epochs, "training epochs");
  tr->add_option("--lr", tr_lr, "learning rate");
  tr->add_option("--layers", tr_layers, "message-passing layers");
  tr->add_option("--hidden-dim", tr_hidden, "hidden width");
  tr->add_option("--seed", tr_seed, "weight init seed (default: dataset seed + 1000)");
  tr->add_option("--out", tr_out, "checkpoint path")->required();

  // explain
  std::string ex_ckpt, ex_data, ex_method = "gnnx", ex_out = ".";
  std::optional<int> ex_node, ex_graph;
  std::uint64_t ex_seed = 0;
  ExplainerFlags ex_flags;
  CLI::App* ex = app.add_subcommand("explain", "explain one prediction");
  ex->add_option("--ckpt", ex_ckpt, "model checkpoint")->required();
  ex->add_option("--data", ex_data, "dataset JSON")->required();
  ex->add_option("--node", ex_node, "node id (node tasks)");
  ex->add_option("--graph-id", ex_graph, "graph index (graph tasks)");
  ex->add_option("--method", ex_method, "gnnx|grad|att|random")
      ->check(CLI::IsMember({"gnnx", "grad", "att", "random"}));
  ex->add_option("--seed", ex_seed, "mask init / noise seed");
  ex_flags.attach(ex);
  ex->add_option("--out", ex_out, "output directory")->required();

  // evaluate
  std::string ev_ckpt, ev_data, ev_att, ev_nodes = "test", ev_out = "eval.csv";
  std::vector<std::string> ev_methods = {"gnnx", "grad", "random"};
  std::uint64_t ev_seed = 0;
  int ev_max = 0, ev_workers = 1;
  ExplainerFlags ev_flags;
  CLI::App* ev = app.add_subcommand("evaluate", "benchmark methods over motif nodes");
  ev->add_option("--ckpt", ev_ckpt, "model checkpoint")->required();
  ev->add_option("--data", ev_data, "dataset JSON")->required();
  ev->add_option("--methods", ev_methods, "subset of gnnx grad att random")
      ->delimiter(',');
  ev->add_option("--att-ckpt", ev_att, "attention checkpoint for the att method");
  ev->add_option("--seed", ev_seed, "evaluation seed");
  ev->add_option("--nodes", ev_nodes, "test|all")->check(CLI::IsMember({"test", "all"}));
  ev->add_option("--max-nodes", ev_max, "cap on evaluated nodes (0 = none)");
  ev->add_option("--workers", ev_workers, "worker count (accepted; execution is single-threaded)");
  ev_flags.attach(ev);
  ev->add_option("--out", ev_out, "per-node CSV path")->required();

  // prototype
  std::string pr_ckpt, pr_data, pr_out = ".";
  int pr_class = 0, pr_max = 0;
  std::uint64_t pr_seed = 0;
  ExplainerFlags pr_flags;
  CLI::App* pr = app.add_subcommand("prototype", "build a class prototype graph");
  pr->add_option("--ckpt", pr_ckpt, "model checkpoint")->required();
  pr->add_option("--data", pr_data, "dataset JSON")->required();
  pr->add_option("--class", pr_class, "class id")->required();
  pr->add_option("--max-members", pr_max, "cap on explained members (0 = all)");
  pr->add_option("--seed", pr_seed, "explanation seed");
  pr_flags.attach(pr);
  pr->add_option("--out", pr_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_generate(gen_dataset, effective_seed(gen_seed), gen_out);
    if (tr->parsed())
      return run_train(tr_data, tr_arch, tr_epochs, tr_lr, tr_layers, tr_hidden,
                       tr_seed, tr_out);
    if (ex->parsed())
      return run_explain(ex_ckpt, ex_data, ex_node, ex_graph, ex_method, ex_seed,
                         ex_flags.config, ex_out);
    if (ev->parsed())
      return run_evaluate(ev_ckpt, ev_data, ev_methods, ev_att, ev_seed, ev_nodes,
                          ev_max, ev_workers, ev_flags.config, ev_out);
    if (pr->parsed())
      return run_prototype(pr_ckpt, pr_data, pr_class, pr_max, pr_seed,
                           pr_flags.config, pr_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
