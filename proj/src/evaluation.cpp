#include "gnnx/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gnnx {

namespace {

std::vector<double> scores_of(const ImportanceScores& scores,
                              const std::vector<Edge>& edges) {
  std::vector<double> out;
  out.reserve(edges.size());
  for (const Edge& e : edges) out.push_back(scores.edge_scores(e.first, e.second));
  return out;
}

}  // namespace

std::optional<double> explanation_auc(const ImportanceScores& scores,
                                      const std::vector<Edge>& gt,
                                      const std::vector<Edge>& candidates) {
  std::set<Edge> gt_set(gt.begin(), gt.end());
  std::set<Edge> cand_set(candidates.begin(), candidates.end());
  for (const Edge& e : gt)
    if (!cand_set.count(e))
      throw std::invalid_argument("explanation_auc: gt edge not a candidate");

  std::vector<double> pos, neg;
  for (const Edge& e : candidates)
    (gt_set.count(e) ? pos : neg)
        .push_back(scores.edge_scores(e.first, e.second));
  if (pos.empty() || neg.empty()) return std::nullopt;

  double wins = 0.0;
  for (double p : pos)
    for (double n : neg) {
      if (p > n)
        wins += 1.0;
      else if (p == n)
        wins += 0.5;
    }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

double accuracy_at_k(const ImportanceScores& scores, const std::vector<Edge>& gt,
                     const std::vector<Edge>& candidates, int k) {
  if (k < 1) throw std::invalid_argument("accuracy_at_k: k must be >= 1");
  if (gt.empty()) return 0.0;
  std::vector<double> all = scores_of(scores, candidates);
  if (all.empty()) return 0.0;
  std::sort(all.begin(), all.end(), std::greater<>());
  const double threshold =
      all[static_cast<std::size_t>(std::min<int>(k, static_cast<int>(all.size())) - 1)];
  std::set<Edge> gt_set(gt.begin(), gt.end());
  int hit = 0;
  for (const Edge& e : candidates)
    if (scores.edge_scores(e.first, e.second) >= threshold && gt_set.count(e)) ++hit;
  return static_cast<double>(hit) / static_cast<double>(gt.size());
}

EvalReport run_benchmark(GnnModel& model, GnnModel* att_model,
                         const DatasetBundle& dataset, const BenchmarkConfig& config,
                         Rng& rng) {
  const Graph& g = dataset.graph;
  EvalReport report;
  report.dataset = dataset.name;
  report.seed = dataset.seed;

  std::vector<int> nodes;
  if (config.nodes == EvalNodes::test_split) {
    nodes = dataset.split.test;
  } else {
    nodes.resize(static_cast<std::size_t>(g.n));
    for (int v = 0; v < g.n; ++v) nodes[static_cast<std::size_t>(v)] = v;
  }

  std::map<std::string, double> auc_sum, acc_sum;
  std::map<std::string, int> counts;
  int walked = 0;
  for (int v : nodes) {
    if (g.motif_id[static_cast<std::size_t>(v)] < 0) continue;
    if (config.max_nodes > 0 && walked >= config.max_nodes) break;
    ++walked;

    ComputationGraph cg = extract_computation_graph(g, v, model.config.layers);
    std::vector<int> to_local(static_cast<std::size_t>(g.n), -1);
    for (std::size_t i = 0; i < cg.local_to_global.size(); ++i)
      to_local[static_cast<std::size_t>(cg.local_to_global[i])] = static_cast<int>(i);

    const int m = static_cast<int>(cg.adjacency.rows());
    std::vector<Edge> candidates;
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j)
        if (cg.adjacency(i, j) != 0.0) candidates.push_back({i, j});

    // ground truth restricted to edges the model can even see
    std::vector<Edge> gt;
    for (const Edge& e : gt_edges_for_node(g, v)) {
      const int a = to_local[static_cast<std::size_t>(e.first)];
      const int b = to_local[static_cast<std::size_t>(e.second)];
      if (a < 0 || b < 0) continue;
      Edge local = make_edge(a, b);
      if (cg.adjacency(local.first, local.second) != 0.0) gt.push_back(local);
    }

    const bool degenerate =
        gt.empty() || gt.size() == candidates.size() || candidates.empty();
    if (degenerate) ++report.skipped;

    const int predicted = predict_node(model, cg).first;
    for (const std::string& method : config.methods) {
      NodeResult row;
      row.node = v;
      row.method = method;
      row.skipped = degenerate;
      if (!degenerate) {
        ImportanceScores scores;
        if (method == "gnnx") {
          auto [masks, losses] =
              optimize_masks(model, cg, predicted, config.explainer, rng);
          scores.method = "gnnx";
          scores.edge_scores = Eigen::MatrixXd::Zero(m, m);
          for (const Edge& e : candidates)
            scores.edge_scores(e.first, e.second) = scores.edge_scores(
                e.second, e.first) =
                1.0 / (1.0 + std::exp(-masks.edge_logits(e.first, e.second)));
        } else if (method == "grad") {
          scores = grad_saliency(model, cg, predicted);
        } else if (method == "att") {
          if (!att_model)
            throw std::invalid_argument("run_benchmark: att method needs a model");
          scores = attention_importance(*att_model, cg);
        } else if (method == "random") {
          scores = random_importance(cg, rng);
        } else {
          throw std::invalid_argument("run_benchmark: unknown method " + method);
        }
        row.auc = *explanation_auc(scores, gt, candidates);
        row.accuracy_at_k =
            accuracy_at_k(scores, gt, candidates, static_cast<int>(gt.size()));
        auc_sum[method] += row.auc;
        acc_sum[method] += row.accuracy_at_k;
        ++counts[method];
      }
      report.rows.push_back(std::move(row));
    }
  }

  for (const auto& [method, count] : counts) {
    report.mean_auc[method] = auc_sum[method] / count;
    report.mean_accuracy[method] = acc_sum[method] / count;
    report.evaluated = count;  // identical across methods by construction
  }
  return report;
}

std::string eval_rows_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "dataset,method,node,auc,accuracy_at_k,skipped\n";
  for (const NodeResult& r : report.rows) {
    out << report.dataset << ',' << r.method << ',' << r.node << ',';
    if (r.skipped)
      out << ",,1\n";
    else
      out << r.auc << ',' << r.accuracy_at_k << ",0\n";
  }
  return out.str();
}

std::string eval_summary_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "dataset,method,mean_auc,mean_accuracy_at_k,evaluated,skipped\n";
  for (const auto& [method, auc] : report.mean_auc)
    out << report.dataset << ',' << method << ',' << auc << ','
        << report.mean_accuracy.at(method) << ',' << report.evaluated << ','
        << report.skipped << '\n';
  return out.str();
}

}  // namespace gnnx
