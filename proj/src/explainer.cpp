#include "gnnx/explainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gnnx {

using ad::Matrix;
using ad::Tape;
using ad::Var;

namespace {

constexpr double kLogEps = 1e-12;

double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// -(p log p + (1-p) log(1-p)) elementwise, eps-guarded for saturated masks
Var binary_entropy(Tape& tape, Var p) {
  Var q = sub(tape.constant(Matrix::Ones(p.rows(), p.cols())), p);
  return scalar_mul(add(hadamard(p, ad::log(add_scalar(p, kLogEps))),
                        hadamard(q, ad::log(add_scalar(q, kLogEps)))),
                    -1.0);
}

// predicted class per node from the unmasked model, as real scalars
Eigen::VectorXd unmasked_class_vector(GnnModel& model, const ComputationGraph& cg) {
  Tape tape;
  Forward f = forward(model, tape, tape.constant(cg.adjacency), cg.features,
                      &cg.global_degrees);
  Eigen::VectorXd out(cg.adjacency.rows());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    Eigen::Index arg = 0;
    f.probs.value().row(i).maxCoeff(&arg);
    out(i) = static_cast<double>(arg);
  }
  return out;
}

// Q_ij = (f_i - f_j)^2 / 2, so sum(W .* Q) = f' L(W) f
Matrix laplacian_quadratic(const Eigen::VectorXd& f) {
  const Eigen::Index m = f.size();
  Matrix q(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      const double d = f(i) - f(j);
      q(i, j) = 0.5 * d * d;
    }
  return q;
}

// Cross-entropy of the target under the masked graph; graph tasks pool first.
// Normalization uses the parent-graph degrees as constants: the mask scales
// message flow on each edge without rescaling everything else. Recomputing
// degrees from the masked adjacency opens a shortcut the optimizer exploits —
// raising an irrelevant edge inflates its endpoint's degree and thereby
// dilutes a neighboring edge, so mask scores stop tracking edge importance.
Var masked_cross_entropy(GnnModel& model, Tape& tape, Var masked, Var x,
                         const ComputationGraph& cg, int target,
                         const ExplainerConfig& config) {
  Forward f = forward(model, tape, masked, x, &cg.global_degrees);
  Var probs = f.probs;
  int row = cg.center;
  if (config.graph_level) {
    const int m = static_cast<int>(cg.adjacency.rows());
    Var pool = tape.constant(Matrix::Constant(1, m, 1.0 / static_cast<double>(m)));
    Var logits;
    for (std::size_t l = 0; l < f.layer_outputs.size(); ++l) {
      Var part = matmul(matmul(pool, f.layer_outputs[l]), tape.leaf(model.heads[l]));
      logits = logits.valid() ? add(logits, part) : part;
    }
    probs = softmax_rows(add_row_broadcast(logits, tape.leaf(model.head_bias)));
    row = 0;
  }
  return scalar_mul(sum(ad::log(gather_entries(probs, {{row, target}}))), -1.0);
}

Var objective_impl(GnnModel& model, const ComputationGraph& cg, Tape& tape,
                   Var edge_logits, Var feature_logits, int target,
                   const ExplainerConfig& config, Rng& rng, const Matrix* lap_q) {
  const int m = static_cast<int>(cg.adjacency.rows());
  if (edge_logits.rows() != m || edge_logits.cols() != m)
    throw std::invalid_argument("objective: edge-logit shape mismatch");
  if (target < 0 || target >= model.config.num_classes)
    throw std::out_of_range("objective: target label out of range");

  Var ac = tape.constant(cg.adjacency);
  Var sym = scalar_mul(add(edge_logits, transpose(edge_logits)), 0.5);
  Var sigma = sigmoid(sym);
  Var masked = hadamard(ac, sigma);

  const int draws =
      config.feature_sampling == FeatureSampling::reparam_marginal
          ? std::max(1, config.samples_z)
          : 1;
  Var ce;
  for (int s = 0; s < draws; ++s) {
    Var x = marginalize_features(tape, cg.features, feature_logits,
                                 config.feature_sampling, rng);
    Var term = masked_cross_entropy(model, tape, masked, x, cg, target, config);
    ce = ce.valid() ? add(ce, term) : term;
  }
  Var loss = scalar_mul(ce, 1.0 / static_cast<double>(draws));

  Var sigma_f = sigmoid(feature_logits);
  if (config.lambda_size > 0.0)
    loss = add(loss, scalar_mul(sum(hadamard(ac, sigma)), config.lambda_size));
  if (config.lambda_entropy > 0.0) {
    Var ent = add(sum(hadamard(ac, binary_entropy(tape, sigma))),
                  sum(binary_entropy(tape, sigma_f)));
    loss = add(loss, scalar_mul(ent, config.lambda_entropy));
  }
  if (config.lambda_laplacian > 0.0 && !config.graph_level) {
    Matrix q = lap_q ? *lap_q : laplacian_quadratic(unmasked_class_vector(model, cg));
    loss = add(loss, scalar_mul(sum(hadamard(masked, tape.constant(std::move(q)))),
                                config.lambda_laplacian));
  }
  if (config.lambda_feat > 0.0)
    loss = add(loss, scalar_mul(sum(sigma_f), config.lambda_feat));
  return loss;
}

struct Components {
  std::vector<int> label;  // -1 for nodes with no selected edge
  int count = 0;
};

Components components_of(int m, const std::vector<Edge>& edges) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(m));
  for (const Edge& e : edges) {
    adj[static_cast<std::size_t>(e.first)].push_back(e.second);
    adj[static_cast<std::size_t>(e.second)].push_back(e.first);
  }
  Components c;
  c.label.assign(static_cast<std::size_t>(m), -1);
  for (int s = 0; s < m; ++s) {
    if (c.label[static_cast<std::size_t>(s)] != -1 ||
        adj[static_cast<std::size_t>(s)].empty())
      continue;
    std::vector<int> stack = {s};
    c.label[static_cast<std::size_t>(s)] = c.count;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int w : adj[static_cast<std::size_t>(u)])
        if (c.label[static_cast<std::size_t>(w)] == -1) {
          c.label[static_cast<std::size_t>(w)] = c.count;
          stack.push_back(w);
        }
    }
    ++c.count;
  }
  return c;
}

}  // namespace

Var marginalize_features(Tape& tape, const Matrix& features, Var feature_logits,
                         FeatureSampling mode, Rng& rng) {
  const Eigen::Index d = features.cols();
  if (feature_logits.rows() != 1 || feature_logits.cols() != d)
    throw std::invalid_argument("marginalize_features: logit dimension mismatch");
  Var sf = sigmoid(feature_logits);
  Var x = tape.constant(features);
  if (mode == FeatureSampling::plain_multiply) return scale_cols(x, sf);
  const Eigen::Index m = features.rows();
  Matrix z(m, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < m; ++i)
      z(i, j) = features(static_cast<Eigen::Index>(
                             rng.uniform_int(static_cast<int>(m))),
                         j);
  Var zc = tape.constant(std::move(z));
  return add(zc, scale_cols(sub(x, zc), sf));
}

Var objective(GnnModel& model, const ComputationGraph& cg, Tape& tape, Var edge_logits,
              Var feature_logits, int target_label, const ExplainerConfig& config,
              Rng& rng) {
  return objective_impl(model, cg, tape, edge_logits, feature_logits, target_label,
                        config, rng, nullptr);
}

std::pair<ExplainerMasks, std::vector<double>> optimize_masks(
    GnnModel& model, const ComputationGraph& cg, int target_label,
    const ExplainerConfig& config, Rng& rng) {
  const int m = static_cast<int>(cg.adjacency.rows());
  const int d = static_cast<int>(cg.features.cols());

  Matrix init = Matrix::Zero(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      if (cg.adjacency(i, j) != 0.0) init(i, j) = init(j, i) = rng.normal(4.0, 0.1);
  ad::Tensor edge_t(std::move(init), true);
  Matrix finit(1, d);
  for (int j = 0; j < d; ++j) finit(0, j) = rng.normal(1.0, 0.1);
  ad::Tensor feat_t(std::move(finit), true);

  std::vector<ad::Tensor*> params = {&edge_t, &feat_t};
  ad::AdamState opt = ad::make_adam(params, config.lr);

  const bool need_lap = config.lambda_laplacian > 0.0 && !config.graph_level;
  Matrix lap_q;
  if (need_lap) lap_q = laplacian_quadratic(unmasked_class_vector(model, cg));

  std::vector<double> losses;
  losses.reserve(static_cast<std::size_t>(config.epochs));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Tape tape;
    Var loss = objective_impl(model, cg, tape, tape.leaf(edge_t), tape.leaf(feat_t),
                              target_label, config, rng, need_lap ? &lap_q : nullptr);
    losses.push_back(loss.scalar());
    tape.backward(loss);
    ad::adam_step(opt, params);
  }

  ExplainerMasks masks;
  masks.edge_logits = 0.5 * (edge_t.value + edge_t.value.transpose());
  masks.feature_logits = feat_t.value.row(0).transpose();
  return {std::move(masks), std::move(losses)};
}

Explanation extract_explanation_subgraph(const ExplainerMasks& masks,
                                         const ComputationGraph& cg,
                                         const ExplainerConfig& config,
                                         ExtractMode mode) {
  const int m = static_cast<int>(cg.adjacency.rows());
  if (masks.edge_logits.rows() != m || masks.edge_logits.cols() != m)
    throw std::invalid_argument("extract_explanation_subgraph: mask shape mismatch");
  if (config.k_edges < 1 || config.k_features < 1)
    throw std::invalid_argument("extract_explanation_subgraph: k bounds must be >= 1");

  Explanation out;
  out.comp_graph = cg;
  // scores are kept only on real edges; everything else is inert
  out.edge_scores = Matrix::Zero(m, m);
  std::vector<std::pair<double, Edge>> scored;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      if (cg.adjacency(i, j) != 0.0) {
        const double s = sigmoid_scalar(masks.edge_logits(i, j));
        out.edge_scores(i, j) = out.edge_scores(j, i) = s;
        scored.push_back({s, {i, j}});
      }
  out.feature_scores = masks.feature_logits.unaryExpr(&sigmoid_scalar);

  // maximum threshold keeping at least k_edges edges; ties included
  std::vector<Edge> kept;
  if (static_cast<int>(scored.size()) <= config.k_edges) {
    out.all_edges = static_cast<int>(scored.size()) < config.k_edges;
    out.threshold_used = scored.empty()
                             ? 0.0
                             : std::min_element(scored.begin(), scored.end())->first;
    for (const auto& [s, e] : scored) kept.push_back(e);
  } else {
    std::vector<double> levels;
    for (const auto& [s, e] : scored) levels.push_back(s);
    std::sort(levels.begin(), levels.end(), std::greater<>());
    double threshold = levels.back();
    int covered = 0;
    for (std::size_t i = 0; i < levels.size(); ++i) {
      covered = static_cast<int>(i) + 1;
      if (covered >= config.k_edges &&
          (i + 1 == levels.size() || levels[i + 1] < levels[i])) {
        threshold = levels[i];
        break;
      }
    }
    out.threshold_used = threshold;
    for (const auto& [s, e] : scored)
      if (s >= threshold) kept.push_back(e);
  }

  // keep one connected piece of the thresholded subgraph
  Components comps = components_of(m, kept);
  int keep_label = -1;
  if (mode == ExtractMode::node_centered) {
    keep_label = comps.label[static_cast<std::size_t>(cg.center)];
  } else if (comps.count > 0) {
    std::vector<int> sizes(static_cast<std::size_t>(comps.count), 0);
    for (int v = 0; v < m; ++v)
      if (comps.label[static_cast<std::size_t>(v)] != -1)
        ++sizes[static_cast<std::size_t>(comps.label[static_cast<std::size_t>(v)])];
    keep_label = static_cast<int>(
        std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  }
  for (const Edge& e : kept)
    if (comps.label[static_cast<std::size_t>(e.first)] == keep_label && keep_label != -1)
      out.selected_edges.push_back(e);
  std::sort(out.selected_edges.begin(), out.selected_edges.end());

  // top-k feature dimensions by score, ties to the smaller id
  std::vector<int> order(static_cast<std::size_t>(out.feature_scores.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return out.feature_scores(a) > out.feature_scores(b);
  });
  const int kf = std::min<int>(config.k_features, static_cast<int>(order.size()));
  out.selected_features.assign(order.begin(), order.begin() + kf);
  return out;
}

Explanation explain_node(GnnModel& model, const Graph& graph, int v,
                         const ExplainerConfig& config, Rng& rng) {
  ComputationGraph cg = extract_computation_graph(graph, v, model.config.layers);
  auto [predicted, probs] = predict_node(model, cg);
  const int target =
      config.target == MaskTarget::supplied_label ? config.supplied_label : predicted;

  auto [masks, losses] = optimize_masks(model, cg, target, config, rng);
  Explanation out =
      extract_explanation_subgraph(masks, cg, config, ExtractMode::node_centered);
  out.predicted_class = predicted;
  out.losses = std::move(losses);
  out.final_objective = out.losses.empty() ? 0.0 : out.losses.back();

  // re-predict with only the selected edges (degrees recomputed, so removed
  // edges behave exactly like deleted edges)
  Matrix a = Matrix::Zero(cg.adjacency.rows(), cg.adjacency.cols());
  for (const Edge& e : out.selected_edges) a(e.first, e.second) = a(e.second, e.first) = 1.0;
  Tape tape;
  Forward f = forward(model, tape, tape.constant(std::move(a)), cg.features);
  Eigen::Index arg = 0;
  f.probs.value().row(cg.center).maxCoeff(&arg);
  out.masked_class = static_cast<int>(arg);
  return out;
}

Explanation explain_graph(GnnModel& model, const Graph& graph,
                          const ExplainerConfig& config, Rng& rng) {
  ComputationGraph cg;
  cg.center = 0;
  cg.hops = model.config.layers;
  cg.adjacency = dense_adjacency(graph);
  cg.features = graph.features;
  cg.local_to_global.resize(static_cast<std::size_t>(graph.n));
  std::iota(cg.local_to_global.begin(), cg.local_to_global.end(), 0);
  cg.global_degrees.resize(static_cast<std::size_t>(graph.n));
  for (int i = 0; i < graph.n; ++i)
    cg.global_degrees[static_cast<std::size_t>(i)] = graph.degree(i);

  ExplainerConfig gc = config;
  gc.graph_level = true;
  auto [predicted, probs] = predict_graph(model, graph);
  const int target =
      gc.target == MaskTarget::supplied_label ? gc.supplied_label : predicted;

  auto [masks, losses] = optimize_masks(model, cg, target, gc, rng);
  Explanation out =
      extract_explanation_subgraph(masks, cg, gc, ExtractMode::largest_component);
  out.predicted_class = predicted;
  out.losses = std::move(losses);
  out.final_objective = out.losses.empty() ? 0.0 : out.losses.back();

  Graph sub = build_graph(graph.n, out.selected_edges, graph.features);
  out.masked_class = predict_graph(model, sub).first;
  return out;
}

}  // namespace gnnx
