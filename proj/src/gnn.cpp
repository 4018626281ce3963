#include "gnnx/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gnnx {

using ad::Matrix;
using ad::SparseMatrix;
using ad::Tape;
using ad::Var;

std::vector<ad::Tensor*> GnnModel::parameters() {
  std::vector<ad::Tensor*> out;
  for (auto& w : weights) out.push_back(&w);
  for (auto& b : biases) out.push_back(&b);
  for (auto& a : attn_left) out.push_back(&a);
  for (auto& a : attn_right) out.push_back(&a);
  for (auto& g : bn_scale) out.push_back(&g);
  for (auto& h : heads) out.push_back(&h);
  out.push_back(&head_bias);
  return out;
}

namespace {

constexpr double kBnEps = 1e-5;

Matrix glorot(int rows, int cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix w(rows, cols);
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-limit, limit);
  return w;
}

// Normalization mode: training passes normalize with the current batch's
// statistics; the final pass additionally stores them in the model so
// prediction-time passes (batch_stats = false) can use them as constants.
struct BnMode {
  bool batch_stats = false;
  bool capture = false;
};

// bn(z) * scale + shift, then relu.
Var bn_relu(GnnModel& model, Tape& tape, Var z, int l, const BnMode& mode) {
  const std::size_t li = static_cast<std::size_t>(l);
  Var y;
  if (mode.batch_stats) {
    const int m = static_cast<int>(z.rows());
    Var avg = tape.constant(Matrix::Constant(1, m, 1.0 / static_cast<double>(m)));
    Var mean = matmul(avg, z);
    Var centered = sub(z, matmul(tape.constant(Matrix::Ones(m, 1)), mean));
    Var var = matmul(avg, hadamard(centered, centered));
    if (mode.capture) {
      model.bn_mean[li] = mean.value();
      model.bn_var[li] = var.value();
    }
    Var rs = rsqrt_safe(add_scalar(var, kBnEps));
    y = scale_cols(scale_cols(centered, rs), tape.leaf(model.bn_scale[li]));
  } else {
    Var centered = add_row_broadcast(z, tape.constant((-model.bn_mean[li]).eval()));
    Matrix rs = (model.bn_var[li].array() + kBnEps).rsqrt();
    y = scale_cols(scale_cols(centered, tape.constant(std::move(rs))),
                   tape.leaf(model.bn_scale[li]));
  }
  return relu(add_row_broadcast(y, tape.leaf(model.biases[li])));
}

struct EdgeList {
  std::vector<int> src, dst;                  // dst receives from src
  std::vector<std::pair<int, int>> entries;   // (dst, src) positions in A1
};

// directed edge list over the nonzero pattern of A1 (self-loops included when
// they are present in A1)
EdgeList edge_list_from(const Matrix& a1) {
  EdgeList el;
  for (int i = 0; i < a1.rows(); ++i)
    for (int j = 0; j < a1.cols(); ++j)
      if (a1(i, j) != 0.0) {
        el.dst.push_back(i);
        el.src.push_back(j);
        el.entries.emplace_back(i, j);
      }
  return el;
}

// shared attention stack over an explicit edge list; `weights` are the A1
// entries per edge (pass invalid Var for implicit all-ones). Coefficients are
// normalized after multiplying by the edge weight, so a zero-weight edge
// contributes nothing and the rest renormalize — same deletion semantics as
// the GCN path.
std::vector<Var> attention_stack(GnnModel& model, Tape& tape, Var h, const EdgeList& el,
                                 Var edge_weights, int m, const BnMode& mode,
                                 std::vector<Matrix>* coefficients) {
  std::vector<Var> outs;
  for (int l = 0; l < model.config.layers; ++l) {
    Var hw = matmul(h, tape.leaf(model.weights[static_cast<std::size_t>(l)]));
    Var sl = matmul(hw, tape.leaf(model.attn_left[static_cast<std::size_t>(l)]));
    Var sr = matmul(hw, tape.leaf(model.attn_right[static_cast<std::size_t>(l)]));
    Var score = add(gather_rows(sl, el.dst), gather_rows(sr, el.src));
    score = leaky_relu(score, 0.2);
    // uniform shift by the current max keeps exp in range; it cancels inside
    // each normalization segment, so values and gradients are unchanged
    score = add_scalar(score, -score.value().maxCoeff());
    Var ex = ad::exp(score);
    if (edge_weights.valid()) ex = hadamard(ex, edge_weights);
    Var alpha = segment_normalize(ex, el.dst, m);
    if (coefficients) {
      Matrix dense = Matrix::Zero(m, m);
      for (std::size_t e = 0; e < el.entries.size(); ++e)
        dense(el.entries[e].first, el.entries[e].second) =
            alpha.value()(static_cast<Eigen::Index>(e), 0);
      coefficients->push_back(std::move(dense));
    }
    h = bn_relu(model, tape, weighted_gather_sum(alpha, hw, el.src, el.dst), l, mode);
    outs.push_back(h);
  }
  return outs;
}

std::vector<Var> gcn_stack(GnnModel& model, Tape& tape, Var h, const SparseMatrix& ahat,
                           const BnMode& mode) {
  std::vector<Var> outs;
  for (int l = 0; l < model.config.layers; ++l) {
    h = bn_relu(model, tape,
                matmul(ahat, matmul(h, tape.leaf(model.weights[static_cast<std::size_t>(l)]))),
                l, mode);
    outs.push_back(h);
  }
  return outs;
}

Var head_logits(GnnModel& model, Tape& tape, const std::vector<Var>& layer_outputs) {
  Var logits;
  for (std::size_t l = 0; l < layer_outputs.size(); ++l) {
    Var part = matmul(layer_outputs[l], tape.leaf(model.heads[l]));
    logits = logits.valid() ? add(logits, part) : part;
  }
  return add_row_broadcast(logits, tape.leaf(model.head_bias));
}

// L2 penalty over layer weights and head blocks.
Var weight_penalty(GnnModel& model, Tape& tape) {
  Var reg;
  auto accumulate = [&](std::vector<ad::Tensor>& ts) {
    for (ad::Tensor& t : ts) {
      Var w = tape.leaf(t);
      Var term = sum(hadamard(w, w));
      reg = reg.valid() ? add(reg, term) : term;
    }
  };
  accumulate(model.weights);
  accumulate(model.heads);
  return scalar_mul(reg, model.config.weight_decay);
}

// Ahat for a fixed binary graph, computed once per training run.
SparseMatrix normalized_adjacency(const Graph& g, bool add_self_loops) {
  Eigen::VectorXd deg(g.n);
  for (int i = 0; i < g.n; ++i)
    deg(i) = g.degree(i) + (add_self_loops ? 1.0 : 0.0);
  Eigen::VectorXd s = deg.unaryExpr(
      [](double d) { return d > 1e-12 ? 1.0 / std::sqrt(d) : 0.0; });
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(g.edges.size() * 2 + static_cast<std::size_t>(g.n));
  for (const Edge& e : g.edges) {
    trip.emplace_back(e.first, e.second, s(e.first) * s(e.second));
    trip.emplace_back(e.second, e.first, s(e.first) * s(e.second));
  }
  if (add_self_loops)
    for (int i = 0; i < g.n; ++i) trip.emplace_back(i, i, s(i) * s(i));
  SparseMatrix ahat(g.n, g.n);
  ahat.setFromTriplets(trip.begin(), trip.end());
  return ahat;
}

double accuracy(const Matrix& probs, const std::vector<int>& labels,
                const std::vector<int>& nodes) {
  if (nodes.empty()) return 0.0;
  int hits = 0;
  for (int v : nodes) {
    Eigen::Index arg = 0;
    probs.row(v).maxCoeff(&arg);
    if (static_cast<int>(arg) == labels[static_cast<std::size_t>(v)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(nodes.size());
}

std::vector<std::pair<int, int>> label_entries(const std::vector<int>& nodes,
                                               const std::vector<int>& labels) {
  std::vector<std::pair<int, int>> out;
  out.reserve(nodes.size());
  for (int v : nodes) out.emplace_back(v, labels[static_cast<std::size_t>(v)]);
  return out;
}

}  // namespace

GnnModel make_model(const GnnConfig& config, Rng& rng) {
  if (config.layers < 1 || config.input_dim < 1 || config.hidden_dim < 1 ||
      config.num_classes < 1)
    throw std::invalid_argument("make_model: bad config");
  GnnModel model;
  model.config = config;
  for (int l = 0; l < config.layers; ++l) {
    const int in = l == 0 ? config.input_dim : config.hidden_dim;
    model.weights.emplace_back(glorot(in, config.hidden_dim, rng), true);
    model.biases.emplace_back(Matrix::Zero(1, config.hidden_dim), true);
    model.bn_scale.emplace_back(Matrix::Ones(1, config.hidden_dim), true);
    model.bn_mean.push_back(Matrix::Zero(1, config.hidden_dim));
    model.bn_var.push_back(Matrix::Ones(1, config.hidden_dim));
  }
  if (config.arch == Arch::attention) {
    for (int l = 0; l < config.layers; ++l) {
      model.attn_left.emplace_back(glorot(config.hidden_dim, 1, rng), true);
      model.attn_right.emplace_back(glorot(config.hidden_dim, 1, rng), true);
    }
  }
  for (int l = 0; l < config.layers; ++l)
    model.heads.emplace_back(glorot(config.hidden_dim, config.num_classes, rng), true);
  model.head_bias = ad::Tensor(Matrix::Zero(1, config.num_classes), true);
  return model;
}

Forward forward(GnnModel& model, Tape& tape, Var adjacency, const Matrix& features,
                const std::vector<int>* degree_override) {
  return forward(model, tape, adjacency, tape.constant(features), degree_override);
}

Forward forward(GnnModel& model, Tape& tape, Var adjacency, Var features,
                const std::vector<int>* degree_override) {
  const int m = static_cast<int>(adjacency.rows());
  if (adjacency.cols() != m) throw std::invalid_argument("forward: adjacency not square");
  if (features.rows() != m || features.cols() != model.config.input_dim)
    throw std::invalid_argument("forward: feature shape mismatch");
  if (m > 0 && adjacency.value().minCoeff() < 0.0)
    throw std::invalid_argument("forward: negative adjacency entry");
  if (degree_override && static_cast<int>(degree_override->size()) != m)
    throw std::invalid_argument("forward: degree override length mismatch");

  Var a1 = model.config.add_self_loops
               ? add(adjacency, tape.constant(Matrix::Identity(m, m)))
               : adjacency;
  Var h = features;
  const BnMode eval_mode;  // stored statistics
  Forward out;
  if (model.config.arch == Arch::gcn) {
    Var s;
    if (degree_override) {
      Matrix sv(m, 1);
      for (int i = 0; i < m; ++i) {
        const double d =
            (*degree_override)[static_cast<std::size_t>(i)] +
            (model.config.add_self_loops ? 1.0 : 0.0);
        sv(i, 0) = d > 1e-12 ? 1.0 / std::sqrt(d) : 0.0;
      }
      s = tape.constant(std::move(sv));
    } else {
      s = rsqrt_safe(rowsum(a1));
    }
    Var ahat = hadamard(a1, matmul(s, transpose(s)));
    for (int l = 0; l < model.config.layers; ++l) {
      h = bn_relu(model, tape,
                  matmul(ahat, matmul(h, tape.leaf(model.weights[static_cast<std::size_t>(l)]))),
                  l, eval_mode);
      out.layer_outputs.push_back(h);
    }
  } else {
    EdgeList el = edge_list_from(a1.value());
    Var w = gather_entries(a1, el.entries);
    out.layer_outputs = attention_stack(model, tape, h, el, w, m, eval_mode, &out.attention);
  }
  out.embeddings = out.layer_outputs.back();
  out.probs = softmax_rows(head_logits(model, tape, out.layer_outputs));
  return out;
}

TrainReport train(GnnModel& model, const Graph& graph, const Split& split, int epochs,
                  double lr) {
  if (graph.labels.empty()) throw std::invalid_argument("train: graph has no labels");
  std::vector<ad::Tensor*> params = model.parameters();
  ad::AdamState opt = ad::make_adam(params, lr);
  const auto train_entries = label_entries(split.train, graph.labels);
  const double inv = -1.0 / static_cast<double>(std::max<std::size_t>(1, split.train.size()));

  SparseMatrix ahat;
  EdgeList el;
  if (model.config.arch == Arch::gcn) {
    ahat = normalized_adjacency(graph, model.config.add_self_loops);
  } else {
    Matrix a1 = dense_adjacency(graph);
    if (model.config.add_self_loops) a1 += Matrix::Identity(graph.n, graph.n);
    el = edge_list_from(a1);
  }
  auto stack = [&](Tape& tape, const BnMode& mode) {
    Var h = tape.constant(graph.features);
    return model.config.arch == Arch::gcn
               ? gcn_stack(model, tape, h, ahat, mode)
               : attention_stack(model, tape, h, el, Var(), graph.n, mode, nullptr);
  };

  TrainReport report;
  report.losses.reserve(static_cast<std::size_t>(epochs));
  for (int epoch = 0; epoch < epochs; ++epoch) {
    Tape tape;
    Var probs = softmax_rows(head_logits(model, tape, stack(tape, {true, false})));
    Var ce = scalar_mul(sum(ad::log(gather_entries(probs, train_entries))), inv);
    report.losses.push_back(ce.scalar());
    Var loss = model.config.weight_decay > 0.0
                   ? add(ce, weight_penalty(model, tape))
                   : ce;
    tape.backward(loss);
    ad::adam_step(opt, params);
  }

  // final pass: evaluate and store the normalization statistics of the final
  // parameters so later predictions reproduce these outputs exactly
  Tape tape;
  Matrix probs = softmax_rows(head_logits(model, tape, stack(tape, {true, true}))).value();
  report.train_accuracy = accuracy(probs, graph.labels, split.train);
  report.val_accuracy = accuracy(probs, graph.labels, split.val);
  report.test_accuracy = accuracy(probs, graph.labels, split.test);
  return report;
}

TrainReport train_graphs(GnnModel& model, const std::vector<Graph>& graphs,
                         const std::vector<int>& labels, const Split& split, int epochs,
                         double lr) {
  if (model.config.arch != Arch::gcn)
    throw std::invalid_argument("train_graphs: only the gcn arch is supported");
  if (graphs.size() != labels.size())
    throw std::invalid_argument("train_graphs: label count mismatch");

  // block-diagonal union graph + mean-pooling matrix, so every epoch is a
  // single sparse forward instead of one pass per graph
  int total = 0;
  for (const Graph& g : graphs) total += g.n;
  Matrix features(total, model.config.input_dim);
  std::vector<Eigen::Triplet<double>> atrip, ptrip;
  int base = 0;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const Graph& g = graphs[gi];
    Eigen::VectorXd s(g.n);
    for (int i = 0; i < g.n; ++i) {
      const double d = g.degree(i) + (model.config.add_self_loops ? 1.0 : 0.0);
      s(i) = d > 1e-12 ? 1.0 / std::sqrt(d) : 0.0;
    }
    for (const Edge& e : g.edges) {
      atrip.emplace_back(base + e.first, base + e.second, s(e.first) * s(e.second));
      atrip.emplace_back(base + e.second, base + e.first, s(e.first) * s(e.second));
    }
    for (int i = 0; i < g.n; ++i) {
      if (model.config.add_self_loops) atrip.emplace_back(base + i, base + i, s(i) * s(i));
      ptrip.emplace_back(static_cast<int>(gi), base + i, 1.0 / static_cast<double>(g.n));
      features.row(base + i) = g.features.row(i);
    }
    base += g.n;
  }
  SparseMatrix ahat(total, total), pool(static_cast<int>(graphs.size()), total);
  ahat.setFromTriplets(atrip.begin(), atrip.end());
  pool.setFromTriplets(ptrip.begin(), ptrip.end());

  std::vector<ad::Tensor*> params = model.parameters();
  ad::AdamState opt = ad::make_adam(params, lr);
  const auto train_entries = label_entries(split.train, labels);
  const double inv = -1.0 / static_cast<double>(std::max<std::size_t>(1, split.train.size()));

  TrainReport report;
  report.losses.reserve(static_cast<std::size_t>(epochs));
  Matrix final_probs;
  for (int epoch = 0; epoch <= epochs; ++epoch) {
    Tape tape;
    const bool last = epoch == epochs;  // evaluation pass, no update
    std::vector<Var> hs =
        gcn_stack(model, tape, tape.constant(features), ahat, {true, last});
    std::vector<Var> pooled;
    pooled.reserve(hs.size());
    for (Var h : hs) pooled.push_back(matmul(pool, h));
    Var probs = softmax_rows(head_logits(model, tape, pooled));
    if (last) {
      final_probs = probs.value();
      break;
    }
    Var ce = scalar_mul(sum(ad::log(gather_entries(probs, train_entries))), inv);
    report.losses.push_back(ce.scalar());
    Var loss = model.config.weight_decay > 0.0
                   ? add(ce, weight_penalty(model, tape))
                   : ce;
    tape.backward(loss);
    ad::adam_step(opt, params);
  }
  report.train_accuracy = accuracy(final_probs, labels, split.train);
  report.val_accuracy = accuracy(final_probs, labels, split.val);
  report.test_accuracy = accuracy(final_probs, labels, split.test);
  return report;
}

std::pair<int, Eigen::VectorXd> predict_node(GnnModel& model, const ComputationGraph& cg) {
  Tape tape;
  Var adj = tape.constant(cg.adjacency);
  const std::vector<int>* override_ptr =
      model.config.arch == Arch::gcn ? &cg.global_degrees : nullptr;
  Forward f = forward(model, tape, adj, cg.features, override_ptr);
  Eigen::VectorXd p = f.probs.value().row(cg.center).transpose();
  Eigen::Index arg = 0;
  p.maxCoeff(&arg);
  return {static_cast<int>(arg), std::move(p)};
}

std::pair<int, Eigen::VectorXd> predict_graph(GnnModel& model, const Graph& graph) {
  Tape tape;
  Var adj = tape.constant(dense_adjacency(graph));
  Forward f = forward(model, tape, adj, graph.features);
  std::vector<Var> pooled;
  pooled.reserve(f.layer_outputs.size());
  for (Var h : f.layer_outputs)
    pooled.push_back(tape.constant(h.value().colwise().mean()));
  Var probs = softmax_rows(head_logits(model, tape, pooled));
  Eigen::VectorXd p = probs.value().row(0).transpose();
  Eigen::Index arg = 0;
  p.maxCoeff(&arg);
  return {static_cast<int>(arg), std::move(p)};
}

Eigen::MatrixXd node_embeddings(GnnModel& model, const Graph& graph) {
  Tape tape;
  if (model.config.arch == Arch::gcn) {
    SparseMatrix ahat = normalized_adjacency(graph, model.config.add_self_loops);
    return gcn_stack(model, tape, tape.constant(graph.features), ahat, BnMode())
        .back()
        .value();
  }
  Var adj = tape.constant(dense_adjacency(graph));
  return forward(model, tape, adj, graph.features).embeddings.value();
}

Eigen::MatrixXd dense_adjacency(const Graph& graph) {
  Matrix a = Matrix::Zero(graph.n, graph.n);
  for (const Edge& e : graph.edges) a(e.first, e.second) = a(e.second, e.first) = 1.0;
  return a;
}

}  // namespace gnnx
