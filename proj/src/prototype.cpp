#include "gnnx/prototype.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace gnnx {

using ad::Matrix;
using ad::Tape;
using ad::Var;

namespace {

// weighted adjacency + features of an explanation's selected subgraph,
// nodes relabeled compactly in ascending local-id order
struct Subgraph {
  Matrix a;
  Matrix x;
  std::vector<int> nodes;  // computation-graph local ids
};

Subgraph explanation_subgraph(const Explanation& ex) {
  std::set<int> node_set = {ex.comp_graph.center};
  for (const Edge& e : ex.selected_edges) {
    node_set.insert(e.first);
    node_set.insert(e.second);
  }
  Subgraph out;
  out.nodes.assign(node_set.begin(), node_set.end());
  std::vector<int> to_compact(
      static_cast<std::size_t>(ex.comp_graph.adjacency.rows()), -1);
  for (std::size_t i = 0; i < out.nodes.size(); ++i)
    to_compact[static_cast<std::size_t>(out.nodes[i])] = static_cast<int>(i);

  const int n = static_cast<int>(out.nodes.size());
  out.a = Matrix::Zero(n, n);
  for (const Edge& e : ex.selected_edges) {
    const int a = to_compact[static_cast<std::size_t>(e.first)];
    const int b = to_compact[static_cast<std::size_t>(e.second)];
    out.a(a, b) = out.a(b, a) = ex.edge_scores(e.first, e.second);
  }
  out.x = Matrix(n, ex.comp_graph.features.cols());
  for (int i = 0; i < n; ++i)
    out.x.row(i) = ex.comp_graph.features.row(out.nodes[static_cast<std::size_t>(i)]);
  return out;
}

Matrix pad_square(const Matrix& a, int n) {
  Matrix out = Matrix::Zero(n, n);
  out.topLeftCorner(a.rows(), a.cols()) = a;
  return out;
}

Matrix pad_rows(const Matrix& x, int n) {
  Matrix out = Matrix::Zero(n, x.cols());
  out.topRows(x.rows()) = x;
  return out;
}

}  // namespace

int choose_reference_node(const Eigen::MatrixXd& embeddings,
                          const std::vector<int>& class_members) {
  if (class_members.empty())
    throw std::invalid_argument("choose_reference_node: no members");
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(embeddings.cols());
  for (int v : class_members) {
    if (v < 0 || v >= embeddings.rows())
      throw std::out_of_range("choose_reference_node: member out of range");
    mean += embeddings.row(v);
  }
  mean /= static_cast<double>(class_members.size());

  int best = -1;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int v : class_members) {
    const double dist = (embeddings.row(v) - mean).squaredNorm();
    if (dist < best_dist || (dist == best_dist && v < best)) {
      best_dist = dist;
      best = v;
    }
  }
  return best;
}

AlignmentResult align_explanation(const AlignmentProblem& problem, int epochs,
                                  double lr, int restarts, Rng& rng) {
  const int nv = static_cast<int>(problem.a_v.rows());
  const int ns = static_cast<int>(problem.a_star.rows());
  if (problem.a_v.cols() != nv || problem.a_star.cols() != ns)
    throw std::invalid_argument("align_explanation: adjacency not square");
  if (problem.x_v.rows() != nv || problem.x_star.rows() != ns ||
      problem.x_v.cols() != problem.x_star.cols())
    throw std::invalid_argument("align_explanation: feature shape mismatch");
  const bool with_features = problem.x_star.cols() > 0;

  AlignmentResult best;
  best.loss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Matrix init(nv, ns);
    if (r == 0 && nv == ns) {
      init = 6.0 * Matrix::Identity(nv, ns);  // near-identity start
    } else {
      for (int i = 0; i < nv; ++i)
        for (int j = 0; j < ns; ++j) init(i, j) = rng.normal(0.0, 1.0);
    }
    ad::Tensor logits(std::move(init), true);
    std::vector<ad::Tensor*> params = {&logits};
    ad::AdamState opt = ad::make_adam(params, lr);

    auto evaluate = [&](Tape& tape) {
      Var p = softmax_rows(tape.leaf(logits));
      Var pa = matmul(transpose(p), matmul(tape.constant(problem.a_v), p));
      Var da = sub(pa, tape.constant(problem.a_star));
      Var loss = sum(hadamard(da, da));
      if (with_features) {
        Var dx = sub(matmul(transpose(p), tape.constant(problem.x_v)),
                     tape.constant(problem.x_star));
        loss = add(loss, sum(hadamard(dx, dx)));
      }
      return std::pair{p, loss};
    };

    std::vector<double> trace;
    trace.reserve(static_cast<std::size_t>(epochs) + 1);
    for (int epoch = 0; epoch < epochs; ++epoch) {
      Tape tape;
      auto [p, loss] = evaluate(tape);
      trace.push_back(loss.scalar());
      tape.backward(loss);
      ad::adam_step(opt, params);
    }
    Tape tape;
    auto [p, loss] = evaluate(tape);
    trace.push_back(loss.scalar());
    if (loss.scalar() < best.loss) {
      best.loss = loss.scalar();
      best.p = p.value();
      best.aligned = p.value().transpose() * problem.a_v * p.value();
      best.losses.clear();
      double running = std::numeric_limits<double>::infinity();
      for (double t : trace) best.losses.push_back(running = std::min(running, t));
    }
  }
  return best;
}

Eigen::MatrixXd prototype_median(const std::vector<Eigen::MatrixXd>& aligned) {
  if (aligned.empty()) throw std::invalid_argument("prototype_median: empty input");
  const Eigen::Index r = aligned.front().rows(), c = aligned.front().cols();
  for (const Matrix& a : aligned)
    if (a.rows() != r || a.cols() != c)
      throw std::invalid_argument("prototype_median: shape mismatch");

  Matrix out(r, c);
  std::vector<double> bucket(aligned.size());
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) {
      for (std::size_t k = 0; k < aligned.size(); ++k) bucket[k] = aligned[k](i, j);
      // lower median for even counts
      const std::size_t mid = (bucket.size() - 1) / 2;
      std::nth_element(bucket.begin(), bucket.begin() + static_cast<long>(mid),
                       bucket.end());
      out(i, j) = bucket[mid];
    }
  return out;
}

Prototype build_class_prototype(GnnModel& model, const DatasetBundle& dataset,
                                int class_id, const ExplainerConfig& config,
                                Rng& rng, int max_members) {
  const Graph& g = dataset.graph;
  std::vector<int> members;
  for (int v = 0; v < g.n; ++v)
    if (g.labels[static_cast<std::size_t>(v)] == class_id) {
      members.push_back(v);
      if (max_members > 0 && static_cast<int>(members.size()) >= max_members) break;
    }
  if (members.empty())
    throw std::invalid_argument("build_class_prototype: class has no members");

  Matrix embeddings = node_embeddings(model, g);
  const int reference = choose_reference_node(embeddings, members);

  Explanation ref_ex = explain_node(model, g, reference, config, rng);
  Subgraph ref_sub = explanation_subgraph(ref_ex);
  const int ns = static_cast<int>(ref_sub.a.rows());

  std::vector<Matrix> aligned;
  aligned.reserve(members.size());
  for (int v : members) {
    if (v == reference) {
      aligned.push_back(ref_sub.a);
      continue;
    }
    Explanation ex = explain_node(model, g, v, config, rng);
    Subgraph sub = explanation_subgraph(ex);
    AlignmentProblem problem;
    const int n = std::max(ns, static_cast<int>(sub.a.rows()));
    problem.a_v = pad_square(sub.a, n);
    problem.x_v = pad_rows(sub.x, n);
    problem.a_star = pad_square(ref_sub.a, ns);
    problem.x_star = pad_rows(ref_sub.x, ns);
    aligned.push_back(align_explanation(problem, 200, 0.1, 10, rng).aligned);
  }

  Prototype proto;
  proto.a_proto = prototype_median(aligned);
  proto.members = std::move(members);
  proto.class_id = class_id;
  proto.reference_node = reference;
  return proto;
}

}  // namespace gnnx
