#include "gnnx/baselines.hpp"

#include <cmath>
#include <stdexcept>

namespace gnnx {

using ad::Matrix;
using ad::Tape;
using ad::Var;

namespace {

// zero out positions that are not computation-graph edges
Matrix gate(const Matrix& scores, const Matrix& adjacency) {
  return scores.cwiseProduct(adjacency);
}

}  // namespace

ImportanceScores grad_saliency(GnnModel& model, const ComputationGraph& cg,
                               int target_label) {
  if (target_label < 0 || target_label >= model.config.num_classes)
    throw std::out_of_range("grad_saliency: target label out of range");

  // gradients at the binary adjacency, with the same degree semantics the
  // model uses to predict this node
  ad::Tensor adj(cg.adjacency, true);
  ad::Tensor feat(cg.features, true);
  Tape tape;
  const std::vector<int>* override_ptr =
      model.config.arch == Arch::gcn ? &cg.global_degrees : nullptr;
  Forward f =
      forward(model, tape, tape.leaf(adj), tape.leaf(feat), override_ptr);
  Var ce = scalar_mul(
      sum(ad::log(gather_entries(f.probs, {{cg.center, target_label}}))), -1.0);
  tape.backward(ce);

  ImportanceScores out;
  out.method = "grad";
  Matrix g = adj.grad.cwiseAbs();
  out.edge_scores = gate(0.5 * (g + g.transpose()), cg.adjacency);
  out.feature_scores = feat.grad.cwiseAbs().colwise().mean().transpose();
  return out;
}

ImportanceScores attention_importance(GnnModel& model, const ComputationGraph& cg) {
  if (model.config.arch != Arch::attention)
    throw std::invalid_argument("attention_importance: needs the attention arch");
  Tape tape;
  Forward f = forward(model, tape, tape.constant(cg.adjacency), cg.features);
  const int m = static_cast<int>(cg.adjacency.rows());
  Matrix mean = Matrix::Zero(m, m);
  for (const Matrix& alpha : f.attention) mean += alpha;
  mean /= static_cast<double>(f.attention.size());

  ImportanceScores out;
  out.method = "att";
  out.edge_scores = gate(0.5 * (mean + mean.transpose()), cg.adjacency);
  return out;
}

ImportanceScores random_importance(const ComputationGraph& cg, Rng& rng) {
  const int m = static_cast<int>(cg.adjacency.rows());
  ImportanceScores out;
  out.method = "random";
  out.edge_scores = Matrix::Zero(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      if (cg.adjacency(i, j) != 0.0)
        out.edge_scores(i, j) = out.edge_scores(j, i) = rng.uniform();
  return out;
}

}  // namespace gnnx
