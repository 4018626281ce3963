#pragma once

#include <string>

#include "gnnx/gnn.hpp"
#include "gnnx/graph.hpp"

namespace gnnx {

// Edge (and optionally feature) importance aligned to one computation graph.
struct ImportanceScores {
  Eigen::MatrixXd edge_scores;     // m x m, symmetric, zero off the edge set
  Eigen::VectorXd feature_scores;  // empty when the method scores edges only
  std::string method;
};

// |d CE / d A| at the binary adjacency, symmetrized; feature scores are the
// per-dimension mean of |d CE / d x| over nodes.
ImportanceScores grad_saliency(GnnModel& model, const ComputationGraph& cg,
                               int target_label);

// Mean attention coefficient across layers per edge, symmetrized. Requires
// the attention arch.
ImportanceScores attention_importance(GnnModel& model, const ComputationGraph& cg);

// iid uniform scores on the edge set — the sanity floor (expected AUC 0.5).
ImportanceScores random_importance(const ComputationGraph& cg, Rng& rng);

}  // namespace gnnx
