#pragma once

#include <utility>
#include <vector>

#include "gnnx/gnn.hpp"
#include "gnnx/graph.hpp"

namespace gnnx {

enum class MaskTarget { predicted_label, supplied_label };
enum class FeatureSampling { reparam_marginal, plain_multiply };
enum class ExtractMode { node_centered, largest_component };

// Edge- and feature-mask logits for one computation graph. The edge logits
// are kept symmetric (upper triangle mirrored) and only positions where the
// adjacency is 1 ever matter; everything else is inert.
struct ExplainerMasks {
  Eigen::MatrixXd edge_logits;     // m x m, symmetric
  Eigen::VectorXd feature_logits;  // d
};

struct ExplainerConfig {
  int epochs = 300;
  double lr = 0.01;  // faster preset; 0.001 matches the model's training rate
  double lambda_size = 0.005;
  double lambda_entropy = 0.1;
  double lambda_laplacian = 0.5;
  double lambda_feat = 0.1;
  int k_edges = 10;    // explanation size bound, counted in edges
  int k_features = 5;  // feature dimensions kept
  MaskTarget target = MaskTarget::predicted_label;
  int supplied_label = -1;  // used when target == supplied_label
  FeatureSampling feature_sampling = FeatureSampling::reparam_marginal;
  int samples_z = 1;  // fresh noise draws per epoch in reparam-marginal mode
  bool graph_level = false;  // pooled prediction; laplacian term off

  bool operator==(const ExplainerConfig&) const = default;
};

struct Explanation {
  ComputationGraph comp_graph;
  Eigen::MatrixXd edge_scores;      // sigma(edge logits) at convergence
  Eigen::VectorXd feature_scores;   // sigma(feature logits)
  std::vector<Edge> selected_edges; // local ids, subset of comp-graph edges
  std::vector<int> selected_features;
  double threshold_used = 0.0;
  double final_objective = 0.0;
  int predicted_class = -1;  // unmasked prediction (the explained target)
  int masked_class = -1;     // re-prediction using only the selected edges
  bool all_edges = false;    // k_edges exceeded the available edge count
  std::vector<double> losses;
};

// Feature-masked input: Z + (X - Z) * sigma(F) with Z drawn per dimension
// from the empirical distribution of that feature over the rows of X
// (plain-multiply mode: X * sigma(F)).
ad::Var marginalize_features(ad::Tape& tape, const Eigen::MatrixXd& features,
                             ad::Var feature_logits, FeatureSampling mode, Rng& rng);

// Differentiable objective: cross-entropy of the target label under the
// masked adjacency and masked features, plus size / entropy / laplacian /
// feature regularizers. `edge_logits` is m x m (symmetrized internally),
// `feature_logits` is 1 x d.
ad::Var objective(GnnModel& model, const ComputationGraph& cg, ad::Tape& tape,
                  ad::Var edge_logits, ad::Var feature_logits, int target_label,
                  const ExplainerConfig& config, Rng& rng);

// Adam descent on both masks; returns converged masks and the loss trace.
std::pair<ExplainerMasks, std::vector<double>> optimize_masks(
    GnnModel& model, const ComputationGraph& cg, int target_label,
    const ExplainerConfig& config, Rng& rng);

// Maximum-threshold scan on the edge scores: keep the smallest score set of
// size >= k_edges (ties included), then the component containing the center
// (node tasks) or the largest component (graph tasks).
Explanation extract_explanation_subgraph(const ExplainerMasks& masks,
                                         const ComputationGraph& cg,
                                         const ExplainerConfig& config,
                                         ExtractMode mode);

Explanation explain_node(GnnModel& model, const Graph& graph, int v,
                         const ExplainerConfig& config, Rng& rng);

Explanation explain_graph(GnnModel& model, const Graph& graph,
                          const ExplainerConfig& config, Rng& rng);

}  // namespace gnnx
