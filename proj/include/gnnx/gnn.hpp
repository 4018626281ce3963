#pragma once

#include <utility>
#include <vector>

#include "gnnx/autodiff.hpp"
#include "gnnx/graph.hpp"
#include "gnnx/rng.hpp"

namespace gnnx {

enum class Arch { gcn, attention };

struct GnnConfig {
  int layers = 3;
  int input_dim = 1;
  int hidden_dim = 20;
  int num_classes = 2;
  Arch arch = Arch::gcn;
  bool add_self_loops = true;
  // L2 penalty on the layer weights and head blocks during training (the
  // normalization scale/shift parameters are not decayed).
  double weight_decay = 5e-3;

  bool operator==(const GnnConfig&) const = default;
};

// Layer weights live in Tensors so tapes can attach to them directly.
struct GnnModel {
  GnnConfig config;
  std::vector<ad::Tensor> weights;     // layer l: in x hidden
  // Per-layer shift applied after normalization, zero-initialized. With
  // constant node features a shift-free GCN collapses to rank one
  // (relu(c W) = c relu(W) for c > 0), making more than two classes
  // unlearnable; the shift breaks that proportionality.
  std::vector<ad::Tensor> biases;      // layer l: 1 x hidden
  std::vector<ad::Tensor> attn_left;   // attention arch: hidden x 1 per layer
  std::vector<ad::Tensor> attn_right;  // attention arch: hidden x 1 per layer
  // Per-layer batch normalization of the aggregated pre-activation. Training
  // normalizes with full-batch statistics; the statistics of the final
  // parameters are stored here and used as constants at prediction time, so a
  // node's output never depends on what else is evaluated alongside it.
  std::vector<ad::Tensor> bn_scale;      // layer l: 1 x hidden, ones
  std::vector<Eigen::MatrixXd> bn_mean;  // layer l: 1 x hidden
  std::vector<Eigen::MatrixXd> bn_var;   // layer l: 1 x hidden
  // One head block per layer; the logits are the sum of h^l heads[l], which
  // is a single linear head over the concatenation of all layer outputs.
  std::vector<ad::Tensor> heads;  // layer l: hidden x num_classes
  ad::Tensor head_bias;           // 1 x num_classes

  std::vector<ad::Tensor*> parameters();
};

// Glorot-uniform initialization from the given stream.
GnnModel make_model(const GnnConfig& config, Rng& rng);

struct Forward {
  ad::Var probs;                           // m x C, rows sum to 1
  ad::Var embeddings;                      // m x hidden (last layer output)
  std::vector<ad::Var> layer_outputs;      // every layer's m x hidden output
  std::vector<Eigen::MatrixXd> attention;  // attention arch: per-layer m x m coefficients
};

// Differentiable forward pass over a dense weighted adjacency (entries >= 0).
// GCN: h^l = relu(bn(Ahat h^{l-1} W^l) + b^l), Ahat = D^{-1/2} (A_w + I) D^{-1/2};
// the weighted adjacency enters before normalization, so a fully masked edge
// behaves like a deleted edge. `degree_override`, when given, supplies each
// node's parent-graph degree (self-loop excluded) to use in the normalization
// instead of the local row sums — see ComputationGraph::global_degrees.
// Batch normalization uses the model's stored statistics as constants.
Forward forward(GnnModel& model, ad::Tape& tape, ad::Var adjacency,
                const Eigen::MatrixXd& features,
                const std::vector<int>* degree_override = nullptr);

// Same pass with differentiable features (for feature masking).
Forward forward(GnnModel& model, ad::Tape& tape, ad::Var adjacency, ad::Var features,
                const std::vector<int>* degree_override = nullptr);

struct Split {
  std::vector<int> train, val, test;
};

struct TrainReport {
  std::vector<double> losses;  // per-epoch training cross-entropy
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
};

// Full-batch Adam on cross-entropy over the train nodes.
TrainReport train(GnnModel& model, const Graph& graph, const Split& split, int epochs,
                  double lr);

// Graph classification: one label per graph, mean-pooled embeddings. GCN only.
TrainReport train_graphs(GnnModel& model, const std::vector<Graph>& graphs,
                         const std::vector<int>& labels, const Split& split, int epochs,
                         double lr);

// Prediction at the center of a computation graph, using parent degrees so the
// result matches the full-graph forward exactly.
std::pair<int, Eigen::VectorXd> predict_node(GnnModel& model, const ComputationGraph& cg);

std::pair<int, Eigen::VectorXd> predict_graph(GnnModel& model, const Graph& graph);

// Final-layer embeddings z_i for all nodes.
Eigen::MatrixXd node_embeddings(GnnModel& model, const Graph& graph);

// Dense symmetric 0/1 adjacency of a whole graph.
Eigen::MatrixXd dense_adjacency(const Graph& graph);

}  // namespace gnnx
