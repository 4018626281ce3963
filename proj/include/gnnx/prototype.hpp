#pragma once

#include <vector>

#include "gnnx/explainer.hpp"
#include "gnnx/gnn.hpp"
#include "gnnx/synthgen.hpp"

namespace gnnx {

// One explanation adjacency (weighted) plus features, to be aligned onto a
// reference of possibly different size via a relaxed row-stochastic map.
struct AlignmentProblem {
  Eigen::MatrixXd a_v, x_v;        // n_v x n_v and n_v x d
  Eigen::MatrixXd a_star, x_star;  // n* x n* and n* x d
};

struct AlignmentResult {
  Eigen::MatrixXd p;        // n_v x n*, rows sum to 1
  Eigen::MatrixXd aligned;  // P' A_v P, n* x n*
  double loss = 0.0;
  std::vector<double> losses;  // best value seen so far at each epoch
};

struct Prototype {
  Eigen::MatrixXd a_proto;  // n* x n*, entrywise median of aligned inputs
  std::vector<int> members;
  int class_id = -1;
  int reference_node = -1;
};

// Member whose embedding is closest (Euclidean) to the class mean; ties go to
// the smallest node id.
int choose_reference_node(const Eigen::MatrixXd& embeddings,
                          const std::vector<int>& class_members);

// Minimize |P'A_vP - A*|_F^2 + |P'X_v - X*|_F^2 over row-softmaxed logits,
// best of `restarts` random starts (plus a near-identity start when the
// shapes are square). A zero-column feature block drops the second term.
AlignmentResult align_explanation(const AlignmentProblem& problem, int epochs,
                                  double lr, int restarts, Rng& rng);

// Entrywise median; even counts take the lower median.
Eigen::MatrixXd prototype_median(const std::vector<Eigen::MatrixXd>& aligned);

// Explain every member of the class (capped at `max_members` > 0), align all
// explanation subgraphs to the reference member's, and median-aggregate.
Prototype build_class_prototype(GnnModel& model, const DatasetBundle& dataset,
                                int class_id, const ExplainerConfig& config,
                                Rng& rng, int max_members = 0);

}  // namespace gnnx
