#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "gnnx/baselines.hpp"

using namespace gnnx;
using ad::Matrix;
using ad::Tape;

namespace {

GnnConfig small_config(Arch arch, int input_dim, int classes) {
  GnnConfig c;
  c.layers = 2;
  c.input_dim = input_dim;
  c.hidden_dim = 8;
  c.num_classes = classes;
  c.arch = arch;
  return c;
}

// center CE after replacing the adjacency of the computation graph
double center_ce(GnnModel& model, const ComputationGraph& cg, const Matrix& a,
                 int target) {
  Tape tape;
  const std::vector<int>* override_ptr =
      model.config.arch == Arch::gcn ? &cg.global_degrees : nullptr;
  Forward f = forward(model, tape, tape.constant(a), cg.features, override_ptr);
  return -std::log(f.probs.value()(cg.center, target));
}

// trained 6-node instance: signal at node 2 reaches node 0 through 1
struct SmallInstance {
  Graph graph;
  GnnModel model;
};

SmallInstance trained_small_instance() {
  Matrix x = Matrix::Zero(6, 1);
  x(2, 0) = 1.0;
  Graph g = build_graph(6, {{0, 1}, {1, 2}, {0, 3}, {4, 5}}, x,
                        {1, 1, 1, 0, 0, 0});
  Rng wr(5);
  GnnModel model = make_model(small_config(Arch::gcn, 1, 2), wr);
  Split split;
  for (int v = 0; v < 6; ++v) split.train.push_back(v);
  TrainReport rep = train(model, g, split, 300, 0.01);
  REQUIRE(rep.train_accuracy == 1.0);
  return {std::move(g), std::move(model)};
}

// pairwise AUC of scores against a binary ground truth (ties give half credit)
double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& gt) {
  double wins = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (gt[i] != 1 || gt[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  return wins / pairs;
}

}  // namespace

TEST_CASE("gradient scores vanish outside the center's influence cone") {
  // nodes 2 and 3 are both two hops from the center, and their mutual edge
  // feeds the center only at the third layer — beyond a 2-layer model
  Matrix x(4, 1);
  x << 0.3, 0.9, -0.4, 1.2;
  Graph g = build_graph(4, {{0, 1}, {1, 2}, {1, 3}, {2, 3}}, x, {0, 1, 0, 1});
  Rng wr(5);
  GnnModel model = make_model(small_config(Arch::gcn, 1, 2), wr);
  ComputationGraph cg = extract_computation_graph(g, 0, 2);

  ImportanceScores s = grad_saliency(model, cg, 0);
  int l2 = -1, l3 = -1;
  for (std::size_t i = 0; i < cg.local_to_global.size(); ++i) {
    if (cg.local_to_global[i] == 2) l2 = static_cast<int>(i);
    if (cg.local_to_global[i] == 3) l3 = static_cast<int>(i);
  }
  REQUIRE(l2 >= 0);
  REQUIRE(l3 >= 0);
  CHECK(s.edge_scores(l2, l3) == 0.0);
  // the on-cone edges do receive gradient
  CHECK(s.edge_scores.cwiseAbs().maxCoeff() > 0.0);
  // symmetric and gated to real edges
  CHECK((s.edge_scores - s.edge_scores.transpose()).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (cg.adjacency(i, j) == 0.0) CHECK(s.edge_scores(i, j) == 0.0);
}

TEST_CASE("top gradient edge matches the edge-deletion oracle") {
  SmallInstance inst = trained_small_instance();
  ComputationGraph cg = extract_computation_graph(inst.graph, 0, 2);
  const int m = static_cast<int>(cg.adjacency.rows());
  const int target = predict_node(inst.model, cg).first;

  ImportanceScores s = grad_saliency(inst.model, cg, target);
  Edge top_grad{-1, -1};
  double best = -1.0;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      if (cg.adjacency(i, j) != 0.0 && s.edge_scores(i, j) > best) {
        best = s.edge_scores(i, j);
        top_grad = {i, j};
      }

  const double base = center_ce(inst.model, cg, cg.adjacency, target);
  Edge top_oracle{-1, -1};
  double worst = -1.0;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      if (cg.adjacency(i, j) != 0.0) {
        Matrix a = cg.adjacency;
        a(i, j) = a(j, i) = 0.0;
        const double rise = center_ce(inst.model, cg, a, target) - base;
        if (rise > worst) {
          worst = rise;
          top_oracle = {i, j};
        }
      }
  CHECK(top_grad == top_oracle);
}

TEST_CASE("gradient scores agree with small-perturbation ranking") {
  SmallInstance inst = trained_small_instance();
  ComputationGraph cg = extract_computation_graph(inst.graph, 0, 2);
  const int m = static_cast<int>(cg.adjacency.rows());
  const int target = predict_node(inst.model, cg).first;
  ImportanceScores s = grad_saliency(inst.model, cg, target);

  // oracle: |central difference| under a +/- eps symmetric edge perturbation
  const double eps = 1e-5;
  std::vector<double> grads, oracle;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      if (cg.adjacency(i, j) != 0.0) {
        Matrix hi = cg.adjacency, lo = cg.adjacency;
        hi(i, j) = hi(j, i) = 1.0 + eps;
        lo(i, j) = lo(j, i) = 1.0 - eps;
        oracle.push_back(std::abs(center_ce(inst.model, cg, hi, target) -
                                  center_ce(inst.model, cg, lo, target)) /
                         (2.0 * eps));
        grads.push_back(s.edge_scores(i, j));
      }
  int agree = 0, pairs = 0;
  for (std::size_t a = 0; a < grads.size(); ++a)
    for (std::size_t b = a + 1; b < grads.size(); ++b) {
      ++pairs;
      if ((grads[a] < grads[b]) == (oracle[a] < oracle[b])) ++agree;
    }
  CHECK(static_cast<double>(agree) / pairs >= 0.9);
}

TEST_CASE("feature saliency is the mean absolute feature gradient") {
  SmallInstance inst = trained_small_instance();
  ComputationGraph cg = extract_computation_graph(inst.graph, 0, 2);
  ImportanceScores s = grad_saliency(inst.model, cg, 1);
  REQUIRE(s.feature_scores.size() == 1);
  CHECK(s.feature_scores(0) > 0.0);
  CHECK_THROWS_AS(grad_saliency(inst.model, cg, 2), std::out_of_range);
}

TEST_CASE("attention importance is symmetric and respects automorphisms") {
  // star 0-1, 0-2, 0-3 with identical leaves: all edges are interchangeable
  Matrix x = Matrix::Ones(4, 1);
  Graph g = build_graph(4, {{0, 1}, {0, 2}, {0, 3}}, x);
  Rng wr(7);
  GnnModel model = make_model(small_config(Arch::attention, 1, 2), wr);
  ComputationGraph cg = extract_computation_graph(g, 0, 2);

  ImportanceScores s = attention_importance(model, cg);
  CHECK((s.edge_scores - s.edge_scores.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.edge_scores(0, 1) == doctest::Approx(s.edge_scores(0, 2)));
  CHECK(s.edge_scores(0, 1) == doctest::Approx(s.edge_scores(0, 3)));

  // the scores are a function of the computation graph alone: explaining a
  // different node with the same graph gives identical scores
  ComputationGraph other = cg;
  other.center = 1;
  ImportanceScores s2 = attention_importance(model, other);
  CHECK(s.edge_scores == s2.edge_scores);

  GnnModel gcn = make_model(small_config(Arch::gcn, 1, 2), wr);
  CHECK_THROWS_AS(attention_importance(gcn, cg), std::invalid_argument);
}

TEST_CASE("random importance is a symmetric, seeded coin with AUC near 0.5") {
  Matrix x = Matrix::Ones(8, 1);
  Graph g = build_graph(
      8, {{0, 1}, {0, 2}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 7}, {0, 7}, {1, 4}},
      x);
  ComputationGraph cg = extract_computation_graph(g, 0, 3);
  const int m = static_cast<int>(cg.adjacency.rows());

  Rng r1(11), r2(11);
  ImportanceScores a = random_importance(cg, r1);
  ImportanceScores b = random_importance(cg, r2);
  CHECK(a.edge_scores == b.edge_scores);
  CHECK((a.edge_scores - a.edge_scores.transpose()).cwiseAbs().maxCoeff() == 0.0);

  // balanced arbitrary ground truth: average AUC over 50 seeds stays near 0.5
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      if (cg.adjacency(i, j) != 0.0) edges.emplace_back(i, j);
  std::vector<int> gt(edges.size(), 0);
  for (std::size_t e = 0; e < edges.size() / 2; ++e) gt[e] = 1;
  double total = 0.0;
  for (int seed = 0; seed < 50; ++seed) {
    Rng r(static_cast<std::uint64_t>(seed));
    ImportanceScores s = random_importance(cg, r);
    std::vector<double> scores;
    for (const auto& [i, j] : edges) scores.push_back(s.edge_scores(i, j));
    total += pairwise_auc(scores, gt);
  }
  CHECK(total / 50.0 > 0.4);
  CHECK(total / 50.0 < 0.6);
}
