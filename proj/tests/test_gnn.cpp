#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "gnnx/gnn.hpp"

using namespace gnnx;
using ad::Matrix;
using ad::Tape;
using ad::Var;

namespace {

Graph random_graph(int n, double p, int d, Rng& rng) {
  std::vector<Edge> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.uniform() < p) edges.emplace_back(u, v);
  Matrix x(n, d);
  for (int i = 0; i < x.size(); ++i) x(i) = rng.normal();
  return build_graph(n, edges, x);
}

GnnConfig small_config(Arch arch, int d, int classes) {
  GnnConfig c;
  c.layers = 2;
  c.input_dim = d;
  c.hidden_dim = 8;
  c.num_classes = classes;
  c.arch = arch;
  return c;
}

}  // namespace

TEST_CASE("zero adjacency with self loops isolates every node") {
  Rng rng(1);
  GnnModel model = make_model(small_config(Arch::gcn, 3, 2), rng);
  Matrix x(4, 3);
  for (int i = 0; i < x.size(); ++i) x(i) = rng.normal();
  x.row(2) = x.row(0);  // duplicate features

  Tape t;
  Forward f = forward(model, t, t.constant(Matrix::Zero(4, 4)), x);
  Matrix p = f.probs.value();
  CHECK((p.row(0) - p.row(2)).cwiseAbs().maxCoeff() < 1e-14);

  // perturbing node 3's features must not affect node 0
  Matrix x2 = x;
  x2.row(3).setConstant(42.0);
  Tape t2;
  Matrix p2 = forward(model, t2, t2.constant(Matrix::Zero(4, 4)), x2).probs.value();
  CHECK((p.row(0) - p2.row(0)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("saturated mask weights reproduce the binary forward") {
  Rng rng(2);
  Graph g = random_graph(12, 0.3, 3, rng);
  for (Arch arch : {Arch::gcn, Arch::attention}) {
    Rng wr(7);
    GnnModel model = make_model(small_config(arch, 3, 2), wr);
    Matrix a = dense_adjacency(g);
    const double sat = 1.0 / (1.0 + std::exp(-20.0));  // sigma(+20)
    Tape t1, t2;
    Matrix pb = forward(model, t1, t1.constant(a), g.features).probs.value();
    Matrix pm = forward(model, t2, t2.constant((a.array() * sat).matrix()), g.features)
                    .probs.value();
    CHECK((pb - pm).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("node permutation permutes outputs identically") {
  Rng rng(3);
  Graph g = random_graph(10, 0.3, 4, rng);
  std::vector<int> perm(10);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = 9; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(i + 1)]);

  std::vector<Edge> pedges;
  for (const Edge& e : g.edges) pedges.push_back(make_edge(perm[e.first], perm[e.second]));
  Matrix px(10, 4);
  for (int i = 0; i < 10; ++i) px.row(perm[i]) = g.features.row(i);
  Graph pg = build_graph(10, pedges, px);

  for (Arch arch : {Arch::gcn, Arch::attention}) {
    Rng wr(11);
    GnnModel model = make_model(small_config(arch, 4, 3), wr);
    Tape t1, t2;
    Matrix p = forward(model, t1, t1.constant(dense_adjacency(g)), g.features).probs.value();
    Matrix pp = forward(model, t2, t2.constant(dense_adjacency(pg)), pg.features).probs.value();
    for (int i = 0; i < 10; ++i)
      CHECK((p.row(i) - pp.row(perm[i])).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("probability rows sum to one") {
  Rng rng(4);
  Graph g = random_graph(8, 0.4, 2, rng);
  for (Arch arch : {Arch::gcn, Arch::attention}) {
    Rng wr(5);
    GnnModel model = make_model(small_config(arch, 2, 4), wr);
    Tape t;
    Matrix p = forward(model, t, t.constant(dense_adjacency(g)), g.features).probs.value();
    for (int i = 0; i < 8; ++i) {
      CHECK(p.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(p.row(i).minCoeff() > 0.0);
    }
  }
}

TEST_CASE("attention coefficients over in-edges sum to one") {
  Rng rng(6);
  Graph g = random_graph(9, 0.35, 2, rng);
  Rng wr(13);
  GnnModel model = make_model(small_config(Arch::attention, 2, 2), wr);
  Tape t;
  Forward f = forward(model, t, t.constant(dense_adjacency(g)), g.features);
  REQUIRE(f.attention.size() == 2);
  for (const Matrix& alpha : f.attention)
    for (int i = 0; i < 9; ++i) CHECK(alpha.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("training a linearly separable edgeless problem reaches high accuracy") {
  Rng rng(8);
  const int n = 100;
  Matrix x(n, 2);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    labels[i] = i % 2;
    const double mu = labels[i] == 0 ? -2.0 : 2.0;
    x(i, 0) = rng.normal(mu, 0.3);
    x(i, 1) = rng.normal(0.0, 0.3);
  }
  Graph g = build_graph(n, {}, x, labels);
  Split split;
  for (int i = 0; i < n; ++i)
    (i < 80 ? split.train : i < 90 ? split.val : split.test).push_back(i);

  Rng wr(9);
  GnnModel model = make_model(small_config(Arch::gcn, 2, 2), wr);
  TrainReport rep = train(model, g, split, 300, 0.01);
  CHECK(rep.test_accuracy >= 0.95);

  // smoothed loss is nonincreasing over 50-epoch windows
  auto window_mean = [&](int start) {
    double s = 0;
    for (int i = start; i < start + 50; ++i) s += rep.losses[static_cast<std::size_t>(i)];
    return s / 50.0;
  };
  for (int start = 0; start + 100 <= static_cast<int>(rep.losses.size()); start += 50)
    CHECK(window_mean(start + 50) <= window_mean(start) + 1e-9);
}

TEST_CASE("center prediction on the computation graph matches the full graph") {
  Rng rng(10);
  Graph g = random_graph(40, 0.08, 3, rng);
  Rng wr(21);
  GnnConfig cfg = small_config(Arch::gcn, 3, 3);
  cfg.layers = 3;
  GnnModel model = make_model(cfg, wr);

  Tape t;
  Matrix full = forward(model, t, t.constant(dense_adjacency(g)), g.features).probs.value();
  for (int v : {0, 7, 19, 33}) {
    ComputationGraph cg = extract_computation_graph(g, v, cfg.layers);
    auto [cls, p] = predict_node(model, cg);
    CHECK((p.transpose() - full.row(v)).cwiseAbs().maxCoeff() == 0.0);  // bit-identical
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
    Eigen::Index arg = 0;
    full.row(v).maxCoeff(&arg);
    CHECK(cls == static_cast<int>(arg));
  }
}

TEST_CASE("center distribution is invariant to relabeling non-center local ids") {
  Rng rng(12);
  Graph g = random_graph(25, 0.15, 2, rng);
  Rng wr(23);
  GnnModel model = make_model(small_config(Arch::gcn, 2, 2), wr);
  ComputationGraph cg = extract_computation_graph(g, 5, 2);
  auto [cls, p] = predict_node(model, cg);

  const int m = cg.size();
  if (m > 2) {
    // swap two non-center local ids
    ComputationGraph cg2 = cg;
    const int a = 1, b = m - 1;
    cg2.adjacency.row(a).swap(cg2.adjacency.row(b));
    cg2.adjacency.col(a).swap(cg2.adjacency.col(b));
    cg2.features.row(a).swap(cg2.features.row(b));
    std::swap(cg2.local_to_global[a], cg2.local_to_global[b]);
    std::swap(cg2.global_degrees[a], cg2.global_degrees[b]);
    auto [cls2, p2] = predict_node(model, cg2);
    CHECK(cls2 == cls);
    CHECK((p - p2).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("monotone masking: zeroing an edge only affects its influence cone") {
  Rng rng(14);
  // path 0-1-2-3-4-5; 2 layers; zeroing edge (4,5) cannot affect node 0 or 1
  Graph g = build_graph(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}},
                        Matrix::Ones(6, 2), {});
  Rng wr(15);
  GnnModel model = make_model(small_config(Arch::gcn, 2, 2), wr);
  Matrix a = dense_adjacency(g);
  Tape t1;
  Matrix p = forward(model, t1, t1.constant(a), g.features).probs.value();
  Matrix a2 = a;
  a2(4, 5) = a2(5, 4) = 0.0;
  Tape t2;
  Matrix p2 = forward(model, t2, t2.constant(a2), g.features).probs.value();
  CHECK((p.row(0) - p2.row(0)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((p.row(1) - p2.row(1)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((p.row(4) - p2.row(4)).cwiseAbs().maxCoeff() > 1e-12);  // inside the cone
}

TEST_CASE("graph-level prediction") {
  Rng rng(16);
  Rng wr(17);
  GnnModel model = make_model(small_config(Arch::gcn, 2, 2), wr);

  // single node: head applied to its embedding
  Matrix x1(1, 2);
  x1 << 0.4, -0.7;
  Graph single = build_graph(1, {}, x1);
  auto [c1, p1] = predict_graph(model, single);
  CHECK(p1.sum() == doctest::Approx(1.0).epsilon(1e-12));
  Tape t;
  Forward f1 = forward(model, t, t.constant(Matrix::Zero(1, 1)), x1);
  Tape t2;
  Var logits;
  for (std::size_t l = 0; l < f1.layer_outputs.size(); ++l) {
    Var part = matmul(t2.constant(f1.layer_outputs[l].value()), t2.leaf(model.heads[l]));
    logits = logits.valid() ? add(logits, part) : part;
  }
  Matrix ref =
      softmax_rows(add_row_broadcast(logits, t2.leaf(model.head_bias))).value();
  CHECK((p1.transpose() - ref.row(0)).cwiseAbs().maxCoeff() < 1e-14);

  // two isomorphic triangles with permuted labels give identical outputs
  Matrix xt = Matrix::Ones(3, 2);
  Graph tri1 = build_graph(3, {{0, 1}, {1, 2}, {0, 2}}, xt);
  Graph tri2 = build_graph(3, {{2, 1}, {0, 2}, {1, 0}}, xt);
  auto [ca, pa] = predict_graph(model, tri1);
  auto [cb, pb] = predict_graph(model, tri2);
  CHECK(ca == cb);
  CHECK((pa - pb).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("graph classification training separates an easy two-class set") {
  Rng rng(18);
  // class 0: path of 4; class 1: star of 6 — distinguishable by structure
  std::vector<Graph> graphs;
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) {
    if (i % 2 == 0) {
      graphs.push_back(build_graph(4, {{0, 1}, {1, 2}, {2, 3}}, Matrix::Ones(4, 1)));
      labels.push_back(0);
    } else {
      graphs.push_back(
          build_graph(6, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}}, Matrix::Ones(6, 1)));
      labels.push_back(1);
    }
  }
  Split split;
  for (int i = 0; i < 40; ++i)
    (i < 32 ? split.train : i < 36 ? split.val : split.test).push_back(i);
  Rng wr(19);
  GnnModel model = make_model(small_config(Arch::gcn, 1, 2), wr);
  TrainReport rep = train_graphs(model, graphs, labels, split, 200, 0.01);
  CHECK(rep.test_accuracy == 1.0);
}

TEST_CASE("node embeddings shape and permutation equivariance") {
  Rng rng(20);
  Graph g = random_graph(12, 0.3, 3, rng);
  Rng wr(25);
  GnnModel model = make_model(small_config(Arch::gcn, 3, 2), wr);
  Matrix z = node_embeddings(model, g);
  CHECK(z.rows() == 12);
  CHECK(z.cols() == 8);
}

TEST_CASE("training loss gradient passes finite differences") {
  Rng rng(22);
  Graph g = random_graph(8, 0.4, 3, rng);
  std::vector<int> labels(8);
  for (int i = 0; i < 8; ++i) labels[i] = i % 2;
  Matrix a = dense_adjacency(g);
  std::vector<std::pair<int, int>> entries;
  for (int i = 0; i < 8; ++i) entries.emplace_back(i, labels[static_cast<std::size_t>(i)]);

  for (Arch arch : {Arch::gcn, Arch::attention}) {
    Rng wr(27);
    GnnModel model = make_model(small_config(arch, 3, 2), wr);
    auto params = model.parameters();
    Rng fr(29);
    double err = ad::finite_diff_check(
        [&](Tape& t) {
          Forward f = forward(model, t, t.constant(a), g.features);
          return scalar_mul(sum(ad::log(gather_entries(f.probs, entries))), -1.0 / 8.0);
        },
        params, 1e-6, 5, fr);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("negative adjacency entries are rejected") {
  Rng wr(30);
  GnnModel model = make_model(small_config(Arch::gcn, 1, 2), wr);
  Tape t;
  Matrix a = Matrix::Zero(2, 2);
  a(0, 1) = a(1, 0) = -0.5;
  CHECK_THROWS_AS(forward(model, t, t.constant(a), Matrix::Ones(2, 1)),
                  std::invalid_argument);
}
