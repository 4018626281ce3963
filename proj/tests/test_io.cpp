#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <string>

#include "gnnx/io.hpp"

using namespace gnnx;
using ad::Matrix;

namespace {

DatasetBundle small_bundle() {
  Matrix x(6, 2);
  x << 1.0, 0.25, 0.5, -1.0, 0.0, 0.125, 1.0, 1.0, 2.0, -0.5, 0.75, 3.0;
  DatasetBundle ds;
  ds.graph = build_graph(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 5}}, x,
                         {0, 1, 1, 0, 1, 0}, {0, 1, 2, 0, 1, 0},
                         {{1, 2}, {2, 3}}, {-1, 0, 0, 0, -1, -1});
  ds.split.train = {0, 1, 2, 3};
  ds.split.val = {4};
  ds.split.test = {5};
  ds.name = "toy";
  ds.seed = 42;
  ds.informative_feature = 1;
  return ds;
}

void check_same_graph(const Graph& a, const Graph& b) {
  CHECK(a.n == b.n);
  CHECK(a.edges == b.edges);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK(a.node_roles == b.node_roles);
  CHECK(a.gt_motif_edges == b.gt_motif_edges);
  CHECK(a.motif_id == b.motif_id);
}

}  // namespace

TEST_CASE("base64 matches the rfc test vectors and round-trips") {
  auto enc = [](const std::string& s) {
    return base64_encode(reinterpret_cast<const unsigned char*>(s.data()), s.size());
  };
  CHECK(enc("") == "");
  CHECK(enc("f") == "Zg==");
  CHECK(enc("fo") == "Zm8=");
  CHECK(enc("foo") == "Zm9v");
  CHECK(enc("foob") == "Zm9vYg==");
  CHECK(enc("fooba") == "Zm9vYmE=");
  CHECK(enc("foobar") == "Zm9vYmFy");

  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<unsigned char> bytes(static_cast<std::size_t>(rng.uniform_int(64)));
    for (unsigned char& b : bytes)
      b = static_cast<unsigned char>(rng.uniform_int(256));
    std::string text = base64_encode(bytes.data(), bytes.size());
    CHECK(base64_decode(text) == bytes);
  }

  CHECK_THROWS_AS(base64_decode("abc"), std::invalid_argument);
  CHECK_THROWS_AS(base64_decode("ab!="), std::invalid_argument);
  CHECK_THROWS_AS(base64_decode("=abc"), std::invalid_argument);
}

TEST_CASE("dataset json round-trip preserves every field") {
  DatasetBundle ds = small_bundle();
  std::string text = dataset_to_json(ds);
  DatasetBundle back = dataset_from_json(text);
  check_same_graph(ds.graph, back.graph);
  CHECK(back.name == "toy");
  CHECK(back.seed == 42);
  CHECK(back.informative_feature == 1);
  CHECK(back.split.train == ds.split.train);
  CHECK(back.split.val == ds.split.val);
  CHECK(back.split.test == ds.split.test);
  // serialization is deterministic
  CHECK(dataset_to_json(back) == text);
  CHECK(text.find(kToolkitVersion) != std::string::npos);

  CHECK_THROWS(graphset_from_json(text));
}

TEST_CASE("generated dataset survives a round trip bit-exactly") {
  DatasetBundle ds = generate_tree_cycles(5);
  DatasetBundle back = dataset_from_json(dataset_to_json(ds));
  check_same_graph(ds.graph, back.graph);
  CHECK(back.seed == 5);
  CHECK(back.name == "tree-cycles");
}

TEST_CASE("graphset json round-trip") {
  GraphsetBundle gs = generate_cycliq(3, 6, 8, 12);
  std::string text = graphset_to_json(gs);
  GraphsetBundle back = graphset_from_json(text);
  REQUIRE(back.graphs.size() == gs.graphs.size());
  for (std::size_t i = 0; i < gs.graphs.size(); ++i)
    check_same_graph(gs.graphs[i], back.graphs[i]);
  CHECK(back.labels == gs.labels);
  CHECK(back.split.train == gs.split.train);
  CHECK(graphset_to_json(back) == text);

  CHECK_THROWS(dataset_from_json(text));
}

TEST_CASE("checkpoints are byte-identical and bit-exact") {
  DatasetBundle ds = small_bundle();
  GnnConfig cfg;
  cfg.layers = 2;
  cfg.input_dim = 2;
  cfg.hidden_dim = 4;
  cfg.num_classes = 2;
  Rng wr(9);
  GnnModel model = make_model(cfg, wr);
  train(model, ds.graph, ds.split, 50, 0.01);

  std::string ck1 = model_to_json(model, "test");
  std::string ck2 = model_to_json(model, "test");
  CHECK(ck1 == ck2);

  GnnModel loaded = model_from_json(ck1);
  CHECK(model_to_json(loaded, "test") == ck1);
  CHECK(loaded.config == cfg);

  // loaded model predicts bit-identically
  for (int v = 0; v < ds.graph.n; ++v) {
    ComputationGraph cg = extract_computation_graph(ds.graph, v, cfg.layers);
    auto [c1, p1] = predict_node(model, cg);
    auto [c2, p2] = predict_node(loaded, cg);
    CHECK(c1 == c2);
    CHECK(p1 == p2);
  }

  CHECK_THROWS(model_from_json("{}"));
}

TEST_CASE("attention checkpoints carry the attention parameters") {
  GnnConfig cfg;
  cfg.layers = 2;
  cfg.input_dim = 2;
  cfg.hidden_dim = 3;
  cfg.num_classes = 2;
  cfg.arch = Arch::attention;
  Rng wr(4);
  GnnModel model = make_model(cfg, wr);
  GnnModel loaded = model_from_json(model_to_json(model, ""));
  REQUIRE(loaded.attn_left.size() == 2);
  CHECK(loaded.attn_left[0].value == model.attn_left[0].value);
  CHECK(loaded.attn_right[1].value == model.attn_right[1].value);
}

TEST_CASE("experiment config round-trip identity") {
  ExperimentConfig c;
  c.dataset = "tree-grid";
  c.seed = 77;
  c.model.layers = 4;
  c.model.hidden_dim = 16;
  c.model.arch = Arch::attention;
  c.model.weight_decay = 1e-4;
  c.explainer.epochs = 123;
  c.explainer.lr = 0.25;
  c.explainer.lambda_laplacian = 0.0;
  c.explainer.target = MaskTarget::supplied_label;
  c.explainer.supplied_label = 3;
  c.explainer.feature_sampling = FeatureSampling::plain_multiply;
  c.explainer.samples_z = 4;
  c.explainer.graph_level = true;
  c.methods = {"gnnx", "att"};
  c.out_dir = "/tmp/run";

  ExperimentConfig back = experiment_from_json(experiment_to_json(c));
  CHECK(back == c);
  CHECK(experiment_from_json(experiment_to_json(ExperimentConfig{})) ==
        ExperimentConfig{});
}

TEST_CASE("dot export marks ground truth, selections, and the center") {
  Explanation ex;
  ex.comp_graph.center = 0;
  ex.comp_graph.adjacency = Matrix::Zero(4, 4);
  auto link = [&](int a, int b) {
    ex.comp_graph.adjacency(a, b) = ex.comp_graph.adjacency(b, a) = 1.0;
  };
  link(0, 1);
  link(1, 2);
  link(2, 3);
  ex.comp_graph.local_to_global = {10, 11, 12, 13};
  ex.edge_scores = Matrix::Zero(4, 4);
  ex.edge_scores(0, 1) = ex.edge_scores(1, 0) = 0.8;
  ex.selected_edges = {{0, 1}};

  std::string dot = explanation_to_dot(ex, {{1, 2}});
  CHECK(dot.find("doublecircle") != std::string::npos);
  CHECK(dot.find("n0 -- n1") != std::string::npos);
  // selected edge colored with alpha cc = round(0.8 * 255)
  CHECK(dot.find("#d62728cc") != std::string::npos);
  // gt edge solid black, remaining edge dotted
  CHECK(dot.find("n1 -- n2 [color=\"#000000\", style=solid]") != std::string::npos);
  CHECK(dot.find("n2 -- n3 [color=\"#bbbbbb\", style=dotted]") != std::string::npos);
  // global ids as labels
  CHECK(dot.find("label=\"13\"") != std::string::npos);
}

TEST_CASE("prototype export and file helpers") {
  Prototype p;
  p.a_proto = Matrix::Zero(3, 3);
  p.a_proto(0, 1) = p.a_proto(1, 0) = 1.0;
  p.a_proto(1, 2) = p.a_proto(2, 1) = 0.3;
  p.class_id = 2;
  p.reference_node = 7;
  p.members = {7, 8};

  std::string dot = prototype_to_dot(p, 0.5);
  CHECK(dot.find("n0 -- n1") != std::string::npos);  // above threshold
  CHECK(dot.find("n1 -- n2") == std::string::npos);  // below threshold

  std::string text = prototype_to_json(p, "prov");
  CHECK(text.find("\"class_id\": 2") != std::string::npos);

  std::string path = "/tmp/gnnx_io_test.json";
  write_file(path, text);
  CHECK(read_file(path) == text);
  std::remove(path.c_str());
  CHECK_THROWS(read_file("/tmp/definitely_missing_gnnx_file.json"));
  CHECK_THROWS(write_file("/tmp/no/such/dir/file.json", "x"));
}
