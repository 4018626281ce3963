#include "gnnx/io.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gnnx {

using json = nlohmann::json;
using ad::Matrix;

namespace {

constexpr const char* kB64Chars =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

json edges_to_json(const std::vector<Edge>& edges) {
  json out = json::array();
  for (const Edge& e : edges) out.push_back({e.first, e.second});
  return out;
}

std::vector<Edge> edges_from_json(const json& j) {
  std::vector<Edge> out;
  for (const auto& e : j) out.push_back(make_edge(e.at(0), e.at(1)));
  return out;
}

json matrix_to_rows(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

Matrix matrix_from_rows(const json& j, Eigen::Index cols_hint = 0) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = cols_hint;
  if (rows > 0) cols = static_cast<Eigen::Index>(j.at(0).size());
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw std::invalid_argument("matrix_from_rows: ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) out(i, c) = row.at(static_cast<std::size_t>(c));
  }
  return out;
}

json split_to_json(const Split& s) {
  return json{{"train", s.train}, {"val", s.val}, {"test", s.test}};
}

Split split_from_json(const json& j) {
  Split s;
  s.train = j.at("train").get<std::vector<int>>();
  s.val = j.at("val").get<std::vector<int>>();
  s.test = j.at("test").get<std::vector<int>>();
  return s;
}

json graph_to_json(const Graph& g) {
  json out;
  out["n"] = g.n;
  out["edges"] = edges_to_json(g.edges);
  out["features"] = matrix_to_rows(g.features);
  out["labels"] = g.labels;
  out["roles"] = g.node_roles;
  out["gt_edges"] = edges_to_json(g.gt_motif_edges);
  out["motif_id"] = g.motif_id;
  return out;
}

Graph graph_from_json(const json& j) {
  const int n = j.at("n");
  Matrix features = matrix_from_rows(j.at("features"));
  if (features.rows() == 0) features = Matrix(n, 0);
  return build_graph(n, edges_from_json(j.at("edges")), std::move(features),
                     j.at("labels").get<std::vector<int>>(),
                     j.at("roles").get<std::vector<int>>(),
                     edges_from_json(j.at("gt_edges")),
                     j.value("motif_id", std::vector<int>{}));
}

const char* arch_name(Arch a) { return a == Arch::gcn ? "gcn" : "attention"; }

Arch arch_from_name(const std::string& s) {
  if (s == "gcn") return Arch::gcn;
  if (s == "attention") return Arch::attention;
  throw std::invalid_argument("unknown arch: " + s);
}

json gnn_config_to_json(const GnnConfig& c) {
  return json{{"layers", c.layers},
              {"input_dim", c.input_dim},
              {"hidden_dim", c.hidden_dim},
              {"num_classes", c.num_classes},
              {"arch", arch_name(c.arch)},
              {"add_self_loops", c.add_self_loops},
              {"weight_decay", c.weight_decay}};
}

GnnConfig gnn_config_from_json(const json& j) {
  GnnConfig c;
  c.layers = j.at("layers");
  c.input_dim = j.at("input_dim");
  c.hidden_dim = j.at("hidden_dim");
  c.num_classes = j.at("num_classes");
  c.arch = arch_from_name(j.at("arch"));
  c.add_self_loops = j.at("add_self_loops");
  c.weight_decay = j.at("weight_decay");
  return c;
}

json explainer_config_to_json(const ExplainerConfig& c) {
  return json{
      {"epochs", c.epochs},
      {"lr", c.lr},
      {"lambda_size", c.lambda_size},
      {"lambda_entropy", c.lambda_entropy},
      {"lambda_laplacian", c.lambda_laplacian},
      {"lambda_feat", c.lambda_feat},
      {"k_edges", c.k_edges},
      {"k_features", c.k_features},
      {"target", c.target == MaskTarget::predicted_label ? "predicted" : "supplied"},
      {"supplied_label", c.supplied_label},
      {"feature_sampling", c.feature_sampling == FeatureSampling::reparam_marginal
                               ? "reparam_marginal"
                               : "plain_multiply"},
      {"samples_z", c.samples_z},
      {"graph_level", c.graph_level}};
}

ExplainerConfig explainer_config_from_json(const json& j) {
  ExplainerConfig c;
  c.epochs = j.at("epochs");
  c.lr = j.at("lr");
  c.lambda_size = j.at("lambda_size");
  c.lambda_entropy = j.at("lambda_entropy");
  c.lambda_laplacian = j.at("lambda_laplacian");
  c.lambda_feat = j.at("lambda_feat");
  c.k_edges = j.at("k_edges");
  c.k_features = j.at("k_features");
  const std::string target = j.at("target");
  if (target == "predicted") {
    c.target = MaskTarget::predicted_label;
  } else if (target == "supplied") {
    c.target = MaskTarget::supplied_label;
  } else {
    throw std::invalid_argument("unknown mask target: " + target);
  }
  c.supplied_label = j.at("supplied_label");
  const std::string sampling = j.at("feature_sampling");
  if (sampling == "reparam_marginal") {
    c.feature_sampling = FeatureSampling::reparam_marginal;
  } else if (sampling == "plain_multiply") {
    c.feature_sampling = FeatureSampling::plain_multiply;
  } else {
    throw std::invalid_argument("unknown feature sampling: " + sampling);
  }
  c.samples_z = j.at("samples_z");
  c.graph_level = j.at("graph_level");
  return c;
}

// base64 of a matrix's entries in row-major order
json blob_to_json(const Matrix& m) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  const auto* bytes = reinterpret_cast<const unsigned char*>(rm.data());
  return json{{"rows", m.rows()},
              {"cols", m.cols()},
              {"data", base64_encode(bytes, sizeof(double) * static_cast<std::size_t>(m.size()))}};
}

Matrix blob_from_json(const json& j) {
  const Eigen::Index rows = j.at("rows"), cols = j.at("cols");
  std::vector<unsigned char> bytes = base64_decode(j.at("data"));
  if (bytes.size() != sizeof(double) * static_cast<std::size_t>(rows * cols))
    throw std::invalid_argument("checkpoint blob size mismatch");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  std::memcpy(rm.data(), bytes.data(), bytes.size());
  return rm;
}

json tensor_list_to_json(const std::vector<ad::Tensor>& list) {
  json out = json::array();
  for (const ad::Tensor& t : list) out.push_back(blob_to_json(t.value));
  return out;
}

json matrix_list_to_json(const std::vector<Matrix>& list) {
  json out = json::array();
  for (const Matrix& m : list) out.push_back(blob_to_json(m));
  return out;
}

void load_tensor_list(const json& j, std::vector<ad::Tensor>& into) {
  if (j.size() != into.size())
    throw std::invalid_argument("checkpoint tensor count mismatch");
  for (std::size_t i = 0; i < into.size(); ++i) {
    Matrix v = blob_from_json(j.at(i));
    if (v.rows() != into[i].value.rows() || v.cols() != into[i].value.cols())
      throw std::invalid_argument("checkpoint tensor shape mismatch");
    into[i].value = std::move(v);
  }
}

void load_matrix_list(const json& j, std::vector<Matrix>& into) {
  if (j.size() != into.size())
    throw std::invalid_argument("checkpoint matrix count mismatch");
  for (std::size_t i = 0; i < into.size(); ++i) into[i] = blob_from_json(j.at(i));
}

// 8-bit alpha channel from a score in [0, 1]
std::string alpha_hex(double score) {
  const int a = std::max(0, std::min(255, static_cast<int>(score * 255.0 + 0.5)));
  static const char* digits = "0123456789abcdef";
  return {digits[a / 16], digits[a % 16]};
}

}  // namespace

std::string experiment_to_json(const ExperimentConfig& config) {
  json out;
  out["version"] = kToolkitVersion;
  out["dataset"] = config.dataset;
  out["seed"] = config.seed;
  out["model"] = gnn_config_to_json(config.model);
  out["explainer"] = explainer_config_to_json(config.explainer);
  out["methods"] = config.methods;
  out["out_dir"] = config.out_dir;
  return out.dump(2) + "\n";
}

ExperimentConfig experiment_from_json(const std::string& text) {
  json j = json::parse(text);
  ExperimentConfig c;
  c.dataset = j.at("dataset");
  c.seed = j.at("seed");
  c.model = gnn_config_from_json(j.at("model"));
  c.explainer = explainer_config_from_json(j.at("explainer"));
  c.methods = j.at("methods").get<std::vector<std::string>>();
  c.out_dir = j.at("out_dir");
  return c;
}

std::string dataset_to_json(const DatasetBundle& dataset) {
  json out = graph_to_json(dataset.graph);
  out["meta"] = json{{"kind", "node"},
                     {"name", dataset.name},
                     {"seed", dataset.seed},
                     {"version", kToolkitVersion},
                     {"informative_feature", dataset.informative_feature},
                     {"split", split_to_json(dataset.split)}};
  return out.dump(2) + "\n";
}

DatasetBundle dataset_from_json(const std::string& text) {
  json j = json::parse(text);
  const json& meta = j.at("meta");
  if (meta.at("kind") != "node")
    throw std::invalid_argument("dataset_from_json: not a node-task dataset");
  DatasetBundle out;
  out.graph = graph_from_json(j);
  out.name = meta.at("name");
  out.seed = meta.at("seed");
  out.informative_feature = meta.at("informative_feature");
  out.split = split_from_json(meta.at("split"));
  return out;
}

std::string graphset_to_json(const GraphsetBundle& dataset) {
  json graphs = json::array();
  for (const Graph& g : dataset.graphs) graphs.push_back(graph_to_json(g));
  json out;
  out["graphs"] = std::move(graphs);
  out["labels"] = dataset.labels;
  out["meta"] = json{{"kind", "graphset"},
                     {"name", dataset.name},
                     {"seed", dataset.seed},
                     {"version", kToolkitVersion},
                     {"split", split_to_json(dataset.split)}};
  return out.dump(2) + "\n";
}

GraphsetBundle graphset_from_json(const std::string& text) {
  json j = json::parse(text);
  const json& meta = j.at("meta");
  if (meta.at("kind") != "graphset")
    throw std::invalid_argument("graphset_from_json: not a graph-task dataset");
  GraphsetBundle out;
  for (const json& g : j.at("graphs")) out.graphs.push_back(graph_from_json(g));
  out.labels = j.at("labels").get<std::vector<int>>();
  out.name = meta.at("name");
  out.seed = meta.at("seed");
  out.split = split_from_json(meta.at("split"));
  return out;
}

std::string model_to_json(const GnnModel& model, const std::string& provenance) {
  json out;
  out["version"] = kToolkitVersion;
  out["provenance"] = provenance;
  out["config"] = gnn_config_to_json(model.config);
  out["weights"] = tensor_list_to_json(model.weights);
  out["biases"] = tensor_list_to_json(model.biases);
  out["attn_left"] = tensor_list_to_json(model.attn_left);
  out["attn_right"] = tensor_list_to_json(model.attn_right);
  out["bn_scale"] = tensor_list_to_json(model.bn_scale);
  out["bn_mean"] = matrix_list_to_json(model.bn_mean);
  out["bn_var"] = matrix_list_to_json(model.bn_var);
  out["heads"] = tensor_list_to_json(model.heads);
  out["head_bias"] = blob_to_json(model.head_bias.value);
  return out.dump(2) + "\n";
}

GnnModel model_from_json(const std::string& text) {
  json j = json::parse(text);
  GnnConfig config = gnn_config_from_json(j.at("config"));
  Rng scratch(0);  // every parameter is overwritten below
  GnnModel model = make_model(config, scratch);
  load_tensor_list(j.at("weights"), model.weights);
  load_tensor_list(j.at("biases"), model.biases);
  load_tensor_list(j.at("attn_left"), model.attn_left);
  load_tensor_list(j.at("attn_right"), model.attn_right);
  load_tensor_list(j.at("bn_scale"), model.bn_scale);
  load_matrix_list(j.at("bn_mean"), model.bn_mean);
  load_matrix_list(j.at("bn_var"), model.bn_var);
  load_tensor_list(j.at("heads"), model.heads);
  model.head_bias.value = blob_from_json(j.at("head_bias"));
  return model;
}

std::string explanation_to_json(const Explanation& explanation,
                                const std::string& provenance) {
  const ComputationGraph& cg = explanation.comp_graph;
  json sel = json::array();
  for (const Edge& e : explanation.selected_edges) {
    sel.push_back({{"u", e.first},
                   {"v", e.second},
                   {"u_global", cg.local_to_global[static_cast<std::size_t>(e.first)]},
                   {"v_global", cg.local_to_global[static_cast<std::size_t>(e.second)]},
                   {"score", explanation.edge_scores(e.first, e.second)}});
  }
  json feats = json::array();
  for (Eigen::Index d = 0; d < explanation.feature_scores.size(); ++d)
    feats.push_back(explanation.feature_scores(d));

  json out;
  out["version"] = kToolkitVersion;
  out["provenance"] = provenance;
  out["center_global"] =
      cg.local_to_global.empty() ? -1 : cg.local_to_global[static_cast<std::size_t>(cg.center)];
  out["nodes_global"] = cg.local_to_global;
  out["hops"] = cg.hops;
  out["selected_edges"] = std::move(sel);
  out["selected_features"] = explanation.selected_features;
  out["feature_scores"] = std::move(feats);
  out["threshold_used"] = explanation.threshold_used;
  out["final_objective"] = explanation.final_objective;
  out["predicted_class"] = explanation.predicted_class;
  out["masked_class"] = explanation.masked_class;
  out["all_edges"] = explanation.all_edges;
  out["losses"] = explanation.losses;
  return out.dump(2) + "\n";
}

std::string explanation_to_dot(const Explanation& explanation,
                               const std::vector<Edge>& gt_local) {
  const ComputationGraph& cg = explanation.comp_graph;
  const int m = cg.size();
  std::vector<std::vector<bool>> selected(static_cast<std::size_t>(m),
                                          std::vector<bool>(static_cast<std::size_t>(m), false));
  for (const Edge& e : explanation.selected_edges)
    selected[static_cast<std::size_t>(e.first)][static_cast<std::size_t>(e.second)] = true;
  std::vector<std::vector<bool>> gt(static_cast<std::size_t>(m),
                                    std::vector<bool>(static_cast<std::size_t>(m), false));
  for (const Edge& e : gt_local) {
    Edge c = make_edge(e.first, e.second);
    gt[static_cast<std::size_t>(c.first)][static_cast<std::size_t>(c.second)] = true;
  }

  std::ostringstream out;
  out << "graph explanation {\n";
  out << "  // " << kToolkitVersion << "\n";
  out << "  node [shape=circle];\n";
  for (int i = 0; i < m; ++i) {
    out << "  n" << i << " [label=\"" << cg.local_to_global[static_cast<std::size_t>(i)] << "\"";
    if (i == cg.center) out << ", shape=doublecircle";
    out << "];\n";
  }
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      if (cg.adjacency(i, j) == 0.0) continue;
      const bool is_sel = selected[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      const bool is_gt = gt[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      out << "  n" << i << " -- n" << j << " [";
      if (is_sel) {
        out << "color=\"#d62728" << alpha_hex(explanation.edge_scores(i, j))
            << "\", penwidth=2";
        if (is_gt) out << ", style=solid";
      } else if (is_gt) {
        out << "color=\"#000000\", style=solid";
      } else {
        out << "color=\"#bbbbbb\", style=dotted";
      }
      out << "];\n";
    }
  out << "}\n";
  return out.str();
}

std::string prototype_to_json(const Prototype& prototype, const std::string& provenance) {
  json out;
  out["version"] = kToolkitVersion;
  out["provenance"] = provenance;
  out["class_id"] = prototype.class_id;
  out["reference_node"] = prototype.reference_node;
  out["members"] = prototype.members;
  out["a_proto"] = matrix_to_rows(prototype.a_proto);
  return out.dump(2) + "\n";
}

std::string prototype_to_dot(const Prototype& prototype, double threshold) {
  const Eigen::Index n = prototype.a_proto.rows();
  std::ostringstream out;
  out << "graph prototype {\n";
  out << "  // " << kToolkitVersion << "\n";
  out << "  node [shape=circle];\n";
  for (Eigen::Index i = 0; i < n; ++i) out << "  n" << i << ";\n";
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double w = prototype.a_proto(i, j);
      if (w <= threshold) continue;
      out << "  n" << i << " -- n" << j << " [color=\"#1f77b4" << alpha_hex(w)
          << "\", penwidth=2];\n";
    }
  out << "}\n";
  return out.str();
}

std::string base64_encode(const unsigned char* data, std::size_t size) {
  std::string out;
  out.reserve(((size + 2) / 3) * 4);
  for (std::size_t i = 0; i < size; i += 3) {
    unsigned int chunk = static_cast<unsigned int>(data[i]) << 16;
    if (i + 1 < size) chunk |= static_cast<unsigned int>(data[i + 1]) << 8;
    if (i + 2 < size) chunk |= static_cast<unsigned int>(data[i + 2]);
    out.push_back(kB64Chars[(chunk >> 18) & 63]);
    out.push_back(kB64Chars[(chunk >> 12) & 63]);
    out.push_back(i + 1 < size ? kB64Chars[(chunk >> 6) & 63] : '=');
    out.push_back(i + 2 < size ? kB64Chars[chunk & 63] : '=');
  }
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0)
    throw std::invalid_argument("base64_decode: length not a multiple of 4");
  auto value_of = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    throw std::invalid_argument("base64_decode: bad character");
  };
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int pad = 0;
    unsigned int chunk = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=') {
        if (i + 4 != text.size() || k < 2) throw std::invalid_argument("base64_decode: bad padding");
        ++pad;
        chunk <<= 6;
      } else {
        if (pad > 0) throw std::invalid_argument("base64_decode: data after padding");
        chunk = (chunk << 6) | static_cast<unsigned int>(value_of(c));
      }
    }
    out.push_back(static_cast<unsigned char>((chunk >> 16) & 0xff));
    if (pad < 2) out.push_back(static_cast<unsigned char>((chunk >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<unsigned char>(chunk & 0xff));
  }
  return out;
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

}  // namespace gnnx
