#include "gnnx/synthgen.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

namespace gnnx {

namespace {

// one new edge per attached motif, from a random motif node to a random base
// node; attachment edges are not ground truth
struct Attachment {
  std::vector<Edge> edges;
  std::vector<Edge> gt_edges;
  std::vector<int> roles;     // per new node
  std::vector<int> motif_of;  // per new node
};

Attachment attach_motifs(const MotifSpec& spec, int count, int base_nodes,
                         int first_motif_id, Rng& rng) {
  Attachment out;
  for (int k = 0; k < count; ++k) {
    const int offset = base_nodes + k * spec.nodes;
    for (const Edge& e : spec.edges) {
      out.edges.emplace_back(offset + e.first, offset + e.second);
      out.gt_edges.emplace_back(offset + e.first, offset + e.second);
    }
    out.edges.emplace_back(offset + rng.uniform_int(spec.nodes),
                           rng.uniform_int(base_nodes));
    for (int i = 0; i < spec.nodes; ++i) {
      out.roles.push_back(spec.role_of_node[static_cast<std::size_t>(i)]);
      out.motif_of.push_back(first_motif_id + k);
    }
  }
  return out;
}

// uniform extra edges over currently-nonexistent pairs
void perturb(std::vector<Edge>& edges, int n, int count, Rng& rng) {
  std::set<Edge> have(edges.begin(), edges.end());
  int added = 0;
  while (added < count) {
    const int u = rng.uniform_int(n);
    const int v = rng.uniform_int(n);
    if (u == v) continue;
    const Edge e = make_edge(u, v);
    if (have.count(e)) continue;
    have.insert(e);
    edges.push_back(e);
    ++added;
  }
}

std::vector<Edge> balanced_binary_tree(int depth) {
  const int n = (1 << depth) - 1;
  std::vector<Edge> edges;
  for (int i = 0; 2 * i + 2 < n + 1; ++i) {
    if (2 * i + 1 < n) edges.emplace_back(i, 2 * i + 1);
    if (2 * i + 2 < n) edges.emplace_back(i, 2 * i + 2);
  }
  return edges;
}

struct TreeDataset {
  DatasetBundle bundle;
};

DatasetBundle tree_with_motifs(MotifKind kind, const std::string& name,
                               std::uint64_t seed) {
  Rng rng(seed);
  const int depth = 9;                // levels 0..8
  const int base = (1 << depth) - 1;  // 511
  const int motifs = 80;
  MotifSpec spec = motif_spec(kind);
  std::vector<Edge> edges = balanced_binary_tree(depth);
  Attachment att = attach_motifs(spec, motifs, base, 0, rng);
  edges.insert(edges.end(), att.edges.begin(), att.edges.end());

  const int n = base + motifs * spec.nodes;
  perturb(edges, n, n / 10, rng);

  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  std::vector<int> roles(static_cast<std::size_t>(n), 0);
  std::vector<int> motif_of(static_cast<std::size_t>(n), -1);
  for (int i = base; i < n; ++i) {
    labels[static_cast<std::size_t>(i)] = 1;
    roles[static_cast<std::size_t>(i)] = att.roles[static_cast<std::size_t>(i - base)];
    motif_of[static_cast<std::size_t>(i)] = att.motif_of[static_cast<std::size_t>(i - base)];
  }

  DatasetBundle out;
  out.graph = build_graph(n, edges, Eigen::MatrixXd::Ones(n, 1), labels, roles,
                          att.gt_edges, motif_of);
  out.split = make_split(n, rng);
  out.name = name;
  out.seed = seed;
  return out;
}

// BA-Shapes structure with labels/roles offset, reusable for both communities
struct ShapesPart {
  std::vector<Edge> edges;
  std::vector<Edge> gt_edges;
  std::vector<int> labels;
  std::vector<int> roles;
  std::vector<int> motif_of;
  int n = 0;
};

ShapesPart ba_shapes_part(int label_offset, int first_motif_id, Rng& rng) {
  const int base = 300;
  const int motifs = 80;
  MotifSpec spec = motif_spec(MotifKind::house);
  ShapesPart part;
  part.edges = ba_edges(base, 5, rng);
  Attachment att = attach_motifs(spec, motifs, base, first_motif_id, rng);
  part.edges.insert(part.edges.end(), att.edges.begin(), att.edges.end());
  part.gt_edges = att.gt_edges;
  part.n = base + motifs * spec.nodes;  // 700
  perturb(part.edges, part.n, part.n / 10, rng);

  part.labels.assign(static_cast<std::size_t>(part.n), label_offset);
  part.roles.assign(static_cast<std::size_t>(part.n), label_offset);
  part.motif_of.assign(static_cast<std::size_t>(part.n), -1);
  for (int i = base; i < part.n; ++i) {
    part.labels[static_cast<std::size_t>(i)] =
        label_offset + att.roles[static_cast<std::size_t>(i - base)];
    part.roles[static_cast<std::size_t>(i)] = part.labels[static_cast<std::size_t>(i)];
    part.motif_of[static_cast<std::size_t>(i)] = att.motif_of[static_cast<std::size_t>(i - base)];
  }
  return part;
}

}  // namespace

MotifSpec motif_spec(MotifKind kind) {
  MotifSpec spec;
  spec.kind = kind;
  switch (kind) {
    case MotifKind::house:
      // 0 = top, 1/2 = middle, 3/4 = bottom
      spec.nodes = 5;
      spec.edges = {{0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 4}, {3, 4}};
      spec.role_of_node = {1, 2, 2, 3, 3};
      break;
    case MotifKind::cycle6:
      spec.nodes = 6;
      spec.edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 5}};
      spec.role_of_node = {1, 1, 1, 1, 1, 1};
      break;
    case MotifKind::grid3x3:
      spec.nodes = 9;
      spec.role_of_node.assign(9, 1);
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
          const int i = 3 * r + c;
          if (c < 2) spec.edges.emplace_back(i, i + 1);
          if (r < 2) spec.edges.emplace_back(i, i + 3);
        }
      break;
  }
  return spec;
}

std::vector<Edge> ba_edges(int n, int m, Rng& rng) {
  if (n <= m) throw std::invalid_argument("ba_edges: need n > m");
  std::vector<Edge> edges;
  std::vector<int> endpoints;  // node id repeated once per incident edge
  for (int u = 0; u < m; ++u)
    for (int v = u + 1; v < m; ++v) {
      edges.emplace_back(u, v);
      endpoints.push_back(u);
      endpoints.push_back(v);
    }
  for (int v = m; v < n; ++v) {
    std::set<int> targets;
    while (static_cast<int>(targets.size()) < m) {
      const int t = endpoints[static_cast<std::size_t>(
          rng.uniform_int(static_cast<int>(endpoints.size())))];
      targets.insert(t);
    }
    for (int t : targets) {
      edges.emplace_back(t, v);
      endpoints.push_back(t);
      endpoints.push_back(v);
    }
  }
  return edges;
}

Split make_split(int n, Rng& rng) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n - 1; i > 0; --i)
    std::swap(perm[static_cast<std::size_t>(i)],
              perm[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
  Split split;
  const int ntrain = n * 8 / 10;
  const int nval = n * 9 / 10 - ntrain;
  split.train.assign(perm.begin(), perm.begin() + ntrain);
  split.val.assign(perm.begin() + ntrain, perm.begin() + ntrain + nval);
  split.test.assign(perm.begin() + ntrain + nval, perm.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

DatasetBundle generate_ba_shapes(std::uint64_t seed) {
  Rng rng(seed);
  ShapesPart part = ba_shapes_part(0, 0, rng);
  DatasetBundle out;
  out.graph = build_graph(part.n, part.edges, Eigen::MatrixXd::Ones(part.n, 1),
                          part.labels, part.roles, part.gt_edges, part.motif_of);
  out.split = make_split(part.n, rng);
  out.name = "ba-shapes";
  out.seed = seed;
  return out;
}

DatasetBundle generate_ba_community(std::uint64_t seed) {
  Rng rng(seed);
  ShapesPart a = ba_shapes_part(0, 0, rng);
  ShapesPart b = ba_shapes_part(4, 80, rng);
  const int n = a.n + b.n;  // 1400

  std::vector<Edge> edges = a.edges;
  for (const Edge& e : b.edges) edges.emplace_back(e.first + a.n, e.second + a.n);
  std::vector<Edge> gt = a.gt_edges;
  for (const Edge& e : b.gt_edges) gt.emplace_back(e.first + a.n, e.second + a.n);

  // inter-community bridges: one per 40 nodes
  std::set<Edge> have(edges.begin(), edges.end());
  int bridges = n / 40;
  while (bridges > 0) {
    const Edge e{rng.uniform_int(a.n), a.n + rng.uniform_int(b.n)};
    if (have.count(e)) continue;
    have.insert(e);
    edges.push_back(e);
    --bridges;
  }

  std::vector<int> labels = a.labels;
  labels.insert(labels.end(), b.labels.begin(), b.labels.end());
  std::vector<int> roles = a.roles;
  roles.insert(roles.end(), b.roles.begin(), b.roles.end());
  std::vector<int> motif_of = a.motif_of;
  motif_of.insert(motif_of.end(), b.motif_of.begin(), b.motif_of.end());

  // d = 10 gaussian features; dimension 0 carries the community signal via a
  // one-standard-deviation mean shift
  const int d = 10;
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      x(i, j) = rng.normal(j == 0 && i >= a.n ? 1.0 : 0.0, 1.0);

  DatasetBundle out;
  out.graph = build_graph(n, edges, std::move(x), labels, roles, gt, motif_of);
  out.split = make_split(n, rng);
  out.name = "ba-community";
  out.seed = seed;
  out.informative_feature = 0;
  return out;
}

DatasetBundle generate_tree_cycles(std::uint64_t seed) {
  return tree_with_motifs(MotifKind::cycle6, "tree-cycles", seed);
}

DatasetBundle generate_tree_grid(std::uint64_t seed) {
  return tree_with_motifs(MotifKind::grid3x3, "tree-grid", seed);
}

GraphsetBundle generate_cycliq(std::uint64_t seed, int n_graphs, int min_nodes,
                               int max_nodes) {
  if (n_graphs < 2 || min_nodes < 2 || max_nodes < min_nodes)
    throw std::invalid_argument("generate_cycliq: bad parameters");
  Rng rng(seed);
  GraphsetBundle out;
  out.name = "cycliq";
  out.seed = seed;
  for (int gi = 0; gi < n_graphs; ++gi) {
    const int label = gi % 2;
    const int tree_nodes = min_nodes + rng.uniform_int(max_nodes - min_nodes + 1);
    std::vector<Edge> edges;
    for (int v = 1; v < tree_nodes; ++v) edges.emplace_back(rng.uniform_int(v), v);
    std::vector<Edge> gt;
    int n = tree_nodes;
    if (label == 1) {
      // plant a 6-cycle and hang it off a random tree node
      for (int i = 0; i < 6; ++i) {
        const Edge e{tree_nodes + i, tree_nodes + (i + 1) % 6};
        edges.push_back(e);
        gt.push_back(e);
      }
      edges.emplace_back(tree_nodes + rng.uniform_int(6), rng.uniform_int(tree_nodes));
      n += 6;
    }
    std::vector<int> motif_of(static_cast<std::size_t>(n), -1);
    for (int i = tree_nodes; i < n; ++i) motif_of[static_cast<std::size_t>(i)] = 0;
    out.graphs.push_back(
        build_graph(n, edges, Eigen::MatrixXd::Ones(n, 1), {}, {}, gt, motif_of));
    out.labels.push_back(label);
  }
  out.split = make_split(n_graphs, rng);
  return out;
}

DatasetBundle generate_dataset(const std::string& name, std::uint64_t seed) {
  if (name == "ba-shapes") return generate_ba_shapes(seed);
  if (name == "ba-community") return generate_ba_community(seed);
  if (name == "tree-cycles") return generate_tree_cycles(seed);
  if (name == "tree-grid") return generate_tree_grid(seed);
  throw std::invalid_argument("generate_dataset: unknown dataset " + name);
}

std::vector<Edge> gt_edges_for_node(const Graph& g, int v) {
  if (g.motif_id.empty() || g.motif_id[static_cast<std::size_t>(v)] < 0) return {};
  const int mid = g.motif_id[static_cast<std::size_t>(v)];
  std::vector<Edge> out;
  for (const Edge& e : g.gt_motif_edges)
    if (g.motif_id[static_cast<std::size_t>(e.first)] == mid &&
        g.motif_id[static_cast<std::size_t>(e.second)] == mid)
      out.push_back(e);
  return out;
}

}  // namespace gnnx
