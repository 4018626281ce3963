#include "gnnx/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace gnnx {

bool Graph::has_edge(int u, int v) const {
  const Edge e = make_edge(u, v);
  return std::binary_search(edges.begin(), edges.end(), e);
}

Graph build_graph(int n, const std::vector<Edge>& edges, Eigen::MatrixXd features,
                  std::vector<int> labels, std::vector<int> node_roles,
                  std::vector<Edge> gt_motif_edges, std::vector<int> motif_id) {
  if (n < 0) throw std::invalid_argument("build_graph: negative node count");
  Graph g;
  g.n = n;
  g.edges.reserve(edges.size());
  for (const Edge& e : edges) {
    if (e.first == e.second) throw std::invalid_argument("build_graph: self-loop");
    if (e.first < 0 || e.second < 0 || e.first >= n || e.second >= n)
      throw std::invalid_argument("build_graph: edge endpoint out of range");
    g.edges.push_back(make_edge(e.first, e.second));
  }
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());

  if (features.size() > 0 && features.rows() != n)
    throw std::invalid_argument("build_graph: feature rows != n");
  g.features = std::move(features);
  if (g.features.size() == 0) g.features.resize(n, 0);

  if (!labels.empty() && static_cast<int>(labels.size()) != n)
    throw std::invalid_argument("build_graph: label length != n");
  g.labels = std::move(labels);
  if (!node_roles.empty() && static_cast<int>(node_roles.size()) != n)
    throw std::invalid_argument("build_graph: role length != n");
  g.node_roles = std::move(node_roles);
  if (!motif_id.empty() && static_cast<int>(motif_id.size()) != n)
    throw std::invalid_argument("build_graph: motif_id length != n");
  g.motif_id = std::move(motif_id);

  for (Edge& e : gt_motif_edges) e = make_edge(e.first, e.second);
  std::sort(gt_motif_edges.begin(), gt_motif_edges.end());
  gt_motif_edges.erase(std::unique(gt_motif_edges.begin(), gt_motif_edges.end()),
                       gt_motif_edges.end());
  for (const Edge& e : gt_motif_edges)
    if (!std::binary_search(g.edges.begin(), g.edges.end(), e))
      throw std::invalid_argument("build_graph: gt motif edge not in edge set");
  g.gt_motif_edges = std::move(gt_motif_edges);

  g.adjacency.assign(static_cast<std::size_t>(n), {});
  for (const Edge& e : g.edges) {
    g.adjacency[static_cast<std::size_t>(e.first)].push_back(e.second);
    g.adjacency[static_cast<std::size_t>(e.second)].push_back(e.first);
  }
  return g;
}

ComputationGraph extract_computation_graph(const Graph& g, int v, int hops) {
  if (v < 0 || v >= g.n) throw std::invalid_argument("extract_computation_graph: bad node id");
  if (hops < 1) throw std::invalid_argument("extract_computation_graph: hops must be >= 1");

  std::vector<int> dist(static_cast<std::size_t>(g.n), -1);
  std::vector<int> order;
  std::deque<int> queue;
  dist[static_cast<std::size_t>(v)] = 0;
  queue.push_back(v);
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    order.push_back(u);
    if (dist[static_cast<std::size_t>(u)] == hops) continue;
    for (int w : g.adjacency[static_cast<std::size_t>(u)]) {
      if (dist[static_cast<std::size_t>(w)] < 0) {
        dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(u)] + 1;
        queue.push_back(w);
      }
    }
  }

  const int m = static_cast<int>(order.size());
  std::vector<int> global_to_local(static_cast<std::size_t>(g.n), -1);
  for (int i = 0; i < m; ++i) global_to_local[static_cast<std::size_t>(order[i])] = i;

  ComputationGraph cg;
  cg.center = 0;
  cg.hops = hops;
  cg.local_to_global = order;
  cg.adjacency = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    const int u = order[static_cast<std::size_t>(i)];
    for (int w : g.adjacency[static_cast<std::size_t>(u)]) {
      const int j = global_to_local[static_cast<std::size_t>(w)];
      if (j >= 0) cg.adjacency(i, j) = 1.0;
    }
  }
  cg.features.resize(m, g.features.cols());
  cg.global_degrees.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    cg.features.row(i) = g.features.row(order[static_cast<std::size_t>(i)]);
    cg.global_degrees[static_cast<std::size_t>(i)] = g.degree(order[static_cast<std::size_t>(i)]);
  }
  return cg;
}

Eigen::MatrixXd laplacian(const Eigen::MatrixXd& adjacency) {
  if (adjacency.rows() != adjacency.cols())
    throw std::invalid_argument("laplacian: matrix must be square");
  if ((adjacency - adjacency.transpose()).cwiseAbs().maxCoeff() > 1e-9 &&
      adjacency.size() > 0)
    throw std::invalid_argument("laplacian: adjacency must be symmetric");
  Eigen::MatrixXd l = -adjacency;
  l.diagonal() += adjacency.rowwise().sum();
  return l;
}

std::vector<int> connected_component(const Eigen::MatrixXd& adjacency, int seed,
                                     double threshold) {
  const int m = static_cast<int>(adjacency.rows());
  if (seed < 0 || seed >= m) throw std::invalid_argument("connected_component: bad seed");
  std::vector<char> seen(static_cast<std::size_t>(m), 0);
  std::vector<int> stack = {seed};
  seen[static_cast<std::size_t>(seed)] = 1;
  std::vector<int> out;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    out.push_back(u);
    for (int w = 0; w < m; ++w) {
      if (w == u || seen[static_cast<std::size_t>(w)]) continue;
      if (adjacency(u, w) > threshold) {
        seen[static_cast<std::size_t>(w)] = 1;
        stack.push_back(w);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> largest_connected_component(const Eigen::MatrixXd& adjacency,
                                             double threshold) {
  const int m = static_cast<int>(adjacency.rows());
  if (m == 0) return {};
  std::vector<char> assigned(static_cast<std::size_t>(m), 0);
  std::vector<int> best;
  for (int s = 0; s < m; ++s) {
    if (assigned[static_cast<std::size_t>(s)]) continue;
    std::vector<int> comp = connected_component(adjacency, s, threshold);
    for (int u : comp) assigned[static_cast<std::size_t>(u)] = 1;
    // scanning seeds in ascending order makes the first-found winner the one
    // containing the smallest node id among equal-sized components
    if (comp.size() > best.size()) best = std::move(comp);
  }
  return best;
}

}  // namespace gnnx
