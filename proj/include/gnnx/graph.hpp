#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

namespace gnnx {

using Edge = std::pair<int, int>;  // stored with first < second

// Undirected simple graph with optional labels, structural roles, and
// ground-truth motif annotations. Immutable after construction.
struct Graph {
  int n = 0;
  std::vector<Edge> edges;                 // sorted, unique, u < v
  Eigen::MatrixXd features;                // n x d (d may be 0)
  std::vector<int> labels;                 // empty or size n
  std::vector<int> node_roles;             // empty or size n
  std::vector<Edge> gt_motif_edges;        // subset of edges
  std::vector<int> motif_id;               // empty or size n; -1 = no motif
  std::vector<std::vector<int>> adjacency; // neighbor lists, size n

  bool has_edge(int u, int v) const;
  int degree(int u) const { return static_cast<int>(adjacency[u].size()); }
};

// L-hop neighborhood of one node, densified for mask optimization.
struct ComputationGraph {
  int center = 0;                    // local index of the explained node
  Eigen::MatrixXd adjacency;         // m x m symmetric 0/1, zero diagonal
  Eigen::MatrixXd features;          // m x d
  std::vector<int> local_to_global;  // size m, distinct parent node ids
  int hops = 0;
  // Degrees the included nodes have in the parent graph. Boundary nodes lose
  // neighbors when the L-hop subgraph is cut out; normalizing with these
  // parent degrees makes the center's GNN output match the full-graph run
  // exactly.
  std::vector<int> global_degrees;

  int size() const { return static_cast<int>(local_to_global.size()); }
};

// Deduplicates edges (either orientation), validates endpoints and feature
// dimensions. Throws std::invalid_argument on self-loops, out-of-range
// endpoints, or mismatched feature/label/role lengths.
Graph build_graph(int n, const std::vector<Edge>& edges, Eigen::MatrixXd features,
                  std::vector<int> labels = {}, std::vector<int> node_roles = {},
                  std::vector<Edge> gt_motif_edges = {}, std::vector<int> motif_id = {});

// Induced subgraph on all nodes within `hops` BFS steps of v. Local ids follow
// BFS discovery order, so the center is always local id 0.
ComputationGraph extract_computation_graph(const Graph& g, int v, int hops);

// L = D - A with D = diag(row sums). Throws on asymmetric input.
Eigen::MatrixXd laplacian(const Eigen::MatrixXd& adjacency);

// Nodes reachable from seed over entries strictly greater than threshold.
// Returned sorted ascending.
std::vector<int> connected_component(const Eigen::MatrixXd& adjacency, int seed,
                                     double threshold);

// Maximum-cardinality component; ties broken by smallest contained node id.
// Empty matrix -> empty set.
std::vector<int> largest_connected_component(const Eigen::MatrixXd& adjacency,
                                             double threshold);

// Canonical undirected form (min, max).
inline Edge make_edge(int u, int v) { return u < v ? Edge{u, v} : Edge{v, u}; }

}  // namespace gnnx
