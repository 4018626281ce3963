#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gnnx/gnn.hpp"
#include "gnnx/graph.hpp"
#include "gnnx/rng.hpp"

namespace gnnx {

enum class MotifKind { house, cycle6, grid3x3 };

struct MotifSpec {
  MotifKind kind;
  int nodes = 0;
  std::vector<Edge> edges;        // canonical local edge list
  std::vector<int> role_of_node;  // role id per local node, 1-based over the dataset's roles
};

// Canonical motifs: house (5 nodes / 6 edges, roles top=1, middle=2, bottom=3),
// cycle6 (6/6, role 1), grid3x3 (9/12, role 1).
MotifSpec motif_spec(MotifKind kind);

struct DatasetBundle {
  Graph graph;
  Split split;  // 80/10/10 over nodes
  std::string name;
  std::uint64_t seed = 0;
  int informative_feature = -1;  // ba-community only
};

// Graph-classification counterpart: one label per graph, split over graph ids.
struct GraphsetBundle {
  std::vector<Graph> graphs;
  std::vector<int> labels;
  Split split;
  std::string name;
  std::uint64_t seed = 0;
};

DatasetBundle generate_ba_shapes(std::uint64_t seed);
DatasetBundle generate_ba_community(std::uint64_t seed);
DatasetBundle generate_tree_cycles(std::uint64_t seed);
DatasetBundle generate_tree_grid(std::uint64_t seed);
GraphsetBundle generate_cycliq(std::uint64_t seed, int n_graphs = 500, int min_nodes = 10,
                               int max_nodes = 20);

DatasetBundle generate_dataset(const std::string& name, std::uint64_t seed);

// Ground-truth explanation edges of v's own motif (empty for non-motif nodes).
std::vector<Edge> gt_edges_for_node(const Graph& g, int v);

// Barabasi-Albert preferential-attachment graph: clique on the first m nodes,
// every later node attaches to m distinct existing nodes.
std::vector<Edge> ba_edges(int n, int m, Rng& rng);

// Disjoint 80/10/10 split of {0..n-1} from a random permutation.
Split make_split(int n, Rng& rng);

}  // namespace gnnx
