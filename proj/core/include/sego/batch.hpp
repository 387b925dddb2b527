#pragma once

#include <span>
#include <vector>

#include "sego/coding_tree.hpp"
#include "sego/graph.hpp"
#include "sego/matrix.hpp"

namespace sego {

class ViewCache;

// A graph with its precomputed topo view and coding-tree anchor.
struct PreparedGraph {
  Graph graph;
  Matrix topo;
  CodingTree anchor;
};

// Builds the views for every graph of `dataset`. With a cache, entries are
// looked up under the dataset name and graph index.
std::vector<PreparedGraph> prepare_graphs(const Dataset& dataset, int k, int r, const ViewCache* cache = nullptr);

/// Level structure of a batch of uniform-depth coding trees.
///
/// Level 0 rows are the leaves in batch node order; level `height` rows are
/// the roots in batch graph order. `parent_row[l]` maps each row of level l to
/// its parent's row in level l + 1.
struct TreeBatch {
  int height = 0;
  std::vector<int> level_size;
  std::vector<std::vector<int>> parent_row;
};

// Builds the level structure for trees whose leaves all sit at depth `height`.
// Throws ContractViolation otherwise.
TreeBatch make_tree_batch(std::span<const CodingTree* const> trees, int height);

// Disjoint union of several prepared graphs.
struct GraphBatch {
  int num_graphs = 0;
  int num_nodes = 0;
  Matrix features;
  Matrix topo;
  // Directed message edges (each undirected edge appears in both directions).
  std::vector<int> edge_src;
  std::vector<int> edge_dst;
  std::vector<int> node_graph;
  std::vector<int> nodes_per_graph;
  TreeBatch trees;
};

GraphBatch make_batch(std::span<const PreparedGraph* const> graphs, int tree_height);

// Consecutive chunks of `batch_size`; a trailing chunk of one element is
// merged into the previous chunk.
std::vector<std::vector<int>> make_batches(std::span<const int> order, int batch_size);

}  // namespace sego
