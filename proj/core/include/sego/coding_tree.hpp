#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sego/graph.hpp"

namespace sego {

struct TreeNode {
  std::optional<int> parent;
  std::vector<int> children;
  std::optional<NodeId> leaf_of;
  std::int64_t vol = 0;
  std::int64_t g_cut = 0;
  int depth = 0;
};

/// Rooted hierarchy over a graph's nodes.
///
/// Tree node ids are arena indices. Leaves always occupy ids 0..n-1 with
/// leaf i representing graph node i. Every node caches the volume and cut of
/// its member set, so entropy terms can be evaluated without touching the
/// graph.
class CodingTree {
 public:
  // Root over all graph nodes as direct children; height 1.
  static CodingTree flat(const Graph& g);

  // Builds a tree from a parent array. Entries 0..n-1 are the leaves for the
  // graph nodes; exactly one entry (the root) is -1.
  static CodingTree from_parents(const Graph& g, const std::vector<int>& parent);

  // Restores a tree from explicit nodes (depths are recomputed). Validates
  // against `g`.
  static CodingTree from_nodes(const Graph& g, std::vector<TreeNode> nodes, int root);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(int id) const { return nodes_.at(id); }
  int size() const { return static_cast<int>(nodes_.size()); }
  int root() const { return root_; }
  int height() const { return height_; }
  int leaf_count() const { return leaf_count_; }
  bool is_leaf(int id) const { return nodes_.at(id).leaf_of.has_value(); }

  // Graph nodes under tree node `id`, ascending.
  std::vector<NodeId> members(int id) const;

  // Fuses two root children under a new root child; returns its id.
  int merge(const Graph& g, int a, int b);
  // Removes a non-root internal node; its children move to its parent.
  // Ids above `id` shift down by one.
  void drop(int id);
  // Inserts single-child chain nodes above shallow leaves so that every leaf
  // sits at depth `target_depth`. Requires target_depth >= height().
  void pad_leaves_to_depth(int target_depth);

  // Throws ContractViolation if any structural or cached-value invariant fails.
  void validate(const Graph& g) const;

  // Indented text: "depth id vol g_cut [leaf->v]" per node in preorder.
  std::string dump() const;

 private:
  void refresh_depths();

  std::vector<TreeNode> nodes_;
  int root_ = -1;
  int height_ = 0;
  int leaf_count_ = 0;
};

// Structural entropy in bits. Returns 0 (with a warning) for edgeless graphs.
double structural_entropy(const Graph& g, const CodingTree& t);

// Entropy change of CodingTree::merge(g, a, b), evaluated from cached values.
double entropy_delta_merge(const Graph& g, const CodingTree& t, int a, int b);
// Entropy change of CodingTree::drop(v).
double entropy_delta_drop(const Graph& g, const CodingTree& t, int v);

struct BuildOptions {
  // Recompute the full entropy after every step and compare with the
  // incremental delta; throws std::logic_error on a mismatch above 1e-9.
  bool verify_deltas = false;
};

// Greedy height-k tree: pairwise MERGE of root children down to a binary
// tree, then DROP of the cheapest internal node until height <= k, then leaf
// padding to depth k. Throws ConfigError for k < 1.
CodingTree build_coding_tree(const Graph& g, int k, const BuildOptions& options = {});

// Exhaustive minimum over all coding trees of height <= k. Limited to
// node_count <= 8 and k <= 3; throws ContractViolation otherwise.
std::pair<CodingTree, double> brute_force_min_entropy(const Graph& g, int k);

}  // namespace sego
