#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sego/matrix.hpp"

namespace sego {

using NodeId = int;

// Undirected edge stored with u < v.
struct Edge {
  NodeId u = 0;
  NodeId v = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Undirected simple graph with a dense node-feature matrix.
///
/// Edges are normalized on construction (endpoints ordered, sorted,
/// deduplicated). Self-loops and out-of-range endpoints are rejected; the TU
/// reader drops self-loops before constructing a Graph.
class Graph {
 public:
  Graph() = default;
  Graph(int node_count, std::vector<Edge> edges, Matrix node_features,
        std::optional<std::vector<int>> node_labels = std::nullopt,
        std::optional<int> graph_label = std::nullopt);

  int node_count() const { return node_count_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  int feature_dim() const { return static_cast<int>(features_.cols()); }

  const std::vector<Edge>& edges() const { return edges_; }
  const Matrix& node_features() const { return features_; }
  const std::optional<std::vector<int>>& node_labels() const { return node_labels_; }
  const std::optional<int>& graph_label() const { return graph_label_; }
  const std::vector<NodeId>& neighbors(NodeId v) const { return adjacency_.at(v); }

  // Same topology and labels, different features.
  Graph with_features(Matrix features) const;

 private:
  int node_count_ = 0;
  std::vector<Edge> edges_;
  Matrix features_;
  std::optional<std::vector<int>> node_labels_;
  std::optional<int> graph_label_;
  std::vector<std::vector<NodeId>> adjacency_;
};

struct Dataset {
  std::string name;
  std::vector<Graph> graphs;
  int feature_dim = 0;

  std::size_t size() const { return graphs.size(); }
  // Throws ContractViolation when empty or when graphs disagree on feature_dim.
  void validate() const;
};

int degree(const Graph& g, NodeId v);
std::int64_t volume(const Graph& g, std::span<const NodeId> nodes);
std::int64_t cut(const Graph& g, std::span<const NodeId> nodes);

}  // namespace sego
