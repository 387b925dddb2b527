#include "sego/graph.hpp"

#include <algorithm>

#include "sego/errors.hpp"

namespace sego {

Graph::Graph(int node_count, std::vector<Edge> edges, Matrix node_features,
             std::optional<std::vector<int>> node_labels, std::optional<int> graph_label)
    : node_count_(node_count),
      edges_(std::move(edges)),
      features_(std::move(node_features)),
      node_labels_(std::move(node_labels)),
      graph_label_(graph_label) {
  if (node_count_ < 0) throw ContractViolation("negative node count");
  if (features_.rows() != node_count_) {
    throw ContractViolation("feature rows " + std::to_string(features_.rows()) +
                            " != node count " + std::to_string(node_count_));
  }
  if (node_labels_ && static_cast<int>(node_labels_->size()) != node_count_) {
    throw ContractViolation("node label count does not match node count");
  }
  for (auto& e : edges_) {
    if (e.u < 0 || e.v < 0 || e.u >= node_count_ || e.v >= node_count_) {
      throw ContractViolation("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                              ") out of range for " + std::to_string(node_count_) + " nodes");
    }
    if (e.u == e.v) throw ContractViolation("self-loop on node " + std::to_string(e.u));
    if (e.u > e.v) std::swap(e.u, e.v);
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  adjacency_.assign(node_count_, {});
  for (const auto& e : edges_) {
    adjacency_[e.u].push_back(e.v);
    adjacency_[e.v].push_back(e.u);
  }
  for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());
}

Graph Graph::with_features(Matrix features) const {
  Graph copy = *this;
  if (features.rows() != node_count_) {
    throw ContractViolation("feature rows " + std::to_string(features.rows()) +
                            " != node count " + std::to_string(node_count_));
  }
  copy.features_ = std::move(features);
  return copy;
}

void Dataset::validate() const {
  if (graphs.empty()) throw ContractViolation("dataset '" + name + "' is empty");
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    if (graphs[i].feature_dim() != feature_dim) {
      throw ContractViolation("dataset '" + name + "' graph " + std::to_string(i) +
                              " has feature_dim " + std::to_string(graphs[i].feature_dim()) +
                              ", expected " + std::to_string(feature_dim));
    }
  }
}

int degree(const Graph& g, NodeId v) {
  return static_cast<int>(g.neighbors(v).size());
}

std::int64_t volume(const Graph& g, std::span<const NodeId> nodes) {
  std::int64_t total = 0;
  for (NodeId v : nodes) total += degree(g, v);
  return total;
}

std::int64_t cut(const Graph& g, std::span<const NodeId> nodes) {
  std::vector<char> member(g.node_count(), 0);
  for (NodeId v : nodes) member.at(v) = 1;
  std::int64_t boundary = 0;
  for (const auto& e : g.edges()) {
    if (member[e.u] != member[e.v]) ++boundary;
  }
  return boundary;
}

}  // namespace sego
