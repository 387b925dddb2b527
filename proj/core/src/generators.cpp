#include "sego/generators.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "sego/errors.hpp"

namespace sego {
namespace {

Graph with_unit_features(int n, std::vector<Edge> edges) {
  return Graph(n, std::move(edges), Matrix::Ones(n, 1));
}

void require_nodes(int n, int min, const char* what) {
  if (n < min) throw ContractViolation(std::string(what) + " needs at least " + std::to_string(min) + " nodes");
}

}  // namespace

Graph complete_graph(int n) {
  require_nodes(n, 1, "complete_graph");
  std::vector<Edge> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) edges.push_back({u, v});
  return with_unit_features(n, std::move(edges));
}

Graph path_graph(int n) {
  require_nodes(n, 1, "path_graph");
  std::vector<Edge> edges;
  for (int v = 0; v + 1 < n; ++v) edges.push_back({v, v + 1});
  return with_unit_features(n, std::move(edges));
}

Graph cycle_graph(int n) {
  require_nodes(n, 3, "cycle_graph");
  std::vector<Edge> edges;
  for (int v = 0; v < n; ++v) edges.push_back({std::min(v, (v + 1) % n), std::max(v, (v + 1) % n)});
  return with_unit_features(n, std::move(edges));
}

Graph two_triangles_bridge() {
  return with_unit_features(6, {{0, 1}, {0, 2}, {1, 2}, {3, 4}, {3, 5}, {4, 5}, {2, 3}});
}

Graph random_connected_graph(int n, double p, std::mt19937_64& rng) {
  require_nodes(n, 1, "random_connected_graph");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::set<Edge> edges;
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> pick(0, i - 1);
    const int a = order[i];
    const int b = order[pick(rng)];
    edges.insert({std::min(a, b), std::max(a, b)});
  }
  std::bernoulli_distribution extra(p);
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (!edges.contains({u, v}) && extra(rng)) edges.insert({u, v});
  return with_unit_features(n, std::vector<Edge>(edges.begin(), edges.end()));
}

}  // namespace sego
