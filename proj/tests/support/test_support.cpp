#include "test_support.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include <unistd.h>

namespace sego::test {
namespace {

void add_edge(std::set<Edge>& edges, int a, int b) {
  if (a != b) edges.insert({std::min(a, b), std::max(a, b)});
}

std::vector<int> draw_labels(int n, std::span<const double> weights, std::mt19937_64& rng) {
  std::discrete_distribution<int> dist(weights.begin(), weights.end());
  std::vector<int> labels(n);
  for (auto& l : labels) l = dist(rng);
  return labels;
}

Graph make_graph(Family family, int n, std::mt19937_64& rng) {
  std::set<Edge> edges;
  std::vector<double> weights;
  switch (family) {
    case Family::communities: {
      const int half = n / 2;
      std::bernoulli_distribution dense(0.6);
      for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v)
          if ((u < half) == (v < half) && dense(rng)) add_edge(edges, u, v);
      // Keep each block connected with a path, then bridge the blocks.
      for (int v = 1; v < n; ++v)
        if (v != half) add_edge(edges, v - 1, v);
      std::uniform_int_distribution<int> left(0, half - 1), right(half, n - 1);
      add_edge(edges, left(rng), right(rng));
      add_edge(edges, left(rng), right(rng));
      weights = {0.5, 0.3, 0.15, 0.05};
      break;
    }
    case Family::trees: {
      for (int v = 1; v < n; ++v) {
        std::uniform_int_distribution<int> parent(0, v - 1);
        add_edge(edges, v, parent(rng));
      }
      std::uniform_int_distribution<int> any(0, n - 1);
      add_edge(edges, any(rng), any(rng));
      weights = {0.1, 0.2, 0.3, 0.4};
      break;
    }
    case Family::rings: {
      for (int v = 0; v < n; ++v) add_edge(edges, v, (v + 1) % n);
      std::uniform_int_distribution<int> any(0, n - 1);
      for (int c = 0; c < 2; ++c) add_edge(edges, any(rng), any(rng));
      weights = {0.25, 0.25, 0.25, 0.25};
      break;
    }
  }
  return Graph(n, std::vector<Edge>(edges.begin(), edges.end()), Matrix(n, 0), draw_labels(n, weights, rng), 0);
}

}  // namespace

Dataset synthetic_dataset(const std::string& name, Family family, int count, std::uint64_t seed, int min_nodes,
                          int max_nodes) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(min_nodes, max_nodes);
  Dataset ds{name, {}, 0};
  for (int i = 0; i < count; ++i) ds.graphs.push_back(make_graph(family, size(rng), rng));
  return ds;
}

Dataset labeled_union(const std::string& name, std::span<const Dataset> parts) {
  Dataset out{name, {}, parts.empty() ? 0 : parts.front().feature_dim};
  for (std::size_t p = 0; p < parts.size(); ++p) {
    for (const Graph& g : parts[p].graphs) {
      std::vector<Edge> edges = g.edges();
      out.graphs.emplace_back(g.node_count(), std::move(edges), g.node_features(), g.node_labels(),
                              static_cast<int>(p));
    }
  }
  return out;
}

std::filesystem::path scratch_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("sego_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + "_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

Matrix random_matrix(int rows, int cols, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

double central_difference(const std::function<double()>& f, double& x, double eps) {
  const double original = x;
  x = original + eps;
  const double up = f();
  x = original - eps;
  const double down = f();
  x = original;
  return (up - down) / (2.0 * eps);
}

double gradient_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-3});
}

double pair_counting_auc(std::span<const double> scores, std::span<const int> labels) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  if (pairs == 0.0) throw std::invalid_argument("pair_counting_auc needs both classes");
  return wins / pairs;
}

}  // namespace sego::test
