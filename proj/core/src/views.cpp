#include "sego/views.hpp"

#include "sego/errors.hpp"

namespace sego {

Matrix random_walk_encoding(const Graph& g, int r) {
  if (r < 1) throw ConfigError("random walk length r must be >= 1, got " + std::to_string(r));
  const int n = g.node_count();
  // RW = A D^-1: column j scaled by 1/deg(j); isolated columns stay zero.
  Matrix rw = Matrix::Zero(n, n);
  for (const auto& e : g.edges()) {
    rw(e.u, e.v) = 1.0 / degree(g, e.v);
    rw(e.v, e.u) = 1.0 / degree(g, e.u);
  }
  Matrix out = Matrix::Zero(n, r);
  Matrix power = rw;
  for (int t = 0; t < r; ++t) {
    if (t > 0) power = power * rw;
    out.col(t) = power.diagonal();
  }
  return out;
}

Vector laplacian_pe(const Graph& g) {
  // Delta_ii = 1 - A_ii / d_i. Graphs carry no self-loops, so A_ii = 0 and the
  // entry is 1 for every node; isolated nodes use the same value.
  return Vector::Ones(g.node_count());
}

Matrix topo_features(const Graph& g, int r) {
  Matrix out(g.node_count(), r + 1);
  out.leftCols(r) = random_walk_encoding(g, r);
  out.col(r) = laplacian_pe(g);
  return out;
}

TripletViews build_triplet_views(const Graph& g, int k, int r) {
  return TripletViews{std::cref(g), topo_features(g, r), build_coding_tree(g, k)};
}

}  // namespace sego
