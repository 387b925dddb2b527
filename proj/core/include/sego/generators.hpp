#pragma once

#include <random>

#include "sego/graph.hpp"

namespace sego {

// Small deterministic graphs with n x 1 all-ones features.
Graph complete_graph(int n);
Graph path_graph(int n);
Graph cycle_graph(int n);
// Triangles {0,1,2} and {3,4,5} joined by the edge (2,3).
Graph two_triangles_bridge();

// Uniform random spanning tree (random attachment order) plus every other
// pair independently with probability p. Always connected for n >= 1.
Graph random_connected_graph(int n, double p, std::mt19937_64& rng);

}  // namespace sego
