#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "sego/coding_tree.hpp"
#include "sego/graph.hpp"
#include "sego/matrix.hpp"

namespace sego {

// Column t-1 holds the return probability diag((A D^-1)^t). Rows of isolated
// nodes are zero.
Matrix random_walk_encoding(const Graph& g, int r);

// Diagonal of I - D^-1/2 A D^-1/2; isolated nodes get 1.
Vector laplacian_pe(const Graph& g);

// [random_walk_encoding(g, r) | laplacian_pe(g)], shape n x (r + 1).
Matrix topo_features(const Graph& g, int r);

struct TripletViews {
  std::reference_wrapper<const Graph> basic;
  Matrix topo;
  CodingTree anchor;
};

TripletViews build_triplet_views(const Graph& g, int k, int r);

/// Directory-backed cache of computed views.
///
/// Entries are keyed by (dataset name, graph index, k, r) and stored in a
/// length-prefixed little-endian layout. A corrupt or mismatching entry is
/// treated as a miss, so cached and freshly built views are interchangeable.
class ViewCache {
 public:
  explicit ViewCache(std::filesystem::path directory);

  std::optional<TripletViews> load(const Graph& g, const std::string& dataset, std::size_t index, int k,
                                   int r) const;
  void store(const TripletViews& views, const std::string& dataset, std::size_t index, int k, int r) const;

  // Returns cached views or builds and stores them.
  TripletViews get_or_build(const Graph& g, const std::string& dataset, std::size_t index, int k, int r) const;

  std::filesystem::path entry_path(const std::string& dataset, std::size_t index, int k, int r) const;

 private:
  std::filesystem::path directory_;
};

}  // namespace sego
