// Exhaustive search over nested partitions. Entropy terms are evaluated from
// bitmasks and the raw edge list, independent of CodingTree's cached values.

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "sego/coding_tree.hpp"
#include "sego/errors.hpp"

namespace sego {
namespace {

using Mask = std::uint32_t;
constexpr double kInf = std::numeric_limits<double>::infinity();

class Search {
 public:
  Search(const Graph& g) : n_(g.node_count()), edges_(g.edges()) {
    const Mask full = (Mask{1} << n_) - 1;
    vol_.assign(full + 1, 0);
    cut_.assign(full + 1, 0);
    std::vector<int> deg(n_, 0);
    for (const auto& e : edges_) {
      ++deg[e.u];
      ++deg[e.v];
    }
    for (Mask s = 0; s <= full; ++s) {
      for (int v = 0; v < n_; ++v) {
        if (s >> v & 1) vol_[s] += deg[v];
      }
      for (const auto& e : edges_) {
        if (((s >> e.u) & 1) != ((s >> e.v) & 1)) ++cut_[s];
      }
    }
    total_ = static_cast<double>(vol_[full]);
  }

  double total() const { return total_; }

  // Entropy term of block `b` hanging under a node with member set `parent`.
  double term(Mask b, Mask parent) const {
    if (vol_[b] == 0) return 0.0;
    return -(cut_[b] / total_) * std::log2(static_cast<double>(vol_[b]) / vol_[parent]);
  }

  // Minimum entropy contribution of the subtree below an internal node with
  // member set `s` and height at most `h` (excluding the node's own term).
  double best(Mask s, int h) {
    if (std::popcount(s) == 1) return 0.0;
    if (h <= 0) return kInf;
    auto key = std::pair(s, h);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second.value;
    Entry entry = partition(s, h);
    memo_[key] = entry;
    return entry.value;
  }

  // Rebuilds the argmin subtree; `node` is the parent-array id for `s`.
  void emit(Mask s, int h, int node, std::vector<int>& parent) {
    if (std::popcount(s) == 1) return;
    best(s, h);
    for (Mask block : memo_.at({s, h}).blocks) {
      if (std::popcount(block) == 1) {
        parent[std::countr_zero(block)] = node;
        continue;
      }
      const int child = static_cast<int>(parent.size());
      parent.push_back(node);
      emit(block, h - 1, child, parent);
    }
  }

 private:
  struct Entry {
    double value = kInf;
    std::vector<Mask> blocks;
  };

  double block_cost(Mask b, Mask s, int h) {
    const double below = std::popcount(b) == 1 ? 0.0 : best(b, h - 1);
    return below == kInf ? kInf : term(b, s) + below;
  }

  // Best split of `s` into child blocks; DP over remaining submasks, always
  // placing the lowest remaining element in the next block.
  Entry partition(Mask s, int h) {
    std::map<Mask, std::pair<double, Mask>> table;  // remaining -> (cost, chosen block)
    table[0] = {0.0, 0};
    std::vector<Mask> order;
    for (Mask r = s;; r = (r - 1) & s) {
      order.push_back(r);
      if (r == 0) break;
    }
    // Ascending popcount-ish order: process smaller remainders first.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const Mask r = *it;
      if (r == 0) continue;
      const Mask low = r & (~r + 1);
      double best_cost = kInf;
      Mask best_block = 0;
      const Mask rest = r & ~low;
      for (Mask sub = rest;; sub = (sub - 1) & rest) {
        const Mask block = sub | low;
        if (block != s) {  // a single block equal to s is a redundant chain node
          const double c = block_cost(block, s, h);
          const double tail = table.at(r & ~block).first;
          if (c + tail < best_cost) {
            best_cost = c + tail;
            best_block = block;
          }
        }
        if (sub == 0) break;
      }
      table[r] = {best_cost, best_block};
    }
    Entry entry;
    entry.value = table.at(s).first;
    for (Mask r = s; r != 0;) {
      const Mask block = table.at(r).second;
      entry.blocks.push_back(block);
      r &= ~block;
    }
    return entry;
  }

  int n_;
  std::vector<Edge> edges_;
  std::vector<std::int64_t> vol_;
  std::vector<std::int64_t> cut_;
  double total_ = 0.0;
  std::map<std::pair<Mask, int>, Entry> memo_;
};

}  // namespace

std::pair<CodingTree, double> brute_force_min_entropy(const Graph& g, int k) {
  if (g.node_count() < 1 || g.node_count() > 8) {
    throw ContractViolation("brute_force_min_entropy supports 1..8 nodes, got " + std::to_string(g.node_count()));
  }
  if (k < 1 || k > 3) throw ContractViolation("brute_force_min_entropy supports k in 1..3, got " + std::to_string(k));

  const int n = g.node_count();
  if (g.edge_count() == 0 || n == 1) return {CodingTree::flat(g), 0.0};

  Search search(g);
  const Mask full = (Mask{1} << n) - 1;
  const double value = search.best(full, k);
  std::vector<int> parent(n + 1, -1);
  search.emit(full, k, n, parent);
  return {CodingTree::from_parents(g, parent), value};
}

}  // namespace sego
