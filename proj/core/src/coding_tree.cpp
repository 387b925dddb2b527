#include "sego/coding_tree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "sego/errors.hpp"

namespace sego {
namespace {

constexpr double kTieTolerance = 1e-12;

std::int64_t edges_between(const Graph& g, const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
  std::vector<char> side(g.node_count(), 0);
  for (NodeId v : a) side[v] = 1;
  for (NodeId v : b) side[v] = 2;
  std::int64_t w = 0;
  for (const auto& e : g.edges()) {
    if ((side[e.u] == 1 && side[e.v] == 2) || (side[e.u] == 2 && side[e.v] == 1)) ++w;
  }
  return w;
}

// -(g/V) log2(vol/parent_vol), zero for empty volumes.
double node_term(double g_cut, double vol, double parent_vol, double total_vol) {
  if (vol <= 0.0) return 0.0;
  return -(g_cut / total_vol) * std::log2(vol / parent_vol);
}

double raw_entropy(const CodingTree& t) {
  const double total = static_cast<double>(t.node(t.root()).vol);
  if (total <= 0.0) return 0.0;
  double h = 0.0;
  for (const auto& n : t.nodes()) {
    if (!n.parent) continue;
    h += node_term(static_cast<double>(n.g_cut), static_cast<double>(n.vol),
                   static_cast<double>(t.node(*n.parent).vol), total);
  }
  return h;
}

void check_delta(double predicted, double before, double after, const char* op) {
  if (std::abs(predicted - (after - before)) > 1e-9) {
    std::ostringstream msg;
    msg.precision(17);
    msg << op << " delta mismatch: incremental " << predicted << " vs recomputed " << (after - before);
    throw std::logic_error(msg.str());
  }
}

}  // namespace

CodingTree CodingTree::flat(const Graph& g) {
  const int n = g.node_count();
  if (n < 1) throw ContractViolation("coding tree needs at least one node");
  std::vector<int> parent(n + 1, n);
  parent[n] = -1;
  return from_parents(g, parent);
}

CodingTree CodingTree::from_parents(const Graph& g, const std::vector<int>& parent) {
  const int n = g.node_count();
  const int size = static_cast<int>(parent.size());
  if (size <= n) throw ContractViolation("parent array must include at least one internal node");
  CodingTree t;
  t.nodes_.resize(size);
  t.leaf_count_ = n;
  for (int id = 0; id < size; ++id) {
    if (id < n) t.nodes_[id].leaf_of = id;
    if (parent[id] < 0) {
      if (t.root_ >= 0) throw ContractViolation("parent array has more than one root");
      t.root_ = id;
      continue;
    }
    if (parent[id] >= size || parent[id] < n || parent[id] == id) {
      throw ContractViolation("invalid parent " + std::to_string(parent[id]) + " for tree node " + std::to_string(id));
    }
    t.nodes_[id].parent = parent[id];
    t.nodes_[parent[id]].children.push_back(id);
  }
  if (t.root_ < n) throw ContractViolation("parent array has no internal root");

  // Aggregate vol / cut bottom-up by member sets.
  for (int id = 0; id < size; ++id) {
    auto m = t.members(id);
    t.nodes_[id].vol = volume(g, m);
    t.nodes_[id].g_cut = cut(g, m);
  }
  t.refresh_depths();
  t.validate(g);
  return t;
}

CodingTree CodingTree::from_nodes(const Graph& g, std::vector<TreeNode> nodes, int root) {
  CodingTree t;
  const int size = static_cast<int>(nodes.size());
  if (root < 0 || root >= size) throw ContractViolation("root id out of range");
  for (const auto& n : nodes) {
    if (n.parent && (*n.parent < 0 || *n.parent >= size)) throw ContractViolation("parent id out of range");
    for (int c : n.children) {
      if (c < 0 || c >= size) throw ContractViolation("child id out of range");
    }
  }
  t.nodes_ = std::move(nodes);
  t.root_ = root;
  t.leaf_count_ = g.node_count();
  t.refresh_depths();
  t.validate(g);
  return t;
}

std::vector<NodeId> CodingTree::members(int id) const {
  std::vector<NodeId> out;
  std::vector<int> stack{id};
  while (!stack.empty()) {
    int cur = stack.back();
    stack.pop_back();
    const auto& n = nodes_.at(cur);
    if (n.leaf_of) out.push_back(*n.leaf_of);
    for (int c : n.children) stack.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void CodingTree::refresh_depths() {
  height_ = 0;
  std::vector<int> stack{root_};
  nodes_[root_].depth = 0;
  std::size_t visited = 0;
  while (!stack.empty()) {
    int cur = stack.back();
    stack.pop_back();
    if (++visited > nodes_.size()) throw ContractViolation("coding tree contains a cycle");
    for (int c : nodes_[cur].children) {
      nodes_[c].depth = nodes_[cur].depth + 1;
      if (nodes_[c].leaf_of) height_ = std::max(height_, nodes_[c].depth);
      stack.push_back(c);
    }
  }
}

int CodingTree::merge(const Graph& g, int a, int b) {
  if (a == b) throw ContractViolation("merge needs two distinct tree nodes");
  for (int id : {a, b}) {
    if (id < 0 || id >= size() || nodes_[id].parent != root_) {
      throw ContractViolation("merge operand " + std::to_string(id) + " is not a root child");
    }
  }
  const std::int64_t w = edges_between(g, members(a), members(b));
  TreeNode fused;
  fused.parent = root_;
  fused.children = {a, b};
  fused.vol = nodes_[a].vol + nodes_[b].vol;
  fused.g_cut = nodes_[a].g_cut + nodes_[b].g_cut - 2 * w;
  const int id = size();
  nodes_.push_back(std::move(fused));

  auto& root_children = nodes_[root_].children;
  std::erase_if(root_children, [&](int c) { return c == a || c == b; });
  root_children.push_back(id);
  nodes_[a].parent = id;
  nodes_[b].parent = id;
  refresh_depths();
  return id;
}

void CodingTree::drop(int id) {
  if (id < 0 || id >= size() || id == root_ || nodes_[id].leaf_of) {
    throw ContractViolation("drop target " + std::to_string(id) + " is not a non-root internal node");
  }
  const int p = *nodes_[id].parent;
  auto& siblings = nodes_[p].children;
  auto pos = std::find(siblings.begin(), siblings.end(), id);
  pos = siblings.erase(pos);
  siblings.insert(pos, nodes_[id].children.begin(), nodes_[id].children.end());
  for (int c : nodes_[id].children) nodes_[c].parent = p;

  nodes_.erase(nodes_.begin() + id);
  const auto shift = [id](int x) { return x > id ? x - 1 : x; };
  for (auto& n : nodes_) {
    if (n.parent) n.parent = shift(*n.parent);
    for (int& c : n.children) c = shift(c);
  }
  root_ = shift(root_);
  refresh_depths();
}

void CodingTree::pad_leaves_to_depth(int target_depth) {
  if (target_depth < height_) {
    throw ContractViolation("cannot pad to depth " + std::to_string(target_depth) + " below height " +
                            std::to_string(height_));
  }
  for (int leaf = 0; leaf < leaf_count_; ++leaf) {
    int missing = target_depth - nodes_[leaf].depth;
    if (missing <= 0) continue;
    int below = leaf;
    const int top_parent = *nodes_[leaf].parent;
    for (int i = 0; i < missing; ++i) {
      TreeNode chain;
      chain.children = {below};
      chain.vol = nodes_[leaf].vol;
      chain.g_cut = nodes_[leaf].g_cut;
      const int id = size();
      nodes_.push_back(std::move(chain));
      nodes_[below].parent = id;
      below = id;
    }
    nodes_[below].parent = top_parent;
    std::replace(nodes_[top_parent].children.begin(), nodes_[top_parent].children.end(), leaf, below);
  }
  refresh_depths();
}

void CodingTree::validate(const Graph& g) const {
  const auto fail = [](const std::string& what) { throw ContractViolation("invalid coding tree: " + what); };
  if (leaf_count_ != g.node_count()) fail("leaf count differs from node count");
  if (root_ < 0 || root_ >= size() || nodes_[root_].parent) fail("bad root");

  std::vector<int> seen_leaf(g.node_count(), 0);
  int max_leaf_depth = 0;
  for (int id = 0; id < size(); ++id) {
    const auto& n = nodes_[id];
    if (n.leaf_of) {
      if (id >= leaf_count_ || *n.leaf_of != id) fail("leaf ids must be 0..n-1");
      if (!n.children.empty()) fail("leaf " + std::to_string(id) + " has children");
      ++seen_leaf[*n.leaf_of];
      max_leaf_depth = std::max(max_leaf_depth, n.depth);
    } else if (n.children.empty()) {
      fail("internal node " + std::to_string(id) + " has no children");
    }
    if (n.parent) {
      const auto& sib = nodes_.at(*n.parent).children;
      if (std::count(sib.begin(), sib.end(), id) != 1) fail("parent/child link mismatch at " + std::to_string(id));
      if (n.depth != nodes_[*n.parent].depth + 1) fail("depth mismatch at " + std::to_string(id));
    } else if (id != root_) {
      fail("orphan node " + std::to_string(id));
    }
    auto m = members(id);
    if (n.vol != volume(g, m)) fail("cached vol mismatch at " + std::to_string(id));
    if (n.g_cut != cut(g, m)) fail("cached g_cut mismatch at " + std::to_string(id));
  }
  for (int c : seen_leaf) {
    if (c != 1) fail("leaves do not biject onto graph nodes");
  }
  if (members(root_).size() != static_cast<std::size_t>(g.node_count())) fail("root does not cover all nodes");
  if (max_leaf_depth != height_) fail("cached height mismatch");
}

std::string CodingTree::dump() const {
  std::ostringstream out;
  std::function<void(int)> visit = [&](int id) {
    const auto& n = nodes_[id];
    out << std::string(2 * n.depth, ' ') << n.depth << ' ' << id << ' ' << n.vol << ' ' << n.g_cut;
    if (n.leaf_of) out << " leaf->" << *n.leaf_of;
    out << '\n';
    for (int c : n.children) visit(c);
  };
  visit(root_);
  return out.str();
}

double structural_entropy(const Graph& g, const CodingTree& t) {
  if (g.edge_count() == 0) {
    spdlog::warn("structural entropy of an edgeless graph is taken as 0");
    return 0.0;
  }
  return raw_entropy(t);
}

double entropy_delta_merge(const Graph& g, const CodingTree& t, int a, int b) {
  const double total = 2.0 * g.edge_count();
  if (total <= 0.0) return 0.0;
  const auto& na = t.node(a);
  const auto& nb = t.node(b);
  const double w = static_cast<double>(edges_between(g, t.members(a), t.members(b)));
  const double vol_m = static_cast<double>(na.vol + nb.vol);
  if (vol_m <= 0.0) return 0.0;
  // (g_a + g_b - g_m) = 2w; only the fused node's own term and the children's
  // parent volume change.
  return (2.0 * w / total) * std::log2(vol_m / static_cast<double>(t.node(t.root()).vol));
}

double entropy_delta_drop(const Graph& g, const CodingTree& t, int v) {
  const double total = 2.0 * g.edge_count();
  if (total <= 0.0) return 0.0;
  const auto& n = t.node(v);
  if (!n.parent || n.leaf_of) throw ContractViolation("drop target must be a non-root internal node");
  if (n.vol <= 0) return 0.0;
  double child_cut = 0.0;
  for (int c : n.children) child_cut += static_cast<double>(t.node(c).g_cut);
  return ((static_cast<double>(n.g_cut) - child_cut) / total) *
         std::log2(static_cast<double>(n.vol) / static_cast<double>(t.node(*n.parent).vol));
}

CodingTree build_coding_tree(const Graph& g, int k, const BuildOptions& options) {
  if (k < 1) throw ConfigError("coding tree height k must be >= 1, got " + std::to_string(k));
  CodingTree tree = CodingTree::flat(g);
  if (g.edge_count() == 0) {
    spdlog::warn("edgeless graph with {} node(s): using padded flat coding tree", g.node_count());
    tree.pad_leaves_to_depth(k);
    return tree;
  }

  const double total = 2.0 * g.edge_count();

  // Stage 1: pairwise merges of root children, tracking inter-community edge
  // counts so each candidate delta is O(1).
  std::map<int, std::map<int, std::int64_t>> links;
  for (const auto& e : g.edges()) {
    ++links[e.u][e.v];
    ++links[e.v][e.u];
  }
  std::set<int> alive;
  for (int v = 0; v < g.node_count(); ++v) alive.insert(v);

  while (alive.size() > 2) {
    int best_a = -1, best_b = -1;
    double best = 0.0;
    for (const auto& [a, nbrs] : links) {
      for (const auto& [b, w] : nbrs) {
        if (b <= a) continue;
        const double vol_m = static_cast<double>(tree.node(a).vol + tree.node(b).vol);
        const double delta = (2.0 * static_cast<double>(w) / total) * std::log2(vol_m / total);
        const bool better = delta < best - kTieTolerance;
        const bool tie_smaller = std::abs(delta - best) <= kTieTolerance && best_a >= 0 &&
                                 std::pair(a, b) < std::pair(best_a, best_b);
        if (better || tie_smaller) {
          best = delta;
          best_a = a;
          best_b = b;
        }
      }
    }
    if (best_a < 0 || best > -kTieTolerance) {
      // Every pair is a zero-delta tie; take the two smallest ids.
      best_a = *alive.begin();
      best_b = *std::next(alive.begin());
      best = 0.0;
    }

    const double before = options.verify_deltas ? raw_entropy(tree) : 0.0;
    const int fused = tree.merge(g, best_a, best_b);
    if (options.verify_deltas) {
      check_delta(best, before, raw_entropy(tree), "merge");
      check_delta(entropy_delta_merge(g, tree, best_a, best_b), before, raw_entropy(tree), "merge");
    }

    std::map<int, std::int64_t> fused_links;
    for (int old : {best_a, best_b}) {
      auto it = links.find(old);
      if (it == links.end()) continue;
      for (const auto& [c, w] : it->second) {
        if (c == best_a || c == best_b) continue;
        fused_links[c] += w;
        links[c].erase(old);
      }
      links.erase(it);
    }
    for (const auto& [c, w] : fused_links) links[c][fused] = w;
    if (!fused_links.empty()) links[fused] = std::move(fused_links);

    alive.erase(best_a);
    alive.erase(best_b);
    alive.insert(fused);
  }

  // Stage 2: drop the cheapest internal node until the height fits.
  while (tree.height() > k) {
    int best_id = -1;
    double best = 0.0;
    for (int id = 0; id < tree.size(); ++id) {
      if (id == tree.root() || tree.is_leaf(id)) continue;
      const double delta = entropy_delta_drop(g, tree, id);
      if (best_id < 0 || delta < best - kTieTolerance) {
        best = delta;
        best_id = id;
      }
    }
    const double before = options.verify_deltas ? raw_entropy(tree) : 0.0;
    tree.drop(best_id);
    if (options.verify_deltas) check_delta(best, before, raw_entropy(tree), "drop");
  }

  tree.pad_leaves_to_depth(k);
  return tree;
}

}  // namespace sego
