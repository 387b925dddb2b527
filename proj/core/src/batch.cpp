#include "sego/batch.hpp"

#include "sego/errors.hpp"
#include "sego/views.hpp"

namespace sego {

std::vector<PreparedGraph> prepare_graphs(const Dataset& dataset, int k, int r, const ViewCache* cache) {
  std::vector<PreparedGraph> out;
  out.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Graph& g = dataset.graphs[i];
    TripletViews views = cache ? cache->get_or_build(g, dataset.name, i, k, r) : build_triplet_views(g, k, r);
    out.push_back(PreparedGraph{g, std::move(views.topo), std::move(views.anchor)});
  }
  return out;
}

TreeBatch make_tree_batch(std::span<const CodingTree* const> trees, int height) {
  TreeBatch batch;
  batch.height = height;
  batch.level_size.assign(height + 1, 0);
  batch.parent_row.assign(height, {});

  for (const CodingTree* tree : trees) {
    if (tree->height() != height) {
      throw ContractViolation("coding tree height " + std::to_string(tree->height()) + " != encoder depth " +
                              std::to_string(height));
    }
    // Row of every tree node within its level; ids ascend within a level.
    std::vector<int> row(tree->size(), -1);
    for (int leaf = 0; leaf < tree->leaf_count(); ++leaf) {
      if (tree->node(leaf).depth != height) {
        throw ContractViolation("coding tree leaf " + std::to_string(leaf) + " is not at depth " +
                                std::to_string(height));
      }
      row[leaf] = batch.level_size[0]++;
    }
    for (int id = tree->leaf_count(); id < tree->size(); ++id) {
      const int level = height - tree->node(id).depth;
      row[id] = batch.level_size[level]++;
    }
    for (int level = 0; level < height; ++level) {
      batch.parent_row[level].resize(batch.level_size[level], -1);
    }
    for (int id = 0; id < tree->size(); ++id) {
      const auto& n = tree->node(id);
      if (!n.parent) continue;
      const int level = height - n.depth;
      batch.parent_row[level][row[id]] = row[*n.parent];
    }
  }
  return batch;
}

GraphBatch make_batch(std::span<const PreparedGraph* const> graphs, int tree_height) {
  GraphBatch batch;
  batch.num_graphs = static_cast<int>(graphs.size());
  int feature_dim = -1, topo_dim = -1;
  for (const auto* pg : graphs) {
    if (feature_dim < 0) {
      feature_dim = pg->graph.feature_dim();
      topo_dim = static_cast<int>(pg->topo.cols());
    }
    if (pg->graph.feature_dim() != feature_dim || pg->topo.cols() != topo_dim) {
      throw ContractViolation("batch graphs disagree on feature dimensions");
    }
    batch.num_nodes += pg->graph.node_count();
  }
  batch.features.resize(batch.num_nodes, std::max(feature_dim, 0));
  batch.topo.resize(batch.num_nodes, std::max(topo_dim, 0));

  std::vector<const CodingTree*> trees;
  int offset = 0;
  for (int gi = 0; gi < batch.num_graphs; ++gi) {
    const PreparedGraph& pg = *graphs[gi];
    const int n = pg.graph.node_count();
    batch.features.middleRows(offset, n) = pg.graph.node_features();
    batch.topo.middleRows(offset, n) = pg.topo;
    for (const auto& e : pg.graph.edges()) {
      batch.edge_src.push_back(offset + e.u);
      batch.edge_dst.push_back(offset + e.v);
      batch.edge_src.push_back(offset + e.v);
      batch.edge_dst.push_back(offset + e.u);
    }
    batch.node_graph.insert(batch.node_graph.end(), n, gi);
    batch.nodes_per_graph.push_back(n);
    trees.push_back(&pg.anchor);
    offset += n;
  }
  batch.trees = make_tree_batch(trees, tree_height);
  return batch;
}

std::vector<std::vector<int>> make_batches(std::span<const int> order, int batch_size) {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  std::vector<std::vector<int>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  if (batches.size() >= 2 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

}  // namespace sego
