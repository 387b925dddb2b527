#include "sego/encoders.hpp"

#include <cmath>

#include "sego/errors.hpp"

namespace sego {
namespace {

Matrix uniform_init(int rows, int cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

}  // namespace

Mlp::Mlp(const std::string& prefix, int in_dim, int hidden_dim, int out_dim, std::mt19937_64& rng) {
  if (in_dim < 1 || hidden_dim < 1 || out_dim < 1) {
    throw ConfigError(prefix + ": MLP dimensions must be positive");
  }
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(in_dim));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  w1_ = ad::Parameter(prefix + ".w1", uniform_init(in_dim, hidden_dim, bound1, rng));
  b1_ = ad::Parameter(prefix + ".b1", uniform_init(1, hidden_dim, bound1, rng));
  w2_ = ad::Parameter(prefix + ".w2", uniform_init(hidden_dim, out_dim, bound2, rng));
  b2_ = ad::Parameter(prefix + ".b2", uniform_init(1, out_dim, bound2, rng));
}

ad::Tensor Mlp::forward(ad::Tape& tape, const ad::Tensor& x) {
  if (x.cols() != in_dim()) {
    throw ContractViolation(w1_.name + ": input has " + std::to_string(x.cols()) + " columns, expected " +
                            std::to_string(in_dim()));
  }
  auto h = ad::relu(ad::add_bias_rowwise(ad::matmul(x, tape.parameter(w1_)), tape.parameter(b1_)));
  return ad::add_bias_rowwise(ad::matmul(h, tape.parameter(w2_)), tape.parameter(b2_));
}

void Mlp::collect(std::vector<ad::Parameter*>& out) {
  for (auto* p : {&w1_, &b1_, &w2_, &b2_}) out.push_back(p);
}

GinEncoder::GinEncoder(const std::string& prefix, int input_dim, int hidden_dim, int num_layers,
                       std::mt19937_64& rng)
    : input_dim_(input_dim), hidden_dim_(hidden_dim) {
  if (num_layers < 1) throw ConfigError("GIN needs at least one layer");
  for (int l = 0; l < num_layers; ++l) {
    layers_.emplace_back(prefix + ".layer" + std::to_string(l + 1), l == 0 ? input_dim : hidden_dim, hidden_dim,
                         hidden_dim, rng);
  }
}

GinOutput GinEncoder::forward(ad::Tape& tape, const ad::Tensor& features, std::span<const int> edge_src,
                              std::span<const int> edge_dst, std::span<const int> node_graph, int num_graphs) {
  if (edge_src.size() != edge_dst.size()) throw ContractViolation("edge endpoint lists differ in length");
  if (static_cast<Eigen::Index>(node_graph.size()) != features.rows()) {
    throw ContractViolation("node_graph has " + std::to_string(node_graph.size()) + " entries for " +
                            std::to_string(features.rows()) + " feature rows");
  }
  const int n = static_cast<int>(features.rows());
  std::vector<ad::Tensor> outputs;
  ad::Tensor h = features;
  for (auto& layer : layers_) {
    ad::Tensor aggregated = h;
    if (!edge_src.empty()) {
      aggregated = ad::add(h, ad::sum_rows_grouped(ad::gather_rows(h, edge_src), edge_dst, n));
    }
    h = layer.forward(tape, aggregated);
    outputs.push_back(h);
  }
  ad::Tensor nodes = outputs.size() == 1 ? outputs.front() : ad::concat_cols(outputs);
  return {nodes, ad::sum_rows_grouped(nodes, node_graph, num_graphs)};
}

void GinEncoder::collect(std::vector<ad::Parameter*>& out) {
  for (auto& l : layers_) l.collect(out);
}

TreeEncoder::TreeEncoder(const std::string& prefix, int input_dim, int hidden_dim, int height,
                         std::mt19937_64& rng)
    : hidden_dim_(hidden_dim) {
  if (height < 1) throw ConfigError("tree encoder needs at least one level");
  for (int l = 0; l < height; ++l) {
    levels_.emplace_back(prefix + ".level" + std::to_string(l + 1), l == 0 ? input_dim : hidden_dim, hidden_dim,
                         hidden_dim, rng);
  }
}

ad::Tensor TreeEncoder::forward(ad::Tape& tape, const ad::Tensor& leaf_features, const TreeBatch& trees) {
  if (trees.height != height()) {
    throw ContractViolation("tree height " + std::to_string(trees.height) + " != encoder depth " +
                            std::to_string(height()));
  }
  if (leaf_features.rows() != trees.level_size.at(0)) {
    throw ContractViolation("leaf feature rows " + std::to_string(leaf_features.rows()) + " != leaf count " +
                            std::to_string(trees.level_size.at(0)));
  }
  ad::Tensor x = leaf_features;
  for (int l = 0; l < height(); ++l) {
    auto summed = ad::sum_rows_grouped(x, trees.parent_row[l], trees.level_size[l + 1]);
    x = levels_[l].forward(tape, summed);
  }
  return x;
}

void TreeEncoder::collect(std::vector<ad::Parameter*>& out) {
  for (auto& l : levels_) l.collect(out);
}

ProjectionHead::ProjectionHead(const std::string& prefix, int input_dim, int contrast_dim, std::mt19937_64& rng)
    : mlp_(prefix, input_dim, contrast_dim, contrast_dim, rng) {}

ad::Tensor ProjectionHead::forward(ad::Tape& tape, const ad::Tensor& h) {
  return ad::l2_normalize_rows(mlp_.forward(tape, h));
}

void ProjectionHead::collect(std::vector<ad::Parameter*>& out) { mlp_.collect(out); }

GinOutput gin_forward(ad::Tape& tape, GinEncoder& encoder, const Graph& g, const Matrix& features) {
  if (features.rows() != g.node_count()) {
    throw ContractViolation("features have " + std::to_string(features.rows()) + " rows for " +
                            std::to_string(g.node_count()) + " nodes");
  }
  std::vector<int> src, dst;
  for (const auto& e : g.edges()) {
    src.push_back(e.u);
    dst.push_back(e.v);
    src.push_back(e.v);
    dst.push_back(e.u);
  }
  std::vector<int> owner(g.node_count(), 0);
  return encoder.forward(tape, tape.constant(features), src, dst, owner, 1);
}

ad::Tensor tree_forward(ad::Tape& tape, TreeEncoder& encoder, const CodingTree& tree, const Matrix& leaf_features) {
  const CodingTree* trees[] = {&tree};
  return encoder.forward(tape, tape.constant(leaf_features), make_tree_batch(trees, encoder.height()));
}

ad::Tensor project(ad::Tape& tape, ProjectionHead& head, const ad::Tensor& h) { return head.forward(tape, h); }

Model::Model(const ModelDims& dims, std::uint64_t seed) : dims_(dims) {
  std::mt19937_64 rng(seed);
  gin_basic = GinEncoder("gin_b", dims.feature_dim, dims.hidden_dim, dims.num_layers, rng);
  gin_topo = GinEncoder("gin_t", dims.topo_dim, dims.hidden_dim, dims.num_layers, rng);
  tree = TreeEncoder("tree", dims.feature_dim, dims.hidden_dim, dims.tree_height, rng);
  const int node_dim = gin_basic.output_dim();
  head_local_basic = ProjectionHead("head_local_b", node_dim, dims.contrast_dim, rng);
  head_local_topo = ProjectionHead("head_local_t", node_dim, dims.contrast_dim, rng);
  head_global_basic = ProjectionHead("head_global_b", node_dim, dims.contrast_dim, rng);
  head_global_topo = ProjectionHead("head_global_t", node_dim, dims.contrast_dim, rng);
  head_tree = ProjectionHead("head_tree", tree.output_dim(), dims.contrast_dim, rng);
}

std::vector<ad::Parameter*> Model::parameters() {
  std::vector<ad::Parameter*> out;
  gin_basic.collect(out);
  gin_topo.collect(out);
  tree.collect(out);
  head_local_basic.collect(out);
  head_local_topo.collect(out);
  head_global_basic.collect(out);
  head_global_topo.collect(out);
  head_tree.collect(out);
  return out;
}

}  // namespace sego
