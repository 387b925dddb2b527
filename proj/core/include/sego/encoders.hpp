#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sego/autodiff.hpp"
#include "sego/batch.hpp"
#include "sego/coding_tree.hpp"
#include "sego/graph.hpp"

namespace sego {

/// Two-layer perceptron: Linear -> ReLU -> Linear.
class Mlp {
 public:
  Mlp() = default;
  // Weights and biases drawn uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  Mlp(const std::string& prefix, int in_dim, int hidden_dim, int out_dim, std::mt19937_64& rng);

  ad::Tensor forward(ad::Tape& tape, const ad::Tensor& x);
  void collect(std::vector<ad::Parameter*>& out);

  int in_dim() const { return static_cast<int>(w1_.value.rows()); }
  int out_dim() const { return static_cast<int>(w2_.value.cols()); }

 private:
  ad::Parameter w1_, b1_, w2_, b2_;
};

struct GinOutput {
  ad::Tensor nodes;   // num_nodes x (layers * hidden)
  ad::Tensor graphs;  // num_graphs x (layers * hidden), sum readout
};

/// GIN stack: h^l = MLP^l(h^(l-1) + sum of neighbour h^(l-1)). Node
/// embeddings concatenate every layer's output.
class GinEncoder {
 public:
  GinEncoder() = default;
  GinEncoder(const std::string& prefix, int input_dim, int hidden_dim, int num_layers, std::mt19937_64& rng);

  GinOutput forward(ad::Tape& tape, const ad::Tensor& features, std::span<const int> edge_src,
                    std::span<const int> edge_dst, std::span<const int> node_graph, int num_graphs);
  void collect(std::vector<ad::Parameter*>& out);

  int input_dim() const { return input_dim_; }
  int output_dim() const { return hidden_dim_ * static_cast<int>(layers_.size()); }
  int num_layers() const { return static_cast<int>(layers_.size()); }

 private:
  int input_dim_ = 0;
  int hidden_dim_ = 0;
  std::vector<Mlp> layers_;
};

/// Bottom-up coding-tree encoder: x_v^l = MLP^l(sum of children x^(l-1)),
/// one MLP per tree level; returns the root rows.
class TreeEncoder {
 public:
  TreeEncoder() = default;
  TreeEncoder(const std::string& prefix, int input_dim, int hidden_dim, int height, std::mt19937_64& rng);

  ad::Tensor forward(ad::Tape& tape, const ad::Tensor& leaf_features, const TreeBatch& trees);
  void collect(std::vector<ad::Parameter*>& out);

  int height() const { return static_cast<int>(levels_.size()); }
  int output_dim() const { return hidden_dim_; }

 private:
  int hidden_dim_ = 0;
  std::vector<Mlp> levels_;
};

// MLP followed by row L2 normalization.
class ProjectionHead {
 public:
  ProjectionHead() = default;
  ProjectionHead(const std::string& prefix, int input_dim, int contrast_dim, std::mt19937_64& rng);

  ad::Tensor forward(ad::Tape& tape, const ad::Tensor& h);
  void collect(std::vector<ad::Parameter*>& out);

  int output_dim() const { return mlp_.out_dim(); }

 private:
  Mlp mlp_;
};

// Single-graph conveniences over the batched encoders.
GinOutput gin_forward(ad::Tape& tape, GinEncoder& encoder, const Graph& g, const Matrix& features);
ad::Tensor tree_forward(ad::Tape& tape, TreeEncoder& encoder, const CodingTree& tree, const Matrix& leaf_features);
ad::Tensor project(ad::Tape& tape, ProjectionHead& head, const ad::Tensor& h);

struct ModelDims {
  int feature_dim = 0;
  int topo_dim = 0;
  int hidden_dim = 16;
  int contrast_dim = 16;
  int num_layers = 5;
  int tree_height = 5;
};

/// All trainable pieces: basic/topo GIN encoders, the tree encoder and five
/// projection heads (node- and graph-space per GIN view, plus the tree head).
class Model {
 public:
  Model() = default;
  Model(const ModelDims& dims, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelDims& dims() const { return dims_; }
  // Stable order; names follow "gin_b.layer1.w1", "tree.level2.b2", "head_tree.w1", ...
  std::vector<ad::Parameter*> parameters();

  GinEncoder gin_basic;
  GinEncoder gin_topo;
  TreeEncoder tree;
  ProjectionHead head_local_basic;
  ProjectionHead head_local_topo;
  ProjectionHead head_global_basic;
  ProjectionHead head_global_topo;
  ProjectionHead head_tree;

 private:
  ModelDims dims_;
};

}  // namespace sego
