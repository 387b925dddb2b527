#pragma once

#include <span>
#include <vector>

#include "sego/autodiff.hpp"

namespace sego {

// Projected embeddings of one batch. Graph-level tensors have one row per
// graph; node-level tensors one row per batch node. Unused terms may be left
// as invalid tensors.
struct BatchEmbeddings {
  ad::Tensor node_basic;
  ad::Tensor node_topo;
  std::vector<int> node_graph;
  std::vector<int> nodes_per_graph;
  ad::Tensor graph_basic;
  ad::Tensor graph_topo;
  ad::Tensor tree;
  double tau = 0.2;
};

// Reference evaluation of a single contrastive term for row i, without a tape.
//   -log[ e^{s(a_i,b_i)/tau} / sum_{j != i} (e^{s(a_i,a_j)/tau} + e^{s(a_i,b_j)/tau}) ]
double infonce(const Matrix& anchors, const Matrix& partners, int i, double tau);

struct LossTerm {
  ad::Tensor loss;                 // 1 x 1
  std::vector<double> per_graph;   // one error per graph in the batch
};

// Mean over graphs of each graph's average symmetric node term. Negatives for
// a node are all other batch nodes in both views.
LossTerm local_loss(const BatchEmbeddings& batch);
LossTerm global_loss(const BatchEmbeddings& batch);
// Contrasts the basic-view graph embedding against the tree embedding.
LossTerm tree_loss(const BatchEmbeddings& batch);

double population_std(std::span<const double> values);
// sigma^theta with 0^theta = 0 for theta > 0 and 1 for theta = 0.
double adaptive_weight(double sigma, double theta);

struct LossOptions {
  double theta = 1.0;
  bool use_tree = true;
  bool use_local = true;
  bool use_global = true;
};

/// Combined objective. sigma_l and sigma_g are treated as constants. Disabled
/// terms contribute 0, are not evaluated and leave their error lists empty.
struct LossReport {
  ad::Tensor total_tensor;
  double total = 0.0;
  double l_local = 0.0;
  double l_global = 0.0;
  double l_tree = 0.0;
  std::vector<double> per_graph_local_errors;
  std::vector<double> per_graph_global_errors;
  std::vector<double> per_graph_tree_errors;
  double sigma_l = 0.0;
  double sigma_g = 0.0;
};

LossReport total_loss(const BatchEmbeddings& batch, const LossOptions& options);

}  // namespace sego
