#include "sego/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sego/errors.hpp"

namespace sego {
namespace {

Vector row_unit(const Matrix& m, Eigen::Index i) {
  Vector v = m.row(i).transpose();
  return v / std::max(v.norm(), ad::kNormEpsilon);
}

std::vector<double> column_values(const ad::Tensor& t) {
  const Matrix& v = t.value();
  return std::vector<double>(v.data(), v.data() + v.rows());
}

void require(const ad::Tensor& t, const char* what) {
  if (!t.valid()) throw ContractViolation(std::string("batch embeddings lack ") + what);
}

// Per-graph symmetric error (l(x,y) + l(y,x)) / 2 and its batch mean.
LossTerm symmetric_graph_term(const ad::Tensor& x, const ad::Tensor& y, double tau) {
  auto per_graph = ad::scale(ad::info_nce_symmetric_rows(x, y, tau), 0.5);
  return {ad::mean(per_graph), column_values(per_graph)};
}

}  // namespace

double infonce(const Matrix& anchors, const Matrix& partners, int i, double tau) {
  const Eigen::Index n = anchors.rows();
  if (partners.rows() != n || partners.cols() != anchors.cols()) {
    throw ContractViolation("infonce: shape mismatch " + shape_string(anchors) + " vs " + shape_string(partners));
  }
  if (n < 2) throw ContractViolation("infonce needs at least 2 rows for negatives");
  if (i < 0 || i >= n) throw ContractViolation("infonce: row " + std::to_string(i) + " out of range");
  if (!(tau > 0.0)) throw ContractViolation("infonce needs tau > 0");

  const Vector ai = row_unit(anchors, i);
  std::vector<double> logits;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j == i) continue;
    logits.push_back(ai.dot(row_unit(anchors, j)) / tau);
    logits.push_back(ai.dot(row_unit(partners, j)) / tau);
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - m);
  return m + std::log(sum) - ai.dot(row_unit(partners, i)) / tau;
}

LossTerm local_loss(const BatchEmbeddings& batch) {
  require(batch.node_basic, "node_basic");
  require(batch.node_topo, "node_topo");
  const auto num_graphs = static_cast<int>(batch.nodes_per_graph.size());
  const auto num_nodes = static_cast<Eigen::Index>(batch.node_graph.size());
  if (batch.node_basic.rows() != num_nodes) {
    throw ContractViolation("local_loss: " + std::to_string(batch.node_basic.rows()) + " node rows for " +
                            std::to_string(num_nodes) + " node owners");
  }
  for (int c : batch.nodes_per_graph) {
    if (c < 1) throw ContractViolation("local_loss: every graph needs at least one node");
  }

  ad::Tape& tape = *batch.node_basic.tape();
  auto node_terms = ad::info_nce_symmetric_rows(batch.node_basic, batch.node_topo, batch.tau);
  // Row j averages graph j's symmetric node terms: weight 1 / (2 |V_j|).
  Matrix averaging = Matrix::Zero(num_graphs, num_nodes);
  for (Eigen::Index i = 0; i < num_nodes; ++i) {
    const int gid = batch.node_graph[i];
    if (gid < 0 || gid >= num_graphs) throw ContractViolation("local_loss: node owner out of range");
    averaging(gid, i) = 0.5 / batch.nodes_per_graph[gid];
  }
  auto per_graph = ad::matmul(tape.constant(std::move(averaging)), node_terms);
  return {ad::mean(per_graph), column_values(per_graph)};
}

LossTerm global_loss(const BatchEmbeddings& batch) {
  require(batch.graph_basic, "graph_basic");
  require(batch.graph_topo, "graph_topo");
  return symmetric_graph_term(batch.graph_basic, batch.graph_topo, batch.tau);
}

LossTerm tree_loss(const BatchEmbeddings& batch) {
  require(batch.graph_basic, "graph_basic");
  require(batch.tree, "tree");
  return symmetric_graph_term(batch.graph_basic, batch.tree, batch.tau);
}

double population_std(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double n = static_cast<double>(values.size());
  const double mu = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mu) * (v - mu);
  return std::sqrt(ss / n);
}

double adaptive_weight(double sigma, double theta) {
  if (theta == 0.0) return 1.0;
  if (sigma == 0.0) return 0.0;
  return std::pow(sigma, theta);
}

LossReport total_loss(const BatchEmbeddings& batch, const LossOptions& options) {
  if (!options.use_tree && !options.use_local && !options.use_global) {
    throw ConfigError("all loss terms are disabled");
  }
  LossReport report;
  ad::Tensor total;
  auto accumulate = [&total](const ad::Tensor& term) { total = total.valid() ? ad::add(total, term) : term; };

  if (options.use_tree) {
    auto term = tree_loss(batch);
    report.l_tree = term.loss.item();
    report.per_graph_tree_errors = std::move(term.per_graph);
    accumulate(term.loss);
  }
  if (options.use_local) {
    auto term = local_loss(batch);
    report.l_local = term.loss.item();
    report.sigma_l = population_std(term.per_graph);
    report.per_graph_local_errors = std::move(term.per_graph);
    accumulate(ad::scale(term.loss, adaptive_weight(report.sigma_l, options.theta)));
  }
  if (options.use_global) {
    auto term = global_loss(batch);
    report.l_global = term.loss.item();
    report.sigma_g = population_std(term.per_graph);
    report.per_graph_global_errors = std::move(term.per_graph);
    accumulate(ad::scale(term.loss, adaptive_weight(report.sigma_g, options.theta)));
  }
  report.total_tensor = total;
  report.total = total.item();
  return report;
}

}  // namespace sego
