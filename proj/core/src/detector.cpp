#include "sego/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <tuple>

#include <spdlog/spdlog.h>

#include "sego/errors.hpp"
#include "sego/optim.hpp"

namespace sego {
namespace {

void positive(int value, const char* name) {
  if (value < 1) throw ConfigError(std::string(name) + " must be >= 1, got " + std::to_string(value));
}

ModelDims dims_for(std::span<const PreparedGraph> graphs, const TrainConfig& cfg) {
  ModelDims dims;
  dims.feature_dim = graphs.front().graph.feature_dim();
  dims.topo_dim = static_cast<int>(graphs.front().topo.cols());
  dims.hidden_dim = cfg.hidden_dim;
  dims.contrast_dim = cfg.contrast_dim;
  dims.num_layers = cfg.num_layers;
  dims.tree_height = cfg.k;
  return dims;
}

GraphBatch batch_of(std::span<const PreparedGraph> graphs, std::span<const int> indices, int k) {
  std::vector<const PreparedGraph*> members;
  members.reserve(indices.size());
  for (int i : indices) members.push_back(&graphs[i]);
  return make_batch(members, k);
}

double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::pair<double, double> fit_term(std::span<const double> errors, const char* term) {
  if (errors.empty()) return {0.0, 1.0};
  const double mu = mean_of(errors);
  double sigma = population_std(errors);
  // Rounding leaves ~1e-16 spread on constant inputs; treat that as zero too.
  if (sigma <= 1e-12 * std::max(1.0, std::abs(mu))) {
    spdlog::warn("training {} errors are constant; using std 1 for z-scores", term);
    sigma = 1.0;
  }
  return {mu, sigma};
}

}  // namespace

void TrainConfig::validate() const {
  positive(epochs, "epochs");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2, got " + std::to_string(batch_size));
  positive(k, "k");
  positive(r, "r");
  positive(hidden_dim, "hidden_dim");
  positive(contrast_dim, "contrast_dim");
  positive(num_layers, "num_layers");
  positive(degree_cap, "degree_cap");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be > 0");
  if (!(theta >= 0.0) || !std::isfinite(theta)) throw ConfigError("theta must be >= 0");
  if (feature_scheme != "auto" && feature_scheme != "label" && feature_scheme != "degree" &&
      feature_scheme != "attributes") {
    throw ConfigError("feature_scheme must be one of auto|label|degree|attributes, got '" + feature_scheme + "'");
  }
  if (!use_tree && !use_local && !use_global) throw ConfigError("all loss terms are disabled");
}

BatchEmbeddings embed_batch(Model& model, ad::Tape& tape, const GraphBatch& batch, double tau,
                            const LossOptions& terms) {
  BatchEmbeddings out;
  out.tau = tau;
  out.node_graph = batch.node_graph;
  out.nodes_per_graph = batch.nodes_per_graph;

  auto features = tape.constant(batch.features);
  auto basic = model.gin_basic.forward(tape, features, batch.edge_src, batch.edge_dst, batch.node_graph,
                                       batch.num_graphs);
  out.graph_basic = model.head_global_basic.forward(tape, basic.graphs);
  if (terms.use_local || terms.use_global) {
    auto topo = model.gin_topo.forward(tape, tape.constant(batch.topo), batch.edge_src, batch.edge_dst,
                                       batch.node_graph, batch.num_graphs);
    if (terms.use_local) {
      out.node_basic = model.head_local_basic.forward(tape, basic.nodes);
      out.node_topo = model.head_local_topo.forward(tape, topo.nodes);
    }
    if (terms.use_global) out.graph_topo = model.head_global_topo.forward(tape, topo.graphs);
  }
  if (terms.use_tree) {
    out.tree = model.head_tree.forward(tape, model.tree.forward(tape, features, batch.trees));
  }
  return out;
}

TrainResult train(std::span<const PreparedGraph> graphs, const TrainConfig& cfg, const TrainLogSink& log) {
  cfg.validate();
  if (graphs.size() < 2) throw ConfigError("training needs at least 2 graphs, got " + std::to_string(graphs.size()));

  TrainResult result{Model(dims_for(graphs, cfg), cfg.seed), {}};
  auto params = result.model.parameters();
  ad::zero_grad(params);
  ad::AdamState adam;
  const ad::AdamOptions adam_options{.lr = cfg.learning_rate};
  const LossOptions terms = cfg.loss_options();
  // Independent stream from the one used for initialization.
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<int> order(graphs.size());
  std::iota(order.begin(), order.end(), 0);
  int step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0;
    const auto batches = make_batches(order, cfg.batch_size);
    for (const auto& indices : batches) {
      const GraphBatch batch = batch_of(graphs, indices, cfg.k);
      ad::Tape tape;
      const BatchEmbeddings emb = embed_batch(result.model, tape, batch, cfg.tau, terms);
      const LossReport report = total_loss(emb, terms);
      ad::zero_grad(params);
      tape.backward(report.total_tensor);
      ad::adam_step(params, adam, adam_options);
      ++step;
      epoch_total += report.total;
      if (log) {
        log(TrainLogRecord{epoch, step, report.l_tree, report.l_local, report.l_global, report.sigma_l,
                           report.sigma_g, report.total});
      }
    }
    result.epoch_mean_loss.push_back(epoch_total / static_cast<double>(batches.size()));
  }
  return result;
}

TrainResult train(const Dataset& dataset, const TrainConfig& cfg, const TrainLogSink& log) {
  cfg.validate();
  const auto prepared = prepare_graphs(dataset, cfg.k, cfg.r);
  return train(prepared, cfg, log);
}

GraphErrors evaluate_errors(Model& model, std::span<const PreparedGraph> graphs, std::span<const int> order,
                            int batch_size, double tau, const LossOptions& terms) {
  GraphErrors out;
  for (const auto& indices : make_batches(order, batch_size)) {
    const GraphBatch batch = batch_of(graphs, indices, model.dims().tree_height);
    ad::Tape tape;
    const BatchEmbeddings emb = embed_batch(model, tape, batch, tau, terms);
    auto append = [](std::vector<double>& dst, const std::vector<double>& src) {
      dst.insert(dst.end(), src.begin(), src.end());
    };
    if (terms.use_local) append(out.local, local_loss(emb).per_graph);
    if (terms.use_global) append(out.global, global_loss(emb).per_graph);
    if (terms.use_tree) append(out.tree, tree_loss(emb).per_graph);
  }
  return out;
}

ScoreStats fit_score_stats(Model& model, std::span<const PreparedGraph> train_graphs, const TrainConfig& cfg) {
  std::vector<int> order(train_graphs.size());
  std::iota(order.begin(), order.end(), 0);
  const GraphErrors errors = evaluate_errors(model, train_graphs, order, cfg.batch_size, cfg.tau, cfg.loss_options());
  ScoreStats stats;
  std::tie(stats.mu_l, stats.sigma_l) = fit_term(errors.local, "local");
  std::tie(stats.mu_g, stats.sigma_g) = fit_term(errors.global, "global");
  std::tie(stats.mu_t, stats.sigma_t) = fit_term(errors.tree, "tree");
  return stats;
}

std::vector<GraphScore> score(Model& model, const ScoreStats& stats, std::span<const PreparedGraph> graphs,
                              const TrainConfig& cfg, const ScoreOptions& options) {
  std::vector<int> order(graphs.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.shuffle_seed);
  std::shuffle(order.begin(), order.end(), rng);

  LossOptions terms = cfg.loss_options();
  terms.use_tree = terms.use_tree && options.include_tree_term;
  const GraphErrors errors = evaluate_errors(model, graphs, order, cfg.batch_size, cfg.tau, terms);

  std::vector<GraphScore> out(graphs.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    GraphScore& s = out[order[i]];
    if (terms.use_local) {
      s.s_l = errors.local[i];
      s.s += (s.s_l - stats.mu_l) / stats.sigma_l;
    }
    if (terms.use_global) {
      s.s_g = errors.global[i];
      s.s += (s.s_g - stats.mu_g) / stats.sigma_g;
    }
    if (terms.use_tree) {
      s.s_t = errors.tree[i];
      s.s += (s.s_t - stats.mu_t) / stats.sigma_t;
    }
  }
  return out;
}

std::uint64_t parameter_checksum(Model& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const ad::Parameter* p : model.parameters()) {
    mix(p->name.data(), p->name.size());
    mix(p->value.data(), sizeof(double) * static_cast<std::size_t>(p->value.size()));
  }
  return h;
}

}  // namespace sego
