#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sego/batch.hpp"
#include "sego/encoders.hpp"
#include "sego/objective.hpp"

namespace sego {

struct TrainConfig {
  int epochs = 150;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double tau = 0.2;
  double theta = 1.0;
  int k = 5;
  int r = 8;
  int hidden_dim = 16;
  int contrast_dim = 16;
  int num_layers = 5;
  std::uint64_t seed = 0;
  // auto | label | degree | attributes
  std::string feature_scheme = "auto";
  int degree_cap = 10;
  bool use_tree = true;
  bool use_local = true;
  bool use_global = true;

  // Throws ConfigError naming the offending field.
  void validate() const;
  LossOptions loss_options() const { return {theta, use_tree, use_local, use_global}; }
};

// One record per optimizer step.
struct TrainLogRecord {
  int epoch = 0;
  int step = 0;
  double l_tree = 0.0;
  double l_local = 0.0;
  double l_global = 0.0;
  double sigma_l = 0.0;
  double sigma_g = 0.0;
  double total = 0.0;
};

using TrainLogSink = std::function<void(const TrainLogRecord&)>;

struct TrainResult {
  Model model;
  std::vector<double> epoch_mean_loss;
};

// Runs the encoders over one batch and projects every embedding the enabled
// loss terms need.
BatchEmbeddings embed_batch(Model& model, ad::Tape& tape, const GraphBatch& batch, double tau,
                            const LossOptions& terms);

/// Trains a fresh model (initialized from cfg.seed) on `graphs`, which must
/// already carry the model's input features. Each epoch shuffles the graphs
/// and takes one Adam step per mini-batch.
TrainResult train(std::span<const PreparedGraph> graphs, const TrainConfig& cfg, const TrainLogSink& log = {});
TrainResult train(const Dataset& dataset, const TrainConfig& cfg, const TrainLogSink& log = {});

// Per-graph contrastive errors. Lists for disabled terms are empty.
struct GraphErrors {
  std::vector<double> local;
  std::vector<double> global;
  std::vector<double> tree;
};

// Evaluates the errors of graphs[order[i]] for every i, batching `order` in
// sequence; results are indexed like `order`.
GraphErrors evaluate_errors(Model& model, std::span<const PreparedGraph> graphs, std::span<const int> order,
                            int batch_size, double tau, const LossOptions& terms);

struct ScoreStats {
  double mu_l = 0.0, sigma_l = 1.0;
  double mu_g = 0.0, sigma_g = 1.0;
  double mu_t = 0.0, sigma_t = 1.0;
};

// Population mean/std of the training graphs' errors, evaluated in batches
// of cfg.batch_size in the given order. A (numerically) zero std is replaced
// by 1.
ScoreStats fit_score_stats(Model& model, std::span<const PreparedGraph> train_graphs, const TrainConfig& cfg);

// Raw per-graph contrastive errors plus the combined score
// s = (s_l - mu_l) / sigma_l + (s_g - mu_g) / sigma_g [+ tree term].
struct GraphScore {
  double s_l = 0.0;
  double s_g = 0.0;
  double s_t = 0.0;  // only filled when the tree term is scored
  double s = 0.0;    // higher means more likely OOD
};

struct ScoreOptions {
  bool include_tree_term = false;
  // Graphs are shuffled with this seed before batching so that negatives mix
  // every source of the scoring set.
  std::uint64_t shuffle_seed = 0;
};

// Scores every graph; the result is indexed like `graphs`. Terms disabled
// in training are left out of the combined score.
std::vector<GraphScore> score(Model& model, const ScoreStats& stats, std::span<const PreparedGraph> graphs,
                              const TrainConfig& cfg, const ScoreOptions& options = {});

// FNV-1a over the names and raw bytes of every parameter.
std::uint64_t parameter_checksum(Model& model);

}  // namespace sego
