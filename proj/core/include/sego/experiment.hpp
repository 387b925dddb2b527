#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sego/detector.hpp"
#include "sego/graph.hpp"

namespace sego {

class ViewCache;

struct ExperimentConfig {
  TrainConfig train;
  int runs = 5;
  double train_fraction = 0.9;
  bool score_tree_term = false;
  // Anomaly mode: graph label treated as anomalous; the minority label if unset.
  std::optional<int> anomaly_class;

  void validate() const;
};

/// Applies train.feature_scheme to the ID dataset and, when given, the OOD
/// dataset so both share one input space. "auto" picks one-hot node labels
/// when every graph has them and capped one-hot degrees otherwise. The label
/// alphabet is fitted on the ID dataset; unseen OOD labels give zero rows.
struct FeaturedData {
  Dataset id;
  std::optional<Dataset> ood;
  std::string scheme;  // the scheme actually applied
};
FeaturedData apply_feature_scheme(const Dataset& id, const Dataset* ood, const TrainConfig& cfg);

struct ScoreRow {
  int graph_id = 0;     // index within its source dataset
  std::string source;   // "id_test" or "ood_test"
  GraphScore score;
};

struct RunResult {
  int run = 0;
  std::uint64_t seed = 0;
  double auc = 0.0;
  std::size_t n_train = 0;
  std::size_t n_id_test = 0;
  std::size_t n_ood_test = 0;
  double final_train_loss = 0.0;
  std::uint64_t parameter_checksum = 0;
  ScoreStats stats;
  double seconds = 0.0;
  std::vector<ScoreRow> rows;
};

struct ExperimentReport {
  std::string mode;  // "ood", "anomaly" or "self"
  std::string id_name;
  std::string ood_name;
  std::string feature_scheme;
  std::optional<int> anomaly_class;
  ExperimentConfig config;
  std::vector<RunResult> runs;
  double auc_mean = 0.0;
  double auc_std = 0.0;  // population std over runs
};

using RunLogSink = std::function<void(int run, const TrainLogRecord&)>;

// Per run (seed = train.seed + run): ID split train/test, an OOD test sample
// of the ID test size, train, fit stats, score, AUC. Datasets must already
// carry features (see apply_feature_scheme).
ExperimentReport run_ood_experiment(const Dataset& id, const Dataset& ood, const ExperimentConfig& cfg,
                                    const RunLogSink& log = {}, const ViewCache* cache = nullptr);

// One-class protocol on a labeled dataset: train on normal graphs only, test
// on held-out normal graphs plus an equally sized anomalous sample.
ExperimentReport run_anomaly_experiment(const Dataset& dataset, const ExperimentConfig& cfg,
                                        const RunLogSink& log = {}, const ViewCache* cache = nullptr);

// Sanity protocol: the held-out ID graphs are split in two halves and the
// second half is labeled OOD. Expected AUC is about 0.5.
ExperimentReport run_self_consistency_experiment(const Dataset& id, const ExperimentConfig& cfg,
                                                 const RunLogSink& log = {}, const ViewCache* cache = nullptr);

void write_scores_csv(const std::filesystem::path& path, const ExperimentReport& report);
void write_report_json(const std::filesystem::path& path, const ExperimentReport& report);
// Wall-clock per run; kept apart from report.json so reports stay reproducible.
void write_timing_json(const std::filesystem::path& path, const ExperimentReport& report);
std::string train_log_line(int run, const TrainLogRecord& record);

}  // namespace sego
