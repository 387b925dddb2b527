#include "sego/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <thread>

#include "json.hpp"
#include <spdlog/spdlog.h>

#include "sego/auc.hpp"
#include "sego/errors.hpp"
#include "sego/features.hpp"
#include "sego/objective.hpp"
#include "sego/views.hpp"

namespace sego {
namespace {

using json = nlohmann::ordered_json;

struct RunPlan {
  std::vector<int> train;
  std::vector<int> id_test;
  std::vector<int> ood_test;
};

bool has_node_labels(const Dataset& ds) {
  return std::all_of(ds.graphs.begin(), ds.graphs.end(), [](const Graph& g) { return g.node_labels().has_value(); });
}

std::vector<int> shuffled_indices(std::size_t n, std::mt19937_64& rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

// Splits `pool` into (train, test) with test taking round((1 - fraction) * n).
std::pair<std::vector<int>, std::vector<int>> split(std::vector<int> pool, double train_fraction) {
  const auto n = pool.size();
  auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * (1.0 - train_fraction)));
  n_test = std::max<std::size_t>(n_test, 1);
  if (n < n_test + 2) {
    throw ConfigError("dataset of " + std::to_string(n) + " graphs is too small for a train/test split");
  }
  std::vector<int> test(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<int> train(pool.begin() + static_cast<std::ptrdiff_t>(n_test), pool.end());
  return {std::move(train), std::move(test)};
}

std::vector<int> sample_ood(std::vector<int> pool, std::size_t wanted, const std::string& what) {
  if (pool.size() < wanted) {
    spdlog::warn("{} has {} graphs, fewer than the {} ID test graphs; using all of them", what, pool.size(), wanted);
    return pool;
  }
  pool.resize(wanted);
  return pool;
}

std::vector<PreparedGraph> pick(const std::vector<PreparedGraph>& pool, std::span<const int> indices) {
  std::vector<PreparedGraph> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(pool[i]);
  return out;
}

RunResult execute_run(int run, std::uint64_t seed, const std::vector<PreparedGraph>& id_pool,
                      const std::vector<PreparedGraph>& ood_pool, const RunPlan& plan, const ExperimentConfig& cfg,
                      const TrainLogSink& sink) {
  const auto start = std::chrono::steady_clock::now();
  TrainConfig train_cfg = cfg.train;
  train_cfg.seed = seed;

  const auto train_graphs = pick(id_pool, plan.train);
  TrainResult trained = train(train_graphs, train_cfg, sink);
  const ScoreStats stats = fit_score_stats(trained.model, train_graphs, train_cfg);

  std::vector<PreparedGraph> test_graphs = pick(id_pool, plan.id_test);
  const auto ood_graphs = pick(ood_pool, plan.ood_test);
  test_graphs.insert(test_graphs.end(), ood_graphs.begin(), ood_graphs.end());
  const auto scores = score(trained.model, stats, test_graphs, train_cfg,
                            ScoreOptions{cfg.score_tree_term, seed ^ 0x5bd1e995ULL});

  RunResult result;
  result.run = run;
  result.seed = seed;
  result.n_train = plan.train.size();
  result.n_id_test = plan.id_test.size();
  result.n_ood_test = plan.ood_test.size();
  result.final_train_loss = trained.epoch_mean_loss.back();
  result.parameter_checksum = parameter_checksum(trained.model);
  result.stats = stats;

  std::vector<double> s;
  std::vector<int> labels;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool is_ood = i >= plan.id_test.size();
    const int graph_id = is_ood ? plan.ood_test[i - plan.id_test.size()] : plan.id_test[i];
    result.rows.push_back(ScoreRow{graph_id, is_ood ? "ood_test" : "id_test", scores[i]});
    s.push_back(scores[i].s);
    labels.push_back(is_ood ? 1 : 0);
  }
  result.auc = auc(s, labels);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  spdlog::info("run {} (seed {}): AUC {:.4f}", run, seed, result.auc);
  return result;
}

// Runs are independent, so they execute on a small worker pool. Log records
// are buffered per run and replayed in run order, which keeps the log (and
// every other output) independent of thread scheduling.
std::vector<RunResult> execute_runs(const std::vector<RunPlan>& plans, const std::vector<PreparedGraph>& id_pool,
                                    const std::vector<PreparedGraph>& ood_pool, const ExperimentConfig& cfg,
                                    const RunLogSink& log) {
  const std::size_t n = plans.size();
  std::vector<RunResult> results(n);
  std::vector<std::vector<TrainLogRecord>> records(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        const int run = static_cast<int>(i);
        const std::uint64_t seed = cfg.train.seed + static_cast<std::uint64_t>(run);
        TrainLogSink sink;
        if (log) sink = [&records, i](const TrainLogRecord& r) { records[i].push_back(r); };
        results[i] = execute_run(run, seed, id_pool, ood_pool, plans[i], cfg, sink);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  if (log) {
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& r : records[i]) log(static_cast<int>(i), r);
    }
  }
  return results;
}

void summarize(ExperimentReport& report) {
  std::vector<double> aucs;
  for (const auto& r : report.runs) aucs.push_back(r.auc);
  report.auc_mean = std::accumulate(aucs.begin(), aucs.end(), 0.0) / static_cast<double>(aucs.size());
  report.auc_std = population_std(aucs);
}

std::vector<PreparedGraph> prepare(const Dataset& ds, const ExperimentConfig& cfg, const ViewCache* cache) {
  ds.validate();
  return prepare_graphs(ds, cfg.train.k, cfg.train.r, cache);
}

void check_features(const Dataset& ds) {
  if (ds.feature_dim < 1) {
    throw ConfigError("dataset '" + ds.name + "' has no node features; apply a feature scheme first");
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json config_json(const ExperimentConfig& cfg) {
  const TrainConfig& t = cfg.train;
  json j;
  j["epochs"] = t.epochs;
  j["batch_size"] = t.batch_size;
  j["learning_rate"] = t.learning_rate;
  j["tau"] = t.tau;
  j["theta"] = t.theta;
  j["k"] = t.k;
  j["r"] = t.r;
  j["hidden_dim"] = t.hidden_dim;
  j["contrast_dim"] = t.contrast_dim;
  j["num_layers"] = t.num_layers;
  j["seed"] = t.seed;
  j["feature_scheme"] = t.feature_scheme;
  j["degree_cap"] = t.degree_cap;
  j["use_tree"] = t.use_tree;
  j["use_local"] = t.use_local;
  j["use_global"] = t.use_global;
  j["runs"] = cfg.runs;
  j["train_fraction"] = cfg.train_fraction;
  j["score_tree_term"] = cfg.score_tree_term;
  j["anomaly_class"] = cfg.anomaly_class ? json(*cfg.anomaly_class) : json(nullptr);
  return j;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  train.validate();
  if (runs < 1) throw ConfigError("runs must be >= 1, got " + std::to_string(runs));
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1), got " + format_double(train_fraction));
  }
}

FeaturedData apply_feature_scheme(const Dataset& id, const Dataset* ood, const TrainConfig& cfg) {
  std::string scheme = cfg.feature_scheme;
  if (scheme == "auto") {
    scheme = has_node_labels(id) && (!ood || has_node_labels(*ood)) ? "label" : "degree";
  }
  FeaturedData out{{}, std::nullopt, scheme};
  if (scheme == "label") {
    const auto alphabet = LabelAlphabet::fit(id);
    out.id = synthesize_features(id, alphabet);
    if (ood) out.ood = synthesize_features(*ood, alphabet);
  } else if (scheme == "degree") {
    out.id = synthesize_features(id, OneHotDegree{cfg.degree_cap});
    if (ood) out.ood = synthesize_features(*ood, OneHotDegree{cfg.degree_cap});
  } else if (scheme == "attributes") {
    if (id.feature_dim < 1) throw ConfigError("dataset '" + id.name + "' has no node attributes");
    if (ood && ood->feature_dim != id.feature_dim) {
      throw ConfigError("attribute dimensions differ: " + id.name + " has " + std::to_string(id.feature_dim) +
                        ", " + ood->name + " has " + std::to_string(ood->feature_dim));
    }
    out.id = id;
    if (ood) out.ood = *ood;
  } else {
    throw ConfigError("unknown feature_scheme '" + scheme + "'");
  }
  return out;
}

ExperimentReport run_ood_experiment(const Dataset& id, const Dataset& ood, const ExperimentConfig& cfg,
                                    const RunLogSink& log, const ViewCache* cache) {
  cfg.validate();
  check_features(id);
  check_features(ood);
  if (id.feature_dim != ood.feature_dim) {
    throw ConfigError("ID and OOD feature dimensions differ (" + std::to_string(id.feature_dim) + " vs " +
                      std::to_string(ood.feature_dim) + ")");
  }
  const auto id_pool = prepare(id, cfg, cache);
  const auto ood_pool = prepare(ood, cfg, cache);

  ExperimentReport report{"ood", id.name, ood.name, cfg.train.feature_scheme, std::nullopt, cfg, {}, 0.0, 0.0};
  std::vector<RunPlan> plans(cfg.runs);
  for (int run = 0; run < cfg.runs; ++run) {
    std::mt19937_64 rng(cfg.train.seed + static_cast<std::uint64_t>(run));
    RunPlan& plan = plans[run];
    std::tie(plan.train, plan.id_test) = split(shuffled_indices(id.size(), rng), cfg.train_fraction);
    plan.ood_test = sample_ood(shuffled_indices(ood.size(), rng), plan.id_test.size(), "OOD dataset " + ood.name);
  }
  report.runs = execute_runs(plans, id_pool, ood_pool, cfg, log);
  summarize(report);
  return report;
}

ExperimentReport run_anomaly_experiment(const Dataset& dataset, const ExperimentConfig& cfg, const RunLogSink& log,
                                        const ViewCache* cache) {
  cfg.validate();
  check_features(dataset);
  std::map<int, int> counts;
  for (const auto& g : dataset.graphs) {
    if (!g.graph_label()) throw ConfigError("anomaly mode needs graph labels; '" + dataset.name + "' has none");
    ++counts[*g.graph_label()];
  }
  if (counts.size() < 2) throw ConfigError("anomaly mode needs at least two graph classes");
  int anomalous = 0;
  if (cfg.anomaly_class) {
    anomalous = *cfg.anomaly_class;
    if (!counts.contains(anomalous)) {
      throw ConfigError("anomaly_class " + std::to_string(anomalous) + " does not occur in the graph labels");
    }
  } else {
    // Smallest class; ties go to the smallest label.
    auto it = std::min_element(counts.begin(), counts.end(),
                               [](const auto& a, const auto& b) { return a.second < b.second; });
    anomalous = it->first;
  }

  const auto pool = prepare(dataset, cfg, cache);
  ExperimentReport report{"anomaly", dataset.name, dataset.name, cfg.train.feature_scheme, anomalous, cfg, {},
                          0.0, 0.0};
  std::vector<RunPlan> plans(cfg.runs);
  for (int run = 0; run < cfg.runs; ++run) {
    std::mt19937_64 rng(cfg.train.seed + static_cast<std::uint64_t>(run));
    std::vector<int> normal, anomaly;
    for (int i : shuffled_indices(dataset.size(), rng)) {
      (*dataset.graphs[i].graph_label() == anomalous ? anomaly : normal).push_back(i);
    }
    RunPlan& plan = plans[run];
    std::tie(plan.train, plan.id_test) = split(std::move(normal), cfg.train_fraction);
    plan.ood_test = sample_ood(std::move(anomaly), plan.id_test.size(), "anomalous class");
  }
  report.runs = execute_runs(plans, pool, pool, cfg, log);
  summarize(report);
  return report;
}

ExperimentReport run_self_consistency_experiment(const Dataset& id, const ExperimentConfig& cfg,
                                                 const RunLogSink& log, const ViewCache* cache) {
  cfg.validate();
  check_features(id);
  const auto pool = prepare(id, cfg, cache);
  ExperimentReport report{"self", id.name, id.name, cfg.train.feature_scheme, std::nullopt, cfg, {}, 0.0, 0.0};
  std::vector<RunPlan> plans(cfg.runs);
  for (int run = 0; run < cfg.runs; ++run) {
    std::mt19937_64 rng(cfg.train.seed + static_cast<std::uint64_t>(run));
    RunPlan& plan = plans[run];
    std::vector<int> held_out;
    std::tie(plan.train, held_out) = split(shuffled_indices(id.size(), rng), cfg.train_fraction);
    if (held_out.size() < 2) throw ConfigError("self-consistency needs at least 2 held-out graphs");
    const auto half = static_cast<std::ptrdiff_t>(held_out.size() / 2);
    plan.id_test.assign(held_out.begin(), held_out.begin() + half);
    plan.ood_test.assign(held_out.begin() + half, held_out.end());
  }
  report.runs = execute_runs(plans, pool, pool, cfg, log);
  summarize(report);
  return report;
}

void write_scores_csv(const std::filesystem::path& path, const ExperimentReport& report) {
  auto out = open_output(path);
  const bool tree = report.config.score_tree_term && report.config.train.use_tree;
  out << "run,graph_id,source,s_l,s_g," << (tree ? "s_t," : "") << "s_G\n";
  for (const auto& run : report.runs) {
    for (const auto& row : run.rows) {
      out << run.run << ',' << row.graph_id << ',' << row.source << ',' << format_double(row.score.s_l) << ','
          << format_double(row.score.s_g) << ',';
      if (tree) out << format_double(row.score.s_t) << ',';
      out << format_double(row.score.s) << '\n';
    }
  }
}

void write_report_json(const std::filesystem::path& path, const ExperimentReport& report) {
  json j;
  j["mode"] = report.mode;
  j["id_dataset"] = report.id_name;
  j["ood_dataset"] = report.ood_name;
  j["feature_scheme"] = report.feature_scheme;
  if (report.anomaly_class) j["anomaly_class"] = *report.anomaly_class;
  j["config"] = config_json(report.config);
  json runs = json::array();
  for (const auto& r : report.runs) {
    json jr;
    jr["run"] = r.run;
    jr["seed"] = r.seed;
    jr["auc"] = r.auc;
    jr["n_train"] = r.n_train;
    jr["n_id_test"] = r.n_id_test;
    jr["n_ood_test"] = r.n_ood_test;
    jr["ood_fraction"] = static_cast<double>(r.n_ood_test) / static_cast<double>(r.n_id_test + r.n_ood_test);
    jr["final_train_loss"] = r.final_train_loss;
    char checksum[17];
    std::snprintf(checksum, sizeof checksum, "%016" PRIx64, r.parameter_checksum);
    jr["parameter_checksum"] = checksum;
    jr["score_stats"] = {{"mu_l", r.stats.mu_l}, {"sigma_l", r.stats.sigma_l}, {"mu_g", r.stats.mu_g},
                         {"sigma_g", r.stats.sigma_g}, {"mu_t", r.stats.mu_t}, {"sigma_t", r.stats.sigma_t}};
    runs.push_back(std::move(jr));
  }
  j["runs"] = std::move(runs);
  json aucs = json::array();
  for (const auto& r : report.runs) aucs.push_back(r.auc);
  j["auc"] = std::move(aucs);
  j["auc_mean"] = report.auc_mean;
  j["auc_std"] = report.auc_std;
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

void write_timing_json(const std::filesystem::path& path, const ExperimentReport& report) {
  json j;
  json runs = json::array();
  double total = 0.0;
  for (const auto& r : report.runs) {
    runs.push_back({{"run", r.run}, {"seconds", r.seconds}});
    total += r.seconds;
  }
  j["runs"] = std::move(runs);
  j["total_seconds"] = total;
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

std::string train_log_line(int run, const TrainLogRecord& r) {
  json j;
  j["run"] = run;
  j["epoch"] = r.epoch;
  j["step"] = r.step;
  j["l_tree"] = r.l_tree;
  j["l_local"] = r.l_local;
  j["l_global"] = r.l_global;
  j["sigma_l"] = r.sigma_l;
  j["sigma_g"] = r.sigma_g;
  j["total"] = r.total;
  return j.dump();
}

}  // namespace sego
