#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <optional>

#if defined(__GLIBC__)
#include <malloc.h>
#endif


#include "CLI11.hpp"
#include "config.hpp"
#include "sego/coding_tree.hpp"
#include "sego/errors.hpp"
#include "sego/experiment.hpp"
#include "sego/tu_format.hpp"
#include "sego/views.hpp"

namespace sego::cli {
namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("dataset directory does not exist: " + dir.string());
  return parse_tu_dataset(dir, dataset_name(dir));
}

int cmd_run(const CliConfig& cfg_in, std::ostream& out) {
  CliConfig cfg = cfg_in;
  validate(cfg);
  const Dataset id = load_dataset(cfg.id_data);
  std::optional<Dataset> ood;
  if (cfg.mode == "ood") ood = load_dataset(cfg.ood_data);

  const FeaturedData featured = apply_feature_scheme(id, ood ? &*ood : nullptr, cfg.experiment.train);
  cfg.experiment.train.feature_scheme = featured.scheme;

  std::filesystem::create_directories(cfg.out);
  std::ofstream log_file(cfg.out / "train_log.jsonl", std::ios::binary | std::ios::trunc);
  if (!log_file) throw std::runtime_error("cannot write " + (cfg.out / "train_log.jsonl").string());
  const RunLogSink sink = [&log_file](int run, const TrainLogRecord& r) { log_file << train_log_line(run, r) << '\n'; };

  std::optional<ViewCache> cache;
  if (cfg.cache_dir) cache.emplace(*cfg.cache_dir);
  const ViewCache* cache_ptr = cache ? &*cache : nullptr;

  ExperimentReport report;
  if (cfg.mode == "ood") {
    report = run_ood_experiment(featured.id, *featured.ood, cfg.experiment, sink, cache_ptr);
  } else if (cfg.mode == "anomaly") {
    report = run_anomaly_experiment(featured.id, cfg.experiment, sink, cache_ptr);
  } else {
    report = run_self_consistency_experiment(featured.id, cfg.experiment, sink, cache_ptr);
  }
  write_scores_csv(cfg.out / "scores.csv", report);
  write_report_json(cfg.out / "report.json", report);
  write_timing_json(cfg.out / "timing.json", report);

  char line[128];
  std::snprintf(line, sizeof line, "AUC %.4f \xC2\xB1 %.4f over %zu runs", report.auc_mean, report.auc_std,
                report.runs.size());
  out << line << '\n';
  return kOk;
}

int cmd_tree(const std::filesystem::path& dataset_dir, std::optional<long> index, int k, std::ostream& out) {
  if (k < 1) throw ConfigError("k must be >= 1, got " + std::to_string(k));
  const Dataset ds = load_dataset(dataset_dir);
  if (index) {
    if (*index < 0 || static_cast<std::size_t>(*index) >= ds.size()) {
      throw ConfigError("graph index " + std::to_string(*index) + " out of range [0, " + std::to_string(ds.size()) +
                        ")");
    }
    const Graph& g = ds.graphs[*index];
    const CodingTree built = build_coding_tree(g, k);
    out << built.dump();
    out << "flat=" << fixed6(structural_entropy(g, CodingTree::flat(g))) << '\n';
    out << "built=" << fixed6(structural_entropy(g, built)) << '\n';
    return kOk;
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Graph& g = ds.graphs[i];
    out << "graph " << i << " nodes=" << g.node_count() << " flat=" << fixed6(structural_entropy(g, CodingTree::flat(g)))
        << " built=" << fixed6(structural_entropy(g, build_coding_tree(g, k))) << '\n';
  }
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unsupervised graph OOD detection with coding-tree contrastive views", "sego"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Train and evaluate an OOD or anomaly experiment");
  std::string config_path;
  run->add_option("--config", config_path, "Flat key=value config file");
  struct Override {
    std::string key;
    std::string value;
    CLI::Option* option = nullptr;
  };
  std::vector<Override> overrides;
  overrides.reserve(32);
  auto value_flag = [&](const std::string& flag, const std::string& key, const std::string& help) {
    overrides.push_back({key, {}, nullptr});
    overrides.back().option = run->add_option(flag, overrides.back().value, help);
  };
  auto bool_flag = [&](const std::string& flag, const std::string& key, const std::string& help) {
    overrides.push_back({key, "true", nullptr});
    overrides.back().option = run->add_flag(flag, help);
  };
  value_flag("--mode", "mode", "ood | anomaly | self");
  value_flag("--id-data", "id_data", "TU directory of the in-distribution dataset");
  value_flag("--ood-data", "ood_data", "TU directory of the OOD dataset");
  value_flag("--k", "k", "Coding-tree height");
  value_flag("--theta", "theta", "Self-adaptive weighting exponent");
  value_flag("--tau", "tau", "Contrastive temperature");
  value_flag("--seed", "seed", "Base seed; run i uses seed + i");
  value_flag("--runs", "runs", "Number of runs");
  value_flag("--out", "out", "Output directory");
  value_flag("--epochs", "epochs", "Training epochs");
  value_flag("--cache-dir", "cache_dir", "Directory for cached views");
  bool_flag("--disable-tree", "disable_tree", "Drop the tree loss term");
  bool_flag("--disable-local", "disable_local", "Drop the local loss term");
  bool_flag("--disable-global", "disable_global", "Drop the global loss term");
  bool_flag("--score-tree-term", "score_tree_term", "Add the z-scored tree error to the OOD score");

  // tree
  auto* tree = app.add_subcommand("tree", "Print the coding tree of a graph and its entropy");
  std::string tree_dataset;
  long tree_index = -1;
  int tree_k = 5;
  tree->add_option("--dataset", tree_dataset, "TU dataset directory")->required();
  auto* index_opt = tree->add_option("--index", tree_index, "Graph index; omit to summarize every graph");
  tree->add_option("--k", tree_k, "Coding-tree height");

  // selftest
  auto* selftest = app.add_subcommand("selftest", "Run gradient, entropy, InfoNCE and AUC checks");
  std::string fault = "none";
  selftest->add_option("--inject-fault", fault)->group("")->check(CLI::IsMember({"none", "relu_backward"}));

  std::vector<std::string> argv_storage{"sego"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (run->parsed()) {
      CliConfig cfg;
      if (!config_path.empty()) apply_values(cfg, read_config_file(config_path));
      for (const auto& o : overrides) {
        if (o.option->count() > 0) set_config_value(cfg, o.key, o.value);
      }
      return cmd_run(cfg, out);
    }
    if (tree->parsed()) {
      return cmd_tree(tree_dataset, index_opt->count() > 0 ? std::optional<long>(tree_index) : std::nullopt, tree_k,
                      out);
    }
    return run_selftest(out, fault);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ParseError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const IntegrityError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace sego::cli
