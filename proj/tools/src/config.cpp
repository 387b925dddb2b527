#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>

#include "sego/errors.hpp"

namespace sego::cli {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw ConfigError("invalid value '" + value + "' for key '" + key + "': expected " + expected);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, const char* expected) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) bad_value(key, value, expected);
  return out;
}

int parse_int(const std::string& key, const std::string& value) { return parse_number<int>(key, value, "an integer"); }

double parse_double(const std::string& key, const std::string& value) {
  return parse_number<double>(key, value, "a real number");
}

bool parse_bool(const std::string& key, const std::string& value) {
  std::string v = value;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, value, "true or false");
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "mode",          "id_data",        "ood_data",       "out",           "runs",
      "seed",          "k",              "r",              "theta",         "tau",
      "epochs",        "batch_size",     "learning_rate",  "hidden_dim",    "contrast_dim",
      "num_layers",    "feature_scheme", "degree_cap",     "train_fraction", "disable_tree",
      "disable_local", "disable_global", "score_tree_term", "anomaly_class", "cache_dir"};
  return keys;
}

KeyValues parse_config_text(std::istream& in, const std::string& source) {
  KeyValues out;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key=value, got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!seen.insert(key).second) throw ConfigError(where + ": duplicate key '" + key + "'");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

KeyValues read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config_text(in, path.string());
}

void set_config_value(CliConfig& cfg, const std::string& key, const std::string& value) {
  TrainConfig& t = cfg.experiment.train;
  if (key == "mode") {
    if (value != "ood" && value != "anomaly" && value != "self") bad_value(key, value, "ood, anomaly or self");
    cfg.mode = value;
  } else if (key == "id_data") {
    cfg.id_data = value;
  } else if (key == "ood_data") {
    cfg.ood_data = value;
  } else if (key == "out") {
    if (value.empty()) bad_value(key, value, "a directory");
    cfg.out = value;
  } else if (key == "cache_dir") {
    if (value.empty()) {
      cfg.cache_dir.reset();
    } else {
      cfg.cache_dir = value;
    }
  } else if (key == "runs") {
    cfg.experiment.runs = parse_int(key, value);
  } else if (key == "seed") {
    t.seed = parse_number<std::uint64_t>(key, value, "a non-negative integer");
  } else if (key == "k") {
    t.k = parse_int(key, value);
  } else if (key == "r") {
    t.r = parse_int(key, value);
  } else if (key == "theta") {
    t.theta = parse_double(key, value);
  } else if (key == "tau") {
    t.tau = parse_double(key, value);
  } else if (key == "epochs") {
    t.epochs = parse_int(key, value);
  } else if (key == "batch_size") {
    t.batch_size = parse_int(key, value);
  } else if (key == "learning_rate") {
    t.learning_rate = parse_double(key, value);
  } else if (key == "hidden_dim") {
    t.hidden_dim = parse_int(key, value);
  } else if (key == "contrast_dim") {
    t.contrast_dim = parse_int(key, value);
  } else if (key == "num_layers") {
    t.num_layers = parse_int(key, value);
  } else if (key == "feature_scheme") {
    t.feature_scheme = value;
  } else if (key == "degree_cap") {
    t.degree_cap = parse_int(key, value);
  } else if (key == "train_fraction") {
    cfg.experiment.train_fraction = parse_double(key, value);
  } else if (key == "disable_tree") {
    t.use_tree = !parse_bool(key, value);
  } else if (key == "disable_local") {
    t.use_local = !parse_bool(key, value);
  } else if (key == "disable_global") {
    t.use_global = !parse_bool(key, value);
  } else if (key == "score_tree_term") {
    cfg.experiment.score_tree_term = parse_bool(key, value);
  } else if (key == "anomaly_class") {
    if (value.empty()) {
      cfg.experiment.anomaly_class.reset();
    } else {
      cfg.experiment.anomaly_class = parse_int(key, value);
    }
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void apply_values(CliConfig& cfg, const KeyValues& values) {
  for (const auto& [key, value] : values) set_config_value(cfg, key, value);
}

void validate(const CliConfig& cfg) {
  cfg.experiment.validate();
  if (cfg.id_data.empty()) throw ConfigError("id_data is required");
  if (!std::filesystem::is_directory(cfg.id_data)) {
    throw ConfigError("id_data directory does not exist: " + cfg.id_data.string());
  }
  if (cfg.mode == "ood") {
    if (cfg.ood_data.empty()) throw ConfigError("ood_data is required in ood mode");
    if (!std::filesystem::is_directory(cfg.ood_data)) {
      throw ConfigError("ood_data directory does not exist: " + cfg.ood_data.string());
    }
  }
}

std::string dataset_name(const std::filesystem::path& dir) {
  auto normal = dir.lexically_normal();
  auto name = normal.filename().string();
  if (name.empty()) name = normal.parent_path().filename().string();
  return name;
}

}  // namespace sego::cli
