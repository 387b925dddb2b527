#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sego/experiment.hpp"

namespace sego::cli {

struct CliConfig {
  ExperimentConfig experiment;
  std::string mode = "ood";  // ood | anomaly | self
  std::filesystem::path id_data;
  std::filesystem::path ood_data;
  std::filesystem::path out = "sego_out";
  std::optional<std::filesystem::path> cache_dir;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Flat "key = value" lines; '#' starts a comment. Throws ConfigError with the
// source name and line for malformed lines and duplicate keys.
KeyValues parse_config_text(std::istream& in, const std::string& source);
KeyValues read_config_file(const std::filesystem::path& path);

// Throws ConfigError naming the key for unknown keys or bad values.
void set_config_value(CliConfig& cfg, const std::string& key, const std::string& value);
void apply_values(CliConfig& cfg, const KeyValues& values);

// Checks mode and dataset paths on top of ExperimentConfig::validate().
void validate(const CliConfig& cfg);

const std::vector<std::string>& config_keys();

// Dataset name for a TU directory: its last path component.
std::string dataset_name(const std::filesystem::path& dir);

}  // namespace sego::cli
