#pragma once

#include <filesystem>
#include <string>

#include "sego/graph.hpp"

namespace sego {

// Reads a TU-format dataset (`<name>_A.txt`, `<name>_graph_indicator.txt` and
// the optional label/attribute files) from `directory`.
//
// Node features are the node attributes when `_node_attributes.txt` exists,
// otherwise an n x 0 matrix; use synthesize_features to build one-hot inputs.
// Throws ParseError for missing or malformed files and IntegrityError for
// edges that reference unknown nodes or cross graph boundaries.
Dataset parse_tu_dataset(const std::filesystem::path& directory, const std::string& name);

// Writes `dataset` in TU format under `directory` (created if needed).
// Optional files are written only when every graph carries the data.
void write_tu_dataset(const Dataset& dataset, const std::filesystem::path& directory);

}  // namespace sego
