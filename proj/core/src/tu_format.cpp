#include "sego/tu_format.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <string_view>

#include <spdlog/spdlog.h>

#include "sego/errors.hpp"

namespace sego {
namespace {

namespace fs = std::filesystem;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

struct LineReader {
  fs::path path;
  std::ifstream in;
  std::size_t line_no = 0;

  explicit LineReader(fs::path p) : path(std::move(p)), in(path) {
    if (!in) throw ParseError("cannot open required file " + path.string());
  }

  // Returns false at EOF. Skips blank lines but keeps line numbering.
  bool next(std::string& line) {
    while (std::getline(in, line)) {
      ++line_no;
      if (!trim(line).empty()) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(path.filename().string() + ":" + std::to_string(line_no) + ": " + what);
  }
};

template <typename T>
T parse_number(std::string_view token, const LineReader& reader) {
  token = trim(token);
  T value{};
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end) reader.fail("malformed number '" + std::string(token) + "'");
  return value;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<int> read_int_column(const fs::path& path) {
  LineReader reader(path);
  std::vector<int> values;
  std::string line;
  while (reader.next(line)) {
    // Some TU label files carry several comma-separated columns; the first is the label.
    auto tokens = split_commas(line);
    values.push_back(parse_number<long>(tokens.front(), reader));
  }
  return values;
}

}  // namespace

Dataset parse_tu_dataset(const fs::path& directory, const std::string& name) {
  const auto file = [&](const char* suffix) { return directory / (name + suffix); };

  for (const char* required : {"_A.txt", "_graph_indicator.txt"}) {
    if (!fs::exists(file(required))) throw ParseError("missing required file " + file(required).string());
  }

  // Node -> graph id (both 1-based in the files).
  std::vector<long> graph_of_node;
  {
    LineReader reader(file("_graph_indicator.txt"));
    std::string line;
    while (reader.next(line)) graph_of_node.push_back(parse_number<long>(line, reader));
  }
  const auto total_nodes = static_cast<long>(graph_of_node.size());

  std::map<long, int> graph_index;  // graph id -> position in output
  for (long gid : graph_of_node) graph_index.emplace(gid, 0);
  {
    int i = 0;
    for (auto& [gid, idx] : graph_index) idx = i++;
  }
  const int graph_count = static_cast<int>(graph_index.size());

  std::vector<int> local_id(total_nodes);
  std::vector<int> nodes_in_graph(graph_count, 0);
  std::vector<int> owner(total_nodes);
  for (long v = 0; v < total_nodes; ++v) {
    owner[v] = graph_index[graph_of_node[v]];
    local_id[v] = nodes_in_graph[owner[v]]++;
  }

  std::vector<std::vector<Edge>> edges(graph_count);
  std::size_t self_loops = 0;
  {
    LineReader reader(file("_A.txt"));
    std::string line;
    while (reader.next(line)) {
      auto tokens = split_commas(line);
      if (tokens.size() != 2) reader.fail("expected 'i, j'");
      long a = parse_number<long>(tokens[0], reader);
      long b = parse_number<long>(tokens[1], reader);
      for (long id : {a, b}) {
        if (id < 1 || id > total_nodes) {
          throw IntegrityError(file("_A.txt").filename().string() + ":" + std::to_string(reader.line_no) +
                               ": edge references unknown node id " + std::to_string(id));
        }
      }
      --a;
      --b;
      if (owner[a] != owner[b]) {
        throw IntegrityError(file("_A.txt").filename().string() + ":" + std::to_string(reader.line_no) +
                             ": edge connects nodes of different graphs");
      }
      if (a == b) {
        ++self_loops;
        continue;
      }
      edges[owner[a]].push_back({local_id[a], local_id[b]});
    }
  }
  if (self_loops > 0) spdlog::warn("{}: dropped {} self-loop(s)", name, self_loops);

  std::optional<std::vector<int>> node_labels;
  if (fs::exists(file("_node_labels.txt"))) {
    node_labels = read_int_column(file("_node_labels.txt"));
    if (static_cast<long>(node_labels->size()) != total_nodes) {
      throw IntegrityError(name + "_node_labels.txt has " + std::to_string(node_labels->size()) +
                           " lines, expected " + std::to_string(total_nodes));
    }
  }

  std::vector<std::vector<double>> attributes;
  std::size_t attr_dim = 0;
  if (fs::exists(file("_node_attributes.txt"))) {
    LineReader reader(file("_node_attributes.txt"));
    std::string line;
    while (reader.next(line)) {
      auto tokens = split_commas(line);
      std::vector<double> row;
      row.reserve(tokens.size());
      for (auto t : tokens) row.push_back(parse_number<double>(t, reader));
      if (attributes.empty()) attr_dim = row.size();
      if (row.size() != attr_dim) reader.fail("inconsistent attribute count");
      attributes.push_back(std::move(row));
    }
    if (static_cast<long>(attributes.size()) != total_nodes) {
      throw IntegrityError(name + "_node_attributes.txt has " + std::to_string(attributes.size()) +
                           " lines, expected " + std::to_string(total_nodes));
    }
  }

  std::optional<std::vector<int>> graph_labels;
  if (fs::exists(file("_graph_labels.txt"))) {
    graph_labels = read_int_column(file("_graph_labels.txt"));
    const long max_id = graph_index.empty() ? 0 : graph_index.rbegin()->first;
    if (static_cast<long>(graph_labels->size()) < max_id) {
      throw IntegrityError(name + "_graph_labels.txt has fewer lines than graph ids");
    }
  }

  // Global node ids of each graph, in file order.
  std::vector<std::vector<long>> members(graph_count);
  for (long v = 0; v < total_nodes; ++v) members[owner[v]].push_back(v);

  Dataset dataset;
  dataset.name = name;
  dataset.feature_dim = static_cast<int>(attr_dim);
  dataset.graphs.reserve(graph_count);
  for (const auto& [gid, idx] : graph_index) {
    const auto& nodes = members[idx];
    const int n = static_cast<int>(nodes.size());
    Matrix features(n, static_cast<Eigen::Index>(attr_dim));
    for (int i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < attr_dim; ++c) features(i, c) = attributes[nodes[i]][c];
    }
    std::optional<std::vector<int>> labels;
    if (node_labels) {
      labels.emplace();
      for (long v : nodes) labels->push_back((*node_labels)[v]);
    }
    std::optional<int> graph_label;
    if (graph_labels) graph_label = (*graph_labels)[gid - 1];
    dataset.graphs.emplace_back(n, std::move(edges[idx]), std::move(features), std::move(labels), graph_label);
  }
  return dataset;
}

void write_tu_dataset(const Dataset& dataset, const fs::path& directory) {
  fs::create_directories(directory);
  const auto file = [&](const char* suffix) { return directory / (dataset.name + suffix); };

  const bool all_node_labels = std::all_of(dataset.graphs.begin(), dataset.graphs.end(),
                                           [](const Graph& g) { return g.node_labels().has_value(); });
  const bool all_graph_labels = std::all_of(dataset.graphs.begin(), dataset.graphs.end(),
                                            [](const Graph& g) { return g.graph_label().has_value(); });
  const bool attributes = dataset.feature_dim > 0;

  std::ofstream a_out(file("_A.txt"));
  std::ofstream ind_out(file("_graph_indicator.txt"));
  std::ofstream lab_out, attr_out, glab_out;
  if (all_node_labels) lab_out.open(file("_node_labels.txt"));
  if (attributes) {
    attr_out.open(file("_node_attributes.txt"));
    attr_out.precision(17);
  }
  if (all_graph_labels) glab_out.open(file("_graph_labels.txt"));

  long offset = 0;
  for (std::size_t gi = 0; gi < dataset.graphs.size(); ++gi) {
    const Graph& g = dataset.graphs[gi];
    for (const auto& e : g.edges()) {
      a_out << offset + e.u + 1 << ", " << offset + e.v + 1 << '\n';
      a_out << offset + e.v + 1 << ", " << offset + e.u + 1 << '\n';
    }
    for (int v = 0; v < g.node_count(); ++v) {
      ind_out << gi + 1 << '\n';
      if (all_node_labels) lab_out << (*g.node_labels())[v] << '\n';
      if (attributes) {
        for (int c = 0; c < g.feature_dim(); ++c) {
          if (c) attr_out << ", ";
          attr_out << g.node_features()(v, c);
        }
        attr_out << '\n';
      }
    }
    if (all_graph_labels) glab_out << *g.graph_label() << '\n';
    offset += g.node_count();
  }
  if (!a_out || !ind_out) throw ParseError("failed writing dataset to " + directory.string());
}

}  // namespace sego
