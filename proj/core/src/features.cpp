#include "sego/features.hpp"

#include <algorithm>
#include <set>

#include "sego/errors.hpp"

namespace sego {
namespace {

void require_labels(const Dataset& dataset) {
  for (const auto& g : dataset.graphs) {
    if (!g.node_labels()) {
      throw ConfigError("one_hot_label features requested but dataset '" + dataset.name + "' has no node labels");
    }
  }
}

Dataset one_hot_degree(const Dataset& dataset, int cap) {
  if (cap < 1) throw ConfigError("degree cap must be >= 1");
  Dataset out{dataset.name, {}, cap + 1};
  out.graphs.reserve(dataset.size());
  for (const auto& g : dataset.graphs) {
    Matrix x = Matrix::Zero(g.node_count(), cap + 1);
    for (int v = 0; v < g.node_count(); ++v) x(v, std::min(degree(g, v), cap)) = 1.0;
    out.graphs.push_back(g.with_features(std::move(x)));
  }
  return out;
}

}  // namespace

LabelAlphabet LabelAlphabet::fit(const Dataset& dataset) {
  require_labels(dataset);
  std::set<int> seen;
  for (const auto& g : dataset.graphs) seen.insert(g.node_labels()->begin(), g.node_labels()->end());
  LabelAlphabet alphabet;
  alphabet.labels_.assign(seen.begin(), seen.end());
  return alphabet;
}

std::optional<int> LabelAlphabet::column(int label) const {
  auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
  if (it == labels_.end() || *it != label) return std::nullopt;
  return static_cast<int>(it - labels_.begin());
}

Dataset synthesize_features(const Dataset& dataset, const LabelAlphabet& alphabet) {
  require_labels(dataset);
  Dataset out{dataset.name, {}, alphabet.size()};
  out.graphs.reserve(dataset.size());
  for (const auto& g : dataset.graphs) {
    Matrix x = Matrix::Zero(g.node_count(), alphabet.size());
    const auto& labels = *g.node_labels();
    for (int v = 0; v < g.node_count(); ++v) {
      if (auto c = alphabet.column(labels[v])) x(v, *c) = 1.0;
    }
    out.graphs.push_back(g.with_features(std::move(x)));
  }
  return out;
}

Dataset synthesize_features(const Dataset& dataset, const FeatureScheme& scheme) {
  if (std::holds_alternative<OneHotDegree>(scheme)) {
    return one_hot_degree(dataset, std::get<OneHotDegree>(scheme).cap);
  }
  return synthesize_features(dataset, LabelAlphabet::fit(dataset));
}

}  // namespace sego
