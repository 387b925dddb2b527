#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "sego/graph.hpp"

namespace sego {

struct OneHotLabel {};

// Degrees >= cap share the last bucket, so feature_dim = cap + 1.
struct OneHotDegree {
  int cap = 10;
};

using FeatureScheme = std::variant<OneHotLabel, OneHotDegree>;

// Sorted distinct node labels; column i of a one-hot row is the i-th label.
class LabelAlphabet {
 public:
  static LabelAlphabet fit(const Dataset& dataset);

  int size() const { return static_cast<int>(labels_.size()); }
  std::optional<int> column(int label) const;
  const std::vector<int>& labels() const { return labels_; }

 private:
  std::vector<int> labels_;
};

// Replaces node features according to `scheme`. For OneHotLabel the alphabet
// is fitted on `dataset` itself. Throws ConfigError if labels are missing.
Dataset synthesize_features(const Dataset& dataset, const FeatureScheme& scheme);

// One-hot encodes node labels with a previously fitted alphabet. Labels
// outside the alphabet become all-zero rows.
Dataset synthesize_features(const Dataset& dataset, const LabelAlphabet& alphabet);

}  // namespace sego
