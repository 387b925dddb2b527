#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>

#include "sego/graph.hpp"
#include "sego/matrix.hpp"

namespace sego::test {

enum class Family {
  communities,  // two dense blocks joined by a few edges
  trees,        // random trees with an occasional extra edge
  rings,        // cycles with a few chords
};

// `count` graphs of one family with node labels (alphabet {0..3}, family
// dependent) and graph label 0. Node features are left empty (n x 0).
Dataset synthetic_dataset(const std::string& name, Family family, int count, std::uint64_t seed, int min_nodes = 8,
                          int max_nodes = 16);

// Concatenates datasets, relabeling graphs of part i with graph label i.
Dataset labeled_union(const std::string& name, std::span<const Dataset> parts);

// Fresh, empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& tag);

Matrix random_matrix(int rows, int cols, double lo, double hi, std::mt19937_64& rng);

// Central difference of f around its current state; `x` is perturbed in place
// and restored.
double central_difference(const std::function<double()>& f, double& x, double eps = 1e-5);

// |a - n| / max(|a|, |n|, 1e-3): relative above 1e-3, absolute below.
double gradient_error(double analytic, double numeric);

// Counts (positive, negative) pairs directly; ties count one half.
double pair_counting_auc(std::span<const double> scores, std::span<const int> labels);

}  // namespace sego::test
