#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "selftest.hpp"

#include "commands.hpp"
#include "sego/auc.hpp"
#include "sego/autodiff.hpp"
#include "sego/batch.hpp"
#include "sego/coding_tree.hpp"
#include "sego/detector.hpp"
#include "sego/features.hpp"
#include "sego/generators.hpp"
#include "sego/objective.hpp"
#include "sego/optim.hpp"

namespace sego::cli {
namespace {

constexpr double kFdStep = 1e-5;
constexpr double kGradTolerance = 1e-4;
// Gradients below this magnitude are compared absolutely.
constexpr double kGradFloor = 1e-3;

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kGradFloor});
}

using Op = std::function<ad::Tensor(std::span<const ad::Tensor>)>;

Matrix random_matrix(int rows, int cols, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

// Reduces op(inputs) to a scalar through a fixed random bilinear form and
// compares its gradient with central differences.
double primitive_gradient_error(const std::vector<Matrix>& inputs, const Op& op, std::mt19937_64& rng) {
  Matrix left, right;
  auto evaluate = [&](const std::vector<Matrix>& values, std::vector<Matrix>* grads) {
    ad::Tape tape;
    std::vector<ad::Tensor> vars;
    for (const auto& v : values) vars.push_back(grads ? tape.variable(v) : tape.constant(v));
    auto y = op(vars);
    if (left.size() == 0) {
      left = random_matrix(1, static_cast<int>(y.rows()), -1.0, 1.0, rng);
      right = random_matrix(static_cast<int>(y.cols()), 1, -1.0, 1.0, rng);
    }
    auto loss = ad::matmul(ad::matmul(tape.constant(left), y), tape.constant(right));
    if (grads) {
      tape.backward(loss);
      for (const auto& v : vars) grads->push_back(v.grad());
    }
    return loss.item();
  };

  std::vector<Matrix> analytic;
  evaluate(inputs, &analytic);
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (Eigen::Index e = 0; e < inputs[k].size(); ++e) {
      auto plus = inputs, minus = inputs;
      plus[k].data()[e] += kFdStep;
      minus[k].data()[e] -= kFdStep;
      const double numeric = (evaluate(plus, nullptr) - evaluate(minus, nullptr)) / (2 * kFdStep);
      worst = std::max(worst, relative_error(analytic[k].data()[e], numeric));
    }
  }
  return worst;
}

// Entries of [-2, 2] kept away from the relu kink.
Matrix away_from_zero(int rows, int cols, std::mt19937_64& rng) {
  Matrix m = random_matrix(rows, cols, -2.0, 2.0, rng);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (std::abs(m.data()[i]) < 0.05) m.data()[i] = 0.5;
  }
  return m;
}

std::vector<Check> primitive_checks(std::mt19937_64& rng) {
  const std::vector<int> groups{0, 2, 1, 2};
  const std::vector<int> index{3, 0, 0, 2, 1};
  struct Case {
    std::string name;
    std::vector<Matrix> inputs;
    Op op;
  };
  std::vector<Case> cases;
  auto u = [&](int r, int c) { return random_matrix(r, c, -2.0, 2.0, rng); };
  cases.push_back({"matmul", {u(2, 3), u(3, 2)}, [](auto x) { return ad::matmul(x[0], x[1]); }});
  cases.push_back({"add", {u(3, 4), u(3, 4)}, [](auto x) { return ad::add(x[0], x[1]); }});
  cases.push_back({"add_bias_rowwise", {u(4, 3), u(1, 3)}, [](auto x) { return ad::add_bias_rowwise(x[0], x[1]); }});
  cases.push_back({"relu", {away_from_zero(4, 5, rng)}, [](auto x) { return ad::relu(x[0]); }});
  cases.push_back({"scale", {u(3, 3)}, [](auto x) { return ad::scale(x[0], -1.7); }});
  cases.push_back({"exp", {u(3, 2)}, [](auto x) { return ad::exp(x[0]); }});
  cases.push_back({"log", {random_matrix(3, 2, 0.5, 2.0, rng)}, [](auto x) { return ad::log(x[0]); }});
  cases.push_back({"mean", {u(2, 5)}, [](auto x) { return ad::mean(x[0]); }});
  cases.push_back({"concat_cols", {u(3, 2), u(3, 3)}, [](auto x) { return ad::concat_cols(x[0], x[1]); }});
  cases.push_back({"gather_rows", {u(4, 3)}, [&index](auto x) { return ad::gather_rows(x[0], index); }});
  cases.push_back(
      {"sum_rows_grouped", {u(4, 3)}, [&groups](auto x) { return ad::sum_rows_grouped(x[0], groups, 3); }});
  cases.push_back({"l2_normalize_rows", {u(4, 3)}, [](auto x) { return ad::l2_normalize_rows(x[0]); }});
  cases.push_back({"cosine_similarity_matrix", {u(3, 4), u(5, 4)},
                   [](auto x) { return ad::cosine_similarity_matrix(x[0], x[1]); }});
  cases.push_back({"info_nce_rows", {u(5, 4), u(5, 4)}, [](auto x) { return ad::info_nce_rows(x[0], x[1], 0.5); }});
  cases.push_back({"info_nce_symmetric_rows", {u(5, 4), u(5, 4)},
                   [](auto x) { return ad::info_nce_symmetric_rows(x[0], x[1], 0.5); }});

  std::vector<Check> out;
  for (const auto& c : cases) {
    const double err = primitive_gradient_error(c.inputs, c.op, rng);
    char detail[64];
    std::snprintf(detail, sizeof detail, "max rel err %.2e", err);
    out.push_back({"gradient." + c.name, err < kGradTolerance, detail});
  }
  return out;
}

// Full objective on a three-graph batch, with the adaptive weights frozen at
// their values for the unperturbed parameters.
Check composite_gradient_check() {
  Dataset ds{"toy", {complete_graph(3), path_graph(4), cycle_graph(5)}, 1};
  ds = synthesize_features(ds, OneHotDegree{3});
  TrainConfig cfg;
  cfg.k = 3;
  cfg.r = 3;
  cfg.hidden_dim = 4;
  cfg.contrast_dim = 4;
  cfg.num_layers = 2;
  const auto prepared = prepare_graphs(ds, cfg.k, cfg.r);
  std::vector<const PreparedGraph*> members;
  for (const auto& p : prepared) members.push_back(&p);
  const GraphBatch batch = make_batch(members, cfg.k);

  ModelDims dims{ds.feature_dim, cfg.r + 1, cfg.hidden_dim, cfg.contrast_dim, cfg.num_layers, cfg.k};
  Model model(dims, 11);
  auto params = model.parameters();
  const LossOptions terms = cfg.loss_options();

  double w_l = 0.0, w_g = 0.0;
  auto loss_value = [&](bool with_grad) {
    ad::Tape tape;
    const auto emb = embed_batch(model, tape, batch, cfg.tau, terms);
    const auto report = total_loss(emb, terms);
    if (with_grad) {
      w_l = adaptive_weight(report.sigma_l, cfg.theta);
      w_g = adaptive_weight(report.sigma_g, cfg.theta);
      ad::zero_grad(params);
      tape.backward(report.total_tensor);
    }
    return report.l_tree + w_l * report.l_local + w_g * report.l_global;
  };
  loss_value(true);

  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (ad::Parameter* p : params) {
    std::uniform_int_distribution<Eigen::Index> pick(0, p->value.size() - 1);
    for (int s = 0; s < 4; ++s) {
      const Eigen::Index e = pick(rng);
      const double original = p->value.data()[e];
      p->value.data()[e] = original + kFdStep;
      const double up = loss_value(false);
      p->value.data()[e] = original - kFdStep;
      const double down = loss_value(false);
      p->value.data()[e] = original;
      worst = std::max(worst, relative_error(p->grad.data()[e], (up - down) / (2 * kFdStep)));
    }
  }
  char detail[64];
  std::snprintf(detail, sizeof detail, "max rel err %.2e over %zu tensors", worst, params.size());
  return {"gradient.total_loss_three_graphs", worst < kGradTolerance, detail};
}

}  // namespace

std::vector<Check> gradient_checks() {
  std::mt19937_64 rng(7);
  std::vector<Check> out = primitive_checks(rng);
  out.push_back(composite_gradient_check());
  return out;
}

std::vector<Check> entropy_checks() {
  std::vector<Check> out;
  const double k2 = structural_entropy(complete_graph(2), CodingTree::flat(complete_graph(2)));
  out.push_back({"entropy.k2_flat", std::abs(k2 - 1.0) < 1e-9, "H=" + std::to_string(k2)});
  const double k3 = structural_entropy(complete_graph(3), CodingTree::flat(complete_graph(3)));
  out.push_back({"entropy.k3_flat", std::abs(k3 - std::log2(3.0)) < 1e-9, "H=" + std::to_string(k3)});

  const Graph bridge = two_triangles_bridge();
  const CodingTree tree = build_coding_tree(bridge, 2);
  bool triangles = false;
  for (int c : tree.node(tree.root()).children) {
    const auto m = tree.members(c);
    if (m == std::vector<NodeId>{0, 1, 2} || m == std::vector<NodeId>{3, 4, 5}) triangles = true;
  }
  out.push_back({"entropy.bridge_partition", triangles && tree.node(tree.root()).children.size() == 2,
                 "root communities are the triangles"});

  std::mt19937_64 rng(2024);
  int within = 0, optimal = 0;
  const int trials = 60;
  bool deltas_ok = true;
  for (int t = 0; t < trials; ++t) {
    std::uniform_int_distribution<int> size(2, 6);
    const Graph g = random_connected_graph(size(rng), 0.35, rng);
    CodingTree built;
    try {
      built = build_coding_tree(g, 2, BuildOptions{.verify_deltas = true});
    } catch (const std::logic_error&) {
      deltas_ok = false;
      built = build_coding_tree(g, 2);
    }
    const double h = structural_entropy(g, built);
    const double best = brute_force_min_entropy(g, 2).second;
    const double flat = structural_entropy(g, CodingTree::flat(g));
    if (h >= best - 1e-9 && h <= flat + 1e-9) ++within;
    if (std::abs(h - best) < 1e-9) ++optimal;
  }
  out.push_back({"entropy.greedy_between_optimum_and_flat", within == trials,
                 std::to_string(within) + "/" + std::to_string(trials) + " (optimal on " + std::to_string(optimal) +
                     ")"});
  out.push_back({"entropy.incremental_deltas", deltas_ok, "merge/drop deltas match recomputation"});
  return out;
}

std::vector<Check> infonce_checks() {
  std::vector<Check> out;
  for (int n : {2, 4, 8}) {
    const Matrix z = Matrix::Constant(n, 3, 0.6);
    const double expected = std::log(2.0 * (n - 1));
    const double scalar = infonce(z, z, 0, 0.2);
    ad::Tape tape;
    const Matrix rows = ad::info_nce_rows(tape.constant(z), tape.constant(z), 0.2).value();
    const double worst = std::max(std::abs(scalar - expected), (rows.array() - expected).abs().maxCoeff());
    char detail[64];
    std::snprintf(detail, sizeof detail, "expected %.9f, max dev %.1e", expected, worst);
    out.push_back({"infonce.identical_n" + std::to_string(n), worst < 1e-9, detail});
  }
  return out;
}

std::vector<Check> auc_checks() {
  std::vector<Check> out;
  const std::vector<double> s1{0.1, 0.4, 0.9};
  const std::vector<int> l1{0, 0, 1};
  out.push_back({"auc.perfect_separation", auc(s1, l1) == 1.0, "1.0"});
  const std::vector<double> s2{0.3, 0.3, 0.3, 0.3};
  const std::vector<int> l2{0, 1, 0, 1};
  out.push_back({"auc.all_ties", auc(s2, l2) == 0.5, "0.5"});
  const std::vector<double> s3{1, 2, 3, 4};
  const std::vector<int> l3{1, 0, 1, 0};
  out.push_back({"auc.interleaved", auc(s3, l3) == 0.25, "0.25"});
  return out;
}

int run_selftest(std::ostream& out, const std::string& fault) {
  ad::testing::inject_fault(fault == "relu_backward" ? ad::testing::Fault::relu_backward : ad::testing::Fault::none);
  std::vector<Check> checks;
  for (auto& c : gradient_checks()) checks.push_back(std::move(c));
  for (auto& c : entropy_checks()) checks.push_back(std::move(c));
  for (auto& c : infonce_checks()) checks.push_back(std::move(c));
  for (auto& c : auc_checks()) checks.push_back(std::move(c));
  ad::testing::inject_fault(ad::testing::Fault::none);

  std::size_t passed = 0;
  for (const auto& c : checks) {
    char line[256];
    std::snprintf(line, sizeof line, "%-4s  %-42s %s", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    out << line << '\n';
    if (c.passed) ++passed;
  }
  out << "selftest: " << passed << "/" << checks.size() << " checks passed\n";
  return passed == checks.size() ? kOk : kFailure;
}

}  // namespace sego::cli
