#include <cmath>
#include <cstring>
#include <functional>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "sego/autodiff.hpp"
#include "sego/checkpoint.hpp"
#include "sego/errors.hpp"
#include "sego/objective.hpp"
#include "sego/optim.hpp"
#include "test_support.hpp"

namespace sego {
namespace {

using ad::Tape;
using ad::Tensor;
using Build = std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

// Reduces any output to a scalar with fixed random weights so every output
// entry contributes a distinct gradient.
Tensor bilinear_reduce(Tape& tape, const Tensor& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Tensor u = tape.constant(test::random_matrix(1, static_cast<int>(y.rows()), -1, 1, rng));
  const Tensor v = tape.constant(test::random_matrix(static_cast<int>(y.cols()), 1, -1, 1, rng));
  return ad::matmul(ad::matmul(u, y), v);
}

// Max gradient error over every input entry, analytic vs central difference.
double max_gradient_error(const Build& build, std::vector<Matrix> inputs) {
  auto evaluate = [&]() {
    Tape tape;
    std::vector<Tensor> vars;
    for (const auto& m : inputs) vars.push_back(tape.constant(m));
    return bilinear_reduce(tape, build(tape, vars), 99).item();
  };
  Tape tape;
  std::vector<Tensor> vars;
  for (const auto& m : inputs) vars.push_back(tape.variable(m));
  const Tensor loss = bilinear_reduce(tape, build(tape, vars), 99);
  tape.backward(loss);

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Matrix analytic = vars[k].grad();
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      const double numeric = test::central_difference(evaluate, inputs[k].data()[i]);
      worst = std::max(worst, test::gradient_error(analytic.data()[i], numeric));
    }
  }
  return worst;
}

// Uniform [-2, 2] entries kept away from zero so relu kinks are not straddled.
Matrix away_from_zero(int rows, int cols, std::mt19937_64& rng) {
  Matrix m = test::random_matrix(rows, cols, -2, 2, rng);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    while (std::abs(m.data()[i]) < 1e-3) m.data()[i] = test::random_matrix(1, 1, -2, 2, rng)(0, 0);
  }
  return m;
}

class PrimitiveGradientTest : public ::testing::Test {
 protected:
  std::mt19937_64 rng_{2024};
  std::uniform_int_distribution<int> dim_{1, 5};
  void expect_ok(const Build& build, std::vector<Matrix> inputs) {
    EXPECT_LT(max_gradient_error(build, std::move(inputs)), 1e-4);
  }
};

TEST_F(PrimitiveGradientTest, Matmul) {
  expect_ok([](Tape&, const auto& v) { return ad::matmul(v[0], v[1]); },
            {test::random_matrix(2, 3, -2, 2, rng_), test::random_matrix(3, 2, -2, 2, rng_)});
  for (int trial = 0; trial < 10; ++trial) {
    const int a = dim_(rng_), b = dim_(rng_), c = dim_(rng_);
    expect_ok([](Tape&, const auto& v) { return ad::matmul(v[0], v[1]); },
              {test::random_matrix(a, b, -2, 2, rng_), test::random_matrix(b, c, -2, 2, rng_)});
  }
}

TEST_F(PrimitiveGradientTest, Elementwise) {
  for (int trial = 0; trial < 10; ++trial) {
    const int r = dim_(rng_), c = dim_(rng_);
    expect_ok([](Tape&, const auto& v) { return ad::add(v[0], v[1]); },
              {test::random_matrix(r, c, -2, 2, rng_), test::random_matrix(r, c, -2, 2, rng_)});
    expect_ok([](Tape&, const auto& v) { return ad::add_bias_rowwise(v[0], v[1]); },
              {test::random_matrix(r, c, -2, 2, rng_), test::random_matrix(1, c, -2, 2, rng_)});
    expect_ok([](Tape&, const auto& v) { return ad::relu(v[0]); }, {away_from_zero(r, c, rng_)});
    expect_ok([](Tape&, const auto& v) { return ad::scale(v[0], -1.7); }, {test::random_matrix(r, c, -2, 2, rng_)});
    expect_ok([](Tape&, const auto& v) { return ad::exp(v[0]); }, {test::random_matrix(r, c, -2, 2, rng_)});
    expect_ok([](Tape&, const auto& v) { return ad::log(v[0]); }, {test::random_matrix(r, c, 0.5, 2, rng_)});
    expect_ok([](Tape&, const auto& v) { return ad::mean(v[0]); }, {test::random_matrix(r, c, -2, 2, rng_)});
  }
}

TEST_F(PrimitiveGradientTest, Structural) {
  for (int trial = 0; trial < 10; ++trial) {
    const int r = dim_(rng_), c = dim_(rng_), d = dim_(rng_);
    expect_ok([](Tape&, const auto& v) { return ad::concat_cols(v[0], v[1]); },
              {test::random_matrix(r, c, -2, 2, rng_), test::random_matrix(r, d, -2, 2, rng_)});
    const std::vector<int> index{r - 1, 0, r - 1};
    expect_ok([&](Tape&, const auto& v) { return ad::gather_rows(v[0], index); },
              {test::random_matrix(r, c, -2, 2, rng_)});
    std::vector<int> groups(r);
    for (int i = 0; i < r; ++i) groups[i] = i % 2;
    expect_ok([&](Tape&, const auto& v) { return ad::sum_rows_grouped(v[0], groups, 2); },
              {test::random_matrix(r, c, -2, 2, rng_)});
  }
}

TEST_F(PrimitiveGradientTest, NormalizationAndSimilarity) {
  for (int trial = 0; trial < 10; ++trial) {
    const int r = dim_(rng_) + 1, c = dim_(rng_);
    expect_ok([](Tape&, const auto& v) { return ad::l2_normalize_rows(v[0]); },
              {test::random_matrix(r, c, -2, 2, rng_)});
    expect_ok([](Tape&, const auto& v) { return ad::cosine_similarity_matrix(v[0], v[1]); },
              {test::random_matrix(r, c, -2, 2, rng_), test::random_matrix(dim_(rng_), c, -2, 2, rng_)});
    expect_ok([](Tape&, const auto& v) { return ad::info_nce_rows(v[0], v[1], 0.5); },
              {test::random_matrix(r, c, -2, 2, rng_), test::random_matrix(r, c, -2, 2, rng_)});
    expect_ok([](Tape&, const auto& v) { return ad::info_nce_symmetric_rows(v[0], v[1], 0.5); },
              {test::random_matrix(r, c, -2, 2, rng_), test::random_matrix(r, c, -2, 2, rng_)});
  }
}

TEST_F(PrimitiveGradientTest, ComposedThroughEveryPrimitive) {
  for (int trial = 0; trial < 5; ++trial) {
    const int r = dim_(rng_) + 1, c = dim_(rng_);
    const std::vector<int> groups = [&] {
      std::vector<int> g(r);
      for (int i = 0; i < r; ++i) g[i] = i % 2;
      return g;
    }();
    const std::vector<int> index{1, 0};
    const Build build = [&](Tape&, const std::vector<Tensor>& v) {
      Tensor h = ad::relu(ad::add_bias_rowwise(ad::matmul(v[0], v[1]), v[2]));
      h = ad::add(h, ad::scale(ad::exp(ad::scale(v[0], 0.1)), 0.5));
      h = ad::concat_cols(h, ad::log(ad::exp(v[0])));
      const Tensor pooled = ad::sum_rows_grouped(h, groups, 2);
      const Tensor picked = ad::gather_rows(h, index);
      const Tensor nce = ad::info_nce_rows(pooled, picked, 0.7);
      const Tensor sim = ad::cosine_similarity_matrix(ad::l2_normalize_rows(h), h);
      return ad::add(ad::scale(ad::mean(nce), 1.0), ad::mean(sim));
    };
    // Keep the relu input off its kink by testing the chosen draw first.
    std::vector<Matrix> inputs{test::random_matrix(r, c, -2, 2, rng_), test::random_matrix(c, c, -2, 2, rng_),
                               test::random_matrix(1, c, -2, 2, rng_)};
    const Matrix pre = (inputs[0] * inputs[1]).rowwise() + inputs[2].row(0);
    if (pre.cwiseAbs().minCoeff() < 1e-3) continue;
    expect_ok(build, inputs);
  }
}

TEST(AutodiffTest, ReluExample) {
  Tape tape;
  Matrix x(1, 2);
  x << -1, 2;
  const Tensor t = tape.variable(x);
  const Tensor y = ad::relu(t);
  EXPECT_EQ(y.value(), (Matrix(1, 2) << 0, 2).finished());
  tape.backward(ad::mean(ad::scale(y, 2.0)));  // upstream into y is [[1, 1]]
  EXPECT_EQ(t.grad(), (Matrix(1, 2) << 0, 1).finished());
}

TEST(AutodiffTest, CosineOfIdenticalRowsIsOne) {
  Tape tape;
  Matrix x(1, 3);
  x << 0.6, 0.0, 0.8;
  const Tensor a = tape.constant(x);
  EXPECT_NEAR(ad::cosine_similarity_matrix(a, a).item(), 1.0, 1e-15);
}

TEST(AutodiffTest, CosineValuesWithinUnitRange) {
  std::mt19937_64 rng(3);
  Tape tape;
  const Tensor a = tape.constant(test::random_matrix(6, 4, -2, 2, rng));
  const Tensor b = tape.constant(test::random_matrix(5, 4, -2, 2, rng));
  const Matrix s = ad::cosine_similarity_matrix(a, b).value();
  EXPECT_LE(s.maxCoeff(), 1.0 + 1e-9);
  EXPECT_GE(s.minCoeff(), -1.0 - 1e-9);
}

TEST(AutodiffTest, ZeroRowsStayFinite) {
  Tape tape;
  const Tensor x = tape.variable(Matrix::Zero(2, 3));
  const Tensor y = ad::l2_normalize_rows(x);
  tape.backward(ad::mean(y));
  EXPECT_TRUE(y.value().isZero());
  EXPECT_TRUE(x.grad().allFinite());
}

TEST(AutodiffTest, MeanGradient) {
  Tape tape;
  const Tensor x = tape.variable(Matrix::Constant(2, 2, 3.0));
  tape.backward(ad::mean(x));
  EXPECT_EQ(x.grad(), Matrix::Constant(2, 2, 0.25));
}

TEST(AutodiffTest, RepeatedBackwardAccumulates) {
  std::mt19937_64 rng(5);
  ad::Parameter p("w", test::random_matrix(3, 2, -1, 1, rng));
  p.zero_grad();
  Tape tape;
  const Tensor x = tape.constant(test::random_matrix(4, 3, -1, 1, rng));
  const Tensor loss = ad::mean(ad::exp(ad::matmul(x, tape.parameter(p))));
  tape.backward(loss);
  const Matrix once = p.grad;
  tape.backward(loss);
  EXPECT_EQ(p.grad, 2.0 * once);
  p.zero_grad();
  EXPECT_TRUE(p.grad.isZero());
}

TEST(AutodiffTest, ContractErrors) {
  Tape tape;
  const Tensor a = tape.variable(Matrix::Ones(2, 3));
  const Tensor b = tape.variable(Matrix::Ones(2, 2));
  EXPECT_THROW(tape.backward(a), ContractViolation);
  EXPECT_THROW(ad::matmul(a, b), ContractViolation);
  EXPECT_THROW(ad::add(a, b), ContractViolation);
  EXPECT_THROW(ad::add_bias_rowwise(a, b), ContractViolation);
  EXPECT_THROW(ad::concat_cols(a, tape.variable(Matrix::Ones(3, 1))), ContractViolation);
  const std::vector<int> bad_index{5};
  EXPECT_THROW(ad::gather_rows(a, bad_index), ContractViolation);
  const std::vector<int> short_groups{0};
  EXPECT_THROW(ad::sum_rows_grouped(a, short_groups, 1), ContractViolation);
  EXPECT_THROW(ad::info_nce_rows(tape.variable(Matrix::Ones(1, 2)), tape.variable(Matrix::Ones(1, 2)), 0.2),
               ContractViolation);
  Tape other;
  EXPECT_THROW(ad::add(a, other.variable(Matrix::Ones(2, 3))), ContractViolation);
  try {
    ad::matmul(a, b);
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("2x3"), std::string::npos) << e.what();
  }
}

TEST(AutodiffTest, ForwardIsBitDeterministic) {
  std::mt19937_64 rng(8);
  const Matrix a = test::random_matrix(5, 4, -2, 2, rng);
  const Matrix b = test::random_matrix(5, 4, -2, 2, rng);
  auto run = [&] {
    Tape tape;
    return ad::info_nce_rows(tape.constant(a), tape.constant(b), 0.2).value();
  };
  EXPECT_EQ(run(), run());
}

TEST(AutodiffTest, InfoNceRowsMatchesScalarReference) {
  std::mt19937_64 rng(9);
  for (int n : {2, 3, 7}) {
    for (double tau : {0.05, 0.2, 1.0}) {
      Tape tape;
      const Tensor a = ad::l2_normalize_rows(tape.constant(test::random_matrix(n, 4, -1, 1, rng)));
      const Tensor b = ad::l2_normalize_rows(tape.constant(test::random_matrix(n, 4, -1, 1, rng)));
      const Matrix rows = ad::info_nce_rows(a, b, tau).value();
      for (int i = 0; i < n; ++i) EXPECT_NEAR(rows(i, 0), infonce(a.value(), b.value(), i, tau), 1e-10);
    }
  }
}

// The fused op against the two one-directional calls, including the small-tau
// fallback path and a zero row.
TEST(AutodiffTest, SymmetricInfoNceMatchesTwoDirections) {
  std::mt19937_64 rng(11);
  for (int n : {2, 5, 9}) {
    for (double tau : {0.002, 0.05, 0.2, 1.0}) {
      Matrix a = test::random_matrix(n, 3, -1, 1, rng);
      const Matrix b = test::random_matrix(n, 3, -1, 1, rng);
      a.row(n - 1).setZero();
      Tape fused_tape, split_tape;
      const Tensor fa = fused_tape.variable(a), fb = fused_tape.variable(b);
      const Tensor sa = split_tape.variable(a), sb = split_tape.variable(b);
      const Tensor fused = ad::info_nce_symmetric_rows(fa, fb, tau);
      const Tensor split = ad::add(ad::info_nce_rows(sa, sb, tau), ad::info_nce_rows(sb, sa, tau));
      const double scale = std::max(1.0, split.value().cwiseAbs().maxCoeff());
      EXPECT_LT((fused.value() - split.value()).cwiseAbs().maxCoeff(), 1e-11 * scale) << n << " " << tau;
      fused_tape.backward(ad::mean(fused));
      split_tape.backward(ad::mean(split));
      const double gscale = std::max(1.0, sa.grad().cwiseAbs().maxCoeff());
      EXPECT_LT((fa.grad() - sa.grad()).cwiseAbs().maxCoeff(), 1e-10 * gscale) << n << " " << tau;
      EXPECT_LT((fb.grad() - sb.grad()).cwiseAbs().maxCoeff(), 1e-10 * gscale) << n << " " << tau;
    }
  }
}

TEST(AutodiffTest, InjectedFaultIsDetected) {
  std::mt19937_64 rng(10);
  const Build build = [](Tape&, const auto& v) { return ad::relu(v[0]); };
  const Matrix x = away_from_zero(3, 3, rng);
  ad::testing::inject_fault(ad::testing::Fault::relu_backward);
  const double faulty = max_gradient_error(build, {x});
  ad::testing::inject_fault(ad::testing::Fault::none);
  EXPECT_GT(faulty, 1e-2);
  EXPECT_LT(max_gradient_error(build, {x}), 1e-4);
}

TEST(AdamTest, FirstStepMovesByLearningRate) {
  ad::Parameter p("p", Matrix::Constant(1, 1, 0.5));
  p.grad = Matrix::Constant(1, 1, 1.0);
  ad::AdamState state;
  std::vector<ad::Parameter*> params{&p};
  ad::adam_step(params, state, {.lr = 1e-3});
  EXPECT_NEAR(p.value(0, 0), 0.5 - 1e-3, 1e-10);
  EXPECT_EQ(state.step, 1);
}

TEST(AdamTest, ZeroGradientLeavesValue) {
  ad::Parameter p("p", Matrix::Constant(2, 2, 1.25));
  p.zero_grad();
  ad::AdamState state;
  std::vector<ad::Parameter*> params{&p};
  for (int i = 0; i < 3; ++i) ad::adam_step(params, state, {});
  EXPECT_EQ(p.value, Matrix::Constant(2, 2, 1.25));
}

TEST(AdamTest, IdenticalParametersGetIdenticalUpdates) {
  std::mt19937_64 rng(12);
  const Matrix v = test::random_matrix(3, 2, -1, 1, rng);
  const Matrix g = test::random_matrix(3, 2, -1, 1, rng);
  ad::Parameter a("a", v), b("b", v);
  ad::AdamState state;
  std::vector<ad::Parameter*> params{&a, &b};
  for (int i = 0; i < 4; ++i) {
    a.grad = g;
    b.grad = g;
    ad::adam_step(params, state, {});
  }
  EXPECT_EQ(a.value, b.value);
}

TEST(CheckpointTest, BitExactRoundTrip) {
  std::mt19937_64 rng(14);
  std::vector<NamedMatrix> entries{{"w", test::random_matrix(3, 4, -1e3, 1e3, rng)},
                                   {"b", Matrix::Constant(1, 4, -0.0)},
                                   {"empty", Matrix(0, 2)}};
  entries[0].value(0, 0) = std::nextafter(1.0, 2.0);
  std::stringstream buffer;
  write_checkpoint(buffer, entries);
  const auto reread = read_checkpoint(buffer);
  ASSERT_EQ(reread.size(), entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    EXPECT_EQ(reread[i].name, entries[i].name);
    ASSERT_EQ(reread[i].value.rows(), entries[i].value.rows());
    ASSERT_EQ(reread[i].value.cols(), entries[i].value.cols());
    EXPECT_EQ(std::memcmp(reread[i].value.data(), entries[i].value.data(),
                          sizeof(double) * entries[i].value.size()),
              0);
  }
}

TEST(CheckpointTest, TruncatedStreamIsParseError) {
  std::stringstream buffer;
  write_checkpoint(buffer, std::vector<NamedMatrix>{{"w", Matrix::Ones(2, 2)}});
  std::string bytes = buffer.str();
  bytes.resize(bytes.size() - 3);
  std::stringstream cut(bytes);
  EXPECT_THROW(read_checkpoint(cut), ParseError);
}

TEST(CheckpointTest, RestoreChecksNamesAndShapes) {
  ad::Parameter p("w", Matrix::Zero(2, 2));
  std::vector<ad::Parameter*> params{&p};
  EXPECT_THROW(restore(params, std::vector<NamedMatrix>{{"other", Matrix::Ones(2, 2)}}), ParseError);
  EXPECT_THROW(restore(params, std::vector<NamedMatrix>{{"w", Matrix::Ones(2, 3)}}), ParseError);
  restore(params, std::vector<NamedMatrix>{{"w", Matrix::Ones(2, 2)}});
  EXPECT_EQ(p.value, Matrix::Ones(2, 2));
  EXPECT_EQ(snapshot(params)[0].value, Matrix::Ones(2, 2));
}

}  // namespace
}  // namespace sego
