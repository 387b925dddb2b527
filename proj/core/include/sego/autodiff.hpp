#pragma once

#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sego/matrix.hpp"

namespace sego::ad {

// Trainable matrix living outside any tape. Gradients from every tape that
// binds it accumulate into `grad` until zero_grad().
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Matrix value);

  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Tensor {
 public:
  Tensor() = default;

  const Matrix& value() const;
  // Accumulated gradient (zeros if nothing has flowed into this tensor yet).
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double item() const;
  bool requires_grad() const;
  bool valid() const { return tape_ != nullptr; }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Tensor(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Records primitive operations for one forward pass and replays them in
/// reverse for gradients.
///
/// Intermediate gradients are recomputed on every backward() call. Leaf
/// gradients (tape variables and bound parameters) accumulate until cleared.
class Tape {
 public:
  // Receives the gradient flowing into the op's output and its forward value.
  using BackwardFn = std::function<void(const Matrix& upstream, const Matrix& output, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor constant(Matrix value);
  Tensor variable(Matrix value);
  Tensor parameter(Parameter& p);

  void backward(const Tensor& loss);
  // Clears gradients of tape-owned variables.
  void zero_grad();

  std::size_t size() const { return nodes_.size(); }

  // Primitive implementation interface.
  Tensor record(Matrix value, std::span<const Tensor> inputs, BackwardFn backward);
  Tensor record(Matrix value, std::initializer_list<Tensor> inputs, BackwardFn backward) {
    return record(std::move(value), std::span<const Tensor>(inputs.begin(), inputs.size()), std::move(backward));
  }
  void accumulate(const Tensor& t, const Matrix& delta);
  const Matrix& value_of(const Tensor& t) const;
  const Matrix& grad_of(const Tensor& t) const;
  bool requires_grad(const Tensor& t) const;

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    bool leaf = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  Node& node(const Tensor& t);
  const Node& node(const Tensor& t) const;

  std::deque<Node> nodes_;
};

// Elementwise / linear-algebra primitives. Shapes must match exactly except
// for add_bias_rowwise, whose bias is a 1 x cols row.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor add_bias_rowwise(const Tensor& x, const Tensor& bias);
Tensor relu(const Tensor& x);
Tensor scale(const Tensor& x, double c);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor gather_rows(const Tensor& x, std::span<const int> index);
// Row i of x is added into output row groups[i]; output has num_groups rows.
Tensor sum_rows_grouped(const Tensor& x, std::span<const int> groups, int num_groups);

inline constexpr double kNormEpsilon = 1e-8;

// x_i / max(|x_i|, 1e-8).
Tensor l2_normalize_rows(const Tensor& x);
// S_ij = cos(a_i, b_j) with the same norm floor.
Tensor cosine_similarity_matrix(const Tensor& a, const Tensor& b);

// Per-row contrastive loss, rows x 1:
//   l_i = -s(a_i,b_i)/tau + log sum_{j != i} [exp(s(a_i,a_j)/tau) + exp(s(a_i,b_j)/tau)]
// with s the cosine similarity, evaluated in log-sum-exp form. Needs >= 2 rows.
Tensor info_nce_rows(const Tensor& a, const Tensor& b, double tau);
// info_nce_rows(a, b) + info_nce_rows(b, a) as one op. The two directions share
// the cross-similarity matrix, which saves a third of the work on large batches.
Tensor info_nce_symmetric_rows(const Tensor& a, const Tensor& b, double tau);

namespace testing {

enum class Fault { none, relu_backward };

// Deliberately corrupts a backward rule so gradient checks can be shown to
// catch it. Process-wide; intended for self-test harnesses only.
void inject_fault(Fault fault);
Fault active_fault();

}  // namespace testing

}  // namespace sego::ad
