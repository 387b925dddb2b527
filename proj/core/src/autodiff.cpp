#include "sego/autodiff.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <memory>

#include "sego/errors.hpp"

namespace sego::ad {
namespace {

std::atomic<testing::Fault> g_fault{testing::Fault::none};

Tape& same_tape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.valid() || !b.valid()) throw ContractViolation(std::string(op) + ": uninitialized tensor");
  if (a.tape() != b.tape()) throw ContractViolation(std::string(op) + ": tensors live on different tapes");
  return *a.tape();
}

Tape& tape_of(const Tensor& a, const char* op) {
  if (!a.valid()) throw ContractViolation(std::string(op) + ": uninitialized tensor");
  return *a.tape();
}

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw ContractViolation(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
}

// Row normalization with the norm floor; returns the (floored) norms.
Matrix normalize_rows(const Matrix& x, Vector& norms) {
  norms = x.rowwise().norm().cwiseMax(kNormEpsilon);
  Matrix out = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) /= norms(i);
  return out;
}

// Pulls d/d(x_hat) back to d/dx for x_hat = x / max(|x|, eps).
Matrix normalize_rows_backward(const Matrix& grad_hat, const Matrix& hat, const Vector& norms) {
  Matrix out(grad_hat.rows(), grad_hat.cols());
  for (Eigen::Index i = 0; i < hat.rows(); ++i) {
    if (norms(i) > kNormEpsilon) {
      const double proj = hat.row(i).dot(grad_hat.row(i));
      out.row(i) = (grad_hat.row(i) - proj * hat.row(i)) / norms(i);
    } else {
      out.row(i) = grad_hat.row(i) / kNormEpsilon;
    }
  }
  return out;
}

}  // namespace

Parameter::Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {
  grad = Matrix::Zero(value.rows(), value.cols());
}

const Matrix& Tensor::value() const {
  if (!tape_) throw ContractViolation("uninitialized tensor");
  return tape_->value_of(*this);
}

const Matrix& Tensor::grad() const {
  if (!tape_) throw ContractViolation("uninitialized tensor");
  return tape_->grad_of(*this);
}

double Tensor::item() const {
  const auto& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ContractViolation("item() on non-scalar tensor " + shape_string(v));
  return v(0, 0);
}

bool Tensor::requires_grad() const { return tape_ && tape_->requires_grad(*this); }

Tape::Node& Tape::node(const Tensor& t) {
  if (t.tape() != this || t.id() < 0 || t.id() >= static_cast<int>(nodes_.size())) {
    throw ContractViolation("tensor does not belong to this tape");
  }
  return nodes_[t.id()];
}

const Tape::Node& Tape::node(const Tensor& t) const {
  if (t.tape() != this || t.id() < 0 || t.id() >= static_cast<int>(nodes_.size())) {
    throw ContractViolation("tensor does not belong to this tape");
  }
  return nodes_[t.id()];
}

Tensor Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.leaf = true;
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor Tape::variable(Matrix value) {
  Node n;
  n.grad = Matrix::Zero(value.rows(), value.cols());
  n.value = std::move(value);
  n.leaf = true;
  n.requires_grad = true;
  n.has_grad = true;
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor Tape::parameter(Parameter& p) {
  if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) p.zero_grad();
  Node n;
  n.value = p.value;
  n.leaf = true;
  n.requires_grad = true;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor Tape::record(Matrix value, std::span<const Tensor> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (const auto& in : inputs) n.requires_grad = n.requires_grad || node(in).requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(const Tensor& t, const Matrix& delta) {
  Node& n = node(t);
  if (!n.requires_grad) return;
  if (delta.rows() != n.value.rows() || delta.cols() != n.value.cols()) {
    throw ContractViolation("gradient shape " + shape_string(delta) + " does not match value " +
                            shape_string(n.value));
  }
  if (n.param) {
    n.param->grad += delta;
  } else if (!n.has_grad) {
    n.grad = delta;
    n.has_grad = true;
  } else {
    n.grad += delta;
  }
}

const Matrix& Tape::value_of(const Tensor& t) const { return node(t).value; }

const Matrix& Tape::grad_of(const Tensor& t) const {
  const Node& n = node(t);
  if (n.param) return n.param->grad;
  if (!n.has_grad) {
    auto& mutable_node = const_cast<Node&>(n);
    mutable_node.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    mutable_node.has_grad = true;
  }
  return n.grad;
}

bool Tape::requires_grad(const Tensor& t) const { return node(t).requires_grad; }

void Tape::backward(const Tensor& loss) {
  if (!loss.valid() || loss.tape() != this) {
    throw ContractViolation("backward() needs a loss tensor produced on this tape");
  }
  Node& root = node(loss);
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw ContractViolation("backward() needs a 1x1 loss, got " + shape_string(root.value));
  }
  for (auto& n : nodes_) {
    if (!n.leaf) {
      n.has_grad = false;
      n.grad.resize(0, 0);
    }
  }
  if (!root.requires_grad) return;
  accumulate(loss, Matrix::Ones(1, 1));
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.leaf || !n.requires_grad || !n.has_grad || !n.backward) continue;
    n.backward(n.grad, n.value, *this);
  }
}

void Tape::zero_grad() {
  for (auto& n : nodes_) {
    if (n.leaf && n.requires_grad && !n.param) n.grad.setZero(n.value.rows(), n.value.cols());
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tape& tape = same_tape(a, b, "matmul");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
  return tape.record(av * bv, {a, b}, [a, b](const Matrix& g, const Matrix&, Tape& t) {
    if (t.requires_grad(a)) t.accumulate(a, g * t.value_of(b).transpose());
    if (t.requires_grad(b)) t.accumulate(b, t.value_of(a).transpose() * g);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tape& tape = same_tape(a, b, "add");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) shape_error("add", av, bv);
  return tape.record(av + bv, {a, b}, [a, b](const Matrix& g, const Matrix&, Tape& t) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Tensor add_bias_rowwise(const Tensor& x, const Tensor& bias) {
  Tape& tape = same_tape(x, bias, "add_bias_rowwise");
  const Matrix& xv = x.value();
  const Matrix& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols()) shape_error("add_bias_rowwise", xv, bv);
  Matrix out = xv;
  out.rowwise() += bv.row(0);
  return tape.record(std::move(out), {x, bias}, [x, bias](const Matrix& g, const Matrix&, Tape& t) {
    t.accumulate(x, g);
    if (t.requires_grad(bias)) t.accumulate(bias, g.colwise().sum());
  });
}

Tensor relu(const Tensor& x) {
  Tape& tape = tape_of(x, "relu");
  return tape.record(x.value().cwiseMax(0.0), {x}, [x](const Matrix& g, const Matrix&, Tape& t) {
    if (testing::active_fault() == testing::Fault::relu_backward) {
      t.accumulate(x, g);
      return;
    }
    const Matrix& xv = t.value_of(x);
    t.accumulate(x, (xv.array() > 0.0).select(g, 0.0));
  });
}

Tensor scale(const Tensor& x, double c) {
  Tape& tape = tape_of(x, "scale");
  return tape.record(x.value() * c, {x}, [x, c](const Matrix& g, const Matrix&, Tape& t) { t.accumulate(x, g * c); });
}

Tensor exp(const Tensor& x) {
  Tape& tape = tape_of(x, "exp");
  Matrix out = x.value().array().exp().matrix();
  return tape.record(std::move(out), {x}, [x](const Matrix& g, const Matrix& y, Tape& t) {
    t.accumulate(x, g.cwiseProduct(y));
  });
}

Tensor log(const Tensor& x) {
  Tape& tape = tape_of(x, "log");
  Matrix out = x.value().array().log().matrix();
  return tape.record(std::move(out), {x}, [x](const Matrix& g, const Matrix&, Tape& t) {
    t.accumulate(x, g.cwiseQuotient(t.value_of(x)));
  });
}

Tensor mean(const Tensor& x) {
  Tape& tape = tape_of(x, "mean");
  const Matrix& xv = x.value();
  if (xv.size() == 0) throw ContractViolation("mean of an empty tensor");
  Matrix out(1, 1);
  out(0, 0) = xv.mean();
  return tape.record(std::move(out), {x}, [x](const Matrix& g, const Matrix&, Tape& t) {
    const Matrix& xv = t.value_of(x);
    t.accumulate(x, Matrix::Constant(xv.rows(), xv.cols(), g(0, 0) / static_cast<double>(xv.size())));
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  const Tensor parts[] = {a, b};
  return concat_cols(parts);
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractViolation("concat_cols of zero tensors");
  Tape& tape = tape_of(parts.front(), "concat_cols");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    same_tape(parts.front(), p, "concat_cols");
    if (p.rows() != rows) shape_error("concat_cols", parts.front().value(), p.value());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return tape.record(std::move(out), parts, [inputs](const Matrix& g, const Matrix&, Tape& t) {
    Eigen::Index off = 0;
    for (const auto& p : inputs) {
      const Eigen::Index c = t.value_of(p).cols();
      t.accumulate(p, g.middleCols(off, c));
      off += c;
    }
  });
}

Tensor gather_rows(const Tensor& x, std::span<const int> index) {
  Tape& tape = tape_of(x, "gather_rows");
  const Matrix& xv = x.value();
  Matrix out(static_cast<Eigen::Index>(index.size()), xv.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= xv.rows()) {
      throw ContractViolation("gather_rows: index " + std::to_string(index[i]) + " out of range for " +
                              shape_string(xv));
    }
    out.row(static_cast<Eigen::Index>(i)) = xv.row(index[i]);
  }
  std::vector<int> idx(index.begin(), index.end());
  return tape.record(std::move(out), {x}, [x, idx = std::move(idx)](const Matrix& g, const Matrix&, Tape& t) {
    const Matrix& xv = t.value_of(x);
    Matrix gx = Matrix::Zero(xv.rows(), xv.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) gx.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    t.accumulate(x, gx);
  });
}

Tensor sum_rows_grouped(const Tensor& x, std::span<const int> groups, int num_groups) {
  Tape& tape = tape_of(x, "sum_rows_grouped");
  const Matrix& xv = x.value();
  if (static_cast<Eigen::Index>(groups.size()) != xv.rows()) {
    throw ContractViolation("sum_rows_grouped: " + std::to_string(groups.size()) + " group ids for " +
                            shape_string(xv));
  }
  Matrix out = Matrix::Zero(num_groups, xv.cols());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i] < 0 || groups[i] >= num_groups) {
      throw ContractViolation("sum_rows_grouped: group id " + std::to_string(groups[i]) + " out of range");
    }
    out.row(groups[i]) += xv.row(static_cast<Eigen::Index>(i));
  }
  std::vector<int> ids(groups.begin(), groups.end());
  return tape.record(std::move(out), {x}, [x, ids = std::move(ids)](const Matrix& g, const Matrix&, Tape& t) {
    Matrix gx(static_cast<Eigen::Index>(ids.size()), g.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) gx.row(static_cast<Eigen::Index>(i)) = g.row(ids[i]);
    t.accumulate(x, gx);
  });
}

Tensor l2_normalize_rows(const Tensor& x) {
  Tape& tape = tape_of(x, "l2_normalize_rows");
  Vector norms;
  Matrix out = normalize_rows(x.value(), norms);
  return tape.record(std::move(out), {x}, [x, norms](const Matrix& g, const Matrix& y, Tape& t) {
    t.accumulate(x, normalize_rows_backward(g, y, norms));
  });
}

Tensor cosine_similarity_matrix(const Tensor& a, const Tensor& b) {
  Tape& tape = same_tape(a, b, "cosine_similarity_matrix");
  if (a.cols() != b.cols()) shape_error("cosine_similarity_matrix", a.value(), b.value());
  Vector na, nb;
  Matrix ah = normalize_rows(a.value(), na);
  Matrix bh = normalize_rows(b.value(), nb);
  Matrix out = ah * bh.transpose();
  return tape.record(std::move(out), {a, b},
                     [a, b, ah, bh, na, nb](const Matrix& g, const Matrix&, Tape& t) {
                       if (t.requires_grad(a)) t.accumulate(a, normalize_rows_backward(g * bh, ah, na));
                       if (t.requires_grad(b)) {
                         t.accumulate(b, normalize_rows_backward(g.transpose() * ah, bh, nb));
                       }
                     });
}

Tensor info_nce_rows(const Tensor& a, const Tensor& b, double tau) {
  Tape& tape = same_tape(a, b, "info_nce_rows");
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("info_nce_rows", a.value(), b.value());
  if (a.rows() < 2) throw ContractViolation("info_nce_rows needs at least 2 rows for negatives");
  if (!(tau > 0.0)) throw ContractViolation("info_nce_rows needs tau > 0");

  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  Vector na, nb;
  Matrix ah = normalize_rows(a.value(), na);
  Matrix bh = normalize_rows(b.value(), nb);

  // Logits with the positive pair (diagonal) masked out of the denominator.
  Matrix saa, sab;
  saa.noalias() = ah * ah.transpose();
  sab.noalias() = ah * bh.transpose();
  saa /= tau;
  sab /= tau;
  const Vector positive = sab.diagonal();
  saa.diagonal().setConstant(kNegInf);
  sab.diagonal().setConstant(kNegInf);

  // Turn the logits into softmax probabilities in place; backward reuses them
  // instead of recomputing two products and two exp passes.
  const Vector row_max = saa.rowwise().maxCoeff().cwiseMax(sab.rowwise().maxCoeff());
  Vector denom(saa.rows());
  for (Eigen::Index i = 0; i < saa.rows(); ++i) {
    saa.row(i) = (saa.row(i).array() - row_max(i)).exp();
    sab.row(i) = (sab.row(i).array() - row_max(i)).exp();
    denom(i) = saa.row(i).sum() + sab.row(i).sum();
  }
  const Vector lse = row_max.array() + denom.array().log();
  Matrix out = (lse - positive).eval();
  saa = denom.cwiseInverse().asDiagonal() * saa;
  sab = denom.cwiseInverse().asDiagonal() * sab;
  auto probs = std::make_shared<const std::pair<Matrix, Matrix>>(std::move(saa), std::move(sab));

  return tape.record(std::move(out), {a, b},
                     [a, b, ah, bh, na, nb, tau, probs](const Matrix& g, const Matrix&, Tape& t) {
                       // Scale each row by its upstream gradient and fold in 1/tau.
                       const Vector w = g.col(0) / tau;
                       const Matrix paa = w.asDiagonal() * probs->first;
                       Matrix pab = w.asDiagonal() * probs->second;
                       pab.diagonal() -= w;
                       Matrix grad_ah = (paa + paa.transpose()) * ah + pab * bh;
                       Matrix grad_bh = pab.transpose() * ah;
                       if (t.requires_grad(a)) t.accumulate(a, normalize_rows_backward(grad_ah, ah, na));
                       if (t.requires_grad(b)) t.accumulate(b, normalize_rows_backward(grad_bh, bh, nb));
                     });
}

Tensor info_nce_symmetric_rows(const Tensor& a, const Tensor& b, double tau) {
  Tape& tape = same_tape(a, b, "info_nce_symmetric_rows");
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("info_nce_symmetric_rows", a.value(), b.value());
  if (a.rows() < 2) throw ContractViolation("info_nce_symmetric_rows needs at least 2 rows for negatives");
  if (!(tau > 0.0)) throw ContractViolation("info_nce_symmetric_rows needs tau > 0");
  // Logits lie in [-1/tau, 1/tau], so a fixed shift of 1/tau keeps every exp
  // in [exp(-2/tau), 1]. Below tau = 1/300 that could underflow; fall back.
  if (1.0 / tau > 300.0) return add(info_nce_rows(a, b, tau), info_nce_rows(b, a, tau));

  Vector na, nb;
  const Matrix ah = normalize_rows(a.value(), na);
  const Matrix bh = normalize_rows(b.value(), nb);
  const Matrix as = ah / tau, bs = bh / tau;
  const double shift = 1.0 / tau;
  const Eigen::Index n = ah.rows();

  struct Cache {
    Matrix eaa, ebb, eab;  // exp(logit - shift), diagonal zeroed
    Vector inv_row_a;      // 1 / denominator for anchors in a
    Vector inv_row_b;      // 1 / denominator for anchors in b
  };
  auto c = std::make_shared<Cache>();
  c->eaa.noalias() = as * ah.transpose();
  c->ebb.noalias() = bs * bh.transpose();
  c->eab.noalias() = as * bh.transpose();
  const Vector positive = c->eab.diagonal();
  for (Matrix* m : {&c->eaa, &c->ebb, &c->eab}) {
    *m = (m->array() - shift).exp().matrix();
    m->diagonal().setZero();
  }
  const Vector den_a = c->eaa.rowwise().sum() + c->eab.rowwise().sum();
  const Vector den_b = c->ebb.rowwise().sum() + c->eab.colwise().sum().transpose();
  c->inv_row_a = den_a.cwiseInverse();
  c->inv_row_b = den_b.cwiseInverse();
  Matrix out(n, 1);
  out.col(0) = (2.0 * shift) + den_a.array().log() + den_b.array().log() - 2.0 * positive.array();

  return tape.record(std::move(out), {a, b}, [a, b, ah, bh, na, nb, tau, c](const Matrix& g, const Matrix&, Tape& t) {
    // Logit gradients are diag(wa) E_aa, diag(wb) E_bb and
    // diag(wa) E_ab + E_ab diag(wb) - 2 diag(g). E_aa and E_bb are symmetric,
    // so every term is an exp matrix times [x, w * x]: four products and no
    // n x n temporaries.
    const Eigen::Index d = ah.cols();
    const Vector gv = g.col(0);
    const Vector wa = gv.cwiseProduct(c->inv_row_a);
    const Vector wb = gv.cwiseProduct(c->inv_row_b);
    Matrix a2(ah.rows(), 2 * d), b2(bh.rows(), 2 * d);
    a2 << ah, wa.asDiagonal() * ah;
    b2 << bh, wb.asDiagonal() * bh;
    const Matrix aa = c->eaa * a2;               // [E_aa a, E_aa (wa a)]
    const Matrix bb = c->ebb * b2;               // [E_bb b, E_bb (wb b)]
    const Matrix ab = c->eab * b2;               // [E_ab b, E_ab (wb b)]
    const Matrix ba = c->eab.transpose() * a2;   // [E_ab' a, E_ab' (wa a)]
    Matrix grad_ah = wa.asDiagonal() * (aa.leftCols(d) + ab.leftCols(d));
    grad_ah += aa.rightCols(d) + ab.rightCols(d);
    grad_ah -= 2.0 * gv.asDiagonal() * bh;
    Matrix grad_bh = wb.asDiagonal() * (bb.leftCols(d) + ba.leftCols(d));
    grad_bh += bb.rightCols(d) + ba.rightCols(d);
    grad_bh -= 2.0 * gv.asDiagonal() * ah;
    grad_ah /= tau;
    grad_bh /= tau;
    if (t.requires_grad(a)) t.accumulate(a, normalize_rows_backward(grad_ah, ah, na));
    if (t.requires_grad(b)) t.accumulate(b, normalize_rows_backward(grad_bh, bh, nb));
  });
}

namespace testing {

void inject_fault(Fault fault) { g_fault.store(fault); }
Fault active_fault() { return g_fault.load(); }

}  // namespace testing

}  // namespace sego::ad
