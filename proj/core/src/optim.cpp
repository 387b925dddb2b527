#include "sego/optim.hpp"

#include <cmath>

#include "sego/errors.hpp"

namespace sego::ad {

void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamOptions& options) {
  if (state.first_moment.empty()) {
    for (const Parameter* p : params) {
      state.first_moment.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      state.second_moment.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ContractViolation("Adam state tracks " + std::to_string(state.first_moment.size()) + " parameters, got " +
                            std::to_string(params.size()));
  }
  ++state.step;
  const double correction1 = 1.0 - std::pow(options.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(options.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
      throw ContractViolation("parameter '" + p.name + "' has no gradient of matching shape");
    }
    m = options.beta1 * m + (1.0 - options.beta1) * p.grad;
    v = options.beta2 * v + (1.0 - options.beta2) * p.grad.cwiseProduct(p.grad);
    const auto m_hat = m.array() / correction1;
    const auto v_hat = v.array() / correction2;
    p.value.array() -= options.lr * m_hat / (v_hat.sqrt() + options.eps);
  }
}

void zero_grad(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace sego::ad
