#pragma once

#include <span>
#include <vector>

#include "sego/autodiff.hpp"

namespace sego::ad {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moments, indexed like the parameter list passed to adam_step.
struct AdamState {
  long step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

// One bias-corrected Adam update from the gradients currently held in `params`.
void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamOptions& options);

void zero_grad(std::span<Parameter* const> params);

}  // namespace sego::ad
