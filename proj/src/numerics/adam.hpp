#pragma once

#include <map>
#include <span>
#include <string>

#include "numerics/parameter.hpp"

namespace dvr::num {

struct AdamMoments {
  Tensor m;
  Tensor v;
};

struct AdamState {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  // Keyed by parameter name; created on first update.
  std::map<std::string, AdamMoments> moments;
};

// One bias-corrected Adam update over `params` using their grad buffers.
// Parameters with requires_grad == false are skipped entirely. A non-finite
// gradient aborts before any parameter is touched.
void adam_step(AdamState& state, std::span<Parameter* const> params);

}  // namespace dvr::num
