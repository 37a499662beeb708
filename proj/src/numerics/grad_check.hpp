#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "numerics/tape.hpp"

namespace dvr::num {

// Builds a scalar loss on the given (fresh) tape from the current parameter
// values. Must be deterministic.
using LossBuilder = std::function<Var(Tape&)>;

struct GradCheckOptions {
  double step = 1e-5;
  // 0 checks every coordinate; otherwise a seeded random subset per parameter.
  std::size_t max_coords_per_param = 0;
  std::uint64_t seed = 1;
};

// Max over checked coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|),
// with numeric gradients from central differences. Parameter values are restored
// and grads left zeroed.
double grad_check(const LossBuilder& f, std::span<Parameter* const> params, GradCheckOptions opts = {});

}  // namespace dvr::num
