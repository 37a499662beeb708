#include "numerics/adam.hpp"

#include <cmath>

#include "common/error.hpp"

namespace dvr::num {

void adam_step(AdamState& state, std::span<Parameter* const> params) {
  for (const auto* p : params) {
    if (!p->requires_grad) continue;
    for (std::size_t i = 0; i < p->grad.size(); ++i) {
      if (!std::isfinite(p->grad[i])) {
        throw NumericError("adam_step: non-finite gradient in parameter group '" + p->group + "' (parameter '" +
                           p->name + "', index " + std::to_string(i) + ")");
      }
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (auto* p : params) {
    if (!p->requires_grad) continue;
    auto [it, inserted] = state.moments.try_emplace(p->name);
    auto& mom = it->second;
    if (inserted || mom.m.shape() != p->value.shape()) {
      mom.m = Tensor(p->value.shape(), 0.0);
      mom.v = Tensor(p->value.shape(), 0.0);
    }
    auto& w = p->value.data();
    const auto& g = p->grad.data();
    auto& m = mom.m.data();
    auto& v = mom.v.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

}  // namespace dvr::num
