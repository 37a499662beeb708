#include "numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "common/error.hpp"

namespace dvr::num {

namespace {

double eval_loss(const LossBuilder& f) {
  Tape tape;
  const double v = f(tape).value().item();
  if (!std::isfinite(v)) throw NumericError("grad_check: loss is not finite");
  return v;
}

}  // namespace

double grad_check(const LossBuilder& f, std::span<Parameter* const> params, GradCheckOptions opts) {
  for (const auto* p : params) {
    if (!p->value.all_finite()) throw NumericError("grad_check: parameter '" + p->name + "' has non-finite values");
  }
  for (auto* p : params) p->zero_grad();
  {
    Tape tape;
    auto loss = f(tape);
    if (!std::isfinite(loss.value().item())) throw NumericError("grad_check: loss is not finite");
    tape.backward(loss);
  }
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) {
    analytic.push_back(p->grad);
    p->zero_grad();
  }

  std::mt19937_64 rng(opts.seed);
  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto* p = params[pi];
    std::vector<std::size_t> coords(p->value.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (opts.max_coords_per_param > 0 && coords.size() > opts.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opts.max_coords_per_param);
    }
    for (auto c : coords) {
      const double orig = p->value[c];
      p->value[c] = orig + opts.step;
      const double up = eval_loss(f);
      p->value[c] = orig - opts.step;
      const double down = eval_loss(f);
      p->value[c] = orig;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double a = analytic[pi][c];
      if (!std::isfinite(a)) throw NumericError("grad_check: non-finite analytic gradient in '" + p->name + "'");
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace dvr::num
