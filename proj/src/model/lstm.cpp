#include "model/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "common/error.hpp"

namespace dvr::model {

using num::Var;

LstmCell::LstmCell(num::ParameterStore& store, const std::string& prefix, const std::string& group,
                   std::size_t input_dim, std::size_t hidden_dim, std::mt19937_64& rng)
    : input_dim_(input_dim), hidden_dim_(hidden_dim) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  weight_ = &store.add_uniform(prefix + ".weight", group, {input_dim + hidden_dim, 4 * hidden_dim}, bound, rng);
  bias_ = &store.add_uniform(prefix + ".bias", group, {1, 4 * hidden_dim}, bound, rng);
}

LstmCell::State LstmCell::step(num::Tape& tape, Var x, const State& prev) const {
  if (x.value().cols() != input_dim_) {
    throw ShapeError("lstm step: input has " + std::to_string(x.value().cols()) + " columns, expected " +
                     std::to_string(input_dim_));
  }
  const auto H = hidden_dim_;
  auto z = num::add(num::matmul(num::concat({x, prev.h}, 1), tape.leaf(*weight_)), tape.leaf(*bias_));
  auto i = num::sigmoid(num::slice(z, 1, 0, H));
  auto f = num::sigmoid(num::slice(z, 1, H, 2 * H));
  auto g = num::tanh(num::slice(z, 1, 2 * H, 3 * H));
  auto o = num::sigmoid(num::slice(z, 1, 3 * H, 4 * H));
  auto c = f * prev.c + i * g;
  auto h = o * num::tanh(c);
  return {h, c};
}

namespace {

Var select_rows(const PackedRun& run, const std::vector<Var>& per_step, std::span<const std::size_t> steps) {
  const auto n = run.order.size();
  if (steps.size() != n) throw InvalidArgument("packed select: one step per sequence required");
  // Group requested rows by step, remembering where each original lands.
  std::map<std::size_t, std::vector<std::size_t>> by_step;
  for (std::size_t i = 0; i < n; ++i) {
    if (steps[i] >= run.lengths[i]) throw InvalidArgument("packed select: step beyond sequence length");
    by_step[steps[i]].push_back(i);
  }
  std::vector<Var> parts;
  std::vector<std::size_t> stacked_original;
  for (const auto& [k, originals] : by_step) {
    std::vector<std::size_t> rows;
    rows.reserve(originals.size());
    for (auto i : originals) {
      rows.push_back(run.position[i]);
      stacked_original.push_back(i);
    }
    parts.push_back(num::gather_rows(per_step[k], rows));
  }
  Var stacked = parts.size() == 1 ? parts[0] : num::concat(parts, 0);
  std::vector<std::size_t> where(n);
  for (std::size_t r = 0; r < stacked_original.size(); ++r) where[stacked_original[r]] = r;
  bool identity = true;
  for (std::size_t i = 0; i < n; ++i) identity = identity && where[i] == i;
  return identity ? stacked : num::gather_rows(stacked, where);
}

std::vector<std::size_t> last_steps(const PackedRun& run) {
  std::vector<std::size_t> s(run.lengths.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = run.lengths[i] - 1;
  return s;
}

}  // namespace

Var PackedRun::select_h(std::span<const std::size_t> steps) const { return select_rows(*this, h, steps); }
Var PackedRun::select_c(std::span<const std::size_t> steps) const { return select_rows(*this, c, steps); }
Var PackedRun::final_h() const { return select_h(last_steps(*this)); }
Var PackedRun::final_c() const { return select_c(last_steps(*this)); }

PackedRun run_packed(num::Tape& tape, const LstmCell& cell, std::span<const std::size_t> lengths,
                     const StepInput& input, const Var* h0, const Var* c0) {
  const auto n = lengths.size();
  if (n == 0) throw InvalidArgument("run_packed: no sequences");
  PackedRun run;
  run.lengths.assign(lengths.begin(), lengths.end());
  run.order.resize(n);
  std::iota(run.order.begin(), run.order.end(), 0);
  std::stable_sort(run.order.begin(), run.order.end(),
                   [&](std::size_t a, std::size_t b) { return lengths[a] > lengths[b]; });
  run.position.resize(n);
  for (std::size_t p = 0; p < n; ++p) run.position[run.order[p]] = p;
  const auto max_len = lengths[run.order[0]];
  if (lengths[run.order[n - 1]] == 0) throw InvalidArgument("run_packed: empty sequence");

  const auto H = cell.hidden_dim();
  bool sorted_identity = true;
  for (std::size_t p = 0; p < n; ++p) sorted_identity = sorted_identity && run.order[p] == p;
  auto initial = [&](const Var* v) {
    if (!v) return tape.constant(num::Tensor::zeros(n, H));
    if (v->value().rows() != n || v->value().cols() != H) throw ShapeError("run_packed: initial state shape mismatch");
    return sorted_identity ? *v : num::gather_rows(*v, run.order);
  };
  LstmCell::State state{initial(h0), initial(c0)};

  for (std::size_t k = 0; k < max_len; ++k) {
    std::size_t alive = 0;
    while (alive < n && lengths[run.order[alive]] > k) ++alive;
    run.active.push_back(alive);
    LstmCell::State prev = state;
    if (prev.h.value().rows() != alive) {
      prev.h = num::slice(prev.h, 0, 0, alive);
      prev.c = num::slice(prev.c, 0, 0, alive);
    }
    auto x = input(k, std::span<const std::size_t>(run.order.data(), alive));
    state = cell.step(tape, x, prev);
    run.h.push_back(state.h);
    run.c.push_back(state.c);
  }
  return run;
}

}  // namespace dvr::model
