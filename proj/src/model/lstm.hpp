#pragma once

#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "numerics/tape.hpp"

namespace dvr::model {

// Single-layer LSTM cell. Weight is [(input + hidden) x 4*hidden] with gate
// blocks ordered input, forget, candidate, output.
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(num::ParameterStore& store, const std::string& prefix, const std::string& group, std::size_t input_dim,
           std::size_t hidden_dim, std::mt19937_64& rng);

  struct State {
    num::Var h;
    num::Var c;
  };

  // x: [n x input], state rows: [n x hidden].
  State step(num::Tape& tape, num::Var x, const State& prev) const;

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden_dim() const { return hidden_dim_; }
  num::Parameter& weight() const { return *weight_; }
  num::Parameter& bias() const { return *bias_; }

 private:
  num::Parameter* weight_ = nullptr;
  num::Parameter* bias_ = nullptr;
  std::size_t input_dim_ = 0;
  std::size_t hidden_dim_ = 0;
};

// Result of running a cell over variable-length sequences in one batch.
// Sequences are processed sorted by length (longest first); at step k only
// the first active[k] sorted sequences advance.
struct PackedRun {
  std::vector<std::size_t> order;    // order[p] = original index at sorted position p
  std::vector<std::size_t> position; // inverse of order
  std::vector<std::size_t> lengths;  // per original index
  std::vector<std::size_t> active;   // sequences alive at each step
  std::vector<num::Var> h;           // [active[k] x hidden] per step, sorted order
  std::vector<num::Var> c;

  // Rows for each original sequence i taken after step steps[i]; original order.
  num::Var select_h(std::span<const std::size_t> steps) const;
  num::Var select_c(std::span<const std::size_t> steps) const;
  num::Var final_h() const;
  num::Var final_c() const;
};

// Supplies the step-k inputs for the sorted positions [0, n): [n x input].
using StepInput = std::function<num::Var(std::size_t step, std::span<const std::size_t> sorted_originals)>;

// Every length must be >= 1. Initial states, when given, are in original
// order; otherwise zero.
PackedRun run_packed(num::Tape& tape, const LstmCell& cell, std::span<const std::size_t> lengths,
                     const StepInput& input, const num::Var* h0 = nullptr, const num::Var* c0 = nullptr);

}  // namespace dvr::model
