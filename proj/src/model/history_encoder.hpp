#pragma once

#include <random>
#include <span>
#include <vector>

#include "model/dialog.hpp"
#include "model/lstm.hpp"

namespace dvr::model {

// Hierarchical dialog history encoder. A sentence LSTM turns the caption and
// every round sentence into a feature F_i (its final hidden state); a state
// LSTM consumes F_0..F_t. The proposed variant returns
// concat(final state hidden, state output at step 0); basic returns the final
// state hidden only. The flat variant runs one LSTM over all tokens of the
// caption and the rounds, SEP-separated.
class HistoryEncoder {
 public:
  HistoryEncoder() = default;
  HistoryEncoder(num::ParameterStore& store, Variant variant, std::size_t word_dim, std::size_t hidden_dim,
                 std::mt19937_64& rng);

  Variant variant() const { return variant_; }
  std::size_t hidden_dim() const { return hidden_dim_; }
  std::size_t output_dim() const { return variant_ == Variant::proposed ? 2 * hidden_dim_ : hidden_dim_; }

  // One feature row per sentence: [n x hidden]. Sentences must be non-empty.
  num::Var encode_sentences(num::Tape& tape, num::Var embedding,
                            std::span<const std::vector<text::TokenId>> sentences) const;

  // History vector for each state at its own round count: [B x output_dim].
  num::Var encode(num::Tape& tape, num::Var embedding, std::span<const DialogState* const> states) const;

  // History vectors for every prefix t = 0..T of states that all hold T rounds;
  // element t is [B x output_dim].
  std::vector<num::Var> encode_prefixes(num::Tape& tape, num::Var embedding,
                                        std::span<const DialogState* const> states) const;

  // Recurrent state carried between rounds of a live session.
  struct Cache {
    num::Tensor h;
    num::Tensor c;
    num::Tensor first;  // state output at step 0 (proposed/basic)
    std::size_t rounds = 0;
  };
  Cache start(num::Tape& tape, num::Var embedding, const text::TokenSequence& caption) const;
  void extend(num::Tape& tape, num::Var embedding, Cache& cache, const DialogRound& round) const;
  num::Tensor history(const Cache& cache) const;

  const LstmCell& sentence_cell() const { return sentence_; }
  const LstmCell& state_cell() const { return state_; }
  const LstmCell& flat_cell() const { return flat_; }

 private:
  struct Layout;
  Layout layout(std::span<const DialogState* const> states) const;
  num::Var combine(num::Var final_h, num::Var first_h) const;

  Variant variant_ = Variant::proposed;
  std::size_t word_dim_ = 0;
  std::size_t hidden_dim_ = 0;
  LstmCell sentence_;
  LstmCell state_;
  LstmCell flat_;
};

}  // namespace dvr::model
