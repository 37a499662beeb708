#pragma once

#include <random>
#include <span>
#include <vector>

#include "model/lstm.hpp"
#include "text/vocab.hpp"

namespace dvr::model {

// Frames a question as SOS ... EOS.
std::vector<text::TokenId> frame_question(const text::TokenSequence& question);

// LSTM question generator whose initial hidden state is the history vector
// (through a learned projection when the dimensions differ); the initial cell
// state is zero.
class QuestionDecoder {
 public:
  QuestionDecoder() = default;
  QuestionDecoder(num::ParameterStore& store, std::size_t history_dim, std::size_t word_dim, std::size_t decoder_dim,
                  std::size_t vocab_size, std::mt19937_64& rng);

  std::size_t decoder_dim() const { return cell_.hidden_dim(); }
  bool has_projection() const { return proj_weight_ != nullptr; }

  num::Var initial_hidden(num::Tape& tape, num::Var history) const;

  struct TeacherForced {
    num::Var logits;  // one row per predicted position
    num::Var loss;    // mean cross-entropy over all positions
    std::vector<text::TokenId> targets;
  };
  // `framed` rows must start with SOS and end with EOS.
  TeacherForced teacher_forced(num::Tape& tape, num::Var embedding, num::Var history,
                               std::span<const std::vector<text::TokenId>> framed) const;

  // Argmax decoding from SOS; stops at EOS (not included) or max_len tokens.
  // PAD, SOS and SEP are never emitted.
  std::vector<text::TokenId> greedy(num::Tape& tape, num::Var embedding, const num::Tensor& history,
                                    std::size_t max_len = 20) const;

  // Softmax over the vocabulary for each row of decoder hidden states.
  num::Var probabilities(num::Tape& tape, num::Var hidden) const;
  num::Var logits(num::Tape& tape, num::Var hidden) const;

  const LstmCell& cell() const { return cell_; }

 private:
  LstmCell cell_;
  num::Parameter* out_weight_ = nullptr;
  num::Parameter* out_bias_ = nullptr;
  num::Parameter* proj_weight_ = nullptr;
  num::Parameter* proj_bias_ = nullptr;
  std::size_t history_dim_ = 0;
};

}  // namespace dvr::model
