#include "model/question_decoder.hpp"

#include <cmath>

#include "common/error.hpp"

namespace dvr::model {

using num::Tape;
using num::Tensor;
using num::Var;

std::vector<text::TokenId> frame_question(const text::TokenSequence& question) {
  std::vector<text::TokenId> ids{text::kSos};
  ids.insert(ids.end(), question.ids.begin(), question.ids.end());
  ids.push_back(text::kEos);
  return ids;
}

QuestionDecoder::QuestionDecoder(num::ParameterStore& store, std::size_t history_dim, std::size_t word_dim,
                                 std::size_t decoder_dim, std::size_t vocab_size, std::mt19937_64& rng)
    : history_dim_(history_dim) {
  cell_ = LstmCell(store, "decoder.cell", "question_decoder", word_dim, decoder_dim, rng);
  const double out_bound = 1.0 / std::sqrt(static_cast<double>(decoder_dim));
  out_weight_ = &store.add_uniform("decoder.out.weight", "question_decoder", {decoder_dim, vocab_size}, out_bound, rng);
  out_bias_ = &store.add_uniform("decoder.out.bias", "question_decoder", {1, vocab_size}, out_bound, rng);
  if (history_dim != decoder_dim) {
    const double b = 1.0 / std::sqrt(static_cast<double>(history_dim));
    proj_weight_ = &store.add_uniform("decoder.proj.weight", "question_decoder", {history_dim, decoder_dim}, b, rng);
    proj_bias_ = &store.add_uniform("decoder.proj.bias", "question_decoder", {1, decoder_dim}, b, rng);
  }
}

Var QuestionDecoder::initial_hidden(Tape& tape, Var history) const {
  if (history.value().cols() != history_dim_) {
    throw ShapeError("question decoder: history vector has " + std::to_string(history.value().cols()) +
                     " dims, expected " + std::to_string(history_dim_));
  }
  if (!proj_weight_) return history;
  return num::add(num::matmul(history, tape.leaf(*proj_weight_)), tape.leaf(*proj_bias_));
}

Var QuestionDecoder::logits(Tape& tape, Var hidden) const {
  return num::add(num::matmul(hidden, tape.leaf(*out_weight_)), tape.leaf(*out_bias_));
}

Var QuestionDecoder::probabilities(Tape& tape, Var hidden) const { return num::softmax(logits(tape, hidden)); }

QuestionDecoder::TeacherForced QuestionDecoder::teacher_forced(Tape& tape, Var embedding, Var history,
                                                               std::span<const std::vector<text::TokenId>> framed) const {
  if (framed.size() != history.value().rows()) {
    throw ShapeError("teacher_forced: " + std::to_string(framed.size()) + " questions for " +
                     std::to_string(history.value().rows()) + " history vectors");
  }
  std::vector<std::size_t> lengths;
  for (const auto& q : framed) {
    if (q.size() < 2 || q.front() != text::kSos) throw InvalidArgument("teacher_forced: question must start with SOS");
    if (q.back() != text::kEos) throw InvalidArgument("teacher_forced: question must end with EOS");
    lengths.push_back(q.size() - 1);
  }
  auto h0 = initial_hidden(tape, history);
  auto c0 = tape.constant(Tensor::zeros(framed.size(), cell_.hidden_dim()));
  std::vector<text::TokenId> ids;
  auto run = run_packed(
      tape, cell_, lengths,
      [&](std::size_t k, std::span<const std::size_t> originals) {
        ids.clear();
        for (auto i : originals) ids.push_back(framed[i][k]);
        return text::embed_ids(ids, embedding);
      },
      &h0, &c0);
  TeacherForced out;
  for (std::size_t k = 0; k < run.h.size(); ++k) {
    for (std::size_t p = 0; p < run.active[k]; ++p) out.targets.push_back(framed[run.order[p]][k + 1]);
  }
  auto hidden = run.h.size() == 1 ? run.h[0] : num::concat(run.h, 0);
  out.logits = logits(tape, hidden);
  out.loss = num::softmax_cross_entropy(out.logits, out.targets);
  return out;
}

std::vector<text::TokenId> QuestionDecoder::greedy(Tape& tape, Var embedding, const Tensor& history,
                                                   std::size_t max_len) const {
  if (max_len < 1) throw InvalidArgument("greedy decode: max_len must be >= 1");
  LstmCell::State state{initial_hidden(tape, tape.constant(history)),
                        tape.constant(Tensor::zeros(1, cell_.hidden_dim()))};
  std::vector<text::TokenId> out;
  text::TokenId prev = text::kSos;
  while (out.size() < max_len) {
    auto x = text::embed_ids(std::span<const text::TokenId>(&prev, 1), embedding);
    state = cell_.step(tape, x, state);
    const auto& z = logits(tape, state.h).value();
    text::TokenId best = text::kEos;
    double best_v = -INFINITY;
    for (std::size_t j = 0; j < z.cols(); ++j) {
      if (j == text::kPad || j == text::kSos || j == text::kSep) continue;
      if (z[j] > best_v) {
        best_v = z[j];
        best = j;
      }
    }
    if (best == text::kEos) break;
    out.push_back(best);
    prev = best;
  }
  return out;
}

}  // namespace dvr::model
