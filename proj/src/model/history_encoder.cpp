#include "model/history_encoder.hpp"

#include "common/error.hpp"

namespace dvr::model {

using num::Tape;
using num::Tensor;
using num::Var;

struct HistoryEncoder::Layout {
  // Hierarchical: caption and round sentences of every state, flattened.
  std::vector<std::vector<text::TokenId>> sentences;
  std::vector<std::size_t> offset;
  // Flat: one token stream per state and the step index closing each segment.
  std::vector<std::vector<text::TokenId>> streams;
  std::vector<std::vector<std::size_t>> boundaries;
  std::vector<std::size_t> lengths;
};

HistoryEncoder::HistoryEncoder(num::ParameterStore& store, Variant variant, std::size_t word_dim,
                               std::size_t hidden_dim, std::mt19937_64& rng)
    : variant_(variant), word_dim_(word_dim), hidden_dim_(hidden_dim) {
  if (variant == Variant::flat) {
    flat_ = LstmCell(store, "history.flat", "history_encoder", word_dim, hidden_dim, rng);
  } else {
    sentence_ = LstmCell(store, "history.sentence", "history_encoder", word_dim, hidden_dim, rng);
    state_ = LstmCell(store, "history.state", "history_encoder", hidden_dim, hidden_dim, rng);
  }
}

Var HistoryEncoder::encode_sentences(Tape& tape, Var embedding,
                                     std::span<const std::vector<text::TokenId>> sentences) const {
  if (variant_ == Variant::flat) throw InvalidArgument("flat history encoder has no sentence encoder");
  if (sentences.empty()) throw InvalidArgument("encode_sentence: no sentences");
  std::vector<std::size_t> lengths;
  lengths.reserve(sentences.size());
  for (const auto& s : sentences) {
    if (s.empty()) throw InvalidArgument("encode_sentence: empty token sequence");
    lengths.push_back(s.size());
  }
  std::vector<text::TokenId> ids;
  auto run = run_packed(tape, sentence_, lengths, [&](std::size_t k, std::span<const std::size_t> originals) {
    ids.clear();
    for (auto i : originals) ids.push_back(sentences[i][k]);
    return text::embed_ids(ids, embedding);
  });
  return run.final_h();
}

HistoryEncoder::Layout HistoryEncoder::layout(std::span<const DialogState* const> states) const {
  if (states.empty()) throw InvalidArgument("encode_history: no dialog states");
  Layout l;
  for (const auto* st : states) {
    if (st->caption.empty()) throw InvalidArgument("encode_history: caption is empty");
    if (variant_ == Variant::flat) {
      std::vector<text::TokenId> stream = st->caption.ids;
      std::vector<std::size_t> bounds{stream.size() - 1};
      for (const auto& r : st->rounds) {
        stream.push_back(text::kSep);
        const auto sent = round_sentence(r);
        stream.insert(stream.end(), sent.begin(), sent.end());
        bounds.push_back(stream.size() - 1);
      }
      l.lengths.push_back(stream.size());
      l.streams.push_back(std::move(stream));
      l.boundaries.push_back(std::move(bounds));
    } else {
      l.offset.push_back(l.sentences.size());
      l.sentences.push_back(st->caption.ids);
      for (const auto& r : st->rounds) l.sentences.push_back(round_sentence(r));
      l.lengths.push_back(st->rounds.size() + 1);
    }
  }
  return l;
}

Var HistoryEncoder::combine(Var final_h, Var first_h) const {
  if (variant_ == Variant::proposed) return num::concat({final_h, first_h}, 1);
  return final_h;
}

namespace {

PackedRun run_layout(Tape& tape, Var embedding, const HistoryEncoder& enc, const std::vector<std::size_t>& lengths,
                     const std::vector<std::vector<text::TokenId>>& streams, Var features,
                     const std::vector<std::size_t>& offset) {
  if (enc.variant() == Variant::flat) {
    std::vector<text::TokenId> ids;
    return run_packed(tape, enc.flat_cell(), lengths, [&](std::size_t k, std::span<const std::size_t> originals) {
      ids.clear();
      for (auto i : originals) ids.push_back(streams[i][k]);
      return text::embed_ids(ids, embedding);
    });
  }
  std::vector<std::size_t> rows;
  return run_packed(tape, enc.state_cell(), lengths, [&](std::size_t k, std::span<const std::size_t> originals) {
    rows.clear();
    for (auto i : originals) rows.push_back(offset[i] + k);
    return num::gather_rows(features, rows);
  });
}

}  // namespace

Var HistoryEncoder::encode(Tape& tape, Var embedding, std::span<const DialogState* const> states) const {
  const auto l = layout(states);
  const auto n = states.size();
  Var features;
  if (variant_ != Variant::flat) features = encode_sentences(tape, embedding, l.sentences);
  auto run = run_layout(tape, embedding, *this, l.lengths, l.streams, features, l.offset);
  std::vector<std::size_t> last(n);
  for (std::size_t i = 0; i < n; ++i) {
    last[i] = variant_ == Variant::flat ? l.boundaries[i].back() : l.lengths[i] - 1;
  }
  auto final_h = run.select_h(last);
  if (variant_ != Variant::proposed) return final_h;
  const std::vector<std::size_t> zeros(n, 0);
  return combine(final_h, run.select_h(zeros));
}

std::vector<Var> HistoryEncoder::encode_prefixes(Tape& tape, Var embedding,
                                                 std::span<const DialogState* const> states) const {
  const auto l = layout(states);
  const auto n = states.size();
  const auto T = states[0]->rounds.size();
  for (const auto* st : states) {
    if (st->rounds.size() != T) throw InvalidArgument("encode_prefixes: states hold different round counts");
  }
  Var features;
  if (variant_ != Variant::flat) features = encode_sentences(tape, embedding, l.sentences);
  auto run = run_layout(tape, embedding, *this, l.lengths, l.streams, features, l.offset);
  std::vector<Var> out;
  Var first;
  if (variant_ == Variant::proposed) first = run.select_h(std::vector<std::size_t>(n, 0));
  for (std::size_t t = 0; t <= T; ++t) {
    std::vector<std::size_t> steps(n);
    for (std::size_t i = 0; i < n; ++i) steps[i] = variant_ == Variant::flat ? l.boundaries[i][t] : t;
    out.push_back(combine(run.select_h(steps), first));
  }
  return out;
}

HistoryEncoder::Cache HistoryEncoder::start(Tape& tape, Var embedding, const text::TokenSequence& caption) const {
  if (caption.empty()) throw InvalidArgument("encode_history: caption is empty");
  Cache cache;
  if (variant_ == Variant::flat) {
    const std::size_t len = caption.size();
    auto run = run_packed(tape, flat_, std::span<const std::size_t>(&len, 1),
                          [&](std::size_t k, std::span<const std::size_t>) {
                            return text::embed_ids(std::span<const text::TokenId>(&caption.ids[k], 1), embedding);
                          });
    cache.h = run.h.back().value();
    cache.c = run.c.back().value();
    return cache;
  }
  const std::vector<std::vector<text::TokenId>> sent{caption.ids};
  auto f0 = encode_sentences(tape, embedding, sent);
  auto st = state_.step(tape, f0,
                        {tape.constant(Tensor::zeros(1, hidden_dim_)), tape.constant(Tensor::zeros(1, hidden_dim_))});
  cache.h = st.h.value();
  cache.c = st.c.value();
  cache.first = cache.h;
  return cache;
}

void HistoryEncoder::extend(Tape& tape, Var embedding, Cache& cache, const DialogRound& round) const {
  auto h0 = tape.constant(cache.h);
  auto c0 = tape.constant(cache.c);
  if (variant_ == Variant::flat) {
    std::vector<text::TokenId> tokens{text::kSep};
    const auto sent = round_sentence(round);
    tokens.insert(tokens.end(), sent.begin(), sent.end());
    const std::size_t len = tokens.size();
    auto run = run_packed(
        tape, flat_, std::span<const std::size_t>(&len, 1),
        [&](std::size_t k, std::span<const std::size_t>) {
          return text::embed_ids(std::span<const text::TokenId>(&tokens[k], 1), embedding);
        },
        &h0, &c0);
    cache.h = run.h.back().value();
    cache.c = run.c.back().value();
  } else {
    const std::vector<std::vector<text::TokenId>> sent{round_sentence(round)};
    auto f = encode_sentences(tape, embedding, sent);
    auto st = state_.step(tape, f, {h0, c0});
    cache.h = st.h.value();
    cache.c = st.c.value();
  }
  ++cache.rounds;
}

Tensor HistoryEncoder::history(const Cache& cache) const {
  if (variant_ != Variant::proposed) return cache.h;
  std::vector<double> v(cache.h.data());
  v.insert(v.end(), cache.first.data().begin(), cache.first.data().end());
  return Tensor::row(std::move(v));
}

}  // namespace dvr::model
