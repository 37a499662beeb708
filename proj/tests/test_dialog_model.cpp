#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "common/error.hpp"
#include "model/history_encoder.hpp"
#include "model/question_decoder.hpp"
#include "numerics/grad_check.hpp"

using namespace dvr;
using namespace dvr::model;
using num::Tensor;
using text::TokenId;

namespace {

constexpr std::size_t kVocab = 14;

// Plain-loop LSTM over one sequence, independent of the tape.
struct RefState {
  std::vector<double> h, c;
};

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

RefState ref_step(const LstmCell& cell, const std::vector<double>& x, const RefState& s) {
  const auto H = cell.hidden_dim();
  const auto& W = cell.weight().value;
  const auto& b = cell.bias().value;
  std::vector<double> in(x);
  in.insert(in.end(), s.h.begin(), s.h.end());
  std::vector<double> z(4 * H);
  for (std::size_t j = 0; j < 4 * H; ++j) {
    double acc = b[j];
    for (std::size_t k = 0; k < in.size(); ++k) acc += in[k] * W(k, j);
    z[j] = acc;
  }
  RefState out{std::vector<double>(H), std::vector<double>(H)};
  for (std::size_t j = 0; j < H; ++j) {
    const double i = sig(z[j]), f = sig(z[H + j]), g = std::tanh(z[2 * H + j]), o = sig(z[3 * H + j]);
    out.c[j] = f * s.c[j] + i * g;
    out.h[j] = o * std::tanh(out.c[j]);
  }
  return out;
}

std::vector<double> emb_row(const Tensor& e, TokenId id) {
  auto r = e.row_span(id);
  return {r.begin(), r.end()};
}

RefState ref_run(const LstmCell& cell, const Tensor& emb, const std::vector<TokenId>& ids, RefState s) {
  for (auto id : ids) s = ref_step(cell, emb_row(emb, id), s);
  return s;
}

RefState zero_state(std::size_t h) { return {std::vector<double>(h), std::vector<double>(h)}; }

// History vector of one state computed from the definition.
std::vector<double> ref_history(const HistoryEncoder& enc, const Tensor& emb, const DialogState& st) {
  const auto H = enc.hidden_dim();
  if (enc.variant() == Variant::flat) {
    auto s = ref_run(enc.flat_cell(), emb, st.caption.ids, zero_state(H));
    for (const auto& r : st.rounds) {
      std::vector<TokenId> seg{text::kSep};
      auto sent = round_sentence(r);
      seg.insert(seg.end(), sent.begin(), sent.end());
      s = ref_run(enc.flat_cell(), emb, seg, s);
    }
    return s.h;
  }
  std::vector<std::vector<double>> feats;
  feats.push_back(ref_run(enc.sentence_cell(), emb, st.caption.ids, zero_state(H)).h);
  for (const auto& r : st.rounds) feats.push_back(ref_run(enc.sentence_cell(), emb, round_sentence(r), zero_state(H)).h);
  auto s = zero_state(H);
  std::vector<double> first;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    s = ref_step(enc.state_cell(), feats[i], s);
    if (i == 0) first = s.h;
  }
  if (enc.variant() == Variant::basic) return s.h;
  auto out = s.h;
  out.insert(out.end(), first.begin(), first.end());
  return out;
}

text::TokenSequence random_seq(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len) {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<TokenId> tok(text::kReservedCount, kVocab - 1);
  text::TokenSequence s;
  const auto n = len(rng);
  for (std::size_t i = 0; i < n; ++i) s.ids.push_back(tok(rng));
  return s;
}

DialogState random_state(std::mt19937_64& rng, std::size_t rounds) {
  DialogState st;
  st.caption = random_seq(rng, 1, 6);
  for (std::size_t i = 0; i < rounds; ++i) st.rounds.push_back({random_seq(rng, 1, 5), random_seq(rng, 1, 3)});
  return st;
}

double max_diff(std::span<const double> a, std::span<const double> b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

struct Fixture {
  num::ParameterStore store;
  num::Parameter* emb;
  HistoryEncoder enc;
  explicit Fixture(Variant v, std::uint64_t seed = 3, std::size_t word = 5, std::size_t hidden = 4) {
    std::mt19937_64 rng(seed);
    emb = &store.add_uniform("E", "embedding", {kVocab, word}, 0.5, rng);
    enc = HistoryEncoder(store, v, word, hidden, rng);
  }
};

const Variant kVariants[] = {Variant::proposed, Variant::basic, Variant::flat};

}  // namespace

TEST_CASE("batched encoder matches a per-sequence reference") {
  for (auto v : kVariants) {
    CAPTURE(variant_name(v));
    Fixture fx(v);
    std::mt19937_64 rng(21);
    std::vector<DialogState> states;
    for (std::size_t i = 0; i < 6; ++i) states.push_back(random_state(rng, i % 4));
    std::vector<const DialogState*> ptrs;
    for (const auto& s : states) ptrs.push_back(&s);
    num::Tape tape;
    auto out = fx.enc.encode(tape, tape.leaf(*fx.emb), ptrs).value();
    CHECK(out.cols() == fx.enc.output_dim());
    for (std::size_t i = 0; i < states.size(); ++i) {
      CHECK(max_diff(out.row_span(i), ref_history(fx.enc, fx.emb->value, states[i])) < 1e-12);
    }
  }
}

TEST_CASE("prefixes, per-round encoding and the incremental cache agree") {
  for (auto v : kVariants) {
    CAPTURE(variant_name(v));
    Fixture fx(v);
    std::mt19937_64 rng(5);
    const std::size_t T = 4;
    std::vector<DialogState> states;
    for (std::size_t i = 0; i < 5; ++i) states.push_back(random_state(rng, T));
    std::vector<const DialogState*> ptrs;
    for (const auto& s : states) ptrs.push_back(&s);
    num::Tape tape;
    auto e = tape.leaf(*fx.emb);
    auto prefixes = fx.enc.encode_prefixes(tape, e, ptrs);
    REQUIRE(prefixes.size() == T + 1);
    for (std::size_t i = 0; i < states.size(); ++i) {
      auto cache = fx.enc.start(tape, e, states[i].caption);
      for (std::size_t t = 0; t <= T; ++t) {
        if (t > 0) fx.enc.extend(tape, e, cache, states[i].rounds[t - 1]);
        const auto prefix = states[i].prefix(t);
        const DialogState* one = &prefix;
        auto direct = fx.enc.encode(tape, e, std::span<const DialogState* const>(&one, 1)).value();
        CHECK(max_diff(prefixes[t].value().row_span(i), direct.row_span(0)) < 1e-12);
        CHECK(max_diff(prefixes[t].value().row_span(i), fx.enc.history(cache).row_span(0)) < 1e-9);
      }
      CHECK(cache.rounds == T);
    }
  }
}

TEST_CASE("prefix purity: later rounds never change earlier history vectors") {
  for (auto v : kVariants) {
    CAPTURE(variant_name(v));
    Fixture fx(v);
    std::mt19937_64 rng(8);
    auto a = random_state(rng, 4);
    auto b = a;
    b.rounds[2] = {random_seq(rng, 2, 5), random_seq(rng, 1, 3)};
    b.rounds[3] = {random_seq(rng, 2, 5), random_seq(rng, 1, 3)};
    num::Tape tape;
    auto e = tape.leaf(*fx.emb);
    const DialogState* pa = &a;
    const DialogState* pb = &b;
    auto ha = fx.enc.encode_prefixes(tape, e, std::span<const DialogState* const>(&pa, 1));
    auto hb = fx.enc.encode_prefixes(tape, e, std::span<const DialogState* const>(&pb, 1));
    for (std::size_t t = 0; t <= 2; ++t) CHECK(ha[t].value() == hb[t].value());
    CHECK(ha[3].value() != hb[3].value());
  }
}

TEST_CASE("encoder input validation") {
  Fixture fx(Variant::proposed);
  num::Tape tape;
  auto e = tape.leaf(*fx.emb);
  DialogState empty;
  const DialogState* p = &empty;
  CHECK_THROWS_AS(fx.enc.encode(tape, e, std::span<const DialogState* const>(&p, 1)), InvalidArgument);
  CHECK_THROWS_AS(fx.enc.encode(tape, e, std::span<const DialogState* const>()), InvalidArgument);
  std::mt19937_64 rng(1);
  auto s2 = random_state(rng, 2);
  auto s3 = random_state(rng, 3);
  std::vector<const DialogState*> mixed{&s2, &s3};
  CHECK_THROWS_AS(fx.enc.encode_prefixes(tape, e, mixed), InvalidArgument);
  CHECK_THROWS_AS(s2.prefix(3), InvalidArgument);
  CHECK(parse_variant("basic") == Variant::basic);
  CHECK_THROWS_AS(parse_variant("deep"), InvalidArgument);
}

TEST_CASE("teacher-forced loss matches a scalar recomputation") {
  for (std::size_t history_dim : {6u, 7u}) {
    CAPTURE(history_dim);
    std::mt19937_64 rng(13);
    num::ParameterStore store;
    auto& emb = store.add_uniform("E", "embedding", {kVocab, 5}, 0.5, rng);
    QuestionDecoder dec(store, history_dim, 5, 6, kVocab, rng);
    CHECK(dec.has_projection() == (history_dim != 6));
    Tensor history({3, history_dim});
    std::uniform_real_distribution<double> u(-1, 1);
    for (auto& x : history.values()) x = u(rng);
    std::vector<std::vector<TokenId>> framed;
    for (std::size_t i = 0; i < 3; ++i) framed.push_back(frame_question(random_seq(rng, 1, 6)));

    num::Tape tape;
    auto tf = dec.teacher_forced(tape, tape.leaf(emb), tape.constant(history), framed);

    // Reference: run each question alone, softmax every step.
    double total = 0.0;
    std::size_t positions = 0;
    for (std::size_t i = 0; i < 3; ++i) {
      num::Tape t2;
      auto h0 = dec.initial_hidden(t2, t2.constant(Tensor::row({history.row_span(i).begin(), history.row_span(i).end()})));
      RefState s{h0.value().data(), std::vector<double>(6)};
      for (std::size_t k = 0; k + 1 < framed[i].size(); ++k) {
        s = ref_step(dec.cell(), emb_row(emb.value, framed[i][k]), s);
        auto z = dec.logits(t2, t2.constant(Tensor::row(s.h))).value();
        double mx = -INFINITY;
        for (auto v : z.values()) mx = std::max(mx, v);
        double lse = 0.0;
        for (auto v : z.values()) lse += std::exp(v - mx);
        total += -(z[framed[i][k + 1]] - mx - std::log(lse));
        ++positions;
      }
    }
    CHECK(tf.targets.size() == positions);
    CHECK(std::abs(tf.loss.value().item() - total / static_cast<double>(positions)) < 1e-12);
  }
}

TEST_CASE("decoder probabilities are distributions") {
  std::mt19937_64 rng(2);
  num::ParameterStore store;
  QuestionDecoder dec(store, 6, 5, 6, kVocab, rng);
  Tensor hidden({4, 6});
  std::normal_distribution<double> n(0, 3);
  for (auto& x : hidden.values()) x = n(rng);
  num::Tape tape;
  auto p = dec.probabilities(tape, tape.constant(hidden)).value();
  for (std::size_t r = 0; r < 4; ++r) {
    double s = 0.0;
    for (auto v : p.row_span(r)) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("teacher-forced dialog loss gradient") {
  std::mt19937_64 rng(17);
  num::ParameterStore store;
  auto& emb = store.add_uniform("E", "embedding", {kVocab, 3}, 0.5, rng);
  HistoryEncoder enc(store, Variant::proposed, 3, 3, rng);
  QuestionDecoder dec(store, enc.output_dim(), 3, 4, kVocab, rng);
  std::vector<DialogState> states{random_state(rng, 1), random_state(rng, 2)};
  std::vector<const DialogState*> ptrs{&states[0], &states[1]};
  std::vector<std::vector<TokenId>> framed{frame_question(random_seq(rng, 1, 3)), frame_question(random_seq(rng, 1, 3))};
  auto params = store.all();
  num::GradCheckOptions opts;
  opts.max_coords_per_param = 20;
  const double err = num::grad_check(
      [&](num::Tape& t) {
        auto e = t.leaf(emb);
        return dec.teacher_forced(t, e, enc.encode(t, e, ptrs), framed).loss;
      },
      params, opts);
  CHECK(err < 1e-4);
}

TEST_CASE("greedy decoding follows the argmax of a reference loop") {
  std::mt19937_64 rng(23);
  num::ParameterStore store;
  auto& emb = store.add_uniform("E", "embedding", {kVocab, 5}, 0.8, rng);
  QuestionDecoder dec(store, 6, 5, 6, kVocab, rng);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor history({1, 6});
    for (auto& x : history.values()) x = u(rng);
    num::Tape tape;
    const auto got = dec.greedy(tape, tape.leaf(emb), history, 8);
    CHECK(got.size() <= 8);
    std::vector<TokenId> want;
    RefState s{history.data(), std::vector<double>(6)};
    TokenId prev = text::kSos;
    while (want.size() < 8) {
      s = ref_step(dec.cell(), emb_row(emb.value, prev), s);
      num::Tape t2;
      auto z = dec.logits(t2, t2.constant(Tensor::row(s.h))).value();
      std::vector<TokenId> allowed;
      for (TokenId j = 0; j < kVocab; ++j) {
        if (j != text::kPad && j != text::kSos && j != text::kSep) allowed.push_back(j);
      }
      const TokenId best =
          *std::max_element(allowed.begin(), allowed.end(), [&](TokenId a, TokenId b) { return z[a] < z[b]; });
      if (best == text::kEos) break;
      want.push_back(best);
      prev = best;
    }
    CHECK(got == want);
    for (auto id : got) {
      CHECK(id != text::kPad);
      CHECK(id != text::kSos);
      CHECK(id != text::kSep);
      CHECK(id != text::kEos);
    }
  }
  num::Tape tape;
  CHECK_THROWS_AS(dec.greedy(tape, tape.leaf(emb), Tensor({1, 6}), 0), InvalidArgument);
  CHECK_THROWS_AS(dec.greedy(tape, tape.leaf(emb), Tensor({1, 5}), 4), ShapeError);
}

TEST_CASE("teacher forcing validates framing") {
  std::mt19937_64 rng(2);
  num::ParameterStore store;
  auto& emb = store.add_uniform("E", "embedding", {kVocab, 5}, 0.5, rng);
  QuestionDecoder dec(store, 6, 5, 6, kVocab, rng);
  num::Tape tape;
  auto h = tape.constant(Tensor({1, 6}));
  std::vector<std::vector<TokenId>> no_sos{{7, 8, text::kEos}};
  std::vector<std::vector<TokenId>> no_eos{{text::kSos, 7, 8}};
  CHECK_THROWS_AS(dec.teacher_forced(tape, tape.leaf(emb), h, no_sos), InvalidArgument);
  CHECK_THROWS_AS(dec.teacher_forced(tape, tape.leaf(emb), h, no_eos), InvalidArgument);
  std::vector<std::vector<TokenId>> two{{text::kSos, text::kEos}, {text::kSos, text::kEos}};
  CHECK_THROWS_AS(dec.teacher_forced(tape, tape.leaf(emb), h, two), ShapeError);
}
