#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "text/vocab.hpp"

namespace dvr::model {

struct DialogRound {
  text::TokenSequence question;
  text::TokenSequence answer;
};

// Caption (round 0) plus the rounds answered so far.
struct DialogState {
  text::TokenSequence caption;
  std::vector<DialogRound> rounds;

  std::size_t t() const { return rounds.size(); }
  // Copy holding only the caption and the first `t` rounds.
  DialogState prefix(std::size_t t) const;
};

// Question ids, SEP, answer ids.
std::vector<text::TokenId> round_sentence(const DialogRound& round);

enum class Variant { proposed, basic, flat };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

}  // namespace dvr::model
