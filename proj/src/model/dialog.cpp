#include "model/dialog.hpp"

#include "common/error.hpp"

namespace dvr::model {

DialogState DialogState::prefix(std::size_t t) const {
  if (t > rounds.size()) throw InvalidArgument("dialog prefix beyond available rounds");
  DialogState out;
  out.caption = caption;
  out.rounds.assign(rounds.begin(), rounds.begin() + static_cast<std::ptrdiff_t>(t));
  return out;
}

std::vector<text::TokenId> round_sentence(const DialogRound& round) {
  std::vector<text::TokenId> ids = round.question.ids;
  ids.push_back(text::kSep);
  ids.insert(ids.end(), round.answer.ids.begin(), round.answer.ids.end());
  return ids;
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::proposed: return "proposed";
    case Variant::basic: return "basic";
    case Variant::flat: return "flat";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  if (name == "proposed") return Variant::proposed;
  if (name == "basic") return Variant::basic;
  if (name == "flat") return Variant::flat;
  throw InvalidArgument("unknown history encoder variant '" + std::string(name) + "'");
}

}  // namespace dvr::model
