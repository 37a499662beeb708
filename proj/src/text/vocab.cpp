#include "text/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include <json.hpp>

#include "common/error.hpp"

namespace dvr::text {

namespace {

const std::vector<std::string> kReservedNames = {"<pad>", "<sos>", "<eos>", "<unk>", "<sep>"};

bool is_punct(unsigned char c) { return c < 128 && std::ispunct(c); }
bool is_space(unsigned char c) { return c < 128 && std::isspace(c); }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_space(c)) {
      flush();
    } else if (is_punct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(c < 128 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return out;
}

std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    const bool punct = t.size() == 1 && t[0] != '|' && is_punct(static_cast<unsigned char>(t[0]));
    if (!out.empty() && !punct) out.push_back(' ');
    out += t;
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (const auto& name : kReservedNames) {
    index_.emplace(name, tokens_.size());
    tokens_.push_back(name);
  }
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus, std::size_t min_count) {
  if (min_count < 1) throw InvalidArgument("build_vocab: min_count must be >= 1");
  std::map<std::string, std::size_t> freq;
  for (const auto& seq : corpus) {
    for (const auto& t : seq) ++freq[t];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (const auto& [tok, n] : ranked) {
    if (n < min_count || v.index_.contains(tok)) continue;
    v.index_.emplace(tok, v.tokens_.size());
    v.tokens_.push_back(tok);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kReservedCount) throw InvalidArgument("vocabulary is missing reserved tokens");
  for (std::size_t i = 0; i < kReservedCount; ++i) {
    if (tokens[i] != kReservedNames[i]) throw InvalidArgument("vocabulary reserved token mismatch at id " + std::to_string(i));
  }
  Vocabulary v;
  v.tokens_.clear();
  v.index_.clear();
  for (auto& t : tokens) {
    if (!v.index_.emplace(t, v.tokens_.size()).second) throw InvalidArgument("duplicate vocabulary token '" + t + "'");
    v.tokens_.push_back(std::move(t));
  }
  return v;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size()) throw InvalidArgument("token id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.contains(std::string(token)); }

TokenSequence Vocabulary::encode(std::string_view text) const { return encode_tokens(tokenize(text), std::string(text)); }

TokenSequence Vocabulary::encode_tokens(const std::vector<std::string>& tokens, std::string source_text) const {
  TokenSequence seq;
  seq.source_text = std::move(source_text);
  seq.ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    const auto id = this->id(t);
    // Tokenized text can never produce a reserved entry.
    seq.ids.push_back(id < kReservedCount ? kUnk : id);
  }
  return seq;
}

std::string Vocabulary::decode(const std::vector<TokenId>& ids) const {
  std::vector<std::string> words;
  for (auto id : ids) {
    if (id == kPad || id == kSos || id == kEos) continue;
    words.push_back(id == kSep ? "|" : token(id));
  }
  return detokenize(words);
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary to '" + path.string() + "'");
  out << nlohmann::json(tokens_).dump(1) << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read vocabulary '" + path.string() + "'");
  try {
    return from_tokens(nlohmann::json::parse(in).get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed vocabulary '" + path.string() + "': " + e.what());
  }
}

num::Var embed_ids(std::span<const TokenId> ids, num::Var embedding) {
  const auto rows = embedding.value().rows();
  for (auto id : ids) {
    if (id >= rows) {
      throw InvalidArgument("embed_tokens: id " + std::to_string(id) + " out of range for vocabulary of " +
                            std::to_string(rows));
    }
  }
  return num::gather_rows(embedding, ids);
}

num::Var embed_tokens(const TokenSequence& seq, num::Var embedding) { return embed_ids(seq.ids, embedding); }

}  // namespace dvr::text
