#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "numerics/tape.hpp"

namespace dvr::text {

using TokenId = std::size_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kSos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
// Joins a question and its answer into one round sentence.
inline constexpr TokenId kSep = 4;
inline constexpr std::size_t kReservedCount = 5;

// Lowercased words with punctuation split off as separate tokens.
std::vector<std::string> tokenize(std::string_view text);
// Joins tokens with single spaces, without a space before punctuation.
std::string detokenize(const std::vector<std::string>& tokens);

struct TokenSequence {
  std::vector<TokenId> ids;
  std::string source_text;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
};

class Vocabulary {
 public:
  // Reserved tokens only.
  Vocabulary();

  // Ids assigned by (frequency desc, token asc); tokens below min_count are
  // left out and encode to UNK.
  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus, std::size_t min_count = 1);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  TokenSequence encode(std::string_view text) const;
  TokenSequence encode_tokens(const std::vector<std::string>& tokens, std::string source_text = {}) const;
  // Skips PAD/SOS/EOS; SEP renders as "|".
  std::string decode(const std::vector<TokenId>& ids) const;

  // JSON array of tokens in id order.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Rows of the embedding matrix for each id; differentiable w.r.t. the matrix.
num::Var embed_tokens(const TokenSequence& seq, num::Var embedding);
num::Var embed_ids(std::span<const TokenId> ids, num::Var embedding);

}  // namespace dvr::text
