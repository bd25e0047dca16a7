#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace tecod::lm {

using TokenId = std::int32_t;

// Byte-level vocabulary: ids 0..255 are the single bytes, 256 is EOS, and
// learned merges follow from 257. EOS has no bytes and never enters the trie.
class Vocabulary {
 public:
  struct TrieNode {
    std::vector<std::pair<std::uint8_t, std::uint32_t>> children;  // sorted by byte
    std::vector<TokenId> tokens;                                   // ids spelled by this path
  };

  static constexpr TokenId kByteTokens = 256;

  Vocabulary(std::vector<std::string> tokens, TokenId eos,
             std::vector<std::pair<TokenId, TokenId>> merges = {});

  std::size_t size() const noexcept { return tokens_.size(); }
  TokenId eos() const noexcept { return eos_; }
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::vector<std::pair<TokenId, TokenId>>& merges() const noexcept { return merges_; }
  const std::vector<TrieNode>& trie() const noexcept { return trie_; }

  // BPE encoding: bytes first, then merges applied in rank order.
  std::vector<TokenId> encode(std::string_view text) const;
  // EOS ids are skipped.
  std::string decode(std::span<const TokenId> ids) const;

  // Longest token spelling a prefix of `text`; -1 when none.
  TokenId longest_prefix_token(std::string_view text) const;

  // Content hash; two vocabularies with equal identity are interchangeable.
  const std::string& identity() const noexcept { return identity_; }

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> tokens_;
  TokenId eos_;
  std::vector<std::pair<TokenId, TokenId>> merges_;
  std::map<std::pair<TokenId, TokenId>, std::pair<std::size_t, TokenId>> merge_rank_;
  std::vector<TrieNode> trie_;
  std::string identity_;
};

// Byte base plus `merges` greedy most-frequent-pair merges learned over the
// corpus lines (no pre-tokenization, so merges may cross spaces and
// punctuation, e.g. "1;" or " FROM").
Vocabulary build_vocab(const std::vector<std::string>& corpus, int merges);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

}  // namespace tecod::lm
