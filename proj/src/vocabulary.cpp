#include "tecod/vocabulary.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

#include "tecod/error.hpp"

namespace tecod::lm {

namespace {

std::string fnv_hex(const std::vector<std::string>& tokens, TokenId eos) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (const auto& t : tokens) {
    for (unsigned char c : t) mix(c);
    mix(0xFF);
    mix(0x00);
  }
  for (int i = 0; i < 4; ++i) mix(static_cast<unsigned char>((eos >> (8 * i)) & 0xFF));
  char buf[24];
  std::snprintf(buf, sizeof(buf), "v%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> tokens, TokenId eos,
                       std::vector<std::pair<TokenId, TokenId>> merges)
    : tokens_(std::move(tokens)), eos_(eos), merges_(std::move(merges)) {
  if (eos_ < 0 || static_cast<std::size_t>(eos_) >= tokens_.size()) {
    throw Error(ErrorCode::BadFormat, "EOS id out of range");
  }
  if (!tokens_[static_cast<std::size_t>(eos_)].empty()) {
    throw Error(ErrorCode::BadFormat, "EOS must not carry bytes");
  }
  trie_.emplace_back();
  for (std::size_t id = 0; id < tokens_.size(); ++id) {
    if (static_cast<TokenId>(id) == eos_) continue;
    const auto& t = tokens_[id];
    if (t.empty()) throw Error(ErrorCode::BadFormat, "empty token at id " + std::to_string(id));
    std::uint32_t node = 0;
    for (unsigned char c : t) {
      auto& kids = trie_[node].children;
      auto it = std::lower_bound(kids.begin(), kids.end(), c,
                                 [](const auto& p, std::uint8_t b) { return p.first < b; });
      if (it != kids.end() && it->first == c) {
        node = it->second;
      } else {
        const auto child = static_cast<std::uint32_t>(trie_.size());
        kids.insert(it, {c, child});
        trie_.emplace_back();
        node = child;
      }
    }
    trie_[node].tokens.push_back(static_cast<TokenId>(id));
  }
  for (std::size_t rank = 0; rank < merges_.size(); ++rank) {
    const auto [a, b] = merges_[rank];
    const std::string joined = token(a) + token(b);
    // build_vocab places merge r at id 257 + r; other layouts are searched.
    auto result = static_cast<TokenId>(kByteTokens + 1 + rank);
    if (static_cast<std::size_t>(result) >= tokens_.size() || tokens_[static_cast<std::size_t>(result)] != joined) {
      result = -1;
      for (std::size_t id = 0; id < tokens_.size(); ++id) {
        if (tokens_[id] == joined && static_cast<TokenId>(id) != eos_) {
          result = static_cast<TokenId>(id);
          break;
        }
      }
    }
    if (result < 0) throw Error(ErrorCode::BadFormat, "merge without a token");
    merge_rank_.emplace(merges_[rank], std::make_pair(rank, result));
  }
  identity_ = fnv_hex(tokens_, eos_);
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  ids.reserve(text.size());
  for (unsigned char c : text) {
    if (c < tokens_.size() && tokens_[c].size() == 1 && static_cast<unsigned char>(tokens_[c][0]) == c) {
      ids.push_back(static_cast<TokenId>(c));
    } else {
      // Non-standard layout: fall back to a trie lookup for the single byte.
      const TokenId t = longest_prefix_token(std::string_view(reinterpret_cast<const char*>(&c), 1));
      if (t < 0) throw Error(ErrorCode::TargetNotTokenizable, "byte not in vocabulary");
      ids.push_back(t);
    }
  }
  if (merge_rank_.empty()) return ids;
  while (ids.size() > 1) {
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    TokenId best_result = -1;
    std::pair<TokenId, TokenId> best_pair{};
    for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
      auto it = merge_rank_.find({ids[i], ids[i + 1]});
      if (it != merge_rank_.end() && it->second.first < best_rank) {
        best_rank = it->second.first;
        best_result = it->second.second;
        best_pair = it->first;
      }
    }
    if (best_result < 0) break;
    std::vector<TokenId> merged;
    merged.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i + 1 < ids.size() && ids[i] == best_pair.first && ids[i + 1] == best_pair.second) {
        merged.push_back(best_result);
        ++i;
      } else {
        merged.push_back(ids[i]);
      }
    }
    ids.swap(merged);
  }
  return ids;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id == eos_) continue;
    out += token(id);
  }
  return out;
}

TokenId Vocabulary::longest_prefix_token(std::string_view text) const {
  TokenId best = -1;
  std::uint32_t node = 0;
  for (unsigned char c : text) {
    const auto& kids = trie_[node].children;
    auto it = std::lower_bound(kids.begin(), kids.end(), c,
                               [](const auto& p, std::uint8_t b) { return p.first < b; });
    if (it == kids.end() || it->first != c) break;
    node = it->second;
    if (!trie_[node].tokens.empty()) best = trie_[node].tokens.front();
  }
  return best;
}

namespace {
bool printable(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return u >= 0x20 && u < 0x7F;
  });
}
}  // namespace

nlohmann::json Vocabulary::to_json() const {
  nlohmann::json toks = nlohmann::json::array();
  for (const auto& t : tokens_) {
    if (printable(t)) {
      toks.push_back(t);
    } else {
      toks.push_back({{"base64", base64_encode(t)}});
    }
  }
  nlohmann::json merges = nlohmann::json::array();
  for (const auto& [a, b] : merges_) merges.push_back({a, b});
  return {{"format", "tecod-vocab/1"}, {"eos", eos_}, {"tokens", toks}, {"merges", merges}};
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  try {
    std::vector<std::string> tokens;
    for (const auto& t : j.at("tokens")) {
      if (t.is_string()) {
        tokens.push_back(t.get<std::string>());
      } else {
        tokens.push_back(base64_decode(t.at("base64").get<std::string>()));
      }
    }
    std::vector<std::pair<TokenId, TokenId>> merges;
    for (const auto& m : j.at("merges")) merges.emplace_back(m.at(0).get<TokenId>(), m.at(1).get<TokenId>());
    return Vocabulary(std::move(tokens), j.at("eos").get<TokenId>(), std::move(merges));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadFormat, std::string("vocabulary json: ") + e.what());
  }
}

Vocabulary build_vocab(const std::vector<std::string>& corpus, int merges) {
  std::vector<std::string> tokens;
  tokens.reserve(257 + static_cast<std::size_t>(std::max(merges, 0)));
  for (int b = 0; b < 256; ++b) tokens.emplace_back(1, static_cast<char>(b));
  tokens.emplace_back();  // EOS
  const TokenId eos = 256;

  std::vector<std::vector<TokenId>> seqs;
  seqs.reserve(corpus.size());
  for (const auto& line : corpus) {
    std::vector<TokenId> s;
    for (unsigned char c : line) s.push_back(c);
    seqs.push_back(std::move(s));
  }

  std::vector<std::pair<TokenId, TokenId>> learned;
  for (int m = 0; m < merges; ++m) {
    std::map<std::pair<TokenId, TokenId>, std::size_t> counts;
    for (const auto& s : seqs) {
      for (std::size_t i = 0; i + 1 < s.size(); ++i) ++counts[{s[i], s[i + 1]}];
    }
    // Most frequent pair; ties go to the smallest (a, b) since the map is ordered.
    std::pair<TokenId, TokenId> best{};
    std::size_t best_count = 1;
    for (const auto& [pair, count] : counts) {
      if (count > best_count) {
        best = pair;
        best_count = count;
      }
    }
    if (best_count < 2) break;
    const auto id = static_cast<TokenId>(tokens.size());
    tokens.push_back(tokens[static_cast<std::size_t>(best.first)] +
                     tokens[static_cast<std::size_t>(best.second)]);
    learned.push_back(best);
    for (auto& s : seqs) {
      std::vector<TokenId> merged;
      merged.reserve(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (i + 1 < s.size() && s[i] == best.first && s[i + 1] == best.second) {
          merged.push_back(id);
          ++i;
        } else {
          merged.push_back(s[i]);
        }
      }
      s.swap(merged);
    }
  }
  return Vocabulary(std::move(tokens), eos, std::move(learned));
}

namespace {
constexpr std::string_view kB64 = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(std::string_view bytes) {
  std::string out;
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const auto v = (static_cast<unsigned>(static_cast<unsigned char>(bytes[i])) << 16) |
                   (static_cast<unsigned>(static_cast<unsigned char>(bytes[i + 1])) << 8) |
                   static_cast<unsigned>(static_cast<unsigned char>(bytes[i + 2]));
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += kB64[(v >> 6) & 63];
    out += kB64[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest > 0) {
    unsigned v = static_cast<unsigned>(static_cast<unsigned char>(bytes[i])) << 16;
    if (rest == 2) v |= static_cast<unsigned>(static_cast<unsigned char>(bytes[i + 1])) << 8;
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += rest == 2 ? kB64[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::string base64_decode(std::string_view text) {
  std::string out;
  unsigned buffer = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const auto pos = kB64.find(c);
    if (pos == std::string_view::npos) throw Error(ErrorCode::BadFormat, "invalid base64");
    buffer = (buffer << 6) | static_cast<unsigned>(pos);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out += static_cast<char>((buffer >> bits) & 0xFF);
    }
  }
  return out;
}

}  // namespace tecod::lm
