#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tecod/automaton.hpp"
#include "tecod/sql_lexer.hpp"
#include "tecod/vocabulary.hpp"

namespace tecod::grammar {

using sql::LiteralKind;

// Character-level literal patterns. Num is -?([0-9]|[1-9][0-9]+)(\.[0-9]+)?,
// Str is '([^']|'')*'; strict Str is '[^']*' (no '' escape, so generation
// cannot run away inside an "escaped" quote).
std::string literal_regex(LiteralKind kind, bool strict = false);

enum class GuideKind : std::uint8_t { Fixed, Flexible, Literal };

struct GuideSpec {
  GuideKind kind = GuideKind::Flexible;
  std::map<LiteralKind, std::string> literal_rules = default_rules();

  static std::map<LiteralKind, std::string> default_rules(bool strict_strings = false) {
    return {{LiteralKind::Str, literal_regex(LiteralKind::Str, strict_strings)},
            {LiteralKind::Num, literal_regex(LiteralKind::Num)}};
  }
  static GuideSpec fixed(bool strict_strings = false) {
    return {GuideKind::Fixed, default_rules(strict_strings)};
  }
  static GuideSpec flexible(bool strict_strings = false) {
    return {GuideKind::Flexible, default_rules(strict_strings)};
  }
};

// Region tags: segment i is 2*i, slot i is 2*i + 1.
constexpr std::uint16_t segment_region(std::size_t i) { return static_cast<std::uint16_t>(2 * i); }
constexpr std::uint16_t slot_region(std::size_t i) { return static_cast<std::uint16_t>(2 * i + 1); }

class Guide {
 public:
  using State = Dfa::State;

  Guide() = default;
  Guide(GuideKind kind, std::string template_id, Dfa dfa)
      : kind_(kind), template_id_(std::move(template_id)), dfa_(std::move(dfa)) {}

  GuideKind kind() const noexcept { return kind_; }
  const std::string& template_id() const noexcept { return template_id_; }
  const Dfa& automaton() const noexcept { return dfa_; }

  State start() const noexcept { return dfa_.start(); }
  bool is_accepting(State s) const noexcept { return dfa_.accepting(s); }
  bool can_extend(State s) const noexcept { return dfa_.has_outgoing(s); }

  std::optional<State> try_advance(State s, std::string_view bytes) const noexcept {
    return dfa_.run(s, bytes);
  }
  // Throws Error{DeadState} with the offset of the first rejected byte.
  State advance(State s, std::string_view bytes) const;
  bool accepts(std::string_view text) const noexcept;

  // Binary file: "TCDG", u16 version, u8 kind, u16 id length, id bytes,
  // then the automaton tables.
  void save(const std::filesystem::path& path) const;
  static Guide load(const std::filesystem::path& path);
  std::string serialize() const;
  static Guide deserialize(std::string_view bytes);

  static constexpr std::uint16_t kFormatVersion = 1;

 private:
  GuideKind kind_ = GuideKind::Fixed;
  std::string template_id_;
  Dfa dfa_;
};

// Throws Error{EmptyTemplate} for an all-whitespace template and
// Error{RegexSyntax} for malformed literal rules.
Guide compile_fixed(const sql::SqlTemplate& tmpl, const GuideSpec& spec = GuideSpec::fixed());
Guide compile_flexible(const sql::SqlTemplate& tmpl, const GuideSpec& spec = GuideSpec::flexible());

// Regex tree the flexible guide is built from; exposed for diagnostics.
Regex flexible_regex(const sql::SqlTemplate& tmpl, const GuideSpec& spec);

// Guide for `prefix ++ rule ++ suffix`, used for slot filling.
Guide compile_literal(std::string_view prefix, std::string_view rule, std::string_view suffix);

class TokenMask {
 public:
  explicit TokenMask(std::size_t vocab_size) : size_(vocab_size), words_((vocab_size + 63) / 64, 0) {}

  void set(lm::TokenId id) { words_[word(id)] |= bit(id); }
  bool test(lm::TokenId id) const { return (words_[word(id)] & bit(id)) != 0; }
  std::size_t size() const noexcept { return size_; }
  std::size_t count() const noexcept;
  bool empty() const noexcept { return count() == 0; }
  std::vector<lm::TokenId> ids() const;

  friend bool operator==(const TokenMask&, const TokenMask&) = default;

 private:
  static std::size_t word(lm::TokenId id) { return static_cast<std::size_t>(id) / 64; }
  static std::uint64_t bit(lm::TokenId id) { return std::uint64_t{1} << (static_cast<unsigned>(id) % 64); }

  std::size_t size_;
  std::vector<std::uint64_t> words_;
};

// Walks the vocabulary byte-trie against the automaton from `state`; a token
// is allowed iff its bytes keep the automaton live. EOS is allowed iff
// `state` is accepting.
TokenMask allowed_tokens(const Guide& guide, Guide::State state, const lm::Vocabulary& vocab);

}  // namespace tecod::grammar
