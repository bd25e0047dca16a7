#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tecod/error.hpp"

namespace tecod::sql {

enum class TokenKind {
  Keyword,
  Identifier,
  QuotedIdentifier,
  StringLiteral,
  NumberLiteral,
  Operator,
  Punctuation,
  Whitespace,
};

std::string_view to_string(TokenKind kind) noexcept;

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const Span&, const Span&) = default;
};

struct SqlToken {
  TokenKind kind;
  std::string text;
  Span span;
};

enum class LiteralKind : std::uint8_t { Str, Num };

std::string_view to_string(LiteralKind kind) noexcept;
std::string_view placeholder(LiteralKind kind) noexcept;  // "[string]" / "[number]"

struct Literal {
  LiteralKind kind;
  std::string text;  // exact source form; Str keeps its quotes
  std::size_t slot_index = 0;
  Span span;         // position in the SQL it was extracted from

  // Str: quotes stripped and '' collapsed; Num: unchanged.
  std::string value() const;
};

struct SqlTemplate {
  std::string template_id;
  std::vector<std::string> segments;  // slots.size() + 1 entries
  std::vector<LiteralKind> slots;
  std::string source_sql;

  // Template text with "[string]"/"[number]" in place of each slot.
  std::string masked_text() const;
};

// Case-insensitive lookup in the fixed SQLite-flavoured keyword table
// (reserved words plus common function names).
bool is_keyword(std::string_view word) noexcept;

// Lossless tokenization. Throws Error{UnterminatedString, InvalidNumber,
// NonUtf8Input}.
std::vector<SqlToken> tokenize(std::string_view sql);

std::string detokenize(const std::vector<SqlToken>& tokens);

std::vector<Literal> extract_literals(const std::vector<SqlToken>& tokens);

// Whitespace-insensitive rendering used as template identity: keywords are
// lowercased (everything else too when `lowercase_all`), whitespace runs are
// dropped and re-inserted by a fixed spacing rule, literals become
// placeholders.
std::string canonical_form(const std::vector<SqlToken>& tokens, bool lowercase_all = false);

// Stable id derived from canonical_form.
std::string template_id_for(const std::vector<SqlToken>& tokens);

std::pair<SqlTemplate, std::vector<Literal>> templatize(std::string_view sql);

// Interleaves template segments with literal texts. Throws ArityMismatch or
// KindMismatch.
std::string fill(const SqlTemplate& tmpl, const std::vector<Literal>& literals);

struct PerturbStyle {
  enum class Kind { SmallCaseKeywords, PrettyFormat, RandomSpaces };
  Kind kind = Kind::SmallCaseKeywords;
  int min_spaces = 2;
  int max_spaces = 5;
  std::uint64_t seed = 0;

  static PerturbStyle small_case() { return {Kind::SmallCaseKeywords}; }
  static PerturbStyle pretty() { return {Kind::PrettyFormat}; }
  static PerturbStyle random_spaces(int lo, int hi, std::uint64_t seed) {
    return {Kind::RandomSpaces, lo, hi, seed};
  }
};

std::string perturb(std::string_view sql, const PerturbStyle& style);

// Helpers shared with other modules.
bool is_valid_utf8(std::string_view text) noexcept;
std::string ascii_lower(std::string_view text);
std::string ascii_upper(std::string_view text);
std::string ascii_title(std::string_view text);

}  // namespace tecod::sql
