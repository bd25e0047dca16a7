#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tecod/sql_lexer.hpp"

namespace tecod::nl {

using sql::LiteralKind;
using sql::Span;

struct MaskSpan {
  Span original;       // bytes of the source question that were replaced
  LiteralKind kind;
  std::size_t literal_index;  // index into the literal list given to mask_nlq
};

struct MaskedNlq {
  std::string text;
  std::string source;
  std::vector<MaskSpan> mask_spans;        // sorted by position
  std::vector<std::size_t> unmatched;      // literal indices with no mention
  std::string origin;                      // template id, when known

  // Puts the original substrings back.
  std::string unmask() const;
};

struct FuzzyHit {
  Span span;
  double score;
};

// Normalised indel similarity: 1 - (|a| + |b| - 2 LCS(a, b)) / (|a| + |b|).
double indel_similarity(std::string_view a, std::string_view b);

// Best word-aligned window of length |needle| +- 30% whose similarity to the
// needle (case-insensitive) reaches `threshold`; leftmost on ties.
std::optional<FuzzyHit> fuzzy_find(std::string_view haystack, std::string_view needle, double threshold);

inline constexpr double kDefaultFuzzyThreshold = 0.8;

// Replaces literal mentions with "[string]" / "[number]". Literals are tried
// longest first; each takes the first unconsumed case-insensitive exact
// mention (numbers also in comma-grouped form), else the best fuzzy window.
MaskedNlq mask_nlq(std::string_view nlq, const std::vector<sql::Literal>& literals,
                   double fuzzy_threshold = kDefaultFuzzyThreshold);

// Replaces digit runs and quoted spans with placeholders; used to mask a user
// question whose literals are unknown.
std::string mask_unknown_literals(std::string_view question);

}  // namespace tecod::nl
