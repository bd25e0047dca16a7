#include "tecod/sql_lexer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <random>

namespace tecod::sql {

std::string_view to_string(TokenKind kind) noexcept {
  switch (kind) {
    case TokenKind::Keyword: return "Keyword";
    case TokenKind::Identifier: return "Identifier";
    case TokenKind::QuotedIdentifier: return "QuotedIdentifier";
    case TokenKind::StringLiteral: return "StringLiteral";
    case TokenKind::NumberLiteral: return "NumberLiteral";
    case TokenKind::Operator: return "Operator";
    case TokenKind::Punctuation: return "Punctuation";
    case TokenKind::Whitespace: return "Whitespace";
  }
  return "?";
}

std::string_view to_string(LiteralKind kind) noexcept {
  return kind == LiteralKind::Str ? "str" : "num";
}

std::string_view placeholder(LiteralKind kind) noexcept {
  return kind == LiteralKind::Str ? "[string]" : "[number]";
}

std::string Literal::value() const {
  if (kind == LiteralKind::Num) return text;
  std::string out;
  for (std::size_t i = 1; i + 1 < text.size(); ++i) {
    out.push_back(text[i]);
    if (text[i] == '\'' && i + 2 < text.size() && text[i + 1] == '\'') ++i;
  }
  return out;
}

std::string SqlTemplate::masked_text() const {
  std::string out = segments.front();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    out += placeholder(slots[i]);
    out += segments[i + 1];
  }
  return out;
}

namespace {

constexpr std::string_view kKeywords[] = {
    "ABS",     "ALL",       "AND",       "AS",      "ASC",      "ASCII",   "AVG",
    "BETWEEN", "BY",        "CASE",      "CAST",    "CHAR",     "COALESCE", "COUNT",
    "CROSS",   "DATETIME",  "DELETE",    "DESC",    "DISTINCT", "ELSE",    "END",
    "EXCEPT",  "EXISTS",    "FALSE",     "FROM",    "FULL",     "GLOB",    "GROUP",
    "HAVING",  "IFNULL",    "IIF",       "IN",      "INNER",    "INSERT",  "INSTR",
    "INTEGER", "INTERSECT", "INTO",      "IS",      "JOIN",     "JULIANDAY", "LEFT",
    "LENGTH",  "LIKE",      "LIMIT",     "LOWER",   "LTRIM",    "MAX",     "MIN",
    "NATURAL", "NOT",       "NULL",      "NULLIF",  "OFFSET",   "ON",      "OR",
    "ORDER",   "OUTER",     "OVER",      "PARTITION", "REAL",   "REPLACE", "RIGHT",
    "ROUND",   "ROW_NUMBER", "RTRIM",    "SELECT",  "SET",      "STRFTIME", "SUBSTR",
    "SUM",     "THEN",      "TRIM",      "TRUE",    "UNION",    "UPDATE",  "UPPER",
    "USING",   "VALUES",    "WHEN",      "WHERE",   "WITH",
};

struct KeywordTable {
  std::vector<std::string_view> sorted{std::begin(kKeywords), std::end(kKeywords)};
  KeywordTable() { std::sort(sorted.begin(), sorted.end()); }
};

const KeywordTable& keyword_table() {
  static const KeywordTable table;
  return table;
}

bool is_space(unsigned char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r';
}
bool is_digit(unsigned char c) noexcept { return c >= '0' && c <= '9'; }
bool is_ident_start(unsigned char c) noexcept {
  return std::isalpha(c) != 0 || c == '_' || c >= 0x80;
}
bool is_ident_char(unsigned char c) noexcept {
  return is_ident_start(c) || is_digit(c) || c == '$';
}

constexpr std::array<std::string_view, 9> kTwoCharOps = {"<=", ">=", "<>", "!=", "==",
                                                         "||", "<<", ">>", "->"};
constexpr std::string_view kOneCharOps = "=<>+-*/%&|~!";

// Scans an unsigned number at `pos`; returns its end. Enforces the literal
// pattern ([0-9]|[1-9][0-9]+)(\.[0-9]+)? so every NumberLiteral can be
// regenerated by the numeric slot rule.
std::size_t scan_number(std::string_view s, std::size_t pos) {
  const std::size_t start = pos;
  while (pos < s.size() && is_digit(s[pos])) ++pos;
  if (pos - start > 1 && s[start] == '0') {
    throw Error(ErrorCode::InvalidNumber, "leading zero in number literal", start);
  }
  if (pos < s.size() && s[pos] == '.') {
    std::size_t frac = pos + 1;
    while (frac < s.size() && is_digit(s[frac])) ++frac;
    if (frac == pos + 1) {
      throw Error(ErrorCode::InvalidNumber, "number ends with '.'", start);
    }
    pos = frac;
    if (pos < s.size() && s[pos] == '.') {
      throw Error(ErrorCode::InvalidNumber, "number has more than one '.'", start);
    }
  }
  if (pos < s.size() && (is_ident_char(s[pos]))) {
    throw Error(ErrorCode::InvalidNumber, "malformed number literal", start);
  }
  return pos;
}

// Quoted run with doubled-delimiter escapes; returns end offset.
std::size_t scan_quoted(std::string_view s, std::size_t pos, char close) {
  const std::size_t start = pos;
  ++pos;
  while (pos < s.size()) {
    if (s[pos] == close) {
      if (pos + 1 < s.size() && s[pos + 1] == close && close != ']') {
        pos += 2;
        continue;
      }
      return pos + 1;
    }
    ++pos;
  }
  throw Error(ErrorCode::UnterminatedString, "unterminated quoted text", start);
}

const SqlToken* last_significant(const std::vector<SqlToken>& tokens) {
  for (auto it = tokens.rbegin(); it != tokens.rend(); ++it) {
    if (it->kind != TokenKind::Whitespace) return &*it;
  }
  return nullptr;
}

bool minus_starts_number(const std::vector<SqlToken>& tokens) {
  const SqlToken* prev = last_significant(tokens);
  if (prev == nullptr) return true;
  switch (prev->kind) {
    case TokenKind::Operator:
    case TokenKind::Keyword:
      return true;
    case TokenKind::Punctuation:
      return prev->text == "(" || prev->text == ",";
    default:
      return false;
  }
}

}  // namespace

bool is_keyword(std::string_view word) noexcept {
  if (word.empty() || word.size() > 16) return false;
  char buf[17];
  for (std::size_t i = 0; i < word.size(); ++i) {
    buf[i] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[i])));
  }
  const std::string_view upper(buf, word.size());
  const auto& table = keyword_table().sorted;
  return std::binary_search(table.begin(), table.end(), upper);
}

bool is_valid_utf8(std::string_view text) noexcept {
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= text.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(text[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    static constexpr std::uint32_t kMin[] = {0, 0x80, 0x800, 0x10000};
    if (cp < kMin[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += extra + 1;
  }
  return true;
}

std::string ascii_lower(std::string_view text) {
  std::string out(text);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string ascii_upper(std::string_view text) {
  std::string out(text);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string ascii_title(std::string_view text) {
  std::string out = ascii_lower(text);
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

std::vector<SqlToken> tokenize(std::string_view sql) {
  if (!is_valid_utf8(sql)) {
    throw Error(ErrorCode::NonUtf8Input, "input is not valid UTF-8");
  }
  std::vector<SqlToken> tokens;
  std::size_t pos = 0;
  auto emit = [&](TokenKind kind, std::size_t end) {
    tokens.push_back(SqlToken{kind, std::string(sql.substr(pos, end - pos)), Span{pos, end}});
    pos = end;
  };

  while (pos < sql.size()) {
    const auto c = static_cast<unsigned char>(sql[pos]);
    if (is_space(c)) {
      std::size_t end = pos;
      while (end < sql.size() && is_space(sql[end])) ++end;
      emit(TokenKind::Whitespace, end);
    } else if (c == '\'') {
      emit(TokenKind::StringLiteral, scan_quoted(sql, pos, '\''));
    } else if (c == '"' || c == '`') {
      emit(TokenKind::QuotedIdentifier, scan_quoted(sql, pos, static_cast<char>(c)));
    } else if (c == '[') {
      emit(TokenKind::QuotedIdentifier, scan_quoted(sql, pos, ']'));
    } else if (is_digit(c)) {
      emit(TokenKind::NumberLiteral, scan_number(sql, pos));
    } else if (c == '-' && pos + 1 < sql.size() && is_digit(sql[pos + 1]) &&
               minus_starts_number(tokens)) {
      emit(TokenKind::NumberLiteral, scan_number(sql, pos + 1));
    } else if (is_ident_start(c)) {
      std::size_t end = pos;
      while (end < sql.size() && is_ident_char(sql[end])) ++end;
      const bool kw = is_keyword(sql.substr(pos, end - pos));
      emit(kw ? TokenKind::Keyword : TokenKind::Identifier, end);
    } else {
      const std::string_view two = sql.substr(pos, 2);
      if (std::find(kTwoCharOps.begin(), kTwoCharOps.end(), two) != kTwoCharOps.end()) {
        emit(TokenKind::Operator, pos + 2);
      } else if (kOneCharOps.find(static_cast<char>(c)) != std::string_view::npos) {
        emit(TokenKind::Operator, pos + 1);
      } else {
        // ( ) , ; . and any other stray symbol.
        emit(TokenKind::Punctuation, pos + 1);
      }
    }
  }
  return tokens;
}

std::string detokenize(const std::vector<SqlToken>& tokens) {
  std::string out;
  for (const auto& t : tokens) out += t.text;
  return out;
}

std::vector<Literal> extract_literals(const std::vector<SqlToken>& tokens) {
  std::vector<Literal> literals;
  for (const auto& t : tokens) {
    if (t.kind == TokenKind::StringLiteral || t.kind == TokenKind::NumberLiteral) {
      const auto kind = t.kind == TokenKind::StringLiteral ? LiteralKind::Str : LiteralKind::Num;
      literals.push_back(Literal{kind, t.text, literals.size(), t.span});
    }
  }
  return literals;
}

std::string canonical_form(const std::vector<SqlToken>& tokens, bool lowercase_all) {
  std::string out;
  const SqlToken* prev = nullptr;
  for (const auto& t : tokens) {
    if (t.kind == TokenKind::Whitespace) continue;
    if (prev != nullptr) {
      const bool glue = prev->text == "(" || prev->text == "." || t.text == ")" ||
                        t.text == "," || t.text == "." || t.text == ";" || t.text == "(";
      if (!glue) out.push_back(' ');
    }
    switch (t.kind) {
      case TokenKind::StringLiteral: out += placeholder(LiteralKind::Str); break;
      case TokenKind::NumberLiteral: out += placeholder(LiteralKind::Num); break;
      case TokenKind::Keyword: out += ascii_lower(t.text); break;
      default: out += lowercase_all ? ascii_lower(t.text) : t.text; break;
    }
    prev = &t;
  }
  // A trailing ';' does not change the parametric query.
  if (!out.empty() && out.back() == ';') out.pop_back();
  return out;
}

std::string template_id_for(const std::vector<SqlToken>& tokens) {
  const std::string key = canonical_form(tokens);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "t%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::pair<SqlTemplate, std::vector<Literal>> templatize(std::string_view sql) {
  const auto tokens = tokenize(sql);
  auto literals = extract_literals(tokens);
  SqlTemplate tmpl;
  tmpl.template_id = template_id_for(tokens);
  tmpl.source_sql = std::string(sql);
  std::size_t cursor = 0;
  for (const auto& lit : literals) {
    tmpl.segments.emplace_back(sql.substr(cursor, lit.span.begin - cursor));
    tmpl.slots.push_back(lit.kind);
    cursor = lit.span.end;
  }
  tmpl.segments.emplace_back(sql.substr(cursor));
  return {std::move(tmpl), std::move(literals)};
}

std::string fill(const SqlTemplate& tmpl, const std::vector<Literal>& literals) {
  if (literals.size() != tmpl.slots.size() || tmpl.segments.size() != tmpl.slots.size() + 1) {
    throw Error(ErrorCode::ArityMismatch, "template has " + std::to_string(tmpl.slots.size()) +
                                              " slots, got " + std::to_string(literals.size()) +
                                              " literals");
  }
  std::string out = tmpl.segments.front();
  for (std::size_t i = 0; i < literals.size(); ++i) {
    if (literals[i].kind != tmpl.slots[i]) {
      throw Error(ErrorCode::KindMismatch, "slot " + std::to_string(i) + " expects " +
                                               std::string(to_string(tmpl.slots[i])));
    }
    out += literals[i].text;
    out += tmpl.segments[i + 1];
  }
  return out;
}

namespace {

bool is_major_clause(const std::vector<SqlToken>& tokens, std::size_t i) {
  if (tokens[i].kind != TokenKind::Keyword) return false;
  const std::string up = ascii_upper(tokens[i].text);
  if (up == "SELECT" || up == "FROM" || up == "WHERE" || up == "LIMIT" || up == "HAVING") {
    return true;
  }
  if (up == "GROUP" || up == "ORDER") {
    for (std::size_t j = i + 1; j < tokens.size(); ++j) {
      if (tokens[j].kind == TokenKind::Whitespace) continue;
      return ascii_upper(tokens[j].text) == "BY";
    }
  }
  return false;
}

std::string pretty_format(const std::vector<SqlToken>& tokens) {
  std::string out;
  int depth = 0;
  bool pending_ws = false;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    if (t.kind == TokenKind::Whitespace) {
      pending_ws = true;
      continue;
    }
    if (!out.empty() && is_major_clause(tokens, i)) {
      out += '\n';
      out.append(static_cast<std::size_t>(4 * depth), ' ');
    } else if (!out.empty() && t.kind == TokenKind::Keyword &&
               (ascii_upper(t.text) == "AND" || ascii_upper(t.text) == "OR") && pending_ws) {
      out += '\n';
      out.append(static_cast<std::size_t>(4 * (depth + 1)), ' ');
    } else if (pending_ws && !out.empty()) {
      out += ' ';
    }
    pending_ws = false;
    out += t.text;
    if (t.text == "(") ++depth;
    if (t.text == ")" && depth > 0) --depth;
  }
  if (pending_ws) out += tokens.back().text;
  return out;
}

}  // namespace

std::string perturb(std::string_view sql, const PerturbStyle& style) {
  const auto tokens = tokenize(sql);
  std::string out;
  switch (style.kind) {
    case PerturbStyle::Kind::SmallCaseKeywords:
      for (const auto& t : tokens) out += t.kind == TokenKind::Keyword ? ascii_lower(t.text) : t.text;
      return out;
    case PerturbStyle::Kind::PrettyFormat:
      return pretty_format(tokens);
    case PerturbStyle::Kind::RandomSpaces: {
      const int lo = std::min(style.min_spaces, style.max_spaces);
      const int hi = std::max(style.min_spaces, style.max_spaces);
      std::mt19937_64 rng(style.seed);
      const auto span = static_cast<std::uint64_t>(hi - lo + 1);
      for (const auto& t : tokens) {
        if (t.kind == TokenKind::Whitespace && t.text == " ") {
          const auto n = static_cast<std::size_t>(lo) + static_cast<std::size_t>(rng() % span);
          out.append(n, ' ');
        } else {
          out += t.text;
        }
      }
      return out;
    }
  }
  return std::string(sql);
}

}  // namespace tecod::sql
