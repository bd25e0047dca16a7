#include "tecod/grammar.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <sstream>
#include <utility>

#include "tecod/error.hpp"

namespace tecod::grammar {

std::string literal_regex(LiteralKind kind, bool strict) {
  if (kind == LiteralKind::Num) return R"(-?([0-9]|[1-9][0-9]+)(\.[0-9]+)?)";
  return strict ? "'[^']*'" : "'([^']|'')*'";
}

Guide::State Guide::advance(State s, std::string_view bytes) const {
  std::size_t fail_at = 0;
  auto next = dfa_.run(s, bytes, &fail_at);
  if (!next) {
    throw Error(ErrorCode::DeadState, "byte " + std::to_string(fail_at) + " leaves the guide", fail_at);
  }
  return *next;
}

bool Guide::accepts(std::string_view text) const noexcept {
  if (dfa_.empty_language()) return false;
  auto end = dfa_.run(dfa_.start(), text);
  return end && dfa_.accepting(*end);
}

namespace {

constexpr char kMagic[4] = {'T', 'C', 'D', 'G'};

void put_u16(std::ostream& out, std::uint16_t v) {
  const char buf[2] = {static_cast<char>(v & 0xFF), static_cast<char>(v >> 8)};
  out.write(buf, 2);
}

std::uint16_t get_u16(std::istream& in) {
  unsigned char buf[2];
  if (!in.read(reinterpret_cast<char*>(buf), 2)) throw Error(ErrorCode::BadFormat, "truncated guide header");
  return static_cast<std::uint16_t>(buf[0] | (buf[1] << 8));
}

}  // namespace

std::string Guide::serialize() const {
  std::ostringstream out(std::ios::binary);
  out.write(kMagic, 4);
  put_u16(out, kFormatVersion);
  out.put(static_cast<char>(kind_));
  put_u16(out, static_cast<std::uint16_t>(template_id_.size()));
  out.write(template_id_.data(), static_cast<std::streamsize>(template_id_.size()));
  dfa_.write(out);
  return out.str();
}

Guide Guide::deserialize(std::string_view bytes) {
  std::istringstream in(std::string(bytes), std::ios::binary);
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) {
    throw Error(ErrorCode::BadFormat, "not a TCDG guide file");
  }
  const auto version = get_u16(in);
  if (version != kFormatVersion) {
    throw Error(ErrorCode::BadFormat, "unsupported guide version " + std::to_string(version));
  }
  const int kind = in.get();
  if (kind < 0 || kind > static_cast<int>(GuideKind::Literal)) throw Error(ErrorCode::BadFormat, "bad guide kind");
  const auto id_len = get_u16(in);
  std::string id(id_len, '\0');
  if (!in.read(id.data(), id_len)) throw Error(ErrorCode::BadFormat, "truncated template id");
  Dfa dfa = Dfa::read(in);
  return Guide(static_cast<GuideKind>(kind), std::move(id), std::move(dfa));
}

void Guide::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  const std::string bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Guide Guide::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

namespace {

Regex whitespace_run(bool required) {
  ByteSet ws;
  for (char c : {' ', '\t', '\n', '\r'}) ws.set(static_cast<unsigned char>(c));
  return required ? re_plus(re_set(ws)) : re_star(re_set(ws));
}

bool is_word(sql::TokenKind k) {
  using sql::TokenKind;
  return k == TokenKind::Keyword || k == TokenKind::Identifier || k == TokenKind::QuotedIdentifier ||
         k == TokenKind::StringLiteral || k == TokenKind::NumberLiteral;
}

Regex keyword_alternatives(const std::string& source_spelling) {
  std::vector<std::string> forms = {sql::ascii_lower(source_spelling), sql::ascii_upper(source_spelling),
                                    sql::ascii_title(source_spelling), source_spelling};
  std::sort(forms.begin(), forms.end());
  forms.erase(std::unique(forms.begin(), forms.end()), forms.end());
  std::vector<Regex> alts;
  for (const auto& f : forms) alts.push_back(re_literal(f));
  return re_alt(std::move(alts));
}

struct SlotRules {
  Regex str;
  Regex num;
  const Regex& operator[](LiteralKind k) const { return k == LiteralKind::Str ? str : num; }
};

SlotRules parse_rules(const GuideSpec& spec) {
  auto rule = [&](LiteralKind k) {
    auto it = spec.literal_rules.find(k);
    return parse_regex(it != spec.literal_rules.end() ? it->second : literal_regex(k));
  };
  return {rule(LiteralKind::Str), rule(LiteralKind::Num)};
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; });
}

}  // namespace

Guide compile_fixed(const sql::SqlTemplate& tmpl, const GuideSpec& spec) {
  if (tmpl.slots.empty() && blank(tmpl.segments.empty() ? std::string_view{} : tmpl.segments.front())) {
    throw Error(ErrorCode::EmptyTemplate, "template has no content");
  }
  if (tmpl.segments.size() != tmpl.slots.size() + 1) {
    throw Error(ErrorCode::ArityMismatch, "segments/slots length mismatch");
  }
  const SlotRules rules = parse_rules(spec);
  std::vector<Regex> parts;
  for (std::size_t i = 0; i < tmpl.slots.size(); ++i) {
    parts.push_back(re_tag(re_literal(tmpl.segments[i]), segment_region(i)));
    parts.push_back(re_tag(rules[tmpl.slots[i]], slot_region(i)));
  }
  parts.push_back(re_tag(re_literal(tmpl.segments.back()), segment_region(tmpl.slots.size())));
  return Guide(GuideKind::Fixed, tmpl.template_id, Dfa::compile(re_concat(std::move(parts))));
}

Regex flexible_regex(const sql::SqlTemplate& tmpl, const GuideSpec& spec) {
  using sql::TokenKind;
  const auto tokens = sql::tokenize(tmpl.source_sql);
  std::vector<std::size_t> sig;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].kind != TokenKind::Whitespace) sig.push_back(i);
  }
  if (sig.empty()) throw Error(ErrorCode::EmptyTemplate, "template has no content");
  if (tokens[sig.back()].text == ";") sig.pop_back();
  if (sig.empty()) throw Error(ErrorCode::EmptyTemplate, "template is only ';'");

  const SlotRules rules = parse_rules(spec);
  std::vector<Regex> parts;
  std::size_t slot = 0;
  parts.push_back(re_tag(whitespace_run(false), segment_region(0)));
  for (std::size_t k = 0; k < sig.size(); ++k) {
    const auto& tok = tokens[sig[k]];
    if (k > 0) {
      const auto& prev = tokens[sig[k - 1]];
      const bool had_ws = sig[k] > sig[k - 1] + 1;
      const bool required = had_ws && is_word(prev.kind) && is_word(tok.kind);
      parts.push_back(re_tag(whitespace_run(required), segment_region(slot)));
    }
    switch (tok.kind) {
      case TokenKind::StringLiteral:
      case TokenKind::NumberLiteral: {
        const auto kind = tok.kind == TokenKind::StringLiteral ? LiteralKind::Str : LiteralKind::Num;
        if (slot >= tmpl.slots.size() || tmpl.slots[slot] != kind) {
          throw Error(ErrorCode::KindMismatch, "template slots disagree with its source SQL");
        }
        parts.push_back(re_tag(rules[kind], slot_region(slot)));
        ++slot;
        break;
      }
      case TokenKind::Keyword:
        parts.push_back(re_tag(keyword_alternatives(tok.text), segment_region(slot)));
        break;
      default:
        parts.push_back(re_tag(re_literal(tok.text), segment_region(slot)));
        break;
    }
  }
  if (slot != tmpl.slots.size()) throw Error(ErrorCode::ArityMismatch, "template slots disagree with its source SQL");
  // Optional trailing ';' with whitespace on either side.
  parts.push_back(re_tag(re_concat({whitespace_run(false),
                                    re_opt(re_concat({re_byte(';'), whitespace_run(false)}))}),
                         segment_region(slot)));
  return re_concat(std::move(parts));
}

Guide compile_flexible(const sql::SqlTemplate& tmpl, const GuideSpec& spec) {
  return Guide(GuideKind::Flexible, tmpl.template_id, Dfa::compile(flexible_regex(tmpl, spec)));
}

Guide compile_literal(std::string_view prefix, std::string_view rule, std::string_view suffix) {
  Regex r = re_concat({re_tag(re_literal(prefix), segment_region(0)), re_tag(parse_regex(rule), slot_region(0)),
                       re_tag(re_literal(suffix), segment_region(1))});
  return Guide(GuideKind::Literal, "", Dfa::compile(r));
}

std::size_t TokenMask::count() const noexcept {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::vector<lm::TokenId> TokenMask::ids() const {
  std::vector<lm::TokenId> out;
  for (std::size_t i = 0; i < size_; ++i) {
    if (test(static_cast<lm::TokenId>(i))) out.push_back(static_cast<lm::TokenId>(i));
  }
  return out;
}

TokenMask allowed_tokens(const Guide& guide, Guide::State state, const lm::Vocabulary& vocab) {
  TokenMask mask(vocab.size());
  const Dfa& dfa = guide.automaton();
  if (dfa.empty_language()) return mask;
  if (dfa.accepting(state)) mask.set(vocab.eos());
  const auto& trie = vocab.trie();
  std::vector<std::pair<std::uint32_t, Dfa::State>> stack{{0, state}};
  while (!stack.empty()) {
    const auto [node, s] = stack.back();
    stack.pop_back();
    for (const auto& [byte, child] : trie[node].children) {
      const Dfa::State next = dfa.step(s, byte);
      if (next == Dfa::kDead) continue;
      for (lm::TokenId id : trie[child].tokens) mask.set(id);
      if (!trie[child].children.empty()) stack.emplace_back(child, next);
    }
  }
  return mask;
}

}  // namespace tecod::grammar
