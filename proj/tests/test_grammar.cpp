#include <gtest/gtest.h>

#include <random>
#include <regex>

#include "support.hpp"
#include "tecod/grammar.hpp"

using namespace tecod;
using grammar::Guide;
using sql::LiteralKind;

namespace {

const char* kOffice = "SELECT * FROM Office WHERE Name = 'HQ' Limit 5;";

grammar::TokenMask brute_force_mask(const Guide& g, Guide::State s, const lm::Vocabulary& v) {
  grammar::TokenMask m(v.size());
  for (std::size_t id = 0; id < v.size(); ++id) {
    const auto tid = static_cast<lm::TokenId>(id);
    if (tid == v.eos()) {
      if (g.is_accepting(s)) m.set(tid);
    } else if (g.try_advance(s, v.token(tid))) {
      m.set(tid);
    }
  }
  return m;
}

bool regex_accepts(const std::string& rule, const std::string& text) {
  return grammar::compile_literal("", rule, "").accepts(text);
}

}  // namespace

TEST(FixedGuide, AcceptsExactSurfaceAndOtherLiterals) {
  const auto g = grammar::compile_fixed(sql::templatize(kOffice).first);
  EXPECT_TRUE(g.accepts(kOffice));
  EXPECT_TRUE(g.accepts("SELECT * FROM Office WHERE Name = 'Branch ''7''' Limit -12.5;"));
  EXPECT_FALSE(g.accepts("select * from office WHERE Name = 'HQ' Limit 5;"));
  EXPECT_FALSE(g.accepts("SELECT * FROM Office WHERE Name = 'HQ' Limit 5"));
  EXPECT_FALSE(g.accepts("SELECT  * FROM Office WHERE Name = 'HQ' Limit 5;"));
  EXPECT_FALSE(g.accepts("SELECT * FROM Office WHERE Name = HQ Limit 5;"));
}

TEST(FixedGuide, ZeroSlotTemplateAcceptsOneString) {
  const std::string s = "SELECT COUNT(*) FROM singer";
  const auto g = grammar::compile_fixed(sql::templatize(s).first);
  EXPECT_TRUE(g.accepts(s));
  EXPECT_FALSE(g.accepts(s + ";"));
  EXPECT_FALSE(g.accepts(s + " "));
  EXPECT_FALSE(g.accepts("select count(*) from singer"));
  // Exactly one path: every state has at most one outgoing byte.
  const auto& dfa = g.automaton();
  auto st = g.start();
  for (char c : s) {
    int live = 0;
    for (int b = 0; b < 256; ++b) live += dfa.step(st, static_cast<unsigned char>(b)) != grammar::Dfa::kDead;
    EXPECT_EQ(live, 1);
    st = dfa.step(st, static_cast<unsigned char>(c));
  }
  EXPECT_TRUE(g.is_accepting(st));
  EXPECT_FALSE(g.can_extend(st));
}

TEST(FixedGuide, EmptyTemplateIsRejected) {
  sql::SqlTemplate t;
  t.segments = {"  \n"};
  try {
    grammar::compile_fixed(t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyTemplate);
  }
  try {
    grammar::compile_flexible(t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyTemplate);
  }
}

TEST(FlexibleGuide, FormattingVariants) {
  const auto t = sql::templatize("SELECT song_name FROM singer WHERE age > 20 AND AVG(age) < 30").first;
  const auto g = grammar::compile_flexible(t);
  EXPECT_TRUE(g.accepts("SELECT song_name FROM singer WHERE age > 20 AND AVG(age) < 30"));
  EXPECT_TRUE(g.accepts("select song_name\nfrom singer\nwhere age > 41 and avg(age) < 30;"));
  EXPECT_TRUE(g.accepts("  Select song_name\tFrom singer Where age > 20 And Avg(age) < 30.5"));
  EXPECT_TRUE(g.accepts("SELECT song_name FROM singer WHERE age > 20 AND avg(age) < 30"));
  EXPECT_FALSE(g.accepts("SeLeCt song_name FROM singer WHERE age > 20 AND AVG(age) < 30"));
  EXPECT_FALSE(g.accepts("SELECT song_name FROM singers WHERE age > 20 AND AVG(age) < 30"));
  EXPECT_FALSE(g.accepts("SELECT song_name FROM Singer WHERE age > 20 AND AVG(age) < 30"));
  EXPECT_FALSE(g.accepts("SELECT song_nameFROM singer WHERE age > 20 AND AVG(age) < 30"));
  EXPECT_FALSE(g.accepts("SELECT song_name FROM singer WHERE age > 'x' AND AVG(age) < 30"));
}

TEST(FlexibleGuide, AcceptsOwnSourceAndPerturbations) {
  for (const auto& ct : tecod::testing::corpus_templates()) {
    const auto g = grammar::compile_flexible(ct.tmpl);
    const auto& src = ct.tmpl.source_sql;
    ASSERT_TRUE(g.accepts(src)) << src;
    EXPECT_TRUE(g.accepts(sql::perturb(src, sql::PerturbStyle::small_case()))) << src;
    EXPECT_TRUE(g.accepts(sql::perturb(src, sql::PerturbStyle::pretty()))) << src;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      EXPECT_TRUE(g.accepts(sql::perturb(src, sql::PerturbStyle::random_spaces(2, 5, seed)))) << src;
    }
  }
}

TEST(FixedGuide, RejectsRandomSpacesThatChangedSomething) {
  for (const auto& ct : tecod::testing::corpus_templates()) {
    const auto g = grammar::compile_fixed(ct.tmpl);
    const auto& src = ct.tmpl.source_sql;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto p = sql::perturb(src, sql::PerturbStyle::random_spaces(2, 5, seed));
      if (p != src) EXPECT_FALSE(g.accepts(p)) << p;
    }
  }
}

TEST(Advance, IdentityAndDeadState) {
  const auto g = grammar::compile_flexible(sql::templatize(kOffice).first);
  EXPECT_EQ(g.advance(g.start(), ""), g.start());
  try {
    g.advance(g.start(), "XELECT");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DeadState);
    EXPECT_EQ(e.offset(), 0u);
  }
  try {
    g.advance(g.start(), "SELECT *  FROM Offise");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.offset(), 19u);
  }
}

TEST(Advance, StepwiseOverAcceptedStringEndsAccepting) {
  std::mt19937_64 rng(3);
  for (const auto& ct : tecod::testing::corpus_templates()) {
    const auto g = grammar::compile_flexible(ct.tmpl);
    const auto text = sql::perturb(ct.tmpl.source_sql, sql::PerturbStyle::random_spaces(1, 3, rng()));
    auto s = g.start();
    std::size_t i = 0;
    while (i < text.size()) {
      const std::size_t len = 1 + rng() % 7;
      s = g.advance(s, std::string_view(text).substr(i, len));
      i += len;
    }
    EXPECT_TRUE(g.is_accepting(s));
  }
}

TEST(Mask, OnlyEosAtEndOfFixedGuide) {
  const auto vocab = tecod::testing::corpus_vocab();
  const std::string s = "SELECT COUNT(*) FROM singer";
  const auto g = grammar::compile_fixed(sql::templatize(s).first);
  const auto m = grammar::allowed_tokens(g, g.advance(g.start(), s), *vocab);
  EXPECT_EQ(m.ids(), (std::vector<lm::TokenId>{vocab->eos()}));
}

TEST(Mask, KeywordPrefixTokens) {
  const auto vocab = tecod::testing::corpus_vocab();
  const auto g = grammar::compile_fixed(sql::templatize(kOffice).first);
  const auto st = g.advance(g.start(), "SELECT *");
  const auto m = grammar::allowed_tokens(g, st, *vocab);
  EXPECT_TRUE(m.test(' '));
  EXPECT_FALSE(m.test('F'));
  EXPECT_FALSE(m.test('W'));
  EXPECT_FALSE(m.test(vocab->eos()));
  const auto st2 = g.advance(st, " ");
  const auto m2 = grammar::allowed_tokens(g, st2, *vocab);
  EXPECT_TRUE(m2.test('F'));
  EXPECT_FALSE(m2.test('W'));
  EXPECT_FALSE(m2.test('f'));
  for (auto id : m2.ids()) EXPECT_EQ(vocab->token(id).front(), 'F') << vocab->token(id);
  const auto from = vocab->longest_prefix_token(" FROM");
  ASSERT_GE(from, 0);
  if (vocab->token(from).size() > 1) EXPECT_TRUE(m.test(from));
}

TEST(Mask, TrieMatchesBruteForceOnRandomStates) {
  const auto vocab = tecod::testing::straddle_vocab();
  const auto templates = tecod::testing::corpus_templates();
  std::mt19937_64 rng(12345);
  for (int trial = 0; trial < 150; ++trial) {
    const auto& ct = templates[rng() % templates.size()];
    const bool flexible = rng() % 2;
    const auto g = flexible ? grammar::compile_flexible(ct.tmpl) : grammar::compile_fixed(ct.tmpl);
    std::string text = ct.tmpl.source_sql;
    if (flexible) text = sql::perturb(text, sql::PerturbStyle::random_spaces(1, 3, rng()));
    const std::size_t cut = rng() % (text.size() + 1);
    const auto st = g.advance(g.start(), std::string_view(text).substr(0, cut));
    ASSERT_EQ(grammar::allowed_tokens(g, st, *vocab), brute_force_mask(g, st, *vocab)) << text.substr(0, cut);
  }
}

TEST(Containment, FixedLanguageInsideFlexible) {
  std::mt19937_64 rng(8);
  const char* strs[] = {"'x'", "''", "'O''Brien'", "'2012-01-01'", "'a b c'"};
  const char* nums[] = {"0", "7", "-3", "1998", "2.5", "-0.25"};
  for (const auto& ct : tecod::testing::corpus_templates()) {
    const auto fixed = grammar::compile_fixed(ct.tmpl);
    const auto flex = grammar::compile_flexible(ct.tmpl);
    for (int k = 0; k < 5; ++k) {
      std::vector<sql::Literal> lits;
      for (std::size_t i = 0; i < ct.tmpl.slots.size(); ++i) {
        const bool is_str = ct.tmpl.slots[i] == LiteralKind::Str;
        lits.push_back({ct.tmpl.slots[i], is_str ? strs[rng() % 5] : nums[rng() % 6], i, {}});
      }
      const auto text = sql::fill(ct.tmpl, lits);
      ASSERT_TRUE(fixed.accepts(text)) << text;
      EXPECT_TRUE(flex.accepts(text)) << text;
    }
  }
}

TEST(SlotSoundness, AcceptedVariantsKeepSlotShape) {
  for (const auto& ct : tecod::testing::corpus_templates()) {
    const auto flex = grammar::compile_flexible(ct.tmpl);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto p = sql::perturb(sql::perturb(ct.tmpl.source_sql, sql::PerturbStyle::small_case()),
                                  sql::PerturbStyle::random_spaces(2, 4, seed));
      ASSERT_TRUE(flex.accepts(p));
      EXPECT_EQ(sql::templatize(p).first.slots, ct.tmpl.slots);
    }
  }
}

TEST(Serialization, TcdgRoundTripAndHeader) {
  const auto t = sql::templatize(kOffice).first;
  const auto g = grammar::compile_flexible(t);
  const auto bytes = g.serialize();
  ASSERT_GE(bytes.size(), 8u);
  EXPECT_EQ(bytes.substr(0, 4), "TCDG");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]) | (static_cast<unsigned char>(bytes[5]) << 8),
            Guide::kFormatVersion);
  const auto back = Guide::deserialize(bytes);
  EXPECT_EQ(back.template_id(), t.template_id);
  EXPECT_EQ(back.kind(), grammar::GuideKind::Flexible);
  EXPECT_EQ(back.serialize(), bytes);
  EXPECT_TRUE(back.accepts(kOffice));
  EXPECT_TRUE(back.accepts("select * from Office where Name = 'x' limit 9"));

  const auto path = std::filesystem::temp_directory_path() / "tecod_guide_roundtrip.tcdg";
  g.save(path);
  EXPECT_EQ(Guide::load(path).serialize(), bytes);
  std::filesystem::remove(path);
}

TEST(Serialization, CorruptInputIsBadFormat) {
  const auto bytes = grammar::compile_fixed(sql::templatize(kOffice).first).serialize();
  for (const std::string& bad : {std::string("TCDX") + bytes.substr(4), bytes.substr(0, bytes.size() / 2),
                                 std::string()}) {
    try {
      Guide::deserialize(bad);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::BadFormat);
    }
  }
}

TEST(Determinism, CompilingTwiceGivesIdenticalAutomata) {
  for (const auto& ct : tecod::testing::corpus_templates()) {
    EXPECT_EQ(grammar::compile_flexible(ct.tmpl).serialize(), grammar::compile_flexible(ct.tmpl).serialize());
  }
}

TEST(LiteralRegex, PatternsAreExact) {
  EXPECT_EQ(grammar::literal_regex(LiteralKind::Num), "-?([0-9]|[1-9][0-9]+)(\\.[0-9]+)?");
  EXPECT_EQ(grammar::literal_regex(LiteralKind::Str), "'([^']|'')*'");
  EXPECT_EQ(grammar::literal_regex(LiteralKind::Str, true), "'[^']*'");
  EXPECT_EQ(grammar::literal_regex(LiteralKind::Num, true), grammar::literal_regex(LiteralKind::Num));
}

TEST(LiteralRegex, NumberExamples) {
  const auto num = grammar::literal_regex(LiteralKind::Num);
  for (const char* ok : {"-3.14", "0", "120", "7", "-0", "10.05"}) EXPECT_TRUE(regex_accepts(num, ok)) << ok;
  for (const char* bad : {"007", "1.", "01", "", "-", ".5", "1e3", "+1", "1.2.3"}) {
    EXPECT_FALSE(regex_accepts(num, bad)) << bad;
  }
}

TEST(LiteralRegex, StringExamples) {
  const auto str = grammar::literal_regex(LiteralKind::Str);
  const auto strict = grammar::literal_regex(LiteralKind::Str, true);
  for (const char* ok : {"'O''Brien'", "''", "'abc'", "''''"}) EXPECT_TRUE(regex_accepts(str, ok)) << ok;
  for (const char* bad : {"'a", "abc", "'a'b'", "'"}) EXPECT_FALSE(regex_accepts(str, bad)) << bad;
  EXPECT_FALSE(regex_accepts(strict, "'O''Brien'"));
  EXPECT_TRUE(regex_accepts(strict, "'O'"));
  EXPECT_TRUE(regex_accepts(strict, "''"));
  EXPECT_FALSE(regex_accepts(strict, "''''"));
}

TEST(LiteralRegex, AgreesWithStdRegexOnRandomStrings) {
  const std::string alphabet = "0129-.'a ";
  std::mt19937_64 rng(31);
  for (bool strict : {false, true}) {
    for (auto kind : {LiteralKind::Num, LiteralKind::Str}) {
      const auto pattern = grammar::literal_regex(kind, strict);
      const std::regex oracle(pattern, std::regex::ECMAScript);
      const auto guide = grammar::compile_literal("", pattern, "");
      for (int i = 0; i < 3000; ++i) {
        std::string s;
        const std::size_t n = rng() % 8;
        for (std::size_t j = 0; j < n; ++j) s += alphabet[rng() % alphabet.size()];
        if (kind == LiteralKind::Str && rng() % 2) s = "'" + s + "'";
        ASSERT_EQ(guide.accepts(s), std::regex_match(s, oracle)) << pattern << " on [" << s << "]";
      }
    }
  }
}

TEST(LiteralRegex, LiteralGuideWithContext) {
  const auto g = grammar::compile_literal("= ", grammar::literal_regex(LiteralKind::Num), ";");
  EXPECT_TRUE(g.accepts("= 12;"));
  EXPECT_FALSE(g.accepts("= 12"));
  EXPECT_FALSE(g.accepts("= 012;"));
}

TEST(Regex, SyntaxErrors) {
  for (const char* bad : {"(ab", "[a-", "*a", "a\\"}) {
    try {
      grammar::parse_regex(bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::RegexSyntax) << bad;
    }
  }
}

TEST(Regions, SegmentAndSlotTags) {
  const auto t = sql::templatize("SELECT a FROM t WHERE x = 5 AND y = 'q'").first;
  const auto g = grammar::compile_fixed(t);
  auto s = g.advance(g.start(), "SELECT a FROM t WHERE x = ");
  EXPECT_EQ(g.automaton().region(s), grammar::segment_region(0));
  s = g.advance(s, "5");
  EXPECT_EQ(g.automaton().region(s), grammar::slot_region(0));
  s = g.advance(s, " AND y = '");
  EXPECT_EQ(g.automaton().region(s), grammar::slot_region(1));
}
