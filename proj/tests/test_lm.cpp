#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "support.hpp"
#include "tecod/decoder.hpp"
#include "tecod/grammar.hpp"
#include "tecod/language_model.hpp"
#include "tecod/vocabulary.hpp"

using namespace tecod;
using lm::TokenId;

namespace {

// Reference BPE: apply each merge, in rank order, left to right over the
// whole sequence.
std::vector<TokenId> reference_encode(const lm::Vocabulary& v, const std::string& text) {
  std::vector<TokenId> ids;
  for (unsigned char c : text) ids.push_back(c);
  for (std::size_t r = 0; r < v.merges().size(); ++r) {
    const auto [a, b] = v.merges()[r];
    const TokenId merged = static_cast<TokenId>(lm::Vocabulary::kByteTokens + 1 + r);
    std::vector<TokenId> out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i + 1 < ids.size() && ids[i] == a && ids[i + 1] == b) {
        out.push_back(merged);
        ++i;
      } else {
        out.push_back(ids[i]);
      }
    }
    ids = std::move(out);
  }
  return ids;
}

double sum(const std::vector<double>& d) { return std::accumulate(d.begin(), d.end(), 0.0); }

TokenId argmax(const std::vector<double>& d) {
  return static_cast<TokenId>(std::max_element(d.begin(), d.end()) - d.begin());
}

std::string unconstrained_greedy(const lm::LanguageModel& m, const std::string& prompt, std::size_t limit) {
  auto st = m.start(m.encode(prompt));
  for (std::size_t i = 0; i < limit; ++i) {
    const TokenId t = argmax(m.next_dist(st));
    if (t == m.vocab().eos()) break;
    m.absorb(st, std::vector<TokenId>{t});
  }
  return st.generated;
}

}  // namespace

TEST(BuildVocab, NoMergesGivesBytesPlusEos) {
  const auto v = lm::build_vocab({"SELECT 1;"}, 0);
  EXPECT_EQ(v.size(), 257u);
  EXPECT_EQ(v.eos(), 256);
  for (int b = 0; b < 256; ++b) EXPECT_EQ(v.token(b), std::string(1, static_cast<char>(b)));
  EXPECT_TRUE(v.token(v.eos()).empty());
}

TEST(BuildVocab, DenseIdsAndNonEmptyTokens) {
  const auto v = tecod::testing::corpus_vocab();
  EXPECT_EQ(v->size(), 257u + v->merges().size());
  EXPECT_LE(v->merges().size(), 200u);
  for (std::size_t i = 0; i < v->size(); ++i) {
    if (static_cast<TokenId>(i) != v->eos()) EXPECT_FALSE(v->token(static_cast<TokenId>(i)).empty());
  }
  for (std::size_t r = 0; r < v->merges().size(); ++r) {
    const auto [a, b] = v->merges()[r];
    EXPECT_EQ(v->token(static_cast<TokenId>(257 + r)), v->token(a) + v->token(b));
  }
}

TEST(BuildVocab, SeededCorpusLearnsDigitSemicolonToken) {
  const auto v = tecod::testing::straddle_vocab();
  bool found = false;
  for (const auto& t : v->tokens()) found |= t.find("1;") != std::string::npos;
  EXPECT_TRUE(found);
  const auto ids = v->encode("SELECT a FROM t LIMIT 1;");
  EXPECT_NE(v->token(ids.back()).find("1;"), std::string::npos) << v->token(ids.back());
}

TEST(BuildVocab, LearnsKeywordTokensWithLeadingSpace) {
  const auto v = tecod::testing::corpus_vocab();
  EXPECT_EQ(v->token(v->longest_prefix_token(" FROM")).substr(0, 2), " F");
  EXPECT_GT(v->token(v->longest_prefix_token(" FROM")).size(), 2u);
}

TEST(Encode, RoundTripAndReferenceAgreement) {
  const auto v = tecod::testing::straddle_vocab();
  tecod::testing::SqlGenerator gen(4);
  auto lines = tecod::testing::corpus_sql();
  for (int i = 0; i < 100; ++i) lines.push_back(gen.next());
  lines.push_back(std::string("bytes \x01\xff\n\t", 10));
  for (const auto& line : lines) {
    const auto ids = v->encode(line);
    ASSERT_EQ(v->decode(ids), line);
    ASSERT_EQ(ids, reference_encode(*v, line)) << line;
  }
}

TEST(Encode, DecodeSkipsEos) {
  const auto v = lm::build_vocab({"ab"}, 1);
  const std::vector<TokenId> ids{'a', v.eos(), 'b', v.eos()};
  EXPECT_EQ(v.decode(ids), "ab");
}

TEST(VocabJson, RoundTripWithBase64ForControlBytes) {
  const auto v = tecod::testing::straddle_vocab();
  const auto j = v->to_json();
  EXPECT_EQ(j.at("tokens").at(0).at("base64").get<std::string>(), lm::base64_encode(std::string(1, '\0')));
  EXPECT_EQ(j.at("tokens").at('A').get<std::string>(), "A");
  const auto back = lm::Vocabulary::from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.tokens(), v->tokens());
  EXPECT_EQ(back.merges(), v->merges());
  EXPECT_EQ(back.identity(), v->identity());
}

TEST(VocabJson, Base64KnownVectors) {
  EXPECT_EQ(lm::base64_encode(""), "");
  EXPECT_EQ(lm::base64_encode("f"), "Zg==");
  EXPECT_EQ(lm::base64_encode("fo"), "Zm8=");
  EXPECT_EQ(lm::base64_encode("foobar"), "Zm9vYmFy");
  EXPECT_EQ(lm::base64_decode("Zm9vYg=="), "foob");
  EXPECT_THROW(lm::base64_decode("Z!=="), Error);
}

TEST(VocabJson, MalformedIsBadFormat) {
  try {
    lm::Vocabulary::from_json(nlohmann::json::parse(R"({"tokens": ["a"], "eos": 3, "merges": []})"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadFormat);
  }
}

TEST(ScriptedLm, GreedyReproducesTargetUnconstrained) {
  const auto v = tecod::testing::corpus_vocab();
  for (const auto& sql : tecod::testing::corpus_sql()) {
    lm::ScriptedLm m(v, sql);
    EXPECT_EQ(unconstrained_greedy(m, "-- prompt\n", 2000), sql);
  }
}

TEST(ScriptedLm, DistributionShape) {
  const auto v = tecod::testing::corpus_vocab();
  const std::string target = "SELECT name FROM singer";
  lm::ScriptedLm m(v, target);
  auto st = m.start(m.encode("q"));
  const auto d = m.next_dist(st);
  EXPECT_NEAR(sum(d), 1.0, 1e-9);
  const TokenId pref = v->longest_prefix_token(target);
  EXPECT_NEAR(d[static_cast<std::size_t>(pref)], 0.9, 1e-12);
  EXPECT_NEAR(d[0], 0.1 / static_cast<double>(v->size() - 1), 1e-15);

  m.absorb(st, m.encode("SELECT nombre"));
  const auto off = m.next_dist(st);
  for (double p : off) EXPECT_NEAR(p, 1.0 / static_cast<double>(v->size()), 1e-15);

  auto done = m.start(m.encode("q"));
  m.absorb(done, m.encode(target));
  EXPECT_EQ(argmax(m.next_dist(done)), v->eos());
}

TEST(ScriptedLm, ScriptKeysSelectTargets) {
  const auto v = tecod::testing::corpus_vocab();
  lm::ScriptedLm m(v, {{"first", "SELECT 1"}, {"second", "SELECT 2"}}, "SELECT 0");
  EXPECT_EQ(unconstrained_greedy(m, "the second question", 50), "SELECT 2");
  EXPECT_EQ(unconstrained_greedy(m, "the first question", 50), "SELECT 1");
  EXPECT_EQ(unconstrained_greedy(m, "other", 50), "SELECT 0");
  EXPECT_NE(m.id(), lm::ScriptedLm(v, "SELECT 0").id());
}

TEST(ScriptedLm, TargetNotTokenizable) {
  auto v = std::make_shared<const lm::Vocabulary>(std::vector<std::string>{"a", "b", ""}, 2);
  try {
    lm::ScriptedLm m(v, "abc");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TargetNotTokenizable);
    EXPECT_EQ(e.offset(), 2u);
  }
}

TEST(ScriptedLm, MaskedGreedyTakesBestAllowedToken) {
  const auto v = tecod::testing::corpus_vocab();
  lm::ScriptedLm m(v, "DROP TABLE singer");
  const auto g = grammar::compile_fixed(sql::templatize("SELECT name FROM singer").first);
  const auto d = m.next_dist(m.start(m.encode("q")));
  const auto mask = grammar::allowed_tokens(g, g.start(), *v);
  ASSERT_FALSE(mask.test(argmax(d)));
  // Oracle: elementwise product, then the first maximum.
  TokenId best = -1;
  double best_p = -1;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double p = mask.test(static_cast<TokenId>(i)) ? d[i] : 0.0;
    if (p > best_p) best_p = p, best = static_cast<TokenId>(i);
  }
  std::mt19937_64 rng(0);
  EXPECT_EQ(decoder::sample_masked(d, mask, decoder::Sampling::greedy(), rng), best);
  EXPECT_EQ(best, mask.ids().front());
}

TEST(NgramLm, CountsMatchDirectEnumeration) {
  const auto v = tecod::testing::corpus_vocab();
  const auto corpus = tecod::testing::corpus_sql();
  lm::NgramLm m(v, corpus, 2);
  std::map<std::pair<TokenId, TokenId>, std::size_t> bigrams;
  for (const auto& line : corpus) {
    auto ids = v->encode(line);
    ids.insert(ids.begin(), -1);
    ids.push_back(v->eos());
    for (std::size_t i = 1; i < ids.size(); ++i) ++bigrams[{ids[i - 1], ids[i]}];
  }
  for (const auto& [pair, n] : bigrams) {
    ASSERT_EQ(m.count({pair.first}, pair.second), n);
  }
  EXPECT_EQ(m.count({'Q'}, 'Z'), 0u);
}

TEST(NgramLm, FrequentSuccessorsOutrankUnseen) {
  const auto v = tecod::testing::corpus_vocab();
  const auto corpus = tecod::testing::corpus_sql();
  lm::NgramLm m(v, corpus, 2);
  auto st = m.start(m.encode("q"));
  const auto first = m.next_dist(st);
  EXPECT_NEAR(sum(first), 1.0, 1e-9);
  // Count oracle: the most frequent line-initial token wins; unseen ones share the floor.
  std::map<TokenId, std::size_t> initial;
  for (const auto& line : corpus) ++initial[v->encode(line).front()];
  const auto top = std::max_element(initial.begin(), initial.end(),
                                    [](const auto& a, const auto& b) { return a.second < b.second; });
  EXPECT_EQ(argmax(first), top->first);
  EXPECT_EQ(m.count({-1}, top->first), top->second);
  EXPECT_GT(first[static_cast<std::size_t>(top->first)], first['z']);
  EXPECT_DOUBLE_EQ(first['z'], first['#']);
  EXPECT_NEAR(first[static_cast<std::size_t>(top->first)],
              (1.0 + static_cast<double>(top->second)) / (static_cast<double>(corpus.size()) + v->size()), 1e-12);
  m.absorb(st, std::vector<TokenId>{top->first});
  const auto next = m.next_dist(st);
  EXPECT_NEAR(sum(next), 1.0, 1e-9);
  const TokenId seen = v->encode(corpus.front()).at(1);
  EXPECT_GT(m.count({top->first}, seen), 0u);
  EXPECT_GT(next[static_cast<std::size_t>(seen)], next['#']);
}

TEST(NgramLm, DistributionsAreProperEverywhere) {
  const auto v = tecod::testing::corpus_vocab();
  lm::NgramLm m(v, tecod::testing::corpus_sql(), 3);
  auto st = m.start(m.encode("p"));
  for (TokenId t : v->encode("SELECT zzz FROM qq WHERE")) {
    const auto d = m.next_dist(st);
    EXPECT_NEAR(sum(d), 1.0, 1e-9);
    for (double p : d) ASSERT_GT(p, 0.0);
    m.absorb(st, std::vector<TokenId>{t});
  }
}

TEST(LanguageModel, CacheTransparency) {
  const auto v = tecod::testing::corpus_vocab();
  lm::NgramLm ngram(v, tecod::testing::corpus_sql(), 3);
  lm::ScriptedLm scripted(v, "SELECT name FROM singer WHERE age > 3");
  for (const lm::LanguageModel* m : {static_cast<const lm::LanguageModel*>(&ngram),
                                     static_cast<const lm::LanguageModel*>(&scripted)}) {
    const auto prompt = m->encode("-- Question: x\n");
    auto st = m->start(prompt);
    const auto gen = m->encode("SELECT name FROM");
    for (std::size_t i = 0; i < gen.size(); ++i) {
      const std::span<const TokenId> prefix(gen.data(), i);
      ASSERT_EQ(m->next_dist(st), m->next_dist(prompt, prefix));
      m->absorb(st, std::span<const TokenId>(&gen[i], 1));
    }
    EXPECT_EQ(st.generated, "SELECT name FROM");
    EXPECT_EQ(st.length(), prompt.size() + gen.size());
  }
}

TEST(LanguageModel, IdsDistinguishModelsAndVocabularies) {
  const auto v1 = tecod::testing::corpus_vocab(100);
  const auto v2 = tecod::testing::corpus_vocab(150);
  EXPECT_NE(lm::ScriptedLm(v1, "SELECT 1").id(), lm::ScriptedLm(v2, "SELECT 1").id());
  EXPECT_EQ(lm::ScriptedLm(v1, "SELECT 1").id(), lm::ScriptedLm(v1, "SELECT 1").id());
  EXPECT_NE(lm::NgramLm(v1, {"a"}, 2).id(), lm::NgramLm(v1, {"a"}, 3).id());
}

TEST(Prompt, Layout) {
  EXPECT_EQ(lm::make_prompt("CREATE TABLE t(a)", "how many?"), "CREATE TABLE t(a)\n-- Question: how many?\n-- SQL:\n");
  EXPECT_EQ(lm::make_prompt("", "q"), "-- Question: q\n-- SQL:\n");
}
