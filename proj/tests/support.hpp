#pragma once

#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tecod/sql_lexer.hpp"
#include "tecod/store.hpp"
#include "tecod/vocabulary.hpp"

namespace tecod::testing {

inline std::string data_path(const std::string& name) { return std::string(TECOD_TEST_DATA) + "/" + name; }

inline std::vector<store::PairRecord> load_pairs() {
  std::ifstream in(data_path("pairs.jsonl"));
  std::vector<store::PairRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(store::PairRecord::from_json(nlohmann::json::parse(line)));
  }
  return out;
}

struct CorpusTemplate {
  sql::SqlTemplate tmpl;
  std::string nlq;
};

// Distinct templates of the pairs corpus, first pair's question kept.
inline std::vector<CorpusTemplate> corpus_templates() {
  std::vector<CorpusTemplate> out;
  std::map<std::string, bool> seen;
  for (const auto& p : load_pairs()) {
    auto t = sql::templatize(p.sql).first;
    if (seen.emplace(t.template_id, true).second) out.push_back({t, p.nlq});
  }
  return out;
}

inline std::vector<std::string> corpus_sql() {
  std::vector<std::string> out;
  for (const auto& p : load_pairs()) out.push_back(p.sql);
  return out;
}

// Corpus SQL plus lines that make "1;" a frequent pair, so the learned
// vocabulary holds a token straddling a number and the trailing ';'.
inline std::shared_ptr<const lm::Vocabulary> straddle_vocab(int merges = 200) {
  auto lines = corpus_sql();
  for (int i = 1; i <= 40; ++i) lines.push_back("SELECT a FROM t WHERE id = " + std::to_string(i) + "1;");
  return std::make_shared<const lm::Vocabulary>(lm::build_vocab(lines, merges));
}

inline std::shared_ptr<const lm::Vocabulary> corpus_vocab(int merges = 200) {
  return std::make_shared<const lm::Vocabulary>(lm::build_vocab(corpus_sql(), merges));
}

// Random SQLite-flavoured statements exercising every literal form the lexer
// knows: '' escapes, negative and decimal numbers, quoted identifiers,
// "LIMIT a, b", mixed keyword case and whitespace runs.
class SqlGenerator {
 public:
  explicit SqlGenerator(std::uint64_t seed) : rng_(seed) {}

  std::string next() {
    std::string q = kw("SELECT") + ws() + column();
    if (pick(2)) q += "," + ws() + aggregate();
    q += ws() + kw("FROM") + ws() + table();
    if (pick(3) == 0) {
      q += ws() + kw("JOIN") + ws() + table() + ws() + kw("ON") + ws() + column() + " = " + column();
    }
    q += ws() + kw("WHERE") + ws() + predicate();
    const int extra = static_cast<int>(pick(3));
    for (int i = 0; i < extra; ++i) q += ws() + kw(pick(2) ? "AND" : "OR") + ws() + predicate();
    switch (pick(4)) {
      case 0: q += ws() + kw("ORDER") + " " + kw("BY") + ws() + column() + ws() + kw(pick(2) ? "DESC" : "ASC"); break;
      case 1: q += ws() + kw("LIMIT") + ws() + number(false); break;
      case 2: q += ws() + kw("LIMIT") + ws() + number(false) + "," + ws() + number(false); break;
      default: break;
    }
    if (pick(2)) q += ";";
    return q;
  }

 private:
  std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }

  std::string kw(const std::string& k) {
    switch (pick(3)) {
      case 0: return sql::ascii_lower(k);
      case 1: return sql::ascii_title(k);
      default: return k;
    }
  }

  std::string ws() {
    static const char* kRuns[] = {" ", " ", " ", "  ", "\n", "\t", " \n  "};
    return kRuns[pick(7)];
  }

  std::string ident() {
    static const char* kNames[] = {"name", "age", "T1.id", "T2.amount", "district_id", "Segment", "score", "x"};
    return kNames[pick(8)];
  }

  std::string column() {
    switch (pick(6)) {
      case 0: return "`Free Meal Count (K-12)`";
      case 1: return "\"Enrollment 2019\"";
      case 2: return "[order id]";
      default: return ident();
    }
  }

  std::string table() {
    static const char* kTables[] = {"client", "account", "frpm", "singer", "trans"};
    return kTables[pick(5)];
  }

  std::string aggregate() {
    static const char* kAgg[] = {"COUNT", "SUM", "AVG", "MAX"};
    return kw(kAgg[pick(4)]) + "(" + column() + ")";
  }

  std::string number(bool allow_negative) {
    std::string n = std::to_string(pick(3) == 0 ? pick(10) : 1 + pick(99999));
    if (pick(4) == 0) n += "." + std::to_string(pick(1000));
    if (allow_negative && pick(4) == 0) n = "-" + n;
    return n;
  }

  std::string string_lit() {
    static const char* kParts[] = {"KAM", "O''Brien", "%Y", "1998", "a b", "", "It''s", "x-12", "-5"};
    std::string s = "'";
    const std::size_t parts = pick(3);
    for (std::size_t i = 0; i < parts; ++i) s += kParts[pick(9)];
    return s + "'";
  }

  std::string predicate() {
    static const char* kOps[] = {"=", ">", "<", ">=", "<=", "!=", "<>"};
    const std::string lhs = pick(5) == 0 ? kw("STRFTIME") + "(" + string_lit() + "," + ws() + column() + ")" : column();
    const std::string op = kOps[pick(7)];
    const std::string rhs = pick(2) ? string_lit() : number(true);
    const std::string gap = pick(3) == 0 ? "" : " ";
    return lhs + gap + op + gap + rhs;
  }

  std::mt19937_64 rng_;
};

}  // namespace tecod::testing
