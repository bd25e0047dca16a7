#include "tecod/matcher.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "tecod/error.hpp"
#include "tecod/nl_mask.hpp"
#include "tecod/sql_lexer.hpp"

namespace tecod::match {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void normalize(Vector& v) {
  double norm = 0.0;
  for (float x : v) norm += static_cast<double>(x) * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) return;
  for (float& x : v) x = static_cast<float>(x / norm);
}

}  // namespace

double cosine(const Vector& a, const Vector& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

// ---------------------------------------------------------------------------

HashedNgramEmbedder::HashedNgramEmbedder(std::size_t dim) : dim_(std::max<std::size_t>(dim, 1)) {}

std::vector<std::size_t> HashedNgramEmbedder::buckets(std::string_view text) const {
  const std::string padded = " " + sql::ascii_lower(text) + " ";
  std::vector<std::size_t> out;
  for (std::size_t n = 3; n <= 5; ++n) {
    for (std::size_t i = 0; i + n <= padded.size(); ++i) {
      out.push_back(static_cast<std::size_t>(fnv1a(std::string_view(padded).substr(i, n)) % dim_));
    }
  }
  return out;
}

void HashedNgramEmbedder::fit(const std::vector<std::string>& documents) {
  std::vector<std::size_t> df(dim_, 0);
  for (const auto& d : documents) {
    auto b = buckets(d);
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    for (auto x : b) ++df[x];
  }
  const double n = static_cast<double>(documents.size());
  idf_.assign(dim_, 0.0f);
  for (std::size_t i = 0; i < dim_; ++i) {
    idf_[i] = static_cast<float>(std::log((1.0 + n) / (1.0 + static_cast<double>(df[i]))) + 1.0);
  }
}

Vector HashedNgramEmbedder::embed(std::string_view text) const {
  Vector v(dim_, 0.0f);
  for (auto b : buckets(text)) v[b] += 1.0f;
  if (!idf_.empty()) {
    for (std::size_t i = 0; i < dim_; ++i) v[i] *= idf_[i];
  }
  normalize(v);
  return v;
}

nlohmann::json HashedNgramEmbedder::to_json() const {
  return {{"kind", "hashed-char-ngram"}, {"dim", dim_}, {"ngram_min", 3}, {"ngram_max", 5}, {"idf", idf_}};
}

HashedNgramEmbedder HashedNgramEmbedder::from_json(const nlohmann::json& j) {
  try {
    if (j.at("kind").get<std::string>() != "hashed-char-ngram") throw Error(ErrorCode::BadFormat, "unknown embedder");
    HashedNgramEmbedder e(j.at("dim").get<std::size_t>());
    e.idf_ = j.at("idf").get<std::vector<float>>();
    if (!e.idf_.empty() && e.idf_.size() != e.dim_) throw Error(ErrorCode::BadFormat, "idf length mismatch");
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::BadFormat, std::string("embedder json: ") + ex.what());
  }
}

// ---------------------------------------------------------------------------

std::string_view to_string(NliLabel label) noexcept {
  switch (label) {
    case NliLabel::Entailment: return "entailment";
    case NliLabel::Neutral: return "neutral";
    case NliLabel::Contradiction: return "contradiction";
  }
  return "neutral";
}

std::string_view to_string(MatchMethod m) noexcept {
  switch (m) {
    case MatchMethod::MajorityVote: return "majority";
    case MatchMethod::MeanScore: return "mean";
    case MatchMethod::CosineThreshold: return "cosine-threshold";
  }
  return "majority";
}

namespace {

struct Words {
  std::set<std::string> words;
  std::size_t placeholders = 0;
};

Words split_words(std::string_view text) {
  Words w;
  const std::string s = sql::ascii_lower(text);
  std::size_t i = 0;
  while (i < s.size()) {
    if (s.compare(i, 8, "[string]") == 0 || s.compare(i, 8, "[number]") == 0) {
      ++w.placeholders;
      i += 8;
    } else if (std::isalnum(static_cast<unsigned char>(s[i]))) {
      std::size_t j = i;
      while (j < s.size() && std::isalnum(static_cast<unsigned char>(s[j]))) ++j;
      w.words.insert(s.substr(i, j - i));
      i = j;
    } else {
      ++i;
    }
  }
  return w;
}

}  // namespace

double LexicalNliScorer::overlap(std::string_view a, std::string_view b) {
  const Words wa = split_words(a), wb = split_words(b);
  const std::size_t size_a = wa.words.size() + wa.placeholders;
  const std::size_t size_b = wb.words.size() + wb.placeholders;
  if (size_a + size_b == 0) return 1.0;
  std::size_t inter = 0;
  for (const auto& w : wa.words) inter += wb.words.count(w);
  const std::size_t rest_a = wa.words.size() - inter, rest_b = wb.words.size() - inter;
  const std::size_t a_wild = std::min(wa.placeholders, rest_b);
  const std::size_t b_wild = std::min(wb.placeholders, rest_a);
  const std::size_t both_wild = std::min(wa.placeholders - a_wild, wb.placeholders - b_wild);
  const std::size_t matches = inter + a_wild + b_wild + both_wild;
  return std::min(1.0, 2.0 * static_cast<double>(matches) / static_cast<double>(size_a + size_b));
}

NliVote LexicalNliScorer::score(std::string_view premise, std::string_view hypothesis) const {
  const double o = overlap(premise, hypothesis);
  const NliLabel label = o >= kEntail ? NliLabel::Entailment : o <= kContradict ? NliLabel::Contradiction
                                                                                : NliLabel::Neutral;
  return {label, o, o};
}

// ---------------------------------------------------------------------------

TemplateIndex TemplateIndex::build(const std::vector<std::pair<std::string, std::string>>& annotations,
                                   std::shared_ptr<const Embedder> embedder) {
  if (annotations.empty()) throw Error(ErrorCode::EmptyAnnotationSet, "no annotations to index");
  TemplateIndex idx;
  idx.embedder_ = std::move(embedder);
  for (const auto& [text, tid] : annotations) idx.entries_.push_back({text, tid, idx.embedder_->embed(text)});
  return idx;
}

std::vector<Hit> TemplateIndex::top_k(std::string_view query, std::size_t k) const {
  return top_k(embedder_->embed(query), k);
}

std::vector<Hit> TemplateIndex::top_k(const Vector& q, std::size_t k) const {
  std::vector<Hit> hits;
  hits.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) hits.push_back({i, cosine(q, entries_[i].embedding)});
  auto before = [](const Hit& a, const Hit& b) { return a.cosine != b.cosine ? a.cosine > b.cosine : a.entry < b.entry; };
  k = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), before);
  hits.resize(k);
  return hits;
}

namespace {
constexpr char kEmbMagic[4] = {'T', 'C', 'D', 'E'};

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}
std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorCode::BadFormat, "truncated embeddings file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
}  // namespace

void TemplateIndex::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "entries.jsonl");
    if (!out) throw Error(ErrorCode::Io, "cannot write " + (dir / "entries.jsonl").string());
    for (const auto& e : entries_) {
      out << nlohmann::json{{"masked_nlq", e.masked_nlq}, {"template_id", e.template_id}}.dump() << '\n';
    }
  }
  {
    std::ofstream out(dir / "embeddings.bin", std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write embeddings.bin");
    out.write(kEmbMagic, 4);
    put_u32(out, static_cast<std::uint32_t>(entries_.size()));
    put_u32(out, static_cast<std::uint32_t>(embedder_->dim()));
    for (const auto& e : entries_) {
      for (float x : e.embedding) {
        std::uint32_t bits;
        std::memcpy(&bits, &x, 4);
        put_u32(out, bits);
      }
    }
  }
  std::ofstream out(dir / "embedder.json");
  if (!out) throw Error(ErrorCode::Io, "cannot write embedder.json");
  out << embedder_->to_json().dump() << '\n';
}

TemplateIndex TemplateIndex::load(const std::filesystem::path& dir) {
  TemplateIndex idx;
  std::ifstream ej(dir / "embedder.json");
  if (!ej) throw Error(ErrorCode::Io, "cannot read " + (dir / "embedder.json").string());
  try {
    nlohmann::json j;
    ej >> j;
    idx.embedder_ = std::make_shared<HashedNgramEmbedder>(HashedNgramEmbedder::from_json(j));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadFormat, std::string("embedder.json: ") + e.what());
  }

  std::ifstream lines(dir / "entries.jsonl");
  if (!lines) throw Error(ErrorCode::Io, "cannot read entries.jsonl");
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      idx.entries_.push_back({j.at("masked_nlq").get<std::string>(), j.at("template_id").get<std::string>(), {}});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::BadFormat, std::string("entries.jsonl: ") + e.what());
    }
  }

  std::ifstream bin(dir / "embeddings.bin", std::ios::binary);
  if (!bin) throw Error(ErrorCode::Io, "cannot read embeddings.bin");
  char magic[4];
  if (!bin.read(magic, 4) || !std::equal(magic, magic + 4, kEmbMagic)) {
    throw Error(ErrorCode::BadFormat, "not an embedding matrix");
  }
  const auto rows = get_u32(bin), dim = get_u32(bin);
  if (rows != idx.entries_.size() || dim != idx.embedder_->dim()) {
    throw Error(ErrorCode::BadFormat, "embedding matrix shape does not match entries");
  }
  for (auto& e : idx.entries_) {
    e.embedding.resize(dim);
    for (auto& x : e.embedding) {
      const std::uint32_t bits = get_u32(bin);
      std::memcpy(&x, &bits, 4);
    }
  }
  return idx;
}

// ---------------------------------------------------------------------------

nlohmann::json MatchDecision::to_json(const TemplateIndex& index) const {
  nlohmann::json votes_j = nlohmann::json::array();
  for (const auto& v : votes) {
    votes_j.push_back({{"label", std::string(match::to_string(v.label))}, {"prob", v.prob}});
  }
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& h : candidates) {
    const auto& e = index.entries()[h.entry];
    cands.push_back({{"template_id", e.template_id}, {"annotation", e.masked_nlq}, {"cosine", h.cosine}});
  }
  return {{"matched", matched},
          {"template_id", template_id ? nlohmann::json(*template_id) : nlohmann::json(nullptr)},
          {"method", std::string(match::to_string(method))},
          {"score", score},
          {"votes", votes_j},
          {"candidates", cands}};
}

MatchDecision select_template(std::string_view question, const TemplateIndex& index, const NliScorer& scorer,
                              const SelectOptions& opts) {
  if (index.size() == 0) throw Error(ErrorCode::EmptyIndex, "index has no entries");
  const std::string q = opts.mask_query ? nl::mask_unknown_literals(question) : std::string(question);
  MatchDecision d;
  d.method = opts.agg == Aggregation::MeanScore ? MatchMethod::MeanScore : MatchMethod::MajorityVote;
  d.candidates = index.top_k(q, std::max<std::size_t>(opts.k, 1));
  const std::string& best = index.entries()[d.candidates.front().entry].template_id;
  d.template_id = best;
  for (const auto& h : d.candidates) {
    const auto& e = index.entries()[h.entry];
    if (e.template_id == best) d.votes.push_back(scorer.score(q, e.masked_nlq));
  }

  if (opts.agg == Aggregation::MeanScore) {
    double sum = 0.0;
    for (const auto& v : d.votes) sum += v.entailment_prob;
    d.score = sum / static_cast<double>(d.votes.size());
    d.matched = d.score > 0.5;
    return d;
  }

  std::map<NliLabel, std::pair<std::size_t, double>> tally;  // count, summed prob
  for (const auto& v : d.votes) {
    auto& t = tally[v.label];
    ++t.first;
    t.second += v.prob;
  }
  std::size_t top = 0;
  for (const auto& [label, t] : tally) top = std::max(top, t.first);
  std::vector<std::pair<NliLabel, double>> tied;  // label, mean prob
  for (const auto& [label, t] : tally) {
    if (t.first == top) tied.emplace_back(label, t.second / static_cast<double>(t.first));
  }
  std::sort(tied.begin(), tied.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  const bool unresolved = tied.size() > 1 && tied[0].second == tied[1].second;
  d.score = static_cast<double>(top) / static_cast<double>(d.votes.size());
  d.matched = !unresolved && tied.front().first == NliLabel::Entailment;
  return d;
}

MatchDecision baseline_match(std::string_view question, const TemplateIndex& index, double eta) {
  if (index.size() == 0) throw Error(ErrorCode::EmptyIndex, "index has no entries");
  MatchDecision d;
  d.method = MatchMethod::CosineThreshold;
  d.candidates = index.top_k(question, 1);
  d.template_id = index.entries()[d.candidates.front().entry].template_id;
  d.score = d.candidates.front().cosine;
  d.matched = d.score >= eta;
  return d;
}

Calibration calibrate_threshold(const std::vector<std::pair<double, bool>>& labeled) {
  std::size_t pos = 0, neg = 0;
  std::vector<double> sims;
  for (const auto& [s, m] : labeled) {
    (m ? pos : neg) += 1;
    sims.push_back(s);
  }
  if (pos == 0 || neg == 0) throw Error(ErrorCode::DegenerateLabels, "need at least one positive and one negative");
  std::sort(sims.begin(), sims.end());
  sims.erase(std::unique(sims.begin(), sims.end()), sims.end());
  std::vector<double> candidates{0.0, 1.0};
  for (std::size_t i = 0; i + 1 < sims.size(); ++i) candidates.push_back((sims[i] + sims[i + 1]) / 2.0);
  std::sort(candidates.begin(), candidates.end());

  // J = tp/pos - fp/neg compared as tp*neg - fp*pos so equal J values tie exactly.
  Calibration best{0.0, -2.0, false};
  long long best_num = 0;
  bool have = false;
  const auto P = static_cast<long long>(pos), N = static_cast<long long>(neg);
  for (double eta : candidates) {
    long long tp = 0, fp = 0;
    for (const auto& [s, m] : labeled) {
      if (s >= eta) (m ? tp : fp) += 1;
    }
    const long long num = tp * N - fp * P;
    if (!have || num > best_num) {
      have = true;
      best_num = num;
      best = {eta, static_cast<double>(tp) / static_cast<double>(P) - static_cast<double>(fp) / static_cast<double>(N), false};
    }
  }
  if (best_num == 0) best.youden_j = 0.0;
  best.degenerate = best_num <= 0;
  return best;
}

}  // namespace tecod::match
