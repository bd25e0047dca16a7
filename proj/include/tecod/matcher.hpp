#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace tecod::match {

using Vector = std::vector<float>;

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dim() const = 0;
  virtual Vector embed(std::string_view text) const = 0;  // deterministic
  virtual nlohmann::json to_json() const = 0;
};

// Character 3..5-grams of the lowercased, space-padded text, hashed into d
// buckets (FNV-1a), weighted by smoothed IDF fitted on the annotations, then
// L2-normalised.
class HashedNgramEmbedder : public Embedder {
 public:
  static constexpr std::size_t kDefaultDim = 1024;

  explicit HashedNgramEmbedder(std::size_t dim = kDefaultDim);

  // idf(b) = ln((1 + N) / (1 + df(b))) + 1 over the fitted documents.
  void fit(const std::vector<std::string>& documents);

  std::size_t dim() const override { return dim_; }
  Vector embed(std::string_view text) const override;
  nlohmann::json to_json() const override;
  static HashedNgramEmbedder from_json(const nlohmann::json& j);

  // Bucket indices of every n-gram occurrence; exposed for tests.
  std::vector<std::size_t> buckets(std::string_view text) const;

 private:
  std::size_t dim_;
  std::vector<float> idf_;  // empty until fitted: all weights 1
};

enum class NliLabel { Entailment, Neutral, Contradiction };
std::string_view to_string(NliLabel label) noexcept;

struct NliVote {
  NliLabel label;
  double prob;             // confidence of `label`
  double entailment_prob;  // P(entailment), used by mean-score aggregation
};

class NliScorer {
 public:
  virtual ~NliScorer() = default;
  virtual NliVote score(std::string_view premise, std::string_view hypothesis) const = 0;
};

// Dice overlap of lowercased word sets, where "[string]" / "[number]" on
// either side match any word. Entailment at >= 0.6, Contradiction at <= 0.2,
// Neutral between; prob and entailment_prob are the overlap itself.
class LexicalNliScorer : public NliScorer {
 public:
  static constexpr double kEntail = 0.6;
  static constexpr double kContradict = 0.2;
  static double overlap(std::string_view a, std::string_view b);
  NliVote score(std::string_view premise, std::string_view hypothesis) const override;
};

struct IndexEntry {
  std::string masked_nlq;
  std::string template_id;
  Vector embedding;  // unit norm
};

struct Hit {
  std::size_t entry;
  double cosine;
};

class TemplateIndex {
 public:
  // Throws EmptyAnnotationSet.
  static TemplateIndex build(const std::vector<std::pair<std::string, std::string>>& annotations,
                             std::shared_ptr<const Embedder> embedder);

  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<IndexEntry>& entries() const noexcept { return entries_; }
  const Embedder& embedder() const noexcept { return *embedder_; }

  // Exact search; cosine descending, lower entry index first on ties.
  std::vector<Hit> top_k(std::string_view query, std::size_t k) const;
  std::vector<Hit> top_k(const Vector& query, std::size_t k) const;

  // Directory with entries.jsonl, embeddings.bin and embedder.json.
  void save(const std::filesystem::path& dir) const;
  static TemplateIndex load(const std::filesystem::path& dir);

 private:
  std::vector<IndexEntry> entries_;
  std::shared_ptr<const Embedder> embedder_;
};

enum class Aggregation { MajorityVote, MeanScore };
enum class MatchMethod { MajorityVote, MeanScore, CosineThreshold };
std::string_view to_string(MatchMethod m) noexcept;

struct MatchDecision {
  bool matched = false;
  std::optional<std::string> template_id;  // set whenever a best template exists
  std::vector<NliVote> votes;
  std::vector<Hit> candidates;
  MatchMethod method = MatchMethod::MajorityVote;
  double score = 0.0;  // mean entailment, winning vote share, or best cosine

  nlohmann::json to_json(const TemplateIndex& index) const;
};

struct SelectOptions {
  std::size_t k = 5;
  Aggregation agg = Aggregation::MajorityVote;
  bool mask_query = false;  // mask digits and quoted text in the question first
};

// Top-k prefilter, best template, NLI votes over that template's top-k
// entries, then majority (ties: higher mean probability of the tied labels,
// still tied: not matched) or mean entailment > 0.5. Throws EmptyIndex.
MatchDecision select_template(std::string_view question, const TemplateIndex& index, const NliScorer& scorer,
                              const SelectOptions& opts = {});

// matched iff the best cosine reaches eta. Throws EmptyIndex.
MatchDecision baseline_match(std::string_view question, const TemplateIndex& index, double eta);

struct Calibration {
  double threshold = 0.0;
  double youden_j = 0.0;
  bool degenerate = false;  // best J <= 0: similarity carries no signal
};

// Youden-J maximising threshold over {0, 1, midpoints of sorted distinct
// similarities}; smallest threshold on ties. Throws DegenerateLabels when a
// class is missing.
Calibration calibrate_threshold(const std::vector<std::pair<double, bool>>& labeled);

double cosine(const Vector& a, const Vector& b);

}  // namespace tecod::match
