#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tecod/grammar.hpp"
#include "tecod/matcher.hpp"
#include "tecod/sql_lexer.hpp"
#include "tecod/vocabulary.hpp"

namespace tecod::store {

// One line of a pairs file.
struct PairRecord {
  std::string nlq;
  std::string sql;
  std::string db_id;
  std::string schema;                    // optional prompt context
  std::vector<std::string> annotations;  // alternate phrasings of nlq

  // Throws BadFormat on missing/mistyped fields or an empty nlq.
  static PairRecord from_json(const nlohmann::json& j);
};

struct StoredTemplate {
  sql::SqlTemplate tmpl;
  std::string nlq;      // question of the first pair with this template
  std::string db_id;
  std::string schema;
  std::vector<std::string> masked_annotations;

  nlohmann::json to_json() const;
  static StoredTemplate from_json(const nlohmann::json& j);
};

struct ExtractOptions {
  int vocab_merges = 200;
  double fuzzy_threshold = 0.8;
};

struct ExtractSummary {
  std::size_t pairs_in = 0;
  std::size_t pairs_failed = 0;
  std::size_t templates_out = 0;
  std::size_t annotations_indexed = 0;
  std::vector<std::string> warnings;  // "line N: reason"
};

// Directory layout:
//   templates.jsonl            one StoredTemplate per line
//   guides/<id>.tcdg           flexible guide, guides/<id>.fixed.tcdg fixed
//   partitions/<lm>/<id>.json  partitioned templates per language model
//   index/                     entries.jsonl, embeddings.bin, embedder.json
//   vocab.json                 vocabulary built from the stored SQL
class TemplateStore {
 public:
  explicit TemplateStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  // Reads pairs.jsonl and writes a fresh store. Malformed records are skipped
  // with a warning; throws BadFormat if none survive.
  static ExtractSummary extract(const std::filesystem::path& pairs_file, const std::filesystem::path& dir,
                                const ExtractOptions& opts = {});
  static ExtractSummary extract(const std::vector<std::pair<std::size_t, std::string>>& lines,
                                const std::filesystem::path& dir, const ExtractOptions& opts = {});

  const std::filesystem::path& dir() const noexcept { return dir_; }

  const std::vector<StoredTemplate>& templates() const;
  const StoredTemplate& find(const std::string& template_id) const;  // throws BadFormat if absent
  grammar::Guide guide(const std::string& template_id, grammar::GuideKind kind = grammar::GuideKind::Flexible) const;
  std::shared_ptr<const lm::Vocabulary> vocab() const;
  match::TemplateIndex index() const;

  std::filesystem::path partition_path(const std::string& lm_id, const std::string& template_id) const;

 private:
  std::filesystem::path dir_;
  mutable std::optional<std::vector<StoredTemplate>> templates_;
};

}  // namespace tecod::store
