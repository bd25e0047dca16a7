#include "tecod/store.hpp"

#include <cctype>
#include <fstream>
#include <map>

#include "tecod/error.hpp"
#include "tecod/nl_mask.hpp"

namespace tecod::store {

namespace fs = std::filesystem;

PairRecord PairRecord::from_json(const nlohmann::json& j) {
  try {
    PairRecord r;
    r.nlq = j.at("nlq").get<std::string>();
    r.sql = j.at("sql").get<std::string>();
    r.db_id = j.value("db_id", std::string());
    r.schema = j.value("schema", std::string());
    if (j.contains("annotations")) r.annotations = j.at("annotations").get<std::vector<std::string>>();
    if (r.nlq.empty()) throw Error(ErrorCode::BadFormat, "empty nlq");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadFormat, e.what());
  }
}

nlohmann::json StoredTemplate::to_json() const {
  nlohmann::json kinds = nlohmann::json::array();
  for (auto k : tmpl.slots) kinds.push_back(std::string(sql::to_string(k)));
  return {{"template_id", tmpl.template_id}, {"segments", tmpl.segments}, {"slots", kinds},
          {"source_sql", tmpl.source_sql},   {"masked", tmpl.masked_text()}, {"nlq", nlq},
          {"db_id", db_id},                  {"schema", schema},          {"annotations", masked_annotations}};
}

StoredTemplate StoredTemplate::from_json(const nlohmann::json& j) {
  try {
    StoredTemplate t;
    t.tmpl.template_id = j.at("template_id").get<std::string>();
    t.tmpl.segments = j.at("segments").get<std::vector<std::string>>();
    for (const auto& k : j.at("slots")) {
      const auto s = k.get<std::string>();
      if (s != "str" && s != "num") throw Error(ErrorCode::BadFormat, "bad slot kind " + s);
      t.tmpl.slots.push_back(s == "str" ? sql::LiteralKind::Str : sql::LiteralKind::Num);
    }
    t.tmpl.source_sql = j.at("source_sql").get<std::string>();
    t.nlq = j.value("nlq", std::string());
    t.db_id = j.value("db_id", std::string());
    t.schema = j.value("schema", std::string());
    t.masked_annotations = j.value("annotations", std::vector<std::string>{});
    if (t.tmpl.segments.size() != t.tmpl.slots.size() + 1) {
      throw Error(ErrorCode::BadFormat, "segments/slots length mismatch");
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadFormat, std::string("template record: ") + e.what());
  }
}

ExtractSummary TemplateStore::extract(const fs::path& pairs_file, const fs::path& dir, const ExtractOptions& opts) {
  std::ifstream in(pairs_file);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + pairs_file.string());
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) lines.emplace_back(n, line);
  }
  return extract(lines, dir, opts);
}

ExtractSummary TemplateStore::extract(const std::vector<std::pair<std::size_t, std::string>>& lines,
                                      const fs::path& dir, const ExtractOptions& opts) {
  ExtractSummary summary;
  std::vector<StoredTemplate> templates;
  std::map<std::string, std::size_t> by_id;
  std::vector<std::pair<std::string, std::string>> annotations;
  std::vector<std::string> all_sql;

  for (const auto& [line_no, text] : lines) {
    ++summary.pairs_in;
    try {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(text);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadFormat, e.what());
      }
      const PairRecord rec = PairRecord::from_json(j);
      auto [tmpl, literals] = sql::templatize(rec.sql);
      auto it = by_id.find(tmpl.template_id);
      if (it == by_id.end()) {
        it = by_id.emplace(tmpl.template_id, templates.size()).first;
        templates.push_back({tmpl, rec.nlq, rec.db_id, rec.schema, {}});
      }
      auto& stored = templates[it->second];
      std::vector<std::string> questions{rec.nlq};
      questions.insert(questions.end(), rec.annotations.begin(), rec.annotations.end());
      for (const auto& q : questions) {
        const auto masked = nl::mask_nlq(q, literals, opts.fuzzy_threshold);
        stored.masked_annotations.push_back(masked.text);
        annotations.emplace_back(masked.text, tmpl.template_id);
      }
      all_sql.push_back(rec.sql);
    } catch (const Error& e) {
      ++summary.pairs_failed;
      summary.warnings.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (templates.empty()) throw Error(ErrorCode::BadFormat, "no usable records");

  fs::create_directories(dir / "guides");
  fs::create_directories(dir / "partitions");
  {
    std::ofstream out(dir / "templates.jsonl");
    if (!out) throw Error(ErrorCode::Io, "cannot write " + (dir / "templates.jsonl").string());
    for (const auto& t : templates) out << t.to_json().dump() << '\n';
  }
  for (const auto& t : templates) {
    grammar::compile_flexible(t.tmpl).save(dir / "guides" / (t.tmpl.template_id + ".tcdg"));
    grammar::compile_fixed(t.tmpl).save(dir / "guides" / (t.tmpl.template_id + ".fixed.tcdg"));
  }
  auto embedder = std::make_shared<match::HashedNgramEmbedder>();
  std::vector<std::string> docs;
  for (const auto& a : annotations) docs.push_back(a.first);
  embedder->fit(docs);
  match::TemplateIndex::build(annotations, embedder).save(dir / "index");
  {
    std::ofstream out(dir / "vocab.json");
    if (!out) throw Error(ErrorCode::Io, "cannot write vocab.json");
    out << lm::build_vocab(all_sql, opts.vocab_merges).to_json().dump() << '\n';
  }
  summary.templates_out = templates.size();
  summary.annotations_indexed = annotations.size();
  return summary;
}

const std::vector<StoredTemplate>& TemplateStore::templates() const {
  if (!templates_) {
    std::ifstream in(dir_ / "templates.jsonl");
    if (!in) throw Error(ErrorCode::Io, "cannot read " + (dir_ / "templates.jsonl").string());
    std::vector<StoredTemplate> out;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        out.push_back(StoredTemplate::from_json(nlohmann::json::parse(line)));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadFormat, std::string("templates.jsonl: ") + e.what());
      }
    }
    templates_ = std::move(out);
  }
  return *templates_;
}

const StoredTemplate& TemplateStore::find(const std::string& template_id) const {
  for (const auto& t : templates()) {
    if (t.tmpl.template_id == template_id) return t;
  }
  throw Error(ErrorCode::BadFormat, "no template " + template_id + " in store");
}

grammar::Guide TemplateStore::guide(const std::string& template_id, grammar::GuideKind kind) const {
  const std::string suffix = kind == grammar::GuideKind::Fixed ? ".fixed.tcdg" : ".tcdg";
  return grammar::Guide::load(dir_ / "guides" / (template_id + suffix));
}

std::shared_ptr<const lm::Vocabulary> TemplateStore::vocab() const {
  std::ifstream in(dir_ / "vocab.json");
  if (!in) throw Error(ErrorCode::Io, "cannot read " + (dir_ / "vocab.json").string());
  try {
    nlohmann::json j;
    in >> j;
    return std::make_shared<const lm::Vocabulary>(lm::Vocabulary::from_json(j));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadFormat, std::string("vocab.json: ") + e.what());
  }
}

match::TemplateIndex TemplateStore::index() const { return match::TemplateIndex::load(dir_ / "index"); }

fs::path TemplateStore::partition_path(const std::string& lm_id, const std::string& template_id) const {
  std::string safe;
  for (char c : lm_id) safe += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return dir_ / "partitions" / safe / (template_id + ".json");
}

}  // namespace tecod::store
