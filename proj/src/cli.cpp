#include "tecod/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "tecod/decoder.hpp"
#include "tecod/error.hpp"
#include "tecod/language_model.hpp"
#include "tecod/matcher.hpp"
#include "tecod/sql_lexer.hpp"
#include "tecod/store.hpp"
#include "tecod/workload.hpp"

namespace tecod::cli {

namespace {

using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoViableToken:
    case ErrorCode::MaxLenExceeded:
    case ErrorCode::SlotAlignmentFailure:
    case ErrorCode::SlotRegexViolation:
    case ErrorCode::DeadState:
      return kDecodeFailure;
    default:
      return kDataError;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> read_lines(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::string question_key(const std::string& nlq) { return "-- Question: " + nlq + "\n"; }

std::string prompt_for(const store::StoredTemplate& t, const std::string& question) {
  return lm::make_prompt(t.schema, question);
}

// "scripted:FILE" targets the file's text; bare "scripted" answers every
// stored question with its template's source SQL; "ngram:FILE" trains on the
// file's lines.
std::unique_ptr<lm::LanguageModel> make_lm(const std::string& spec, const store::TemplateStore& st, int order) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  auto vocab = st.vocab();
  if (kind == "scripted") {
    if (arg.empty() || arg == "store") {
      std::vector<std::pair<std::string, std::string>> script;
      for (const auto& t : st.templates()) script.emplace_back(question_key(t.nlq), t.tmpl.source_sql);
      const std::string fallback = script.empty() ? std::string() : script.front().second;
      return std::make_unique<lm::ScriptedLm>(vocab, std::move(script), fallback, "scripted-store");
    }
    std::string target = read_file(arg);
    while (!target.empty() && (target.back() == '\n' || target.back() == '\r')) target.pop_back();
    return std::make_unique<lm::ScriptedLm>(vocab, target);
  }
  if (kind == "ngram") {
    if (arg.empty()) throw UsageError("ngram LM needs a corpus file: ngram:FILE");
    return std::make_unique<lm::NgramLm>(vocab, read_lines(arg), order);
  }
  throw UsageError("unknown LM '" + spec + "' (expected scripted[:FILE] or ngram:FILE)");
}

decoder::PartitionedTemplate partition_for(const lm::LanguageModel& model, const store::TemplateStore& st,
                                           const store::StoredTemplate& t, const grammar::Guide& guide,
                                           const decoder::DecodeOptions& opts) {
  const auto path = st.partition_path(model.id(), t.tmpl.template_id);
  if (std::filesystem::exists(path)) return decoder::PartitionedTemplate::load(path, model.id());
  auto part = decoder::compile_partition(model, t.tmpl, guide, prompt_for(t, t.nlq), opts);
  std::filesystem::create_directories(path.parent_path());
  part.save(path);
  return part;
}

sql::PerturbStyle parse_style(const std::string& s, std::uint64_t seed) {
  if (s == "small-case") return sql::PerturbStyle::small_case();
  if (s == "pretty") return sql::PerturbStyle::pretty();
  if (s.rfind("random-spaces", 0) == 0) {
    int lo = 2, hi = 5;
    const std::string rest = s.substr(13);
    if (!rest.empty()) {
      char open = 0, comma = 0, close = 0;
      std::istringstream in(rest);
      if (!(in >> open >> lo >> comma >> hi >> close) || open != '(' || comma != ',' || close != ')' || lo < 1 ||
          hi < lo) {
        throw UsageError("bad style '" + s + "'; expected random-spaces(MIN,MAX)");
      }
    }
    return sql::PerturbStyle::random_spaces(lo, hi, seed);
  }
  throw UsageError("unknown style '" + s + "' (small-case, pretty, random-spaces(MIN,MAX))");
}

std::map<std::size_t, double> parse_dist(const std::string& s) {
  std::map<std::size_t, double> d;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw UsageError("distribution entries look like SIZE:FRACTION");
    try {
      d[std::stoul(item.substr(0, colon))] = std::stod(item.substr(colon + 1));
    } catch (const std::exception&) {
      throw UsageError("bad distribution entry '" + item + "'");
    }
  }
  return d;
}

// Sampled literals may hold arbitrary bytes; invalid UTF-8 becomes U+FFFD.
std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

json report_json(const decoder::DecodeReport& r) {
  return {{"sql", r.output_text},
          {"forward_calls", r.forward_calls},
          {"absorbed_tokens", r.absorbed_tokens},
          {"masked_token_total", r.masked_token_total},
          {"hit_max_len", r.hit_max_len},
          {"wall_time_ms", r.wall_time_ms}};
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Template-constrained decoding for recurring text-to-SQL queries", "tecod"};
  app.require_subcommand(1);

  std::string store_dir, pairs, nlq, template_id, lm_spec = "scripted", mode = "full", context = "leftright",
                                                  grammar_kind = "flexible", agg = "majority", sqls_file, emit = "json",
                                                  synthetic, sql_text, style, modes = "full,partitioned";
  int merges = 200, order = 3;
  std::size_t k = 5, max_len = 512, n = 10000;
  std::uint64_t seed = 0;
  double eta = -1.0;
  bool mask_query = false;

  auto* extract = app.add_subcommand("extract", "Templatize labeled pairs and build a template store");
  extract->add_option("--pairs", pairs, "JSONL file of {nlq, sql, db_id, annotations?, schema?}")->required();
  extract->add_option("--store", store_dir, "Output store directory")->required();
  extract->add_option("--merges", merges, "BPE merges for the store vocabulary")->capture_default_str();

  auto* match = app.add_subcommand("match", "Select a stored template for a question");
  match->add_option("--store", store_dir)->required();
  match->add_option("--nlq", nlq, "Question text")->required();
  match->add_option("--k", k, "Top-k prefilter size")->capture_default_str();
  match->add_option("--agg", agg, "majority | mean")->check(CLI::IsMember({"majority", "mean"}))->capture_default_str();
  auto* baseline = match->add_option("--baseline", eta, "Use the cosine-threshold baseline with this threshold");
  match->add_flag("--mask-query", mask_query, "Mask digits and quoted text in the question first");

  auto* decode = app.add_subcommand("decode", "Generate SQL for a question under a stored template");
  decode->add_option("--store", store_dir)->required();
  decode->add_option("--nlq", nlq)->required();
  decode->add_option("--template", template_id)->required();
  decode->add_option("--lm", lm_spec, "scripted[:FILE] | ngram:FILE")->capture_default_str();
  decode->add_option("--mode", mode)->check(CLI::IsMember({"full", "partitioned"}))->capture_default_str();
  decode->add_option("--context", context)->check(CLI::IsMember({"none", "leftright"}))->capture_default_str();
  decode->add_option("--grammar", grammar_kind)->check(CLI::IsMember({"flexible", "fixed"}))->capture_default_str();
  auto* seed_opt = decode->add_option("--seed", seed, "Seeded sampling instead of greedy");
  decode->add_option("--max-len", max_len)->capture_default_str();
  decode->add_option("--order", order, "n-gram order")->capture_default_str();

  auto* analyze = app.add_subcommand("analyze", "Template-reuse statistics of a workload");
  auto* sqls_opt = analyze->add_option("--sqls", sqls_file, "One SQL per line");
  auto* synth_opt = analyze->add_option("--synthetic", synthetic, "Generate a workload, e.g. 1:0.3,2:0.22,3:0.48");
  sqls_opt->excludes(synth_opt);
  analyze->add_option("--n", n, "Synthetic workload size")->capture_default_str();
  analyze->add_option("--seed", seed)->capture_default_str();
  analyze->add_option("--emit", emit)->check(CLI::IsMember({"json", "csv"}))->capture_default_str();

  auto* perturb = app.add_subcommand("perturb", "Reformat a SQL string");
  perturb->add_option("--sql", sql_text)->required();
  perturb->add_option("--style", style, "small-case | pretty | random-spaces(MIN,MAX)")->required();
  perturb->add_option("--seed", seed)->capture_default_str();

  auto* bench = app.add_subcommand("bench", "Compare full and partitioned decoding over the store");
  bench->add_option("--store", store_dir)->required();
  bench->add_option("--lm", lm_spec)->capture_default_str();
  bench->add_option("--modes", modes)->capture_default_str();
  bench->add_option("--context", context)->check(CLI::IsMember({"none", "leftright"}))->capture_default_str();
  bench->add_option("--max-len", max_len)->capture_default_str();
  bench->add_option("--order", order)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*extract) {
      store::ExtractOptions opts;
      opts.vocab_merges = merges;
      const auto s = store::TemplateStore::extract(pairs, store_dir, opts);
      for (const auto& w : s.warnings) err << "warning: " << w << "\n";
      out << json{{"pairs_in", s.pairs_in},
                  {"pairs_failed", s.pairs_failed},
                  {"templates_out", s.templates_out},
                  {"annotations_indexed", s.annotations_indexed}}
                 .dump()
          << "\n";
      return kOk;
    }

    if (*match) {
      const store::TemplateStore st(store_dir);
      const auto index = st.index();
      match::MatchDecision d;
      if (baseline->count() > 0) {
        d = match::baseline_match(nlq, index, eta);
      } else {
        match::SelectOptions opts;
        opts.k = k;
        opts.agg = agg == "mean" ? match::Aggregation::MeanScore : match::Aggregation::MajorityVote;
        opts.mask_query = mask_query;
        d = match::select_template(nlq, index, match::LexicalNliScorer{}, opts);
      }
      out << dump(d.to_json(index)) << "\n";
      return kOk;
    }

    if (*decode) {
      const store::TemplateStore st(store_dir);
      const auto& t = st.find(template_id);
      const auto model = make_lm(lm_spec, st, order);
      const auto kind = grammar_kind == "fixed" ? grammar::GuideKind::Fixed : grammar::GuideKind::Flexible;
      const auto guide = st.guide(template_id, kind);
      decoder::DecodeOptions opts;
      opts.max_len = max_len;
      if (seed_opt->count() > 0) opts.sampling = decoder::Sampling::seeded(seed);
      const std::string prompt = prompt_for(t, nlq);

      json result = {{"template_id", template_id}, {"mode", mode}, {"grammar", grammar_kind}, {"lm_id", model->id()}};
      if (mode == "partitioned") result["context"] = context;
      if (const auto* scripted = dynamic_cast<const lm::ScriptedLm*>(model.get())) {
        const auto& target = scripted->target_for(model->decode(model->encode(prompt)));
        result["target"] = target;
        result["target_accepted"] = guide.accepts(target);
      }
      try {
        decoder::DecodeReport r;
        if (mode == "full") {
          r = decoder::gcd_generate(*model, guide, prompt, opts);
        } else {
          const auto part = partition_for(*model, st, t, guide, opts);
          r = decoder::partitioned_generate(*model, part, prompt,
                                            context == "none" ? decoder::ContextMode::None
                                                              : decoder::ContextMode::LeftRight,
                                            opts);
        }
        result.update(report_json(r));
        result["accepted"] = guide.accepts(r.output_text);
        if (result.contains("target")) result["matches_target"] = r.output_text == result["target"];
        out << dump(result) << "\n";
        return kOk;
      } catch (const Error& e) {
        if (exit_code_for(e.code()) != kDecodeFailure) throw;
        result["error"] = std::string(to_string(e.code()));
        result["message"] = e.what();
        out << dump(result) << "\n";
        err << "decode failed: " << e.what() << "\n";
        return kDecodeFailure;
      }
    }

    if (*analyze) {
      std::vector<std::string> sqls;
      if (!synthetic.empty()) {
        sqls = workload::generate_synthetic(parse_dist(synthetic), n, seed);
      } else if (!sqls_file.empty()) {
        sqls = read_lines(sqls_file);
      } else {
        throw UsageError("analyze needs --sqls FILE or --synthetic DIST");
      }
      const auto stats = workload::analyze(sqls);
      if (emit == "csv") {
        out << stats.to_csv();
      } else {
        out << dump(stats.to_json()) << "\n";
      }
      return kOk;
    }

    if (*perturb) {
      out << sql::perturb(sql_text, parse_style(style, seed)) << "\n";
      return kOk;
    }

    if (*bench) {
      const store::TemplateStore st(store_dir);
      const auto model = make_lm(lm_spec, st, order);
      const bool run_full = modes.find("full") != std::string::npos;
      const bool run_part = modes.find("partitioned") != std::string::npos;
      if (!run_full && !run_part) throw UsageError("--modes must name full and/or partitioned");
      decoder::DecodeOptions opts;
      opts.max_len = max_len;
      const auto ctx = context == "none" ? decoder::ContextMode::None : decoder::ContextMode::LeftRight;

      std::size_t full_calls = 0, part_calls = 0, full_fail = 0, part_fail = 0, identical = 0, compared = 0;
      std::size_t static_tokens = 0, total_tokens = 0;
      json rows = json::array();
      for (const auto& t : st.templates()) {
        const auto guide = st.guide(t.tmpl.template_id);
        const std::string prompt = prompt_for(t, t.nlq);
        json row = {{"template_id", t.tmpl.template_id}};
        std::optional<std::string> full_sql, part_sql;
        if (run_full) {
          try {
            const auto r = decoder::gcd_generate(*model, guide, prompt, opts);
            full_calls += r.forward_calls;
            full_sql = r.output_text;
            row["full_forward_calls"] = r.forward_calls;
          } catch (const Error& e) {
            ++full_fail;
            row["full_error"] = std::string(to_string(e.code()));
          }
        }
        if (run_part) {
          try {
            const auto part = partition_for(*model, st, t, guide, opts);
            const auto r = decoder::partitioned_generate(*model, part, prompt, ctx, opts);
            part_calls += r.forward_calls;
            part_sql = r.output_text;
            static_tokens += part.static_token_count();
            total_tokens += model->encode(part.offline_text).size();
            row["partitioned_forward_calls"] = r.forward_calls;
          } catch (const Error& e) {
            ++part_fail;
            row["partitioned_error"] = std::string(to_string(e.code()));
          }
        }
        if (full_sql && part_sql) {
          ++compared;
          identical += *full_sql == *part_sql ? 1 : 0;
        }
        rows.push_back(row);
      }
      json summary = {{"templates", st.templates().size()}, {"lm_id", model->id()}, {"per_template", rows}};
      if (run_full) summary["full"] = {{"forward_calls", full_calls}, {"failures", full_fail}};
      if (run_part) {
        summary["partitioned"] = {{"forward_calls", part_calls},
                                  {"failures", part_fail},
                                  {"context", context},
                                  {"static_token_fraction",
                                   total_tokens ? static_cast<double>(static_tokens) / static_cast<double>(total_tokens)
                                                : 0.0}};
      }
      if (run_full && run_part) {
        summary["ratio"] = full_calls ? static_cast<double>(part_calls) / static_cast<double>(full_calls) : 0.0;
        summary["identical_outputs"] = identical;
        summary["compared"] = compared;
      }
      out << dump(summary) << "\n";
      return full_fail + part_fail > 0 ? kDecodeFailure : kOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace tecod::cli
