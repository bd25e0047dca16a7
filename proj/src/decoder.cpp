#include "tecod/decoder.hpp"

#include <chrono>
#include <fstream>

#include "tecod/error.hpp"

namespace tecod::decoder {

using grammar::Guide;
using grammar::TokenMask;

TokenId sample_masked(const std::vector<double>& dist, const TokenMask& mask, const Sampling& sampling,
                      std::mt19937_64& rng) {
  const auto allowed = mask.ids();
  if (allowed.empty()) throw Error(ErrorCode::NoViableToken, "mask is empty");
  if (sampling.kind == Sampling::Kind::Greedy) {
    TokenId best = allowed.front();
    for (TokenId id : allowed) {
      if (dist[static_cast<std::size_t>(id)] > dist[static_cast<std::size_t>(best)]) best = id;
    }
    return best;
  }
  double total = 0.0;
  for (TokenId id : allowed) total += dist[static_cast<std::size_t>(id)];
  // 53 random bits -> [0, 1); fixed here so runs agree across standard libraries.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  if (total <= 0.0) return allowed[static_cast<std::size_t>(u * static_cast<double>(allowed.size()))];
  double acc = 0.0;
  for (TokenId id : allowed) {
    acc += dist[static_cast<std::size_t>(id)] / total;
    if (u < acc) return id;
  }
  return allowed.back();
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// One constrained run of `guide` continuing `state`. Sampled tokens are
// absorbed into `state` and appended to report.output_ids.
void guided_loop(const lm::LanguageModel& model, const Guide& guide, lm::DecodeState& state,
                 std::span<const TokenId> prompt_ids, const DecodeOptions& opts, std::mt19937_64& rng,
                 DecodeReport& report) {
  const auto& vocab = model.vocab();
  Guide::State s = guide.start();
  for (std::size_t step = 0;; ++step) {
    if (guide.is_accepting(s) && !guide.can_extend(s)) return;
    if (step == opts.max_len) {
      report.hit_max_len = true;
      if (guide.is_accepting(s)) return;
      throw Error(ErrorCode::MaxLenExceeded, "no accepting state within " + std::to_string(opts.max_len) + " tokens");
    }
    const auto dist = opts.reuse_state ? model.next_dist(state) : model.next_dist(prompt_ids, state.generated_ids());
    ++report.forward_calls;
    const TokenMask mask = grammar::allowed_tokens(guide, s, vocab);
    if (mask.empty()) throw Error(ErrorCode::NoViableToken, "no token keeps the guide live");
    report.masked_token_total += vocab.size() - mask.count();
    const TokenId tok = sample_masked(dist, mask, opts.sampling, rng);
    if (tok == vocab.eos()) return;
    s = guide.advance(s, vocab.token(tok));
    const TokenId one[1] = {tok};
    model.absorb(state, one);
    report.output_ids.push_back(tok);
  }
}

void absorb_static(const lm::LanguageModel& model, lm::DecodeState& state, std::span<const TokenId> ids,
                   DecodeReport& report) {
  model.absorb(state, ids);
  report.output_ids.insert(report.output_ids.end(), ids.begin(), ids.end());
  report.absorbed_tokens += ids.size();
}

}  // namespace

DecodeReport gcd_generate(const lm::LanguageModel& model, const Guide& guide, std::string_view prompt,
                          const DecodeOptions& opts) {
  const auto t0 = Clock::now();
  DecodeReport report;
  const auto prompt_ids = model.encode(prompt);
  lm::DecodeState state = model.start(prompt_ids);
  std::mt19937_64 rng(opts.sampling.seed);
  guided_loop(model, guide, state, prompt_ids, opts, rng, report);
  report.output_text = model.decode(report.output_ids);
  report.wall_time_ms = elapsed_ms(t0);
  return report;
}

// ---------------------------------------------------------------------------

std::size_t PartitionedTemplate::static_token_count() const {
  std::size_t n = 0;
  for (const auto& g : segments) n += g.size();
  return n;
}

nlohmann::json PartitionedTemplate::to_json() const {
  nlohmann::json kinds = nlohmann::json::array();
  for (auto k : slot_kinds) kinds.push_back(std::string(sql::to_string(k)));
  return {{"format", "tecod-partition/1"},
          {"template_id", template_id},
          {"lm_id", lm_id},
          {"segments", segments},
          {"slot_kinds", kinds},
          {"left_gaps", left_gaps},
          {"right_gaps", right_gaps},
          {"strict_strings", strict_strings},
          {"offline_text", offline_text}};
}

PartitionedTemplate PartitionedTemplate::from_json(const nlohmann::json& j, std::string_view expected_lm_id) {
  PartitionedTemplate p;
  try {
    if (j.at("format").get<std::string>() != "tecod-partition/1") {
      throw Error(ErrorCode::BadFormat, "unknown partition format");
    }
    p.lm_id = j.at("lm_id").get<std::string>();
    if (p.lm_id != expected_lm_id) {
      throw Error(ErrorCode::LmMismatch,
                  "partition compiled for '" + p.lm_id + "', not '" + std::string(expected_lm_id) + "'");
    }
    p.template_id = j.at("template_id").get<std::string>();
    p.segments = j.at("segments").get<std::vector<std::vector<TokenId>>>();
    for (const auto& k : j.at("slot_kinds")) {
      const auto s = k.get<std::string>();
      if (s != "str" && s != "num") throw Error(ErrorCode::BadFormat, "bad slot kind " + s);
      p.slot_kinds.push_back(s == "str" ? LiteralKind::Str : LiteralKind::Num);
    }
    p.left_gaps = j.at("left_gaps").get<std::vector<std::string>>();
    p.right_gaps = j.at("right_gaps").get<std::vector<std::string>>();
    p.strict_strings = j.value("strict_strings", false);
    p.offline_text = j.value("offline_text", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadFormat, std::string("partition json: ") + e.what());
  }
  const auto n = p.slot_kinds.size();
  if (p.segments.size() != n + 1 || p.left_gaps.size() != n || p.right_gaps.size() != n) {
    throw Error(ErrorCode::BadFormat, "partition arrays disagree in length");
  }
  return p;
}

void PartitionedTemplate::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << to_json().dump() << '\n';
}

PartitionedTemplate PartitionedTemplate::load(const std::filesystem::path& path, std::string_view expected_lm_id) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadFormat, path.string() + ": " + e.what());
  }
  return from_json(j, expected_lm_id);
}

PartitionedTemplate compile_partition(const lm::LanguageModel& model, const sql::SqlTemplate& tmpl,
                                      const Guide& guide, std::string_view sample_prompt, const DecodeOptions& opts,
                                      bool strict_strings) {
  DecodeOptions offline = opts;
  offline.sampling = Sampling::greedy();
  const DecodeReport run = gcd_generate(model, guide, sample_prompt, offline);
  const std::string& text = run.output_text;

  std::vector<sql::Literal> lits;
  try {
    lits = sql::extract_literals(sql::tokenize(text));
  } catch (const Error& e) {
    throw Error(ErrorCode::SlotAlignmentFailure, std::string("offline output does not lex: ") + e.what());
  }
  if (lits.size() != tmpl.slots.size()) {
    throw Error(ErrorCode::SlotAlignmentFailure, "offline output has " + std::to_string(lits.size()) +
                                                     " literals, template has " + std::to_string(tmpl.slots.size()));
  }
  for (std::size_t k = 0; k < lits.size(); ++k) {
    if (lits[k].kind != tmpl.slots[k]) throw Error(ErrorCode::SlotAlignmentFailure, "literal kinds disagree");
  }

  const std::size_t n = lits.size();
  PartitionedTemplate part;
  part.template_id = tmpl.template_id;
  part.lm_id = model.id();
  part.slot_kinds = tmpl.slots;
  part.strict_strings = strict_strings;
  part.offline_text = text;
  part.segments.resize(n + 1);
  std::vector<std::size_t> cover_begin(n, std::string::npos), cover_end(n, 0);

  std::size_t pos = 0;
  for (TokenId id : run.output_ids) {
    const std::size_t b = pos;
    const std::size_t e = pos + model.vocab().token(id).size();
    pos = e;
    std::size_t hits = 0, slot = 0, seg = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (lits[k].span.begin < e && b < lits[k].span.end) {
        ++hits;
        slot = k;
      }
      if (lits[k].span.end <= b) seg = k + 1;
    }
    if (hits > 1) throw Error(ErrorCode::SlotAlignmentFailure, "one token spans two literals", b);
    if (hits == 0) {
      part.segments[seg].push_back(id);
    } else {
      cover_begin[slot] = std::min(cover_begin[slot], b);
      cover_end[slot] = std::max(cover_end[slot], e);
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    part.left_gaps.push_back(text.substr(cover_begin[k], lits[k].span.begin - cover_begin[k]));
    part.right_gaps.push_back(text.substr(lits[k].span.end, cover_end[k] - lits[k].span.end));
  }
  return part;
}

std::string render(const PartitionedTemplate& part, const lm::Vocabulary& vocab,
                   const std::vector<std::string>& literal_texts) {
  if (literal_texts.size() != part.slot_kinds.size()) throw Error(ErrorCode::ArityMismatch, "literal count");
  std::string out = vocab.decode(part.segments[0]);
  for (std::size_t k = 0; k < literal_texts.size(); ++k) {
    out += part.left_gaps[k] + literal_texts[k] + part.right_gaps[k];
    out += vocab.decode(part.segments[k + 1]);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

Guide slot_guide(const std::vector<grammar::Regex>& parts) {
  return Guide(grammar::GuideKind::Literal, "", grammar::Dfa::compile(grammar::re_concat(parts)));
}

}  // namespace

DecodeReport partitioned_generate(const lm::LanguageModel& model, const PartitionedTemplate& part,
                                  std::string_view prompt, ContextMode mode, const DecodeOptions& opts) {
  using namespace grammar;
  const auto t0 = Clock::now();
  const auto& vocab = model.vocab();
  const std::size_t n = part.slot_kinds.size();
  if (part.segments.size() != n + 1) throw Error(ErrorCode::BadFormat, "partition arrays disagree in length");

  DecodeReport report;
  const auto prompt_ids = model.encode(prompt);
  lm::DecodeState state = model.start(prompt_ids);
  std::mt19937_64 rng(opts.sampling.seed);
  auto rule = [&](std::size_t k) { return parse_regex(literal_regex(part.slot_kinds[k], part.strict_strings)); };

  // Remaining window [first, last) of each segment once boundary tokens move.
  std::vector<std::size_t> first(n + 1, 0), last(n + 1);
  for (std::size_t k = 0; k <= n; ++k) last[k] = part.segments[k].size();
  auto window = [&](std::size_t k) {
    return std::span<const TokenId>(part.segments[k]).subspan(first[k], last[k] - first[k]);
  };

  std::size_t i = 0;
  while (i < n) {
    std::vector<Regex> parts;
    std::size_t j = i;
    if (mode == ContextMode::LeftRight) {
      // Slots separated only by slot-side tokens are filled as one group.
      while (j + 1 < n && part.segments[j + 1].empty()) ++j;
      std::string prev;
      if (first[i] < last[i]) prev = vocab.token(part.segments[i][--last[i]]);
      absorb_static(model, state, window(i), report);
      parts.push_back(re_tag(re_literal(prev), segment_region(i)));
      for (std::size_t k = i; k <= j; ++k) {
        parts.push_back(re_tag(re_literal(part.left_gaps[k]), segment_region(k)));
        parts.push_back(re_tag(rule(k), slot_region(k)));
        parts.push_back(re_tag(re_literal(part.right_gaps[k]), segment_region(k + 1)));
      }
      std::string next;
      if (first[j + 1] < last[j + 1]) next = vocab.token(part.segments[j + 1][first[j + 1]++]);
      parts.push_back(re_tag(re_literal(next), segment_region(j + 1)));
    } else {
      absorb_static(model, state, window(i), report);
      absorb_static(model, state, model.encode(part.left_gaps[i]), report);
      parts.push_back(re_tag(rule(i), slot_region(i)));
    }
    const std::size_t gen_before = report.output_ids.size();
    const Guide guide = slot_guide(parts);
    guided_loop(model, guide, state, prompt_ids, opts, rng, report);
    const std::string produced = vocab.decode(std::span<const TokenId>(report.output_ids).subspan(gen_before));
    if (!guide.accepts(produced)) {
      throw Error(ErrorCode::SlotRegexViolation, "slot " + std::to_string(i) + " produced '" + produced + "'");
    }
    if (mode == ContextMode::None) absorb_static(model, state, model.encode(part.right_gaps[i]), report);
    i = j + 1;
  }
  absorb_static(model, state, window(n), report);
  report.output_text = model.decode(report.output_ids);
  report.wall_time_ms = elapsed_ms(t0);
  return report;
}

}  // namespace tecod::decoder
