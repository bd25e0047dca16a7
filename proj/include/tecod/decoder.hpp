#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tecod/grammar.hpp"
#include "tecod/language_model.hpp"
#include "tecod/sql_lexer.hpp"

namespace tecod::decoder {

using lm::TokenId;
using sql::LiteralKind;

struct Sampling {
  enum class Kind { Greedy, Seeded };
  Kind kind = Kind::Greedy;
  std::uint64_t seed = 0;

  static Sampling greedy() { return {}; }
  static Sampling seeded(std::uint64_t seed) { return {Kind::Seeded, seed}; }
};

struct DecodeOptions {
  std::size_t max_len = 512;  // sampled tokens per run (per slot group when partitioned)
  Sampling sampling;
  // Off: every step rebuilds the context from scratch instead of extending
  // the decode state. Outputs must not change.
  bool reuse_state = true;
};

struct DecodeReport {
  std::string output_text;
  std::vector<TokenId> output_ids;   // EOS excluded
  std::size_t forward_calls = 0;     // sequential next-token queries
  std::size_t absorbed_tokens = 0;   // static tokens fed as prefill
  std::size_t masked_token_total = 0;  // disallowed ids summed over steps
  bool hit_max_len = false;
  double wall_time_ms = 0.0;
};

// Masked sampling over `dist`: greedy takes the highest allowed probability
// (lowest id on ties); seeded renormalises over the mask.
TokenId sample_masked(const std::vector<double>& dist, const grammar::TokenMask& mask, const Sampling& sampling,
                      std::mt19937_64& rng);

// Whole-guide constrained generation. Throws NoViableToken when the mask is
// empty and MaxLenExceeded when max_len runs out outside an accepting state.
DecodeReport gcd_generate(const lm::LanguageModel& model, const grammar::Guide& guide, std::string_view prompt,
                          const DecodeOptions& opts = {});

// LM-aligned token segments around literal slots. A token overlapping both
// segment bytes and a literal belongs to the slot; the segment bytes it
// carries are kept as left/right gaps of that slot so they are regenerated
// together with the literal.
struct PartitionedTemplate {
  std::string template_id;
  std::string lm_id;
  std::vector<std::vector<TokenId>> segments;  // slot_kinds.size() + 1
  std::vector<LiteralKind> slot_kinds;
  std::vector<std::string> left_gaps;
  std::vector<std::string> right_gaps;
  bool strict_strings = false;
  std::string offline_text;  // output of the offline run

  std::size_t static_token_count() const;

  nlohmann::json to_json() const;
  // Throws LmMismatch when the file was compiled for another model.
  static PartitionedTemplate from_json(const nlohmann::json& j, std::string_view expected_lm_id);
  void save(const std::filesystem::path& path) const;
  static PartitionedTemplate load(const std::filesystem::path& path, std::string_view expected_lm_id);
};

// Runs gcd_generate once (greedy) and splits its tokens around the literals.
// Throws SlotAlignmentFailure when the output's literals do not line up with
// the template's slots or one token spans two literals.
PartitionedTemplate compile_partition(const lm::LanguageModel& model, const sql::SqlTemplate& tmpl,
                                      const grammar::Guide& guide, std::string_view sample_prompt,
                                      const DecodeOptions& opts = {}, bool strict_strings = false);

// Text of the partition with the given literal texts placed in the slots.
std::string render(const PartitionedTemplate& part, const lm::Vocabulary& vocab,
                   const std::vector<std::string>& literal_texts);

enum class ContextMode { None, LeftRight };

// Online phase: static tokens are absorbed, only slots are sampled. Under
// LeftRight the last token of the preceding segment and the first token of
// the following one are regenerated with the slot under a literal guide.
// Under None each slot sees only its literal rule, and gap bytes are absorbed
// as static text.
DecodeReport partitioned_generate(const lm::LanguageModel& model, const PartitionedTemplate& part,
                                  std::string_view prompt, ContextMode mode, const DecodeOptions& opts = {});

}  // namespace tecod::decoder
