#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tecod/vocabulary.hpp"

namespace tecod::lm {

// Processed context of one decode session. Absorbing tokens into the state
// stands in for a transformer's KV cache: it is prefill work, not a
// sequential decode step.
struct DecodeState {
  std::vector<TokenId> tokens;     // prompt ++ everything absorbed after it
  std::size_t prompt_length = 0;
  std::string generated;           // bytes of tokens after the prompt
  std::string prompt_text;

  std::size_t length() const noexcept { return tokens.size(); }
  std::span<const TokenId> generated_ids() const noexcept {
    return std::span<const TokenId>(tokens).subspan(prompt_length);
  }
};

// Next-token distribution provider. Implementations must be deterministic for
// a given context; the bundled ones are immutable and reentrant.
class LanguageModel {
 public:
  explicit LanguageModel(std::shared_ptr<const Vocabulary> vocab) : vocab_(std::move(vocab)) {}
  virtual ~LanguageModel() = default;

  const Vocabulary& vocab() const noexcept { return *vocab_; }
  std::shared_ptr<const Vocabulary> vocab_ptr() const noexcept { return vocab_; }

  // Identifies model + vocabulary; partitions compiled for one model refuse
  // to load for another.
  virtual std::string id() const = 0;

  std::vector<TokenId> encode(std::string_view text) const { return vocab_->encode(text); }
  std::string decode(std::span<const TokenId> ids) const { return vocab_->decode(ids); }

  DecodeState start(std::span<const TokenId> prompt) const;
  void absorb(DecodeState& state, std::span<const TokenId> ids) const;

  // Distribution over the whole vocabulary (EOS included) given the state.
  virtual std::vector<double> next_dist(const DecodeState& state) const = 0;

  // Same query rebuilt from scratch, without reusing any processed state.
  std::vector<double> next_dist(std::span<const TokenId> prompt, std::span<const TokenId> generated) const;

 private:
  std::shared_ptr<const Vocabulary> vocab_;
};

// Prefers, at every step, the longest vocabulary token that spells a prefix of
// the remaining target text (0.9 on it, 0.1 spread uniformly over the rest);
// EOS once the target is complete. Once the generated bytes leave the target
// the distribution is uniform.
//
// A script may map prompt substrings to different targets so one model can
// answer several questions; the first key contained in the prompt wins, and
// the default target applies otherwise.
class ScriptedLm : public LanguageModel {
 public:
  static constexpr double kPreferredMass = 0.9;

  ScriptedLm(std::shared_ptr<const Vocabulary> vocab, std::string target);
  ScriptedLm(std::shared_ptr<const Vocabulary> vocab, std::vector<std::pair<std::string, std::string>> script,
             std::string default_target, std::string name = "scripted");

  std::string id() const override;
  std::vector<double> next_dist(const DecodeState& state) const override;

  const std::string& target_for(std::string_view prompt_text) const;

 private:
  void check_tokenizable(const std::string& target) const;

  std::vector<std::pair<std::string, std::string>> script_;
  std::string default_target_;
  std::string name_;
};

// Order-n token model with add-one smoothing, trained on corpus lines (each
// followed by EOS). Conditions on generated tokens only, padded with a
// begin-of-sequence marker; backs off to the longest context seen in training.
class NgramLm : public LanguageModel {
 public:
  NgramLm(std::shared_ptr<const Vocabulary> vocab, const std::vector<std::string>& corpus, int order);

  std::string id() const override;
  std::vector<double> next_dist(const DecodeState& state) const override;
  int order() const noexcept { return order_; }

  // Raw training count of `next` after `context` (context length < order).
  std::size_t count(const std::vector<TokenId>& context, TokenId next) const;

 private:
  struct Counts {
    std::map<TokenId, std::size_t> next;
    std::size_t total = 0;
  };
  static constexpr TokenId kBos = -1;

  int order_;
  std::map<std::vector<TokenId>, Counts> table_;
  std::string corpus_hash_;
};

// Prompt layout shared by the CLI and tests: schema text, then the question.
std::string make_prompt(std::string_view schema, std::string_view question);

}  // namespace tecod::lm
