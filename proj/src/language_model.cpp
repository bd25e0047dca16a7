#include "tecod/language_model.hpp"

#include <algorithm>
#include <cstdio>

#include "tecod/error.hpp"

namespace tecod::lm {

namespace {

std::string hash_hex(std::string_view prefix, const std::vector<std::string>& parts) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : parts) {
    for (unsigned char c : p) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xFF;
    h *= 0x100000001b3ULL;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(prefix) + buf;
}

}  // namespace

DecodeState LanguageModel::start(std::span<const TokenId> prompt) const {
  DecodeState s;
  s.tokens.assign(prompt.begin(), prompt.end());
  s.prompt_length = prompt.size();
  s.prompt_text = vocab_->decode(prompt);
  return s;
}

void LanguageModel::absorb(DecodeState& state, std::span<const TokenId> ids) const {
  for (TokenId id : ids) {
    state.tokens.push_back(id);
    if (id != vocab_->eos()) state.generated += vocab_->token(id);
  }
}

std::vector<double> LanguageModel::next_dist(std::span<const TokenId> prompt,
                                             std::span<const TokenId> generated) const {
  DecodeState fresh = start(prompt);
  absorb(fresh, generated);
  return next_dist(fresh);
}

// ---------------------------------------------------------------------------

ScriptedLm::ScriptedLm(std::shared_ptr<const Vocabulary> vocab, std::string target)
    : ScriptedLm(std::move(vocab), {}, std::move(target)) {}

ScriptedLm::ScriptedLm(std::shared_ptr<const Vocabulary> vocab,
                       std::vector<std::pair<std::string, std::string>> script, std::string default_target,
                       std::string name)
    : LanguageModel(std::move(vocab)),
      script_(std::move(script)),
      default_target_(std::move(default_target)),
      name_(std::move(name)) {
  check_tokenizable(default_target_);
  for (const auto& [key, target] : script_) check_tokenizable(target);
}

void ScriptedLm::check_tokenizable(const std::string& target) const {
  std::size_t pos = 0;
  while (pos < target.size()) {
    const TokenId t = vocab().longest_prefix_token(std::string_view(target).substr(pos));
    if (t < 0) {
      throw Error(ErrorCode::TargetNotTokenizable, "no token covers byte " + std::to_string(pos) + " of target", pos);
    }
    pos += vocab().token(t).size();
  }
}

std::string ScriptedLm::id() const {
  // The script is the model's behaviour, so it is part of its identity.
  std::vector<std::string> parts{vocab().identity(), default_target_};
  for (const auto& [k, v] : script_) {
    parts.push_back(k);
    parts.push_back(v);
  }
  return name_ + ":" + hash_hex("", parts);
}

const std::string& ScriptedLm::target_for(std::string_view prompt_text) const {
  for (const auto& [key, target] : script_) {
    if (prompt_text.find(key) != std::string_view::npos) return target;
  }
  return default_target_;
}

std::vector<double> ScriptedLm::next_dist(const DecodeState& state) const {
  const std::size_t v = vocab().size();
  const std::string& target = target_for(state.prompt_text);
  const std::string& gen = state.generated;
  if (gen.size() > target.size() || target.compare(0, gen.size(), gen) != 0) {
    return std::vector<double>(v, 1.0 / static_cast<double>(v));
  }
  TokenId preferred = vocab().eos();
  if (gen.size() < target.size()) {
    preferred = vocab().longest_prefix_token(std::string_view(target).substr(gen.size()));
  }
  std::vector<double> dist(v, (1.0 - kPreferredMass) / static_cast<double>(v - 1));
  dist[static_cast<std::size_t>(preferred)] = kPreferredMass;
  return dist;
}

// ---------------------------------------------------------------------------

NgramLm::NgramLm(std::shared_ptr<const Vocabulary> vocab, const std::vector<std::string>& corpus, int order)
    : LanguageModel(std::move(vocab)), order_(std::max(order, 1)) {
  for (const auto& line : corpus) {
    std::vector<TokenId> seq(static_cast<std::size_t>(order_ - 1), kBos);
    const auto ids = this->vocab().encode(line);
    seq.insert(seq.end(), ids.begin(), ids.end());
    seq.push_back(this->vocab().eos());
    for (std::size_t j = static_cast<std::size_t>(order_ - 1); j < seq.size(); ++j) {
      for (int k = 0; k < order_; ++k) {
        std::vector<TokenId> ctx(seq.begin() + static_cast<std::ptrdiff_t>(j) - k,
                                 seq.begin() + static_cast<std::ptrdiff_t>(j));
        auto& c = table_[ctx];
        ++c.next[seq[j]];
        ++c.total;
      }
    }
  }
  corpus_hash_ = hash_hex("", corpus);
}

std::string NgramLm::id() const {
  return "ngram" + std::to_string(order_) + ":" + hash_hex("", {vocab().identity(), corpus_hash_});
}

std::size_t NgramLm::count(const std::vector<TokenId>& context, TokenId next) const {
  auto it = table_.find(context);
  if (it == table_.end()) return 0;
  auto jt = it->second.next.find(next);
  return jt == it->second.next.end() ? 0 : jt->second;
}

std::vector<double> NgramLm::next_dist(const DecodeState& state) const {
  const std::size_t v = vocab().size();
  const auto gen = state.generated_ids();
  std::vector<TokenId> history(static_cast<std::size_t>(order_ - 1), kBos);
  history.insert(history.end(), gen.begin(), gen.end());

  const Counts* counts = nullptr;
  for (int k = order_ - 1; k >= 0 && counts == nullptr; --k) {
    std::vector<TokenId> ctx(history.end() - k, history.end());
    auto it = table_.find(ctx);
    if (it != table_.end() && it->second.total > 0) counts = &it->second;
  }
  std::vector<double> dist(v, 0.0);
  const double total = static_cast<double>(counts ? counts->total : 0);
  const double denom = total + static_cast<double>(v);
  for (std::size_t i = 0; i < v; ++i) dist[i] = 1.0 / denom;
  if (counts) {
    for (const auto& [id, c] : counts->next) dist[static_cast<std::size_t>(id)] += static_cast<double>(c) / denom;
  }
  return dist;
}

std::string make_prompt(std::string_view schema, std::string_view question) {
  std::string out(schema);
  if (!out.empty() && out.back() != '\n') out += '\n';
  out += "-- Question: ";
  out += question;
  out += "\n-- SQL:\n";
  return out;
}

}  // namespace tecod::lm
