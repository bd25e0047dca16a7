#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tecod::grammar {

using ByteSet = std::bitset<256>;

// Byte-level regular expression tree. Nodes are immutable and shared.
struct RegexNode;
using Regex = std::shared_ptr<const RegexNode>;

struct RegexNode {
  enum class Op { Empty, Set, Concat, Alt, Star, Plus, Opt, Tag };
  Op op = Op::Empty;
  ByteSet set;                  // Op::Set
  std::vector<Regex> children;  // Concat/Alt: n-ary, Star/Plus/Opt/Tag: one
  std::uint16_t region = 0;     // Op::Tag
};

Regex re_empty();
Regex re_set(const ByteSet& set);
Regex re_byte(unsigned char c);
Regex re_literal(std::string_view bytes);
Regex re_concat(std::vector<Regex> parts);
Regex re_alt(std::vector<Regex> parts);
Regex re_star(Regex r);
Regex re_plus(Regex r);
Regex re_opt(Regex r);
// Marks every automaton state built from `r` with `region`.
Regex re_tag(Regex r, std::uint16_t region);

// Parses the usual subset: literals, \-escapes (\. \\ \t \n \r \d \s),
// [...] classes with ranges and ^, (...) groups, |, *, +, ?.
// Throws Error{RegexSyntax}.
Regex parse_regex(std::string_view pattern);

// Deterministic byte automaton. Dead states (no path to acceptance) are
// removed, so any defined transition leads to a live state.
class Dfa {
 public:
  using State = std::uint32_t;
  static constexpr State kDead = 0xFFFFFFFFu;
  static constexpr std::uint16_t kNoRegion = 0xFFFF;

  static Dfa compile(const Regex& regex);

  State start() const noexcept { return start_; }
  std::size_t num_states() const noexcept { return accepting_.size(); }
  std::size_t num_classes() const noexcept { return num_classes_; }
  bool empty_language() const noexcept { return empty_; }

  State step(State s, unsigned char byte) const noexcept {
    return table_[static_cast<std::size_t>(s) * num_classes_ + classes_[byte]];
  }
  bool accepting(State s) const noexcept { return accepting_[s] != 0; }
  bool has_outgoing(State s) const noexcept;
  std::uint16_t region(State s) const noexcept { return regions_[s]; }

  // Runs `bytes` from `s`; on failure returns nullopt and sets *fail_at to
  // the offset of the first rejected byte.
  std::optional<State> run(State s, std::string_view bytes,
                           std::size_t* fail_at = nullptr) const noexcept;

  void write(std::ostream& out) const;
  static Dfa read(std::istream& in);

 private:
  std::array<std::uint8_t, 256> classes_{};
  std::size_t num_classes_ = 1;
  std::vector<State> table_;
  std::vector<std::uint8_t> accepting_;
  std::vector<std::uint16_t> regions_;
  State start_ = 0;
  bool empty_ = false;
};

}  // namespace tecod::grammar
