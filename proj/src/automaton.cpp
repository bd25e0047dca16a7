#include "tecod/automaton.hpp"

#include <algorithm>
#include <deque>
#include <istream>
#include <map>
#include <ostream>

#include "tecod/error.hpp"

namespace tecod::grammar {

namespace {

Regex make(RegexNode node) { return std::make_shared<const RegexNode>(std::move(node)); }

}  // namespace

Regex re_empty() { return make(RegexNode{}); }

Regex re_set(const ByteSet& set) {
  RegexNode n;
  n.op = RegexNode::Op::Set;
  n.set = set;
  return make(std::move(n));
}

Regex re_byte(unsigned char c) {
  ByteSet s;
  s.set(c);
  return re_set(s);
}

Regex re_literal(std::string_view bytes) {
  std::vector<Regex> parts;
  parts.reserve(bytes.size());
  for (unsigned char c : bytes) parts.push_back(re_byte(c));
  return re_concat(std::move(parts));
}

Regex re_concat(std::vector<Regex> parts) {
  if (parts.empty()) return re_empty();
  if (parts.size() == 1) return parts.front();
  RegexNode n;
  n.op = RegexNode::Op::Concat;
  n.children = std::move(parts);
  return make(std::move(n));
}

Regex re_alt(std::vector<Regex> parts) {
  if (parts.size() == 1) return parts.front();
  RegexNode n;
  n.op = RegexNode::Op::Alt;
  n.children = std::move(parts);
  return make(std::move(n));
}

namespace {
Regex unary(RegexNode::Op op, Regex r, std::uint16_t region = 0) {
  RegexNode n;
  n.op = op;
  n.children.push_back(std::move(r));
  n.region = region;
  return make(std::move(n));
}
}  // namespace

Regex re_star(Regex r) { return unary(RegexNode::Op::Star, std::move(r)); }
Regex re_plus(Regex r) { return unary(RegexNode::Op::Plus, std::move(r)); }
Regex re_opt(Regex r) { return unary(RegexNode::Op::Opt, std::move(r)); }
Regex re_tag(Regex r, std::uint16_t region) {
  return unary(RegexNode::Op::Tag, std::move(r), region);
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class RegexParser {
 public:
  explicit RegexParser(std::string_view p) : p_(p) {}

  Regex parse() {
    Regex r = alternation();
    if (pos_ != p_.size()) fail("unexpected ')'");
    return r;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::RegexSyntax, what + " in /" + std::string(p_) + "/", pos_);
  }

  bool at_end() const { return pos_ >= p_.size(); }
  char peek() const { return p_[pos_]; }

  Regex alternation() {
    std::vector<Regex> alts{sequence()};
    while (!at_end() && peek() == '|') {
      ++pos_;
      alts.push_back(sequence());
    }
    return re_alt(std::move(alts));
  }

  Regex sequence() {
    std::vector<Regex> parts;
    while (!at_end() && peek() != '|' && peek() != ')') parts.push_back(repeat());
    return re_concat(std::move(parts));
  }

  Regex repeat() {
    Regex atom_re = atom();
    while (!at_end()) {
      const char c = peek();
      if (c == '*') {
        atom_re = re_star(atom_re);
      } else if (c == '+') {
        atom_re = re_plus(atom_re);
      } else if (c == '?') {
        atom_re = re_opt(atom_re);
      } else {
        break;
      }
      ++pos_;
    }
    return atom_re;
  }

  Regex atom() {
    const char c = peek();
    if (c == '(') {
      ++pos_;
      Regex inner = alternation();
      if (at_end() || peek() != ')') fail("missing ')'");
      ++pos_;
      return inner;
    }
    if (c == '[') return re_set(char_class());
    if (c == '.') {
      ++pos_;
      ByteSet all;
      all.set();
      all.reset('\n');
      return re_set(all);
    }
    if (c == '*' || c == '+' || c == '?') fail("dangling repetition");
    if (c == '\\') return re_set(escape());
    ++pos_;
    return re_byte(static_cast<unsigned char>(c));
  }

  ByteSet escape() {
    ++pos_;
    if (at_end()) fail("trailing backslash");
    const char c = p_[pos_++];
    ByteSet s;
    switch (c) {
      case 't': s.set('\t'); break;
      case 'n': s.set('\n'); break;
      case 'r': s.set('\r'); break;
      case 'd':
        for (int b = '0'; b <= '9'; ++b) s.set(static_cast<std::size_t>(b));
        break;
      case 's':
        for (char b : {' ', '\t', '\n', '\r'}) s.set(static_cast<unsigned char>(b));
        break;
      default: s.set(static_cast<unsigned char>(c)); break;
    }
    return s;
  }

  ByteSet char_class() {
    ++pos_;  // '['
    bool negate = false;
    if (!at_end() && peek() == '^') {
      negate = true;
      ++pos_;
    }
    ByteSet s;
    bool first = true;
    while (true) {
      if (at_end()) fail("unterminated character class");
      if (peek() == ']' && !first) {
        ++pos_;
        break;
      }
      first = false;
      ByteSet lo_set;
      unsigned char lo = 0;
      bool single = true;
      if (peek() == '\\') {
        lo_set = escape();
        single = lo_set.count() == 1;
        if (single) {
          for (std::size_t b = 0; b < 256; ++b) {
            if (lo_set.test(b)) lo = static_cast<unsigned char>(b);
          }
        }
      } else {
        lo = static_cast<unsigned char>(p_[pos_++]);
        lo_set.set(lo);
      }
      if (single && pos_ + 1 < p_.size() && peek() == '-' && p_[pos_ + 1] != ']') {
        ++pos_;
        unsigned char hi = 0;
        if (peek() == '\\') {
          ByteSet h = escape();
          if (h.count() != 1) fail("bad range end");
          for (std::size_t b = 0; b < 256; ++b) {
            if (h.test(b)) hi = static_cast<unsigned char>(b);
          }
        } else {
          hi = static_cast<unsigned char>(p_[pos_++]);
        }
        if (hi < lo) fail("inverted range");
        for (unsigned b = lo; b <= hi; ++b) s.set(b);
      } else {
        s |= lo_set;
      }
    }
    if (negate) s.flip();
    return s;
  }

  std::string_view p_;
  std::size_t pos_ = 0;
};

}  // namespace

Regex parse_regex(std::string_view pattern) { return RegexParser(pattern).parse(); }

// ---------------------------------------------------------------------------
// Thompson NFA + subset construction

namespace {

struct NfaState {
  std::vector<int> eps;
  int set_index = -1;  // index into Nfa::sets, -1 when no byte edge
  int next = -1;
  std::uint16_t region = Dfa::kNoRegion;
};

struct Nfa {
  std::vector<NfaState> states;
  std::vector<ByteSet> sets;
  int start = 0;
  int accept = 0;

  int add(std::uint16_t region) {
    NfaState s;
    s.region = region;
    states.push_back(s);
    return static_cast<int>(states.size()) - 1;
  }
};

struct Fragment {
  int in;
  int out;
};

Fragment build(Nfa& nfa, const RegexNode& node, std::uint16_t region) {
  using Op = RegexNode::Op;
  switch (node.op) {
    case Op::Empty: {
      const int s = nfa.add(region);
      return {s, s};
    }
    case Op::Set: {
      const int a = nfa.add(region);
      const int b = nfa.add(region);
      nfa.sets.push_back(node.set);
      nfa.states[a].set_index = static_cast<int>(nfa.sets.size()) - 1;
      nfa.states[a].next = b;
      return {a, b};
    }
    case Op::Concat: {
      Fragment f = build(nfa, *node.children.front(), region);
      for (std::size_t i = 1; i < node.children.size(); ++i) {
        const Fragment g = build(nfa, *node.children[i], region);
        nfa.states[f.out].eps.push_back(g.in);
        f.out = g.out;
      }
      return f;
    }
    case Op::Alt: {
      const int a = nfa.add(region);
      const int b = nfa.add(region);
      for (const auto& child : node.children) {
        const Fragment g = build(nfa, *child, region);
        nfa.states[a].eps.push_back(g.in);
        nfa.states[g.out].eps.push_back(b);
      }
      return {a, b};
    }
    case Op::Star:
    case Op::Plus:
    case Op::Opt: {
      const int a = nfa.add(region);
      const int b = nfa.add(region);
      const Fragment g = build(nfa, *node.children.front(), region);
      nfa.states[a].eps.push_back(g.in);
      nfa.states[g.out].eps.push_back(b);
      if (node.op != Op::Plus) nfa.states[a].eps.push_back(b);
      if (node.op != Op::Opt) nfa.states[g.out].eps.push_back(g.in);
      return {a, b};
    }
    case Op::Tag:
      return build(nfa, *node.children.front(), node.region);
  }
  return {0, 0};
}

void closure(const Nfa& nfa, std::vector<int>& set, std::vector<char>& seen) {
  std::vector<int> stack(set.begin(), set.end());
  for (int s : set) seen[static_cast<std::size_t>(s)] = 1;
  while (!stack.empty()) {
    const int s = stack.back();
    stack.pop_back();
    for (int t : nfa.states[static_cast<std::size_t>(s)].eps) {
      if (!seen[static_cast<std::size_t>(t)]) {
        seen[static_cast<std::size_t>(t)] = 1;
        set.push_back(t);
        stack.push_back(t);
      }
    }
  }
  for (int s : set) seen[static_cast<std::size_t>(s)] = 0;
  std::sort(set.begin(), set.end());
}

}  // namespace

bool Dfa::has_outgoing(State s) const noexcept {
  const auto* row = &table_[static_cast<std::size_t>(s) * num_classes_];
  return std::any_of(row, row + num_classes_, [](State t) { return t != kDead; });
}

std::optional<Dfa::State> Dfa::run(State s, std::string_view bytes,
                                   std::size_t* fail_at) const noexcept {
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    s = step(s, static_cast<unsigned char>(bytes[i]));
    if (s == kDead) {
      if (fail_at != nullptr) *fail_at = i;
      return std::nullopt;
    }
  }
  return s;
}

Dfa Dfa::compile(const Regex& regex) {
  Nfa nfa;
  const Fragment whole = build(nfa, *regex, kNoRegion);
  nfa.start = whole.in;
  nfa.accept = whole.out;

  // Byte equivalence classes: bytes with identical membership in every set.
  Dfa dfa;
  {
    std::map<std::vector<bool>, std::uint8_t> signature_to_class;
    for (std::size_t b = 0; b < 256; ++b) {
      std::vector<bool> sig(nfa.sets.size());
      for (std::size_t k = 0; k < nfa.sets.size(); ++k) sig[k] = nfa.sets[k].test(b);
      auto [it, inserted] =
          signature_to_class.emplace(std::move(sig), static_cast<std::uint8_t>(signature_to_class.size()));
      dfa.classes_[b] = it->second;
    }
    dfa.num_classes_ = signature_to_class.size();
  }
  std::vector<unsigned char> representative(dfa.num_classes_);
  for (std::size_t b = 256; b-- > 0;) representative[dfa.classes_[b]] = static_cast<unsigned char>(b);

  std::vector<char> seen(nfa.states.size(), 0);
  std::map<std::vector<int>, State> ids;
  std::vector<std::vector<int>> subsets;
  std::vector<State> raw_table;

  std::vector<int> init{nfa.start};
  closure(nfa, init, seen);
  ids.emplace(init, 0);
  subsets.push_back(init);
  for (std::size_t cur = 0; cur < subsets.size(); ++cur) {
    for (std::size_t cls = 0; cls < dfa.num_classes_; ++cls) {
      const unsigned char byte = representative[cls];
      std::vector<int> next;
      for (int s : subsets[cur]) {
        const auto& st = nfa.states[static_cast<std::size_t>(s)];
        if (st.set_index >= 0 && nfa.sets[static_cast<std::size_t>(st.set_index)].test(byte)) {
          next.push_back(st.next);
        }
      }
      if (next.empty()) {
        raw_table.push_back(kDead);
        continue;
      }
      closure(nfa, next, seen);
      auto [it, inserted] = ids.emplace(next, static_cast<State>(subsets.size()));
      if (inserted) subsets.push_back(next);
      raw_table.push_back(it->second);
    }
  }

  const std::size_t n = subsets.size();
  const std::size_t nc = dfa.num_classes_;
  std::vector<char> accepting(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    accepting[i] = std::binary_search(subsets[i].begin(), subsets[i].end(), nfa.accept) ? 1 : 0;
  }

  // Co-reachability: keep only states that can still reach acceptance.
  std::vector<std::vector<State>> reverse(n);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t c = 0; c < nc; ++c) {
      const State t = raw_table[s * nc + c];
      if (t != kDead) reverse[t].push_back(static_cast<State>(s));
    }
  }
  std::vector<char> live(n, 0);
  std::deque<State> queue;
  for (std::size_t s = 0; s < n; ++s) {
    if (accepting[s]) {
      live[s] = 1;
      queue.push_back(static_cast<State>(s));
    }
  }
  while (!queue.empty()) {
    const State s = queue.front();
    queue.pop_front();
    for (State p : reverse[s]) {
      if (!live[p]) {
        live[p] = 1;
        queue.push_back(p);
      }
    }
  }

  if (!live[0]) {
    dfa.empty_ = true;
    dfa.start_ = 0;
    dfa.table_.assign(nc, kDead);
    dfa.accepting_.assign(1, 0);
    dfa.regions_.assign(1, kNoRegion);
    return dfa;
  }

  // Renumber live states in BFS order from the start so all are reachable.
  std::vector<State> remap(n, kDead);
  std::vector<State> order;
  remap[0] = 0;
  order.push_back(0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const State s = order[k];
    for (std::size_t c = 0; c < nc; ++c) {
      const State t = raw_table[s * nc + c];
      if (t != kDead && live[t] && remap[t] == kDead) {
        remap[t] = static_cast<State>(order.size());
        order.push_back(t);
      }
    }
  }
  dfa.table_.assign(order.size() * nc, kDead);
  dfa.accepting_.resize(order.size());
  dfa.regions_.resize(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const State s = order[k];
    for (std::size_t c = 0; c < nc; ++c) {
      const State t = raw_table[s * nc + c];
      if (t != kDead && live[t]) dfa.table_[k * nc + c] = remap[t];
    }
    dfa.accepting_[k] = static_cast<std::uint8_t>(accepting[s]);
    std::uint16_t region = kNoRegion;
    for (int ns : subsets[s]) region = std::min(region, nfa.states[static_cast<std::size_t>(ns)].region);
    dfa.regions_[k] = region;
  }
  dfa.start_ = 0;
  return dfa;
}

// ---------------------------------------------------------------------------
// Binary layout (little endian):
//   u32 num_states, u32 start, u16 num_classes, u8 empty,
//   u8[256] byte->class, u8[num_states] accepting, u16[num_states] regions,
//   u32[num_states * num_classes] transitions

namespace {

template <typename T>
void put(std::ostream& out, T value) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    throw Error(ErrorCode::BadFormat, "truncated automaton table");
  }
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(static_cast<T>(buf[i]) << (8 * i));
  return value;
}

}  // namespace

void Dfa::write(std::ostream& out) const {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(num_states()));
  put<std::uint32_t>(out, start_);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(num_classes_));
  put<std::uint8_t>(out, empty_ ? 1 : 0);
  for (auto c : classes_) put<std::uint8_t>(out, c);
  for (auto a : accepting_) put<std::uint8_t>(out, a);
  for (auto r : regions_) put<std::uint16_t>(out, r);
  for (auto t : table_) put<std::uint32_t>(out, t);
}

Dfa Dfa::read(std::istream& in) {
  Dfa dfa;
  const auto n = get<std::uint32_t>(in);
  dfa.start_ = get<std::uint32_t>(in);
  dfa.num_classes_ = get<std::uint16_t>(in);
  dfa.empty_ = get<std::uint8_t>(in) != 0;
  if (n == 0 || dfa.num_classes_ == 0 || dfa.num_classes_ > 256 || dfa.start_ >= n) {
    throw Error(ErrorCode::BadFormat, "invalid automaton header");
  }
  for (auto& c : dfa.classes_) {
    c = get<std::uint8_t>(in);
    if (c >= dfa.num_classes_) throw Error(ErrorCode::BadFormat, "byte class out of range");
  }
  dfa.accepting_.resize(n);
  for (auto& a : dfa.accepting_) a = get<std::uint8_t>(in);
  dfa.regions_.resize(n);
  for (auto& r : dfa.regions_) r = get<std::uint16_t>(in);
  dfa.table_.resize(static_cast<std::size_t>(n) * dfa.num_classes_);
  for (auto& t : dfa.table_) {
    t = get<std::uint32_t>(in);
    if (t != kDead && t >= n) throw Error(ErrorCode::BadFormat, "transition out of range");
  }
  return dfa;
}

}  // namespace tecod::grammar
