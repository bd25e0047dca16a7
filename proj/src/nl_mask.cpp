#include "tecod/nl_mask.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace tecod::nl {

namespace {

bool alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

bool free_range(const std::vector<bool>& used, std::size_t b, std::size_t e) {
  for (std::size_t i = b; i < e; ++i) {
    if (used[i]) return false;
  }
  return true;
}

std::size_t lcs_length(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (char ca : a) {
    std::size_t diag = 0;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = ca == b[j - 1] ? diag + 1 : std::max(row[j], row[j - 1]);
      diag = up;
    }
  }
  return row[b.size()];
}

std::optional<FuzzyHit> fuzzy_search(std::string_view haystack, std::string_view needle, double threshold,
                                     const std::vector<bool>& used) {
  if (needle.empty() || haystack.empty()) return std::nullopt;
  const std::string hay = sql::ascii_lower(haystack);
  const std::string pin = sql::ascii_lower(needle);
  const auto n = static_cast<double>(pin.size());
  const auto min_len = static_cast<std::size_t>(std::ceil(0.7 * n));
  const auto max_len = static_cast<std::size_t>(std::floor(1.3 * n));

  std::vector<std::size_t> starts, ends;
  for (std::size_t i = 0; i < hay.size(); ++i) {
    if (alnum(hay[i]) && (i == 0 || !alnum(hay[i - 1]))) starts.push_back(i);
    if (alnum(hay[i]) && (i + 1 == hay.size() || !alnum(hay[i + 1]))) ends.push_back(i + 1);
  }
  // Needles that begin or end in punctuation (e.g. "%Y") may align there too.
  if (!alnum(pin.front())) {
    for (std::size_t i = 0; i < hay.size(); ++i) {
      if (hay[i] == pin.front()) starts.push_back(i);
    }
  }
  if (!alnum(pin.back())) {
    for (std::size_t i = 0; i < hay.size(); ++i) {
      if (hay[i] == pin.back()) ends.push_back(i + 1);
    }
  }
  std::sort(starts.begin(), starts.end());
  starts.erase(std::unique(starts.begin(), starts.end()), starts.end());
  std::sort(ends.begin(), ends.end());
  ends.erase(std::unique(ends.begin(), ends.end()), ends.end());

  std::optional<FuzzyHit> best;
  for (std::size_t s : starts) {
    for (std::size_t e : ends) {
      if (e <= s) continue;
      const std::size_t len = e - s;
      if (len < min_len || len > max_len) continue;
      if (!used.empty() && !free_range(used, s, e)) continue;
      const double score = indel_similarity(std::string_view(hay).substr(s, len), pin);
      if (score >= threshold && (!best || score > best->score)) best = FuzzyHit{{s, e}, score};
    }
  }
  return best;
}

std::string comma_grouped(std::string_view num) {
  std::string_view sign;
  if (!num.empty() && num.front() == '-') {
    sign = num.substr(0, 1);
    num.remove_prefix(1);
  }
  const auto dot = num.find('.');
  const std::string_view whole = num.substr(0, dot);
  if (whole.size() < 4) return {};
  std::string out(sign);
  for (std::size_t i = 0; i < whole.size(); ++i) {
    if (i > 0 && (whole.size() - i) % 3 == 0) out += ',';
    out += whole[i];
  }
  if (dot != std::string_view::npos) out += num.substr(dot);
  return out;
}

// First unconsumed case-insensitive mention of `needle`, aligned so that it
// does not split a word (or a number, for numeric literals).
std::optional<Span> exact_find(const std::string& hay_lower, std::string_view needle, bool numeric,
                               const std::vector<bool>& used) {
  if (needle.empty()) return std::nullopt;
  const std::string pin = sql::ascii_lower(needle);
  auto joins = [&](char outside, char inside) {
    if (numeric) return digit(outside) || (outside == '.' && digit(inside));
    return alnum(outside) && alnum(inside);
  };
  for (std::size_t p = hay_lower.find(pin); p != std::string::npos; p = hay_lower.find(pin, p + 1)) {
    const std::size_t e = p + pin.size();
    if (p > 0 && joins(hay_lower[p - 1], pin.front())) continue;
    if (e < hay_lower.size() && joins(hay_lower[e], pin.back())) continue;
    if (!free_range(used, p, e)) continue;
    return Span{p, e};
  }
  return std::nullopt;
}

}  // namespace

double indel_similarity(std::string_view a, std::string_view b) {
  const std::size_t total = a.size() + b.size();
  if (total == 0) return 1.0;
  const std::size_t dist = total - 2 * lcs_length(a, b);
  return 1.0 - static_cast<double>(dist) / static_cast<double>(total);
}

std::optional<FuzzyHit> fuzzy_find(std::string_view haystack, std::string_view needle, double threshold) {
  return fuzzy_search(haystack, needle, threshold, {});
}

std::string MaskedNlq::unmask() const {
  std::string out;
  std::size_t src = 0;
  std::size_t pos = 0;
  for (const auto& m : mask_spans) {
    const std::size_t head = m.original.begin - src;
    out += text.substr(pos, head);
    out += source.substr(m.original.begin, m.original.size());
    pos += head + sql::placeholder(m.kind).size();
    src = m.original.end;
  }
  out += text.substr(pos);
  return out;
}

MaskedNlq mask_nlq(std::string_view nlq, const std::vector<sql::Literal>& literals, double fuzzy_threshold) {
  MaskedNlq out;
  out.source = std::string(nlq);
  const std::string lower = sql::ascii_lower(nlq);
  std::vector<bool> used(nlq.size(), false);
  // Placeholders already present count as consumed text.
  for (std::string_view ph : {std::string_view("[string]"), std::string_view("[number]")}) {
    for (auto p = lower.find(ph); p != std::string::npos; p = lower.find(ph, p + 1)) {
      std::fill(used.begin() + static_cast<std::ptrdiff_t>(p),
                used.begin() + static_cast<std::ptrdiff_t>(p + ph.size()), true);
    }
  }

  std::vector<std::string> needles;
  for (const auto& lit : literals) needles.push_back(lit.kind == LiteralKind::Str ? lit.value() : lit.text);
  std::vector<std::size_t> order(literals.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return needles[a].size() > needles[b].size(); });

  for (std::size_t idx : order) {
    const auto& needle = needles[idx];
    const bool numeric = literals[idx].kind == LiteralKind::Num;
    std::optional<Span> hit = exact_find(lower, needle, numeric, used);
    if (!hit && numeric) {
      const std::string grouped = comma_grouped(needle);
      if (!grouped.empty()) hit = exact_find(lower, grouped, true, used);
    }
    if (!hit && !needle.empty()) {
      if (auto f = fuzzy_search(nlq, needle, fuzzy_threshold, used)) hit = f->span;
    }
    if (!hit) {
      out.unmatched.push_back(idx);
      continue;
    }
    std::fill(used.begin() + static_cast<std::ptrdiff_t>(hit->begin),
              used.begin() + static_cast<std::ptrdiff_t>(hit->end), true);
    out.mask_spans.push_back({*hit, literals[idx].kind, idx});
  }
  std::sort(out.unmatched.begin(), out.unmatched.end());
  std::sort(out.mask_spans.begin(), out.mask_spans.end(),
            [](const MaskSpan& a, const MaskSpan& b) { return a.original.begin < b.original.begin; });

  std::size_t pos = 0;
  for (const auto& m : out.mask_spans) {
    out.text += nlq.substr(pos, m.original.begin - pos);
    out.text += sql::placeholder(m.kind);
    pos = m.original.end;
  }
  out.text += nlq.substr(pos);
  return out;
}

std::string mask_unknown_literals(std::string_view q) {
  std::string out;
  std::size_t i = 0;
  while (i < q.size()) {
    const char c = q[i];
    if (c == '[' && (q.substr(i, 8) == "[string]" || q.substr(i, 8) == "[number]")) {
      out += q.substr(i, 8);
      i += 8;
    } else if ((c == '\'' || c == '"') && (i == 0 || !alnum(q[i - 1]))) {
      const auto close = q.find(c, i + 1);
      if (close == std::string_view::npos) {
        out += c;
        ++i;
        continue;
      }
      out += "[string]";
      i = close + 1;
    } else if (digit(c) && (i == 0 || !alnum(q[i - 1]))) {
      std::size_t j = i;
      while (j < q.size() && (digit(q[j]) || ((q[j] == '.' || q[j] == ',') && j + 1 < q.size() && digit(q[j + 1])))) {
        ++j;
      }
      if (j < q.size() && std::isalpha(static_cast<unsigned char>(q[j]))) {
        // Tokens like "3rd" or "2b" are words, not numbers.
        while (j < q.size() && alnum(q[j])) ++j;
        out += q.substr(i, j - i);
      } else {
        out += "[number]";
      }
      i = j;
    } else {
      out += c;
      ++i;
    }
  }
  return out;
}

}  // namespace tecod::nl
