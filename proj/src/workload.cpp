#include "tecod/workload.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <unordered_map>

#include "tecod/error.hpp"
#include "tecod/sql_lexer.hpp"

namespace tecod::workload {

nlohmann::json WorkloadStats::to_json() const {
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& [size, frac] : histogram) hist.push_back({{"size", size}, {"fraction", frac}});
  return {{"n_queries", n_queries},
          {"n_templates", n_templates},
          {"sequential_match_rate", sequential_match_rate},
          {"histogram", hist}};
}

std::string WorkloadStats::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "size,fraction\n";
  for (const auto& [size, frac] : histogram) out << size << ',' << frac << '\n';
  return out.str();
}

WorkloadStats analyze(const std::vector<std::string>& sqls) {
  WorkloadStats st;
  st.n_queries = sqls.size();
  for (std::size_t i = 0; i < sqls.size(); ++i) {
    try {
      ++st.template_sizes[sql::template_id_for(sql::tokenize(sqls[i]))];
    } catch (const Error& e) {
      throw Error(e.code(), "query " + std::to_string(i) + ": " + e.what(), e.offset());
    }
  }
  st.n_templates = st.template_sizes.size();
  if (st.n_queries == 0) return st;
  std::map<std::size_t, std::size_t> queries_by_size;
  for (const auto& [id, size] : st.template_sizes) queries_by_size[size] += size;
  for (const auto& [size, q] : queries_by_size) {
    st.histogram[size] = static_cast<double>(q) / static_cast<double>(st.n_queries);
  }
  st.sequential_match_rate = 1.0 - static_cast<double>(st.n_templates) / static_cast<double>(st.n_queries);
  return st;
}

std::map<std::size_t, std::size_t> templates_per_size(const std::map<std::size_t, double>& dist, std::size_t n) {
  if (n == 0) throw Error(ErrorCode::InfeasibleDistribution, "n must be positive");
  double sum = 0.0;
  for (const auto& [size, f] : dist) {
    if (size == 0 || f < 0.0) throw Error(ErrorCode::InfeasibleDistribution, "sizes must be >= 1, fractions >= 0");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw Error(ErrorCode::InfeasibleDistribution, "fractions must sum to 1");

  std::map<std::size_t, std::size_t> m;
  long long total = 0;
  for (const auto& [size, f] : dist) {
    m[size] = static_cast<std::size_t>(std::llround(f * static_cast<double>(n) / static_cast<double>(size)));
    total += static_cast<long long>(m[size] * size);
  }
  // Rounding leftovers go to the smallest size that absorbs them exactly.
  long long diff = static_cast<long long>(n) - total;
  if (diff != 0) {
    const auto need = static_cast<std::size_t>(std::llabs(diff));
    bool fixed = false;
    for (auto& [size, count] : m) {
      if (need % size != 0) continue;
      const std::size_t k = need / size;
      if (diff > 0) {
        count += k;
      } else if (count >= k) {
        count -= k;
      } else {
        continue;
      }
      fixed = true;
      break;
    }
    if (!fixed) {
      throw Error(ErrorCode::InfeasibleDistribution, "cannot realise the distribution with exactly " +
                                                         std::to_string(n) + " queries");
    }
  }
  return m;
}

namespace {

constexpr const char* kTables[] = {"accounts", "clients", "orders", "loans", "cards",
                                   "branches", "payments", "districts", "trans", "disp"};
constexpr const char* kColumns[] = {"amount", "balance", "client_id", "district_id", "frequency",
                                    "status", "duration", "card_type", "gender", "region"};
constexpr const char* kOps[] = {"=", ">", "<", ">=", "<="};

std::string cased(std::string_view kw, std::mt19937_64& rng) {
  switch (rng() % 3) {
    case 0: return sql::ascii_upper(kw);
    case 1: return sql::ascii_lower(kw);
    default: return sql::ascii_title(kw);
  }
}

std::string literal(bool str, std::mt19937_64& rng) {
  if (!str) return std::to_string(rng() % 100000);
  std::string s = "'";
  const std::size_t len = 3 + rng() % 6;
  for (std::size_t i = 0; i < len; ++i) s += static_cast<char>('a' + rng() % 26);
  return s + "'";
}

// Family f as a mixed-radix number over (table, select column, filter column,
// operator, literal kind, tail clause); higher digits add AND-filters so the
// family space is unbounded.
std::string instance(std::size_t f, std::mt19937_64& rng) {
  auto digit = [&f](std::size_t radix) {
    const std::size_t d = f % radix;
    f /= radix;
    return d;
  };
  const auto table = digit(10), sel = digit(10), col = digit(10), op = digit(5), kind = digit(2), tail = digit(4);
  std::string q = cased("select", rng) + " " + kColumns[sel] + " " + cased("from", rng) + " " + kTables[table] + " " +
                  cased("where", rng) + " " + kColumns[col] + " " + kOps[op] + " " + literal(kind == 1, rng);
  for (std::size_t extra = 0; f > 0; ++extra) {
    const auto c = digit(10);
    q += " " + cased("and", rng) + " " + kColumns[c] + "_" + std::to_string(extra) + " = " + literal(false, rng);
  }
  switch (tail) {
    case 1: q += " " + cased("order", rng) + " " + cased("by", rng) + " " + kColumns[sel]; break;
    case 2: q += " " + cased("limit", rng) + " " + std::to_string(1 + rng() % 50); break;
    case 3: q += " " + cased("group", rng) + " " + cased("by", rng) + " " + kColumns[col]; break;
    default: break;
  }
  return q;
}

}  // namespace

std::vector<std::string> generate_synthetic(const std::map<std::size_t, double>& dist, std::size_t n,
                                            std::uint64_t seed) {
  const auto counts = templates_per_size(dist, n);
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  out.reserve(n);
  std::size_t family = 0;
  for (const auto& [size, count] : counts) {
    for (std::size_t t = 0; t < count; ++t, ++family) {
      for (std::size_t r = 0; r < size; ++r) out.push_back(instance(family, rng));
    }
  }
  for (std::size_t i = out.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(out[i - 1], out[j]);
  }
  return out;
}

}  // namespace tecod::workload
