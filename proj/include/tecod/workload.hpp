#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace tecod::workload {

struct WorkloadStats {
  std::map<std::size_t, double> histogram;  // template size -> fraction of queries
  double sequential_match_rate = 0.0;       // 1 - n_templates / n_queries
  std::size_t n_queries = 0;
  std::size_t n_templates = 0;
  std::map<std::string, std::size_t> template_sizes;

  nlohmann::json to_json() const;
  std::string to_csv() const;  // "size,fraction" rows
};

// Groups queries by template identity (keyword case, whitespace and literal
// values ignored; literal kinds kept). Lexer errors are rethrown with the
// index of the offending query.
WorkloadStats analyze(const std::vector<std::string>& sqls);

// n queries from synthetic parametric families, template counts chosen so
// that each size receives its fraction of the queries; order shuffled by
// `seed`. Throws InfeasibleDistribution when the sizes cannot add up to n.
std::vector<std::string> generate_synthetic(const std::map<std::size_t, double>& dist, std::size_t n,
                                            std::uint64_t seed);

// Templates per size realising `dist` at n queries (the count step of
// generate_synthetic).
std::map<std::size_t, std::size_t> templates_per_size(const std::map<std::size_t, double>& dist, std::size_t n);

}  // namespace tecod::workload
