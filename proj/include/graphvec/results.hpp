#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace graphvec {

// Evaluation results: line-delimited JSON records plus a plain-text
// mean ± std summary grouped by (task, metric).

struct ResultRecord {
  std::string task;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
};

void append_results(const std::string& path, const std::vector<ResultRecord>& records);

// One line per (task, metric) in first-appearance order:
//   task  metric  mean ± std  (n=count)
// Std is the population standard deviation; a single sample reports ± 0.
std::string format_summary_table(const std::vector<ResultRecord>& records);

}  // namespace graphvec
