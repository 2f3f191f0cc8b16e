#include "graphvec/results.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "graphvec/errors.hpp"

namespace graphvec {

void append_results(const std::string& path, const std::vector<ResultRecord>& records) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IngestError("results: cannot open '" + path + "' for writing");
  for (const auto& rec : records) {
    const nlohmann::json line = {{"task", rec.task},
                                 {"seed", rec.seed},
                                 {"metric", rec.metric},
                                 {"value", rec.value}};
    out << line.dump() << "\n";
  }
  if (!out) throw IngestError("results: write to '" + path + "' failed");
}

std::string format_summary_table(const std::vector<ResultRecord>& records) {
  struct Group {
    std::string task, metric;
    std::vector<double> values;
  };
  std::vector<Group> groups;
  for (const auto& rec : records) {
    Group* g = nullptr;
    for (auto& existing : groups)
      if (existing.task == rec.task && existing.metric == rec.metric) g = &existing;
    if (!g) {
      groups.push_back({rec.task, rec.metric, {}});
      g = &groups.back();
    }
    g->values.push_back(rec.value);
  }

  std::string out = "task\tmetric\tmean\tstd\tn\n";
  char buf[256];
  for (const auto& g : groups) {
    double mean = 0.0;
    for (double v : g.values) mean += v;
    mean /= static_cast<double>(g.values.size());
    double var = 0.0;
    for (double v : g.values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(g.values.size());
    std::snprintf(buf, sizeof(buf), "%s\t%s\t%.6f\t%.6f\t%zu\n", g.task.c_str(),
                  g.metric.c_str(), mean, std::sqrt(var), g.values.size());
    out += buf;
  }
  return out;
}

}  // namespace graphvec
