#include "report.hpp"

#include <algorithm>
#include <cstdio>

#include "d3g/checkpoint.hpp"
#include "d3g/io.hpp"
#include "d3g/version.hpp"

namespace d3g::cli::report {

json to_json(const MetricsReport& r) {
  json per = json::array();
  for (const auto& d : r.per_domain) {
    per.push_back({{"domain", d.domain}, {"count", d.count}, {"value", d.value}});
  }
  return {{"metric", std::string(to_string(r.metric))},
          {"mean", r.mean},
          {"worst", r.worst},
          {"per_domain", per}};
}

json to_json(const std::vector<EpochRecord>& history) {
  json out = json::array();
  for (const auto& e : history) {
    json row = {{"epoch", e.epoch}, {"loss", e.loss}, {"pred", e.pred}, {"rel", e.rel}};
    if (e.valid_metric) row["valid_metric"] = *e.valid_metric;
    out.push_back(std::move(row));
  }
  return out;
}

json to_json(const MeanStd& s) { return {{"mean", s.mean}, {"std", s.std}}; }

json to_json(const TrainConfig& c) { return json::parse(train_config_to_json(c)); }

json header(const std::string& command) {
  return {{"tool", "d3g"}, {"version", std::string(kVersion)}, {"command", command}};
}

void write_json(const std::string& path, const json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

std::string table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  std::string out;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t i = 0; i < rows[k].size(); ++i) {
      std::string cell = rows[k][i];
      cell.resize(width[i], ' ');
      out += cell;
      if (i + 1 < rows[k].size()) out += "  ";
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
    if (k == 0) {
      std::size_t total = 0;
      for (std::size_t i = 0; i < width.size(); ++i) total += width[i] + (i ? 2 : 0);
      out += std::string(total, '-') + '\n';
    }
  }
  return out;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace d3g::cli::report
