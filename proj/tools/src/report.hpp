#pragma once

// JSON and text rendering shared by the subcommands.

#include <string>
#include <vector>

#include <json.hpp>

#include "d3g/metrics.hpp"
#include "d3g/model.hpp"
#include "d3g_cli/experiments.hpp"

namespace d3g::cli::report {

using nlohmann::json;

json to_json(const MetricsReport& r);
json to_json(const std::vector<EpochRecord>& history);
json to_json(const MeanStd& s);
json to_json(const TrainConfig& c);

/// Header fields common to every artifact.
json header(const std::string& command);

/// Pretty-printed JSON written atomically.
void write_json(const std::string& path, const json& j);

/// Fixed-width text table; the first row is the header.
std::string table(const std::vector<std::vector<std::string>>& rows);

std::string fixed(double v, int digits = 4);

}  // namespace d3g::cli::report
