#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "d3g/data.hpp"
#include "d3g/metrics.hpp"
#include "d3g/model.hpp"

namespace d3g::cli {

enum class Method { kD3g, kErm };
std::string_view to_string(Method m);
Method method_from_string(std::string_view s);

/// Trained model and its reports for one seed (config.seed).
struct SeedRun {
  std::uint64_t seed = 0;
  MultiHeadModel model;
  TrainResult train;
  std::optional<MetricsReport> valid;
  std::optional<MetricsReport> test;
};

SeedRun run_seed(const DomainDataset& ds, Method method, const TrainConfig& config);

/// Report for a split, or nullopt when the split has no domains.
std::optional<MetricsReport> evaluate_split(const MultiHeadModel& model,
                                            const DomainDataset& ds, Split split,
                                            const TrainConfig& config);

/// RW-FT: per domain of the split, fine-tune a copy of the ERM model on
/// training data weighted by the fixed relation to that domain, then score it
/// on that domain. config.epochs sets the fine-tuning length.
MetricsReport evaluate_rwft(const MultiHeadModel& erm, const DomainDataset& ds,
                            Split split, const TrainConfig& config);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for one value
};
MeanStd mean_std(std::span<const double> values);

using DatasetFactory = std::function<DomainDataset(std::uint64_t seed)>;

struct Variant {
  std::string group;  // "relation" or "consistency"
  std::string name;
  double beta = 0.0;
  double lambda = 0.0;
  RelationMode mode = RelationMode::kFused;

  /// base with this variant's beta, lambda and relation mode.
  TrainConfig apply(TrainConfig base) const;
};

/// Four relation rows (none, fixed, learned, fixed+learned) and two
/// consistency rows (with and without the consistency term).
std::vector<Variant> ablation_variants(const TrainConfig& base);

struct VariantResult {
  Variant variant;
  std::vector<double> per_seed;  // test metric mean per seed
  MeanStd stats;
  std::vector<std::vector<EpochRecord>> histories;
};

std::vector<VariantResult> run_ablation(const DatasetFactory& datasets,
                                        const TrainConfig& base,
                                        std::span<const std::uint64_t> seeds);

}  // namespace d3g::cli
