#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "d3g/data.hpp"
#include "d3g/model.hpp"

namespace d3g {

enum class MetricKind { kAccuracy, kMse };
std::string_view to_string(MetricKind m);
MetricKind metric_for(TaskKind t);
/// True when larger values are better.
bool higher_is_better(MetricKind m);

struct DomainMetric {
  DomainId domain = 0;
  std::size_t count = 0;
  double value = 0.0;

  bool operator==(const DomainMetric&) const = default;
};

struct MetricsReport {
  MetricKind metric = MetricKind::kAccuracy;
  std::vector<DomainMetric> per_domain;
  double mean = 0.0;
  /// Lowest accuracy or highest MSE over domains.
  double worst = 0.0;

  bool operator==(const MetricsReport&) const = default;
};

/// Maps an example to the model output (logits or regression values).
using Predictor = std::function<std::vector<double>(const Example&)>;

/// Per-domain metric, mean over domains, worst domain. Throws DataError if
/// the split has no domains.
MetricsReport evaluate(const Predictor& predict, const DomainDataset& ds,
                       Split split);

/// Aggregate recomputed from per-domain entries.
MetricsReport summarize(MetricKind metric, std::vector<DomainMetric> per_domain);

/// Relation-weighted inference with relation rows computed once per domain.
Predictor make_relation_predictor(const MultiHeadModel& model,
                                  const DomainDataset& ds, double beta,
                                  CombineSpace combine = CombineSpace::kLogits);
Predictor make_uniform_predictor(const MultiHeadModel& model,
                                 CombineSpace combine = CombineSpace::kLogits);
Predictor make_erm_predictor(const MultiHeadModel& model, const DomainDataset& ds);

/// Relation predictor for multi-head models, ERM predictor otherwise.
Predictor make_default_predictor(const MultiHeadModel& model,
                                 const DomainDataset& ds, const TrainConfig& config);

}  // namespace d3g
