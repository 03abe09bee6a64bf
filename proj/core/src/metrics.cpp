#include "d3g/metrics.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <string>

#include "d3g/errors.hpp"

namespace d3g {

std::string_view to_string(MetricKind m) {
  return m == MetricKind::kAccuracy ? "accuracy" : "mse";
}

MetricKind metric_for(TaskKind t) {
  return t == TaskKind::kClassification ? MetricKind::kAccuracy : MetricKind::kMse;
}

bool higher_is_better(MetricKind m) { return m == MetricKind::kAccuracy; }

MetricsReport summarize(MetricKind metric, std::vector<DomainMetric> per_domain) {
  MetricsReport r;
  r.metric = metric;
  r.per_domain = std::move(per_domain);
  if (r.per_domain.empty()) return r;
  double sum = 0.0;
  r.worst = r.per_domain.front().value;
  for (const auto& m : r.per_domain) {
    sum += m.value;
    r.worst = higher_is_better(metric) ? std::min(r.worst, m.value) : std::max(r.worst, m.value);
  }
  r.mean = sum / static_cast<double>(r.per_domain.size());
  return r;
}

MetricsReport evaluate(const Predictor& predict, const DomainDataset& ds, Split split) {
  const auto domains = ds.domains(split);
  if (domains.empty()) {
    throw DataError("split '" + std::string(to_string(split)) + "' has no domains");
  }
  const MetricKind metric = metric_for(ds.task);
  std::vector<DomainMetric> per_domain;
  for (DomainId d : domains) {
    const auto examples = ds.examples_of(d);
    if (examples.empty()) {
      throw DataError("domain " + std::to_string(d) + " has no examples");
    }
    double acc = 0.0;
    for (const auto& ex : examples) {
      const auto out = predict(ex);
      if (metric == MetricKind::kAccuracy) {
        acc += static_cast<double>(argmax(out)) == ex.y ? 1.0 : 0.0;
      } else {
        const double r = out.at(0) - ex.y;
        acc += r * r;
      }
    }
    per_domain.push_back({d, examples.size(), acc / static_cast<double>(examples.size())});
  }
  return summarize(metric, std::move(per_domain));
}

Predictor make_relation_predictor(const MultiHeadModel& model, const DomainDataset& ds,
                                  double beta, CombineSpace combine) {
  if (model.kind != ModelKind::kMultiHead) {
    throw ConfigError("relation inference needs a multi-head model");
  }
  const auto fixed = ds.fixed_relation();
  auto rows = std::make_shared<std::map<DomainId, std::vector<double>>>();
  for (const auto& [d, meta] : ds.meta) {
    (*rows)[d] = relation_row(model, fixed, d, meta, beta);
  }
  return [&model, rows, combine](const Example& ex) {
    auto it = rows->find(ex.domain);
    if (it == rows->end()) throw MissingMetaError(ex.domain);
    return infer(model, it->second, ex.x, combine);
  };
}

Predictor make_uniform_predictor(const MultiHeadModel& model, CombineSpace combine) {
  return [&model, combine](const Example& ex) { return infer_uniform(model, ex.x, combine); };
}

Predictor make_erm_predictor(const MultiHeadModel& model, const DomainDataset& ds) {
  return [&model, &ds](const Example& ex) {
    auto it = ds.meta.find(ex.domain);
    if (it == ds.meta.end()) throw MissingMetaError(ex.domain);
    return predict_erm(model, ex.x, it->second);
  };
}

Predictor make_default_predictor(const MultiHeadModel& model, const DomainDataset& ds,
                                 const TrainConfig& config) {
  if (model.kind == ModelKind::kErm) return make_erm_predictor(model, ds);
  if (config.relation_mode == RelationMode::kUniform) {
    return make_uniform_predictor(model, config.combine);
  }
  return make_relation_predictor(model, ds, config.beta, config.combine);
}

}  // namespace d3g
