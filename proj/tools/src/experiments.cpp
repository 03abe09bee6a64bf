#include "d3g_cli/experiments.hpp"

#include <cmath>

#include "d3g/errors.hpp"

namespace d3g::cli {

std::string_view to_string(Method m) { return m == Method::kD3g ? "d3g" : "erm"; }

Method method_from_string(std::string_view s) {
  if (s == "d3g") return Method::kD3g;
  if (s == "erm") return Method::kErm;
  throw ConfigError("unknown method '" + std::string(s) + "' (expected d3g or erm)");
}

std::optional<MetricsReport> evaluate_split(const MultiHeadModel& model,
                                            const DomainDataset& ds, Split split,
                                            const TrainConfig& config) {
  if (ds.domains(split).empty()) return std::nullopt;
  return evaluate(make_default_predictor(model, ds, config), ds, split);
}

SeedRun run_seed(const DomainDataset& ds, Method method, const TrainConfig& config) {
  SeedRun run;
  run.seed = config.seed;
  if (method == Method::kErm) {
    run.model = init_model(ModelKind::kErm, ds, config);
    run.train = train_erm(run.model, ds, config);
  } else {
    run.model = init_model(ModelKind::kMultiHead, ds, config);
    run.train = train(run.model, ds, config);
  }
  run.valid = evaluate_split(run.model, ds, Split::kValid, config);
  run.test = evaluate_split(run.model, ds, Split::kTest, config);
  return run;
}

MetricsReport evaluate_rwft(const MultiHeadModel& erm, const DomainDataset& ds, Split split,
                            const TrainConfig& config) {
  const auto targets = ds.domains(split);
  if (targets.empty()) {
    throw DataError("split '" + std::string(to_string(split)) + "' has no domains");
  }
  const auto fixed = ds.fixed_relation();
  const auto train_domains = ds.domains(Split::kTrain);
  std::vector<DomainMetric> per_domain;
  for (DomainId t : targets) {
    const auto& meta_t = ds.meta.at(t);
    std::vector<double> row;
    for (DomainId d : train_domains) row.push_back(fixed(d, ds.meta.at(d), t, meta_t));
    const MultiHeadModel tuned = rw_finetune(erm, ds, row, config);
    const auto predict = make_erm_predictor(tuned, ds);
    const auto examples = ds.examples_of(t);
    double total = 0.0;
    for (const auto& ex : examples) {
      const auto out = predict(ex);
      if (ds.task == TaskKind::kClassification) {
        total += static_cast<double>(argmax(out)) == ex.y ? 1.0 : 0.0;
      } else {
        total += (out[0] - ex.y) * (out[0] - ex.y);
      }
    }
    per_domain.push_back({t, examples.size(), total / static_cast<double>(examples.size())});
  }
  return summarize(metric_for(ds.task), std::move(per_domain));
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd r;
  if (values.empty()) return r;
  double sum = 0.0;
  for (double v : values) sum += v;
  r.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return r;
}

TrainConfig Variant::apply(TrainConfig base) const {
  base.beta = beta;
  base.lambda = lambda;
  base.relation_mode = mode;
  return base;
}

std::vector<Variant> ablation_variants(const TrainConfig& base) {
  return {
      {"relation", "none", base.beta, base.lambda, RelationMode::kUniform},
      {"relation", "fixed", 1.0, base.lambda, RelationMode::kFused},
      {"relation", "learned", 0.0, base.lambda, RelationMode::kFused},
      {"relation", "fixed+learned", base.beta, base.lambda, RelationMode::kFused},
      {"consistency", "with", base.beta, base.lambda, RelationMode::kFused},
      {"consistency", "without", base.beta, 0.0, RelationMode::kFused},
  };
}

std::vector<VariantResult> run_ablation(const DatasetFactory& datasets,
                                        const TrainConfig& base,
                                        std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  std::vector<VariantResult> results;
  for (const auto& v : ablation_variants(base)) results.push_back({v, {}, {}, {}});
  for (std::uint64_t seed : seeds) {
    const DomainDataset ds = datasets(seed);
    for (auto& r : results) {
      TrainConfig cfg = r.variant.apply(base);
      cfg.seed = seed;
      const SeedRun run = run_seed(ds, Method::kD3g, cfg);
      if (!run.test) throw DataError("ablation needs a test split");
      r.per_seed.push_back(run.test->mean);
      r.histories.push_back(run.train.history);
    }
  }
  for (auto& r : results) r.stats = mean_std(r.per_seed);
  return results;
}

}  // namespace d3g::cli
