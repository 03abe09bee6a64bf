#include "properties.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>

#include "d3g/gradcheck.hpp"
#include "d3g/linalg.hpp"
#include "d3g/log.hpp"
#include "d3g/relations.hpp"

namespace d3g::testing {

namespace {

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

bool close(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

class QuietWarnings {
 public:
  QuietWarnings() : previous_(set_warning_sink([](std::string_view) {})) {}
  ~QuietWarnings() { set_warning_sink(previous_); }

 private:
  WarningSink previous_;
};

void fail(PropertyResult& r, const std::string& what) {
  if (r.failures++ == 0) r.first_failure = what;
}

std::vector<double> random_row(Rng& rng, std::size_t n) {
  std::vector<double> row(n, 0.0);
  for (double& v : row) {
    if (rng.uniform() < 0.3) continue;
    v = rng.uniform() * std::pow(10.0, rng.uniform(-3.0, 3.0));
  }
  if (rng.uniform() < 0.05) std::fill(row.begin(), row.end(), 0.0);
  return row;
}

}  // namespace

DomainDataset random_dataset(Rng& rng, std::size_t heads, std::size_t input_dim,
                             TaskKind task, std::size_t classes,
                             std::size_t per_domain) {
  DomainDataset ds;
  ds.task = task;
  ds.num_classes = task == TaskKind::kClassification ? classes : 0;
  for (std::size_t d = 0; d <= heads; ++d) {
    const auto id = static_cast<DomainId>(d);
    ds.meta[id] = {rng.uniform(0.0, 6.283185307179586)};
    ds.splits[id] = d < heads ? Split::kTrain : Split::kTest;
    for (std::size_t i = 0; i < per_domain; ++i) {
      Example ex;
      ex.domain = id;
      for (std::size_t k = 0; k < input_dim; ++k) ex.x.push_back(rng.normal());
      ex.y = task == TaskKind::kClassification ? static_cast<double>(rng.below(classes))
                                               : rng.normal();
      ds.examples.push_back(std::move(ex));
    }
  }
  return ds;
}

RandomInstance random_instance(Rng& rng, TaskKind task) {
  const std::size_t heads = pick(rng, 2, 6);
  const std::size_t in = pick(rng, 1, 4);
  const std::size_t classes = pick(rng, 2, 4);
  RandomInstance r;
  r.data = random_dataset(rng, heads, in, task, classes, 2);
  ArchitectureOptions arch{pick(rng, 2, 8), pick(rng, 2, 6), pick(rng, 1, 4)};
  Rng init = rng.split("model");
  r.model = make_multi_head_model(r.data, arch, init);
  return r;
}

MicroInstance micro_instance(TaskKind task, std::uint64_t seed) {
  Rng rng = Rng(seed).split("micro");
  MicroInstance m;
  m.data = random_dataset(rng, 3, 2, task, 3, 2);
  Rng init = rng.split("model");
  m.model = make_multi_head_model(m.data, ArchitectureOptions{5, 4, 2}, init);
  m.batch = m.data.examples_in(Split::kTrain);
  m.fixed = fixed_matrix_for_heads(m.model, m.data.fixed_relation());
  return m;
}

double GradientSuite::worst() const {
  return std::max(std::max(pred, rel), std::max(total, learned));
}

GradientSuite gradient_suite(TaskKind task, CombineSpace combine, std::uint64_t seed) {
  constexpr double kBeta = 0.5;
  constexpr double kKink = 1e-3;
  MicroInstance m;
  for (;; ++seed) {
    m = micro_instance(task, seed);
    const LearnedRelationGraph graph(m.model.params.relation, m.model.head_meta);
    double nearest = 1.0;
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        if (i == j) continue;
        const double pre = kBeta * m.fixed(i, j) + (1.0 - kBeta) * graph.values()(i, j);
        nearest = std::min(nearest, std::abs(pre));
      }
    }
    if (nearest > kKink) break;
  }
  MultiHeadModel& model = m.model;
  auto params = model.params.blocks();

  const auto grads_at = [&](double lambda, double beta) {
    ModelParams g = model.params.zeros_like();
    ObjectiveOptions opt;
    opt.lambda = lambda;
    opt.beta = beta;
    opt.combine = combine;
    objective(model, m.batch, m.fixed, opt, &g);
    return g;
  };

  GradientSuite out;
  {
    ModelParams g = grads_at(0.0, kBeta);
    auto a = g.blocks();
    out.pred = grad_check([&] { return loss_pred(model, m.batch); }, params,
                          std::vector<std::span<double>>(a.begin(), a.end()))
                   .max_relative_error;
  }
  {
    ModelParams g1 = grads_at(1.0, 1.0);
    const ModelParams g0 = grads_at(0.0, 1.0);
    auto b1 = g1.blocks();
    const auto b0 = g0.blocks();
    for (std::size_t k = 0; k < b1.size(); ++k) axpy(-1.0, b0[k], b1[k]);
    const RelationMatrix rel = training_relations(model, m.data.fixed_relation(), 1.0);
    out.rel = grad_check([&] { return loss_rel(model, m.batch, rel, combine); }, params, b1)
                  .max_relative_error;
  }
  {
    ModelParams g = grads_at(0.5, kBeta);
    ObjectiveOptions opt;
    opt.lambda = 0.5;
    opt.beta = kBeta;
    opt.combine = combine;
    out.total =
        grad_check([&] { return objective(model, m.batch, m.fixed, opt, nullptr).total; },
                   params, g.blocks())
            .max_relative_error;
  }
  {
    RelationNet& net = model.params.relation;
    Rng rng = Rng(seed).split("coefficients");
    Matrix c(3, 3);
    for (double& v : c.data()) v = rng.normal();
    const auto value = [&] {
      const LearnedRelationGraph graph(net, model.head_meta);
      double s = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
          if (i != j) s += c(i, j) * graph.values()(i, j);
        }
      }
      return s;
    };
    RelationNet g = net.zeros_like();
    LearnedRelationGraph(net, model.head_meta).backward(c, g);
    out.learned = grad_check(value, net.blocks(), g.blocks()).max_relative_error;
  }
  return out;
}

PropertyResult check_simplex_normalization(std::size_t cases, std::uint64_t seed) {
  QuietWarnings quiet;
  Rng rng = Rng(seed).split("simplex");
  PropertyResult r;
  for (; r.cases < cases; ++r.cases) {
    const auto row = random_row(rng, pick(rng, 1, 20));
    const auto w = normalize_weights(row);
    double row_sum = 0.0, w_sum = 0.0;
    for (double v : row) row_sum += v;
    bool ok = w.weights.size() == row.size() && w.fell_back == (row_sum == 0.0);
    for (std::size_t k = 0; ok && k < row.size(); ++k) {
      w_sum += w.weights[k];
      const double expected = row_sum > 0.0 ? row[k] / row_sum : 1.0 / row.size();
      ok = w.weights[k] >= 0.0 && close(w.weights[k], expected, 1e-12);
    }
    if (!ok || std::abs(w_sum - 1.0) > 1e-12) {
      fail(r, "case " + std::to_string(r.cases) + ": weights off the simplex");
    }
  }
  return r;
}

PropertyResult check_rescaling_invariance(std::size_t cases, std::uint64_t seed) {
  QuietWarnings quiet;
  Rng rng = Rng(seed).split("rescaling");
  PropertyResult r;
  for (; r.cases < cases; ++r.cases) {
    const TaskKind task = rng.uniform() < 0.5 ? TaskKind::kClassification
                                              : TaskKind::kRegression;
    const CombineSpace combine = rng.uniform() < 0.5 ? CombineSpace::kLogits
                                                     : CombineSpace::kProbabilities;
    const auto inst = random_instance(rng, task);
    const auto row = random_row(rng, inst.model.head_count());
    const double c = std::pow(10.0, rng.uniform(-3.0, 3.0));
    std::vector<double> scaled(row);
    for (double& v : scaled) v *= c;
    const auto& x = inst.data.examples.back().x;
    const auto a = infer(inst.model, row, x, combine);
    const auto b = infer(inst.model, scaled, x, combine);
    bool ok = a.size() == b.size();
    for (std::size_t k = 0; ok && k < a.size(); ++k) ok = close(a[k], b[k], 1e-12);
    if (!ok) fail(r, "case " + std::to_string(r.cases) + ": output changed under rescaling");
  }
  return r;
}

PropertyResult check_one_hot_degeneracy(std::size_t cases, std::uint64_t seed) {
  Rng rng = Rng(seed).split("one-hot");
  PropertyResult r;
  for (; r.cases < cases; ++r.cases) {
    const TaskKind task = rng.uniform() < 0.5 ? TaskKind::kClassification
                                              : TaskKind::kRegression;
    const auto inst = random_instance(rng, task);
    const std::size_t k = rng.below(inst.model.head_count());
    std::vector<double> row(inst.model.head_count(), 0.0);
    row[k] = std::pow(10.0, rng.uniform(-3.0, 3.0));
    const auto& x = inst.data.examples.back().x;
    const auto mixed = infer(inst.model, row, x);
    const auto single = predict_head(inst.model, inst.model.head_domains[k], x);
    if (mixed != single) {
      fail(r, "case " + std::to_string(r.cases) + ": one-hot row differs from its head");
    }
  }
  return r;
}

PropertyResult check_equal_heads_losses(std::size_t cases, std::uint64_t seed) {
  QuietWarnings quiet;
  Rng rng = Rng(seed).split("equal-heads");
  PropertyResult r;
  for (; r.cases < cases; ++r.cases) {
    const TaskKind task = rng.uniform() < 0.5 ? TaskKind::kClassification
                                              : TaskKind::kRegression;
    auto inst = random_instance(rng, task);
    MultiHeadModel& model = inst.model;
    for (auto& h : model.params.heads) h = model.params.heads.front();
    RelationMatrix rel;
    rel.ids = model.head_domains;
    const std::size_t H = model.head_count();
    rel.fused = Matrix(H, H);
    for (std::size_t i = 0; i < H; ++i) {
      const auto row = random_row(rng, H);
      for (std::size_t j = 0; j < H; ++j) rel.fused(i, j) = row[j];
    }
    const auto batch = inst.data.examples_in(Split::kTrain);
    const double pred = loss_pred(model, batch);
    const double rel_logits = loss_rel(model, batch, rel, CombineSpace::kLogits);
    const double rel_probs = loss_rel(model, batch, rel, CombineSpace::kProbabilities);
    if (!close(pred, rel_logits, 1e-12) || !close(pred, rel_probs, 1e-12)) {
      std::ostringstream s;
      s << "case " << r.cases << ": loss_pred " << pred << " vs loss_rel " << rel_logits
        << " / " << rel_probs;
      fail(r, s.str());
    }
  }
  return r;
}

PropertyResult check_relation_symmetry(std::size_t cases, std::uint64_t seed) {
  Rng rng = Rng(seed).split("symmetry");
  PropertyResult r;
  for (; r.cases < cases; ++r.cases) {
    const std::size_t n = pick(rng, 2, 10);
    const std::size_t meta_dim = pick(rng, 1, 3);
    std::vector<DomainId> ids;
    MetaMap meta;
    for (std::size_t k = 0; k < n; ++k) {
      const auto id = static_cast<DomainId>(k * 3 + rng.below(3));
      ids.push_back(id);
      std::vector<double> m(meta_dim);
      for (double& v : m) v = rng.uniform(-3.0, 3.0);
      meta[id] = m;
    }
    std::optional<FixedRelation> fixed;
    if (rng.uniform() < 0.5) {
      fixed = FixedRelation::angle();
    } else {
      AdjacencyGraph graph(std::set<DomainId>(ids.begin(), ids.end()), {});
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          if (rng.uniform() < 0.4) graph.add_edge(ids[i], ids[j]);
        }
      }
      fixed = FixedRelation::adjacency(std::move(graph));
    }
    Rng net_rng = rng.split("net");
    const RelationNet net =
        make_relation_net({meta_dim, pick(rng, 2, 8), pick(rng, 1, 4), 0.1}, net_rng);
    const double beta = rng.uniform() < 0.2 ? 1.0 : rng.uniform();
    const auto m = build_matrix(ids, meta, *fixed, &net, beta);
    if (asymmetry(m.fixed) != 0.0 || asymmetry(m.learned) != 0.0 ||
        asymmetry(m.fused) != 0.0) {
      fail(r, "case " + std::to_string(r.cases) + ": relation matrix is not symmetric");
    }
  }
  return r;
}

}  // namespace d3g::testing
