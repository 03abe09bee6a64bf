#include "d3g/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "d3g/errors.hpp"
#include "d3g/loss.hpp"
#include "d3g/metrics.hpp"
#include "d3g/rng.hpp"

namespace d3g {

std::string_view to_string(ModelKind k) {
  return k == ModelKind::kMultiHead ? "d3g" : "erm";
}

ModelKind model_kind_from_string(std::string_view s) {
  if (s == "d3g" || s == "multi_head") return ModelKind::kMultiHead;
  if (s == "erm") return ModelKind::kErm;
  throw ConfigError("unknown model kind '" + std::string(s) + "'");
}

std::string_view to_string(CombineSpace c) {
  return c == CombineSpace::kLogits ? "logits" : "probabilities";
}

CombineSpace combine_space_from_string(std::string_view s) {
  if (s == "logits") return CombineSpace::kLogits;
  if (s == "probabilities") return CombineSpace::kProbabilities;
  throw ConfigError("unknown combine space '" + std::string(s) + "'");
}

std::string_view to_string(RelationMode m) {
  return m == RelationMode::kFused ? "fused" : "uniform";
}

RelationMode relation_mode_from_string(std::string_view s) {
  if (s == "fused") return RelationMode::kFused;
  if (s == "uniform") return RelationMode::kUniform;
  throw ConfigError("unknown relation mode '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be > 0");
  }
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
  if (batch_size == 0) throw ConfigError("batch size must be > 0");
  if (hidden_width == 0 || relation_width == 0 || relation_heads == 0) {
    throw ConfigError("network widths and head counts must be > 0");
  }
}

// ---------------------------------------------------------------------------

ModelParams ModelParams::zeros_like() const {
  ModelParams z;
  z.extractor = extractor.zeros_like();
  for (const auto& h : heads) z.heads.push_back(h.zeros_like());
  z.relation = relation.encoder.layers.empty() ? RelationNet{} : relation.zeros_like();
  return z;
}

void ModelParams::set_zero() {
  extractor.set_zero();
  for (auto& h : heads) h.set_zero();
  relation.set_zero();
}

std::vector<std::span<double>> ModelParams::blocks() {
  auto out = extractor.blocks();
  for (auto& h : heads) {
    auto b = h.blocks();
    out.insert(out.end(), b.begin(), b.end());
  }
  auto r = relation.blocks();
  out.insert(out.end(), r.begin(), r.end());
  return out;
}

std::vector<std::span<const double>> ModelParams::blocks() const {
  auto out = extractor.blocks();
  for (const auto& h : heads) {
    auto b = h.blocks();
    out.insert(out.end(), b.begin(), b.end());
  }
  auto r = relation.blocks();
  out.insert(out.end(), r.begin(), r.end());
  return out;
}

std::size_t MultiHeadModel::head_index(DomainId d) const {
  if (kind == ModelKind::kErm) return 0;
  auto it = std::lower_bound(head_domains.begin(), head_domains.end(), d);
  if (it == head_domains.end() || *it != d) {
    throw ConfigError("domain " + std::to_string(d) + " is not a training domain");
  }
  return static_cast<std::size_t>(it - head_domains.begin());
}

std::size_t MultiHeadModel::extractor_input_dim() const {
  return kind == ModelKind::kErm ? input_dim + meta_dim : input_dim;
}

void MultiHeadModel::validate() const {
  params.extractor.validate();
  if (params.extractor.input_dim() != extractor_input_dim()) {
    throw ConfigError("extractor input width does not match the model inputs");
  }
  if (params.heads.empty()) throw ConfigError("model has no heads");
  for (const auto& h : params.heads) {
    h.validate();
    if (h.input_dim() != params.extractor.output_dim() || h.output_dim() != output_dim) {
      throw ConfigError("head shape does not match the extractor and output width");
    }
  }
  if (kind == ModelKind::kMultiHead) {
    if (head_domains.size() != params.heads.size() || head_meta.size() != head_domains.size()) {
      throw ConfigError("head count must equal the number of training domains");
    }
    if (!std::is_sorted(head_domains.begin(), head_domains.end())) {
      throw ConfigError("head domains must be sorted");
    }
    params.relation.validate();
    if (params.relation.encoder.input_dim() != meta_dim) {
      throw ConfigError("relation encoder input width does not match meta-data");
    }
  } else if (params.heads.size() != 1) {
    throw ConfigError("an ERM model has exactly one head");
  }
}

ArchitectureOptions architecture_of(const TrainConfig& c) {
  return {c.hidden_width, c.relation_width, c.relation_heads};
}

namespace {

DenseParams make_extractor(std::size_t in, std::size_t hidden, Rng& rng) {
  const std::size_t dims[] = {in, hidden};
  const Activation acts[] = {Activation::kRelu};
  return make_dense(dims, acts, rng);
}

DenseParams make_head(std::size_t hidden, std::size_t out, Rng& rng) {
  const std::size_t dims[] = {hidden, out};
  const Activation acts[] = {Activation::kIdentity};
  return make_dense(dims, acts, rng);
}

}  // namespace

MultiHeadModel make_multi_head_model(const DomainDataset& ds,
                                     const ArchitectureOptions& arch, Rng& rng) {
  MultiHeadModel m;
  m.kind = ModelKind::kMultiHead;
  m.task = ds.task;
  m.input_dim = ds.input_dim();
  m.meta_dim = ds.meta_dim();
  m.output_dim = ds.output_dim();
  m.head_domains = ds.domains(Split::kTrain);
  if (m.head_domains.empty()) throw DataError("dataset has no training domains");
  for (DomainId d : m.head_domains) {
    auto it = ds.meta.find(d);
    if (it == ds.meta.end()) throw MissingMetaError(d);
    m.head_meta.push_back(it->second);
  }
  Rng ext_rng = rng.split("extractor");
  m.params.extractor = make_extractor(m.input_dim, arch.hidden_width, ext_rng);
  for (std::size_t k = 0; k < m.head_domains.size(); ++k) {
    Rng head_rng = rng.split("head").split(k);
    m.params.heads.push_back(make_head(arch.hidden_width, m.output_dim, head_rng));
  }
  Rng rel_rng = rng.split("relation");
  m.params.relation = make_relation_net(
      {m.meta_dim, arch.relation_width, arch.relation_heads, 0.1}, rel_rng);
  m.validate();
  return m;
}

MultiHeadModel make_erm_model(const DomainDataset& ds, const ArchitectureOptions& arch,
                              Rng& rng) {
  MultiHeadModel m;
  m.kind = ModelKind::kErm;
  m.task = ds.task;
  m.input_dim = ds.input_dim();
  m.meta_dim = ds.meta_dim();
  m.output_dim = ds.output_dim();
  Rng ext_rng = rng.split("extractor");
  m.params.extractor = make_extractor(m.input_dim + m.meta_dim, arch.hidden_width, ext_rng);
  Rng head_rng = rng.split("head").split(0);
  m.params.heads.push_back(make_head(arch.hidden_width, m.output_dim, head_rng));
  m.validate();
  return m;
}

MultiHeadModel init_model(ModelKind kind, const DomainDataset& ds,
                          const TrainConfig& config) {
  config.validate();
  Rng rng = Rng(config.seed).split("init");
  return kind == ModelKind::kErm ? make_erm_model(ds, architecture_of(config), rng)
                                 : make_multi_head_model(ds, architecture_of(config), rng);
}

std::vector<double> erm_input(std::span<const double> x, std::span<const double> meta) {
  std::vector<double> in(x.begin(), x.end());
  in.insert(in.end(), meta.begin(), meta.end());
  return in;
}

std::vector<double> predict_head(const MultiHeadModel& model, DomainId d,
                                 std::span<const double> x) {
  const std::size_t h = model.head_index(d);
  return forward(model.params.heads[h], forward(model.params.extractor, x));
}

std::vector<std::vector<double>> predict_all_heads(const MultiHeadModel& model,
                                                   std::span<const double> x) {
  const auto z = forward(model.params.extractor, x);
  std::vector<std::vector<double>> outs;
  outs.reserve(model.head_count());
  for (const auto& h : model.params.heads) outs.push_back(forward(h, z));
  return outs;
}

std::vector<double> predict_erm(const MultiHeadModel& model, std::span<const double> x,
                                std::span<const double> meta) {
  if (model.kind != ModelKind::kErm) throw ConfigError("predict_erm needs an ERM model");
  const auto in = erm_input(x, meta);
  return forward(model.params.heads[0], forward(model.params.extractor, in));
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

namespace {

using Outputs = std::vector<std::vector<double>>;

// Loss of the mixture sum_j w_j f_j against y. Accumulates scale * dL/df_j
// into grad_outs (when non-null) and returns dL/dw_j in grad_w (unscaled).
double mixture_loss(TaskKind task, CombineSpace combine, const Outputs& outs,
                    std::span<const double> w, double y, Outputs* grad_outs,
                    double scale, std::vector<double>* grad_w) {
  const std::size_t H = outs.size();
  const std::size_t dim = outs.front().size();
  if (grad_w) grad_w->assign(H, 0.0);

  if (task == TaskKind::kClassification && combine == CombineSpace::kProbabilities) {
    const auto label = static_cast<std::size_t>(y);
    Outputs probs(H);
    double p_y = 0.0;
    for (std::size_t j = 0; j < H; ++j) {
      if (w[j] == 0.0) continue;
      probs[j] = softmax(outs[j]);
      p_y += w[j] * probs[j][label];
    }
    const double loss = -std::log(p_y);
    for (std::size_t j = 0; j < H; ++j) {
      if (w[j] == 0.0) continue;
      const auto& s = probs[j];
      if (grad_w) (*grad_w)[j] = -s[label] / p_y;
      if (grad_outs) {
        const double c = scale * w[j] * (-1.0 / p_y) * s[label];
        for (std::size_t k = 0; k < dim; ++k) {
          (*grad_outs)[j][k] += c * ((k == label ? 1.0 : 0.0) - s[k]);
        }
      }
    }
    return loss;
  }

  std::vector<double> mix(dim, 0.0);
  for (std::size_t j = 0; j < H; ++j) {
    if (w[j] == 0.0) continue;
    for (std::size_t k = 0; k < dim; ++k) mix[k] += w[j] * outs[j][k];
  }
  LossGrad lg;
  if (task == TaskKind::kClassification) {
    lg = loss_ce(mix, static_cast<std::size_t>(y));
  } else {
    const double target[] = {y};
    lg = loss_mse(mix, std::span<const double>(target, 1));
  }
  for (std::size_t j = 0; j < H; ++j) {
    if (grad_w) (*grad_w)[j] = dot(lg.grad, outs[j]);
    if (grad_outs && w[j] != 0.0) {
      for (std::size_t k = 0; k < dim; ++k) (*grad_outs)[j][k] += scale * w[j] * lg.grad[k];
    }
  }
  return lg.loss;
}

struct BatchTerms {
  double pred = 0.0;
  double rel = 0.0;
};

// Core of every loss entry point. fused (H x H) supplies relation rows; when
// null the consistency term averages the other heads uniformly. grad_fused
// receives lambda-scaled dL/da_dj.
BatchTerms evaluate_batch(const MultiHeadModel& model, std::span<const Example> batch,
                          const Matrix* fused, bool with_rel, double lambda,
                          CombineSpace combine, std::span<const double> example_weights,
                          ModelParams* grads, Matrix* grad_fused) {
  if (batch.empty()) throw ConfigError("empty batch");
  if (!example_weights.empty() && example_weights.size() != batch.size()) {
    throw ConfigError("example weights do not match the batch size");
  }
  const std::size_t H = model.head_count();
  if (with_rel && H < 2) {
    throw ConfigError("the consistency loss needs at least two training domains");
  }
  double total_weight = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double w = example_weights.empty() ? 1.0 : example_weights[i];
    if (!(w >= 0.0)) throw ConfigError("example weights must be nonnegative");
    total_weight += w;
  }
  if (!(total_weight > 0.0)) throw ConfigError("example weights sum to zero");

  BatchTerms terms;
  Tape ext_tape;
  std::vector<Tape> head_tapes(H);
  Outputs outs(H);
  Outputs grad_outs;
  std::vector<double> onehot(H), mix_w(H), grad_w;

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Example& ex = batch[i];
    const double wi = (example_weights.empty() ? 1.0 : example_weights[i]) / total_weight;
    if (wi == 0.0) continue;
    const std::size_t hd = model.head_index(ex.domain);
    const auto z = forward(model.params.extractor, ex.x, grads ? &ext_tape : nullptr);
    for (std::size_t j = 0; j < H; ++j) {
      outs[j] = forward(model.params.heads[j], z, grads ? &head_tapes[j] : nullptr);
    }
    if (grads) grad_outs.assign(H, std::vector<double>(model.output_dim, 0.0));
    Outputs* go = grads ? &grad_outs : nullptr;

    std::fill(onehot.begin(), onehot.end(), 0.0);
    onehot[hd] = 1.0;
    terms.pred += wi * mixture_loss(model.task, combine, outs, onehot, ex.y, go, wi, nullptr);

    if (with_rel) {
      double row_sum = 0.0;
      if (fused) {
        for (std::size_t j = 0; j < H; ++j) {
          if (j != hd) row_sum += (*fused)(hd, j);
        }
      }
      const bool weighted = fused && row_sum > 0.0;
      for (std::size_t j = 0; j < H; ++j) {
        if (j == hd) {
          mix_w[j] = 0.0;
        } else {
          mix_w[j] = weighted ? (*fused)(hd, j) / row_sum : 1.0 / static_cast<double>(H - 1);
        }
      }
      const bool want_rel_grad = grad_fused && weighted;
      const double l = mixture_loss(model.task, combine, outs, mix_w, ex.y, go,
                                    lambda * wi, want_rel_grad ? &grad_w : nullptr);
      terms.rel += wi * l;
      if (want_rel_grad) {
        // w_j = a_dj / S  =>  dL/da_dj = (dL/dw_j - sum_k w_k dL/dw_k) / S
        double mean_g = 0.0;
        for (std::size_t k = 0; k < H; ++k) mean_g += mix_w[k] * grad_w[k];
        for (std::size_t j = 0; j < H; ++j) {
          if (j == hd) continue;
          (*grad_fused)(hd, j) += lambda * wi * (grad_w[j] - mean_g) / row_sum;
        }
      }
    }

    if (grads) {
      std::vector<double> grad_z(z.size(), 0.0);
      for (std::size_t j = 0; j < H; ++j) {
        const auto& g = grad_outs[j];
        if (std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; })) continue;
        const auto down = backward(model.params.heads[j], head_tapes[j], g, grads->heads[j]);
        axpy(1.0, down, grad_z);
      }
      backward(model.params.extractor, ext_tape, grad_z, grads->extractor);
    }
  }
  return terms;
}

Matrix head_submatrix(const MultiHeadModel& model, const RelationMatrix& rel) {
  const std::size_t H = model.head_count();
  std::vector<std::size_t> idx(H);
  for (std::size_t k = 0; k < H; ++k) idx[k] = rel.index_of(model.head_domains[k]);
  Matrix m(H, H);
  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t j = 0; j < H; ++j) m(i, j) = rel.fused(idx[i], idx[j]);
  }
  return m;
}

void require_multi_head(const MultiHeadModel& model, const char* what) {
  if (model.kind != ModelKind::kMultiHead) {
    throw ConfigError(std::string(what) + " needs a multi-head model");
  }
}

}  // namespace

double loss_pred(const MultiHeadModel& model, std::span<const Example> batch) {
  return evaluate_batch(model, batch, nullptr, false, 0.0, CombineSpace::kLogits, {},
                        nullptr, nullptr)
      .pred;
}

double loss_rel(const MultiHeadModel& model, std::span<const Example> batch,
                const RelationMatrix& relations, CombineSpace combine) {
  require_multi_head(model, "loss_rel");
  const Matrix fused = head_submatrix(model, relations);
  return evaluate_batch(model, batch, &fused, true, 1.0, combine, {}, nullptr, nullptr).rel;
}

double total_loss(const MultiHeadModel& model, std::span<const Example> batch,
                  const RelationMatrix& relations, double lambda, CombineSpace combine) {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (model.kind == ModelKind::kErm || model.head_count() < 2) {
    return loss_pred(model, batch);
  }
  const Matrix fused = head_submatrix(model, relations);
  const auto t = evaluate_batch(model, batch, &fused, true, lambda, combine, {}, nullptr, nullptr);
  return t.pred + lambda * t.rel;
}

Matrix fixed_matrix_for_heads(const MultiHeadModel& model, const FixedRelation& fixed) {
  const std::size_t H = model.head_count();
  Matrix m(H, H);
  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t j = i; j < H; ++j) {
      const double a = fixed(model.head_domains[i], model.head_meta[i],
                             model.head_domains[j], model.head_meta[j]);
      m(i, j) = a;
      m(j, i) = a;
    }
  }
  return m;
}

RelationMatrix training_relations(const MultiHeadModel& model, const FixedRelation& fixed,
                                  double beta) {
  require_multi_head(model, "training_relations");
  MetaMap meta;
  for (std::size_t k = 0; k < model.head_count(); ++k) {
    meta[model.head_domains[k]] = model.head_meta[k];
  }
  return build_matrix(model.head_domains, meta, fixed, &model.params.relation, beta);
}

LossBreakdown objective(const MultiHeadModel& model, std::span<const Example> batch,
                        const Matrix& fixed_train, const ObjectiveOptions& options,
                        ModelParams* grads) {
  if (!(options.lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(options.beta >= 0.0 && options.beta <= 1.0)) {
    throw ConfigError("beta must lie in [0, 1]");
  }
  const std::size_t H = model.head_count();
  const bool multi = model.kind == ModelKind::kMultiHead && H >= 2;
  const bool fused_mode = multi && options.relation_mode == RelationMode::kFused;
  const bool learned = fused_mode && options.beta < 1.0;

  std::optional<LearnedRelationGraph> graph;
  Matrix fused;
  if (fused_mode) {
    if (fixed_train.rows() != H || fixed_train.cols() != H) {
      throw ConfigError("fixed relation matrix does not match the head count");
    }
    if (learned) {
      graph.emplace(model.params.relation, model.head_meta);
      fused = fuse(fixed_train, graph->values(), options.beta);
    } else {
      fused = fixed_train;
    }
  }

  Matrix grad_fused = fused_mode ? Matrix(H, H) : Matrix();
  const bool track_relations = grads && learned && options.lambda > 0.0;
  const auto t = evaluate_batch(model, batch, fused_mode ? &fused : nullptr, multi,
                                options.lambda, options.combine, options.example_weights,
                                grads, track_relations ? &grad_fused : nullptr);

  if (track_relations) {
    Matrix grad_learned(H, H);
    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < H; ++j) {
        if (i == j) continue;
        const double pre = options.beta * fixed_train(i, j) +
                           (1.0 - options.beta) * graph->values()(i, j);
        if (pre > 0.0) grad_learned(i, j) = (1.0 - options.beta) * grad_fused(i, j);
      }
    }
    graph->backward(grad_learned, grads->relation);
  }
  return {t.pred, t.rel, t.pred + options.lambda * t.rel};
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

using Validator = std::function<double(const MultiHeadModel&)>;

// Index order for one epoch.
std::vector<std::size_t> epoch_order(std::span<const Example> examples,
                                     bool domain_balanced, Rng& rng) {
  std::vector<std::size_t> order(examples.size());
  if (!domain_balanced) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    return order;
  }
  std::map<DomainId, std::vector<std::size_t>> by_domain;
  for (std::size_t i = 0; i < examples.size(); ++i) by_domain[examples[i].domain].push_back(i);
  std::vector<const std::vector<std::size_t>*> groups;
  for (const auto& [d, idx] : by_domain) groups.push_back(&idx);
  for (auto& slot : order) {
    const auto& g = *groups[rng.below(groups.size())];
    slot = g[rng.below(g.size())];
  }
  return order;
}

TrainResult fit(MultiHeadModel& model, std::span<const Example> examples,
                std::span<const double> weights, const TrainConfig& config,
                const Matrix& fixed_train, const Validator& validator,
                const AdamState* resume) {
  config.validate();
  if (examples.empty()) throw DataError("no training examples");
  TrainResult result;
  if (resume) result.optimizer = *resume;
  const std::uint64_t epoch_offset = static_cast<std::uint64_t>(
      resume ? resume->step : 0);
  Rng shuffle_rng = Rng(config.seed).split("shuffle").split(epoch_offset);

  ObjectiveOptions opts;
  opts.lambda = config.lambda;
  opts.beta = config.beta;
  opts.combine = config.combine;
  opts.relation_mode = config.relation_mode;
  const AdamOptions adam{config.learning_rate, config.weight_decay};

  ModelParams grads = model.params.zeros_like();
  std::vector<Example> batch;
  std::vector<double> batch_w;
  std::optional<ModelParams> best;
  double best_metric = -std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = epoch_order(examples, config.domain_balanced_sampling, shuffle_rng);
    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      batch.clear();
      batch_w.clear();
      for (std::size_t k = start; k < stop; ++k) {
        batch.push_back(examples[order[k]]);
        if (!weights.empty()) batch_w.push_back(weights[order[k]]);
      }
      opts.example_weights = batch_w;
      grads.set_zero();
      const auto lb = objective(model, batch, fixed_train, opts, &grads);
      if (!std::isfinite(lb.total)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) +
                             ", batch starting at " + std::to_string(start) +
                             " (pred " + std::to_string(lb.pred) + ", rel " +
                             std::to_string(lb.rel) + ")");
      }
      adam_step(model.params.blocks(), grads.blocks(), result.optimizer, adam);
      const double n = static_cast<double>(batch.size());
      rec.loss += lb.total * n;
      rec.pred += lb.pred * n;
      rec.rel += lb.rel * n;
      seen += batch.size();
    }
    rec.loss /= static_cast<double>(seen);
    rec.pred /= static_cast<double>(seen);
    rec.rel /= static_cast<double>(seen);

    if (validator && config.eval_every > 0 && epoch % config.eval_every == 0) {
      rec.valid_metric = validator(model);
      if (config.select_on_valid && *rec.valid_metric > best_metric) {
        best_metric = *rec.valid_metric;
        best = model.params;
        result.selected_epoch = epoch;
      }
    }
    result.history.push_back(rec);
  }

  if (best) {
    model.params = std::move(*best);
  } else {
    result.selected_epoch = config.epochs;
  }
  return result;
}

Validator make_validator(const DomainDataset& ds, const TrainConfig& config) {
  if (ds.domains(Split::kValid).empty() || config.eval_every == 0) return {};
  return [&ds, config](const MultiHeadModel& m) {
    const auto report = evaluate(make_default_predictor(m, ds, config), ds, Split::kValid);
    return higher_is_better(report.metric) ? report.mean : -report.mean;
  };
}

std::vector<Example> erm_examples(const DomainDataset& ds, Split split) {
  auto ex = ds.examples_in(split);
  for (auto& e : ex) e.x = erm_input(e.x, ds.meta.at(e.domain));
  return ex;
}

}  // namespace

TrainResult train(MultiHeadModel& model, const DomainDataset& ds, const TrainConfig& config,
                  const AdamState* optimizer) {
  require_multi_head(model, "train");
  config.validate();
  if (model.head_count() < 2) {
    throw DataError("training needs at least two training domains with meta-data");
  }
  const auto fixed = ds.fixed_relation();
  const Matrix fixed_train = fixed_matrix_for_heads(model, fixed);
  const auto examples = ds.examples_in(Split::kTrain);
  return fit(model, examples, {}, config, fixed_train, make_validator(ds, config), optimizer);
}

TrainResult train_erm(MultiHeadModel& model, const DomainDataset& ds,
                      const TrainConfig& config, const AdamState* optimizer) {
  if (model.kind != ModelKind::kErm) throw ConfigError("train_erm needs an ERM model");
  const auto examples = erm_examples(ds, Split::kTrain);
  return fit(model, examples, {}, config, Matrix(), make_validator(ds, config), optimizer);
}

MultiHeadModel rw_finetune(const MultiHeadModel& erm, const DomainDataset& ds,
                           std::span<const double> relation_row, const TrainConfig& config) {
  if (erm.kind != ModelKind::kErm) throw ConfigError("rw_finetune needs an ERM model");
  const auto train_domains = ds.domains(Split::kTrain);
  if (relation_row.size() != train_domains.size()) {
    throw ConfigError("relation row must have one entry per training domain");
  }
  const auto simplex = normalize_weights(relation_row);
  std::map<DomainId, double> domain_weight;
  for (std::size_t k = 0; k < train_domains.size(); ++k) {
    domain_weight[train_domains[k]] = simplex.weights[k];
  }
  std::vector<Example> kept;
  std::vector<double> weights;
  for (auto& e : erm_examples(ds, Split::kTrain)) {
    const double w = domain_weight.at(e.domain);
    if (w == 0.0) continue;
    kept.push_back(std::move(e));
    weights.push_back(w);
  }
  MultiHeadModel tuned = erm;
  TrainConfig cfg = config;
  cfg.select_on_valid = false;
  fit(tuned, kept, weights, cfg, Matrix(), {}, nullptr);
  return tuned;
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

namespace {

std::vector<double> combine_heads(const MultiHeadModel& model, const Outputs& outs,
                                  std::span<const double> w, CombineSpace combine) {
  std::vector<double> mix(model.output_dim, 0.0);
  const bool probs = model.task == TaskKind::kClassification &&
                     combine == CombineSpace::kProbabilities;
  for (std::size_t j = 0; j < outs.size(); ++j) {
    if (w[j] == 0.0) continue;
    const auto v = probs ? softmax(outs[j]) : outs[j];
    for (std::size_t k = 0; k < mix.size(); ++k) mix[k] += w[j] * v[k];
  }
  return mix;
}

}  // namespace

std::vector<double> infer(const MultiHeadModel& model, std::span<const double> relation_row,
                          std::span<const double> x, CombineSpace combine) {
  require_multi_head(model, "infer");
  if (relation_row.size() != model.head_count()) {
    throw ConfigError("relation row must cover every training head");
  }
  const auto w = normalize_weights(relation_row);
  return combine_heads(model, predict_all_heads(model, x), w.weights, combine);
}

std::vector<double> infer_uniform(const MultiHeadModel& model, std::span<const double> x,
                                  CombineSpace combine) {
  require_multi_head(model, "infer_uniform");
  const std::vector<double> w(model.head_count(), 1.0 / static_cast<double>(model.head_count()));
  return combine_heads(model, predict_all_heads(model, x), w, combine);
}

std::vector<double> relation_row(const MultiHeadModel& model, const FixedRelation& fixed,
                                 DomainId t, std::span<const double> meta_t, double beta) {
  require_multi_head(model, "relation_row");
  std::vector<double> row(model.head_count());
  for (std::size_t d = 0; d < model.head_count(); ++d) {
    const double g = fixed(model.head_domains[d], model.head_meta[d], t, meta_t);
    const double l = beta < 1.0
                         ? learned_relation(model.params.relation, model.head_meta[d], meta_t)
                         : 0.0;
    row[d] = fuse(g, l, beta);
  }
  return row;
}

}  // namespace d3g
