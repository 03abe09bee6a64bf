#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "d3g/data.hpp"
#include "d3g/mlp.hpp"
#include "d3g/optim.hpp"
#include "d3g/relations.hpp"

namespace d3g {

enum class ModelKind { kMultiHead, kErm };
/// Space in which head outputs are mixed for classification.
enum class CombineSpace { kLogits, kProbabilities };
/// kUniform ignores relations and averages the other heads equally.
enum class RelationMode { kFused, kUniform };

std::string_view to_string(ModelKind k);
ModelKind model_kind_from_string(std::string_view s);
std::string_view to_string(CombineSpace c);
CombineSpace combine_space_from_string(std::string_view s);
std::string_view to_string(RelationMode m);
RelationMode relation_mode_from_string(std::string_view s);

/// Hyperparameters. Defaults are the DG-15 column of the published table
/// (lambda 0.5, beta 0.8, lr 1e-5, weight decay 5e-4, batch 10, 30 epochs).
struct TrainConfig {
  double lambda = 0.5;
  double beta = 0.8;
  double learning_rate = 1e-5;
  double weight_decay = 5e-4;
  std::size_t batch_size = 10;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  std::size_t hidden_width = 64;
  std::size_t relation_width = 32;
  std::size_t relation_heads = 4;
  /// Validation cadence in epochs; 0 disables validation.
  std::size_t eval_every = 1;
  /// Keep the parameters of the best validation epoch.
  bool select_on_valid = true;
  bool domain_balanced_sampling = false;
  CombineSpace combine = CombineSpace::kLogits;
  RelationMode relation_mode = RelationMode::kFused;

  /// Throws ConfigError.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Learnable parameters. Also used as the gradient container.
struct ModelParams {
  DenseParams extractor;
  std::vector<DenseParams> heads;
  RelationNet relation;

  ModelParams zeros_like() const;
  void set_zero();
  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;

  bool operator==(const ModelParams&) const = default;
};

/// Shared extractor e followed by one linear head per training domain
/// (kMultiHead), or a single head over [x, meta] (kErm).
struct MultiHeadModel {
  ModelKind kind = ModelKind::kMultiHead;
  TaskKind task = TaskKind::kClassification;
  std::size_t input_dim = 0;
  std::size_t meta_dim = 0;
  std::size_t output_dim = 0;
  std::vector<DomainId> head_domains;
  /// Meta-data of head_domains, same order.
  std::vector<std::vector<double>> head_meta;
  ModelParams params;

  std::size_t head_count() const { return params.heads.size(); }
  /// Throws ConfigError for a domain without a head.
  std::size_t head_index(DomainId d) const;
  /// Input width seen by the extractor.
  std::size_t extractor_input_dim() const;
  void validate() const;

  bool operator==(const MultiHeadModel&) const = default;
};

struct ArchitectureOptions {
  std::size_t hidden_width = 64;
  std::size_t relation_width = 32;
  std::size_t relation_heads = 4;
};

ArchitectureOptions architecture_of(const TrainConfig& c);

/// One head per training domain of ds.
MultiHeadModel make_multi_head_model(const DomainDataset& ds,
                                     const ArchitectureOptions& arch, Rng& rng);
/// Single head over [x, meta].
MultiHeadModel make_erm_model(const DomainDataset& ds,
                              const ArchitectureOptions& arch, Rng& rng);

/// Builds an untrained model of the given kind for ds with init stream
/// (config.seed, "init").
MultiHeadModel init_model(ModelKind kind, const DomainDataset& ds,
                          const TrainConfig& config);

/// x followed by the domain's meta-data: the ERM input layout.
std::vector<double> erm_input(std::span<const double> x, std::span<const double> meta);

/// h^(d)(e(x)).
std::vector<double> predict_head(const MultiHeadModel& model, DomainId d,
                                 std::span<const double> x);

/// Outputs of every head for one input.
std::vector<std::vector<double>> predict_all_heads(const MultiHeadModel& model,
                                                   std::span<const double> x);

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

struct LossBreakdown {
  double pred = 0.0;
  double rel = 0.0;
  double total = 0.0;
};

struct ObjectiveOptions {
  double lambda = 0.5;
  double beta = 0.8;
  CombineSpace combine = CombineSpace::kLogits;
  RelationMode relation_mode = RelationMode::kFused;
  /// Optional per-example weights; the batch loss becomes a weighted mean.
  std::span<const double> example_weights = {};
};

/// Mean over the batch of l(f^(d)(x), y), each example on its own head.
double loss_pred(const MultiHeadModel& model, std::span<const Example> batch);

/// Mean over the batch of l applied to the relation-weighted average of all
/// heads other than the example's own. relations must cover head_domains.
double loss_rel(const MultiHeadModel& model, std::span<const Example> batch,
                const RelationMatrix& relations,
                CombineSpace combine = CombineSpace::kLogits);

/// loss_pred + lambda * loss_rel with the relations held fixed.
double total_loss(const MultiHeadModel& model, std::span<const Example> batch,
                  const RelationMatrix& relations, double lambda,
                  CombineSpace combine = CombineSpace::kLogits);

/// For kErm models every example's x must already be an erm_input().
///
/// Full training objective. Rebuilds the learned relations among training
/// domains from the current relation net, fuses them with fixed_train
/// (head-ordered a^g), and when grads is non-null accumulates exact
/// gradients for heads, extractor, encoder and masks.
LossBreakdown objective(const MultiHeadModel& model, std::span<const Example> batch,
                        const Matrix& fixed_train, const ObjectiveOptions& options,
                        ModelParams* grads);

/// a^g among the model's head domains.
Matrix fixed_matrix_for_heads(const MultiHeadModel& model,
                              const FixedRelation& fixed);

/// Current fused relations among the training domains.
RelationMatrix training_relations(const MultiHeadModel& model,
                                  const FixedRelation& fixed, double beta);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double pred = 0.0;
  double rel = 0.0;
  std::optional<double> valid_metric;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  /// Epoch whose parameters were kept (0 means the initial parameters).
  std::size_t selected_epoch = 0;
  AdamState optimizer;
};

/// Trains a multi-head model with loss_pred + lambda * loss_rel.
/// optimizer, when given, resumes from that state.
TrainResult train(MultiHeadModel& model, const DomainDataset& ds,
                  const TrainConfig& config,
                  const AdamState* optimizer = nullptr);

/// Pools the training split and fits a single-head model on [x, meta].
TrainResult train_erm(MultiHeadModel& model, const DomainDataset& ds,
                      const TrainConfig& config,
                      const AdamState* optimizer = nullptr);

/// Fine-tunes a copy of an ERM model on training examples weighted by the
/// normalized relation row (one entry per training domain, ascending id).
/// Examples with zero weight are dropped before batching.
MultiHeadModel rw_finetune(const MultiHeadModel& erm, const DomainDataset& ds,
                           std::span<const double> relation_row,
                           const TrainConfig& config);

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

/// sum_d a_dt f^(d)(x) / sum_k a_kt, combined in the chosen space. An
/// all-zero row falls back to uniform weights.
std::vector<double> infer(const MultiHeadModel& model,
                          std::span<const double> relation_row,
                          std::span<const double> x,
                          CombineSpace combine = CombineSpace::kLogits);

/// Unweighted mean of all heads.
std::vector<double> infer_uniform(const MultiHeadModel& model,
                                  std::span<const double> x,
                                  CombineSpace combine = CombineSpace::kLogits);

/// Fused relations between test domain t and every head domain.
std::vector<double> relation_row(const MultiHeadModel& model,
                                 const FixedRelation& fixed, DomainId t,
                                 std::span<const double> meta_t, double beta);

/// ERM model output for x from a domain with the given meta-data.
std::vector<double> predict_erm(const MultiHeadModel& model,
                                std::span<const double> x,
                                std::span<const double> meta);

std::size_t argmax(std::span<const double> v);

}  // namespace d3g
