#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "d3g/linalg.hpp"
#include "d3g/mlp.hpp"

namespace d3g {

using DomainId = std::int64_t;
using MetaMap = std::map<DomainId, std::vector<double>>;

// ---------------------------------------------------------------------------
// Fixed relations
// ---------------------------------------------------------------------------

/// max(0, cos(theta_i - theta_j)); 1 for aligned domains, 0 from 90 degrees on.
double fixed_angle_similarity(double theta_i, double theta_j);

/// Undirected 0/1 graph over a known set of domain ids.
class AdjacencyGraph {
 public:
  AdjacencyGraph() = default;
  AdjacencyGraph(std::set<DomainId> ids,
                 std::span<const std::pair<DomainId, DomainId>> edges);

  void add_domain(DomainId id) { ids_.insert(id); }
  /// Throws DataError for ids not registered.
  void add_edge(DomainId i, DomainId j);

  bool contains(DomainId id) const { return ids_.count(id) != 0; }
  const std::set<DomainId>& ids() const { return ids_; }
  /// Edges with i < j, sorted.
  std::vector<std::pair<DomainId, DomainId>> edges() const;

  /// 1 if (i, j) is an edge in either direction or i == j, else 0.
  double similarity(DomainId i, DomainId j) const;

 private:
  std::set<DomainId> ids_;
  std::set<std::pair<DomainId, DomainId>> edges_;
};

double fixed_adjacency(const AdjacencyGraph& graph, DomainId i, DomainId j);

/// Where a^g comes from: the angle in meta-data column 0, or a graph.
class FixedRelation {
 public:
  enum class Kind { kAngle, kAdjacency };

  static FixedRelation angle() { return FixedRelation(Kind::kAngle, {}); }
  static FixedRelation adjacency(AdjacencyGraph graph) {
    return FixedRelation(Kind::kAdjacency, std::move(graph));
  }

  Kind kind() const { return kind_; }
  const AdjacencyGraph& graph() const { return graph_; }

  double operator()(DomainId i, std::span<const double> meta_i, DomainId j,
                    std::span<const double> meta_j) const;

 private:
  FixedRelation(Kind kind, AdjacencyGraph graph)
      : kind_(kind), graph_(std::move(graph)) {}

  Kind kind_;
  AdjacencyGraph graph_;
};

std::string to_string(FixedRelation::Kind kind);

// ---------------------------------------------------------------------------
// Learned relations
// ---------------------------------------------------------------------------

/// Encoder g plus R similarity masks w_r, each of g's output width.
struct RelationNet {
  DenseParams encoder;
  std::vector<std::vector<double>> masks;

  std::size_t heads() const { return masks.size(); }
  void validate() const;
  RelationNet zeros_like() const;
  void set_zero();
  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;

  bool operator==(const RelationNet&) const = default;
};

struct RelationNetShape {
  std::size_t meta_dim = 1;
  std::size_t width = 32;
  std::size_t heads = 4;
  /// Masks start at 1 + U(-jitter, jitter).
  double mask_jitter = 0.1;
};

RelationNet make_relation_net(const RelationNetShape& shape, Rng& rng);

/// cos(a, b); 0 when either vector has zero norm.
double cosine(std::span<const double> a, std::span<const double> b);

/// (1/R) sum_r cos(w_r * g(m_i), w_r * g(m_j)).
double learned_relation(const RelationNet& net, std::span<const double> meta_i,
                        std::span<const double> meta_j);

/// Differentiable learned-relation matrix over a list of domains. Keeps the
/// encoder tapes so gradients with respect to the matrix can be pushed back
/// into the encoder and the masks.
class LearnedRelationGraph {
 public:
  LearnedRelationGraph(const RelationNet& net,
                       std::span<const std::vector<double>> metas);

  /// Symmetric matrix with unit diagonal.
  const Matrix& values() const { return values_; }
  std::span<const double> representation(std::size_t k) const {
    return tapes_[k].output();
  }

  /// grad(i, j) is dL/d a^l_ij for i != j (both orders count); the diagonal
  /// is ignored. Gradients accumulate into grads.
  void backward(const Matrix& grad, RelationNet& grads) const;

 private:
  const RelationNet* net_;
  std::vector<Tape> tapes_;
  Matrix values_;
};

// ---------------------------------------------------------------------------
// Fusion and normalization
// ---------------------------------------------------------------------------

/// max(0, beta * fixed + (1 - beta) * learned). Throws ConfigError unless
/// beta is in [0, 1].
double fuse(double fixed, double learned, double beta);
Matrix fuse(const Matrix& fixed, const Matrix& learned, double beta);

struct RelationMatrix {
  std::vector<DomainId> ids;
  Matrix fixed;
  Matrix learned;
  Matrix fused;
  double beta = 1.0;

  std::size_t index_of(DomainId id) const;
  double operator()(DomainId i, DomainId j) const {
    return fused(index_of(i), index_of(j));
  }
};

/// Builds fixed, learned, and fused matrices for ids. net may be null, in
/// which case the learned part is zero and beta must be 1.
RelationMatrix build_matrix(std::span<const DomainId> ids, const MetaMap& meta,
                            const FixedRelation& fixed, const RelationNet* net,
                            double beta);

struct SimplexWeights {
  std::vector<double> weights;
  bool fell_back = false;
};

/// Scales a nonnegative row onto the simplex. An all-zero row means "no
/// related domain"; it falls back to uniform weights and logs a warning.
/// Throws ConfigError for negative or non-finite entries or an empty row.
SimplexWeights normalize_weights(std::span<const double> row);

/// Writes a square matrix with a header row and column of domain ids.
void write_relation_csv(const std::string& path, std::span<const DomainId> ids,
                        const Matrix& m);
/// Reads the file written by write_relation_csv.
std::pair<std::vector<DomainId>, Matrix> read_relation_csv(const std::string& path);

}  // namespace d3g
