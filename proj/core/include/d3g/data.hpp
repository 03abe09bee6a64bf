#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "d3g/relations.hpp"

namespace d3g {

enum class TaskKind { kClassification, kRegression };
enum class Split { kTrain, kValid, kTest };

std::string_view to_string(TaskKind t);
TaskKind task_from_string(std::string_view s);
std::string_view to_string(Split s);
Split split_from_string(std::string_view s);

/// One labelled example. For classification y holds the class index.
struct Example {
  std::vector<double> x;
  double y = 0.0;
  DomainId domain = 0;

  bool operator==(const Example&) const = default;
};

struct DomainDataset {
  TaskKind task = TaskKind::kClassification;
  std::size_t num_classes = 0;  // 0 for regression
  std::vector<Example> examples;
  MetaMap meta;
  std::map<DomainId, Split> splits;
  /// Present for datasets whose fixed relation is a graph.
  std::optional<AdjacencyGraph> adjacency;

  /// Throws MissingMetaError, DataError, or ConfigError on violated invariants.
  void validate() const;

  std::size_t input_dim() const;
  std::size_t meta_dim() const;
  std::size_t output_dim() const;
  std::vector<DomainId> domains(Split s) const;
  std::vector<Example> examples_in(Split s) const;
  std::vector<Example> examples_of(DomainId d) const;
  std::size_t count(DomainId d) const;

  /// Angle for single-column meta without a graph, else the graph.
  FixedRelation fixed_relation() const;

  bool operator==(const DomainDataset&) const;
};

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

struct Dg15Options {
  std::size_t domains = 15;
  std::size_t per_class = 50;
  double radius = 3.0;
};

/// Binary task: domain d has a key point k_d on a circle, positives
/// ~ N(k_d, I), negatives ~ N(-k_d, I), meta = atan2 angle of k_d.
/// Domains sorted by angle cycle through train, valid, test.
DomainDataset gen_dg15(std::uint64_t seed, const Dg15Options& options = {});

struct SpatialOptions {
  std::size_t rows = 4;
  std::size_t cols = 4;
  std::size_t features = 3;
  std::size_t samples_per_domain = 40;
  double noise = 0.1;
};

/// Regression over a grid of cells with (lat, lon) meta-data. The target is
/// a linear function of x whose coefficients vary smoothly with the cell,
/// plus Gaussian noise. The first half of cells in row-major order train;
/// the rest alternate valid and test.
DomainDataset gen_spatial_regression(std::uint64_t seed,
                                     const SpatialOptions& options = {});

/// Noise-free target of a spatial cell, used by tests and probes.
double spatial_target(const SpatialOptions& options, std::size_t row,
                      std::size_t col, std::span<const double> x);

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

struct DatasetPaths {
  std::string data;       // domain_id,y,x_1..x_k
  std::string meta;       // domain_id,m_1..m_k
  std::string split;      // domain_id,split   (optional if a rule is given)
  std::string adjacency;  // "id_i id_j" per line (optional)
};

/// Standard file names inside a dataset directory.
DatasetPaths dataset_paths_in(const std::string& dir);

enum class SplitRule {
  /// Domains sorted by id cycle through train, valid, test.
  kCycleById,
};

struct LoadOptions {
  TaskKind task = TaskKind::kClassification;
  /// Used when paths.split is empty.
  std::optional<SplitRule> split_rule;
};

DomainDataset load_dataset(const DatasetPaths& paths, const LoadOptions& options);

/// Writes data, meta, split and (when present) adjacency files.
void write_dataset(const DomainDataset& ds, const DatasetPaths& paths);

}  // namespace d3g
