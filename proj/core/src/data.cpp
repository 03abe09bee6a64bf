#include "d3g/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "csv.hpp"
#include "d3g/errors.hpp"
#include "d3g/rng.hpp"

namespace d3g {

std::string_view to_string(TaskKind t) {
  return t == TaskKind::kClassification ? "classification" : "regression";
}

TaskKind task_from_string(std::string_view s) {
  if (s == "classification") return TaskKind::kClassification;
  if (s == "regression") return TaskKind::kRegression;
  throw ConfigError("unknown task kind '" + std::string(s) + "'");
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kValid:
      return "valid";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "valid" || s == "validation") return Split::kValid;
  if (s == "test") return Split::kTest;
  throw ConfigError("unknown split '" + std::string(s) + "'");
}

void DomainDataset::validate() const {
  if (examples.empty()) throw DataError("dataset has no examples");
  const std::size_t in = examples.front().x.size();
  if (in == 0) throw DataError("examples have no features");
  std::map<DomainId, std::size_t> counts;
  for (const auto& e : examples) {
    if (e.x.size() != in) throw DataError("examples have inconsistent feature counts");
    if (!meta.count(e.domain)) throw MissingMetaError(e.domain);
    if (!splits.count(e.domain)) {
      throw DataError("domain " + std::to_string(e.domain) + " has no split assignment");
    }
    if (task == TaskKind::kClassification) {
      const double y = e.y;
      if (!(y >= 0.0) || y != std::floor(y) ||
          static_cast<std::size_t>(y) >= num_classes) {
        throw DataError("label " + std::to_string(y) + " in domain " +
                        std::to_string(e.domain) + " is not a valid class index");
      }
    }
    ++counts[e.domain];
  }
  const std::size_t md = meta.begin()->second.size();
  for (const auto& [id, m] : meta) {
    if (m.size() != md) throw DataError("meta-data rows have inconsistent widths");
    for (double v : m) {
      if (!std::isfinite(v)) {
        throw DataError("meta-data of domain " + std::to_string(id) + " is not finite");
      }
    }
  }
  for (const auto& [id, s] : splits) {
    if (!counts.count(id)) {
      throw DataError("domain " + std::to_string(id) + " (" + std::string(to_string(s)) +
                      ") has no examples");
    }
  }
  if (task == TaskKind::kClassification && num_classes < 2) {
    throw DataError("classification needs at least two classes");
  }
  if (adjacency) {
    for (const auto& [id, s] : splits) {
      if (!adjacency->contains(id)) {
        throw DataError("adjacency graph does not know domain " + std::to_string(id));
      }
    }
  }
}

std::size_t DomainDataset::input_dim() const {
  return examples.empty() ? 0 : examples.front().x.size();
}

std::size_t DomainDataset::meta_dim() const {
  return meta.empty() ? 0 : meta.begin()->second.size();
}

std::size_t DomainDataset::output_dim() const {
  return task == TaskKind::kClassification ? num_classes : 1;
}

std::vector<DomainId> DomainDataset::domains(Split s) const {
  std::vector<DomainId> out;
  for (const auto& [id, sp] : splits) {
    if (sp == s) out.push_back(id);
  }
  return out;
}

std::vector<Example> DomainDataset::examples_in(Split s) const {
  std::vector<Example> out;
  for (const auto& e : examples) {
    auto it = splits.find(e.domain);
    if (it != splits.end() && it->second == s) out.push_back(e);
  }
  return out;
}

std::vector<Example> DomainDataset::examples_of(DomainId d) const {
  std::vector<Example> out;
  for (const auto& e : examples) {
    if (e.domain == d) out.push_back(e);
  }
  return out;
}

std::size_t DomainDataset::count(DomainId d) const {
  return static_cast<std::size_t>(std::count_if(
      examples.begin(), examples.end(), [d](const Example& e) { return e.domain == d; }));
}

FixedRelation DomainDataset::fixed_relation() const {
  if (adjacency) return FixedRelation::adjacency(*adjacency);
  return FixedRelation::angle();
}

bool DomainDataset::operator==(const DomainDataset& o) const {
  auto edges = [](const std::optional<AdjacencyGraph>& g) {
    return g ? g->edges() : std::vector<std::pair<DomainId, DomainId>>{};
  };
  return task == o.task && num_classes == o.num_classes && examples == o.examples &&
         meta == o.meta && splits == o.splits &&
         adjacency.has_value() == o.adjacency.has_value() &&
         edges(adjacency) == edges(o.adjacency);
}

// ---------------------------------------------------------------------------

DomainDataset gen_dg15(std::uint64_t seed, const Dg15Options& opt) {
  if (opt.domains < 3 || opt.per_class == 0) {
    throw ConfigError("DG-15 generator needs at least 3 domains and one point per class");
  }
  Rng root = Rng(seed).split("dg15");
  DomainDataset ds;
  ds.task = TaskKind::kClassification;
  ds.num_classes = 2;

  std::vector<std::pair<double, double>> keys(opt.domains);
  std::vector<double> angles(opt.domains);
  for (std::size_t d = 0; d < opt.domains; ++d) {
    Rng r = root.split("key").split(d);
    const double theta = r.uniform(-std::numbers::pi, std::numbers::pi);
    keys[d] = {opt.radius * std::cos(theta), opt.radius * std::sin(theta)};
    angles[d] = std::atan2(keys[d].second, keys[d].first);
    ds.meta[static_cast<DomainId>(d)] = {angles[d]};
  }

  for (std::size_t d = 0; d < opt.domains; ++d) {
    Rng r = root.split("points").split(d);
    const auto [kx, ky] = keys[d];
    for (int label : {1, 0}) {
      const double sign = label == 1 ? 1.0 : -1.0;
      for (std::size_t i = 0; i < opt.per_class; ++i) {
        Example e;
        e.x = {sign * kx + r.normal(), sign * ky + r.normal()};
        e.y = label;
        e.domain = static_cast<DomainId>(d);
        ds.examples.push_back(std::move(e));
      }
    }
  }

  std::vector<std::size_t> order(opt.domains);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return angles[a] < angles[b]; });
  constexpr Split cycle[] = {Split::kTrain, Split::kValid, Split::kTest};
  for (std::size_t k = 0; k < order.size(); ++k) {
    ds.splits[static_cast<DomainId>(order[k])] = cycle[k % 3];
  }
  ds.validate();
  return ds;
}

double spatial_target(const SpatialOptions& opt, std::size_t row, std::size_t col,
                      std::span<const double> x) {
  // Coefficients vary slowly across the grid so neighbouring cells agree.
  const double u = static_cast<double>(row) / static_cast<double>(opt.rows);
  const double v = static_cast<double>(col) / static_cast<double>(opt.cols);
  double y = 0.5 * std::sin(1.5 * u) + 0.5 * std::sin(1.2 * v);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double kk = static_cast<double>(k);
    const double w = std::cos(1.3 * u + 0.7 * kk) + std::cos(1.1 * v + 0.5 * kk);
    y += w * x[k];
  }
  return y;
}

DomainDataset gen_spatial_regression(std::uint64_t seed, const SpatialOptions& opt) {
  if (opt.rows < 3 || opt.cols < 3) {
    throw ConfigError("spatial grid must be at least 3x3");
  }
  if (opt.features == 0 || opt.samples_per_domain == 0 || !(opt.noise >= 0.0)) {
    throw ConfigError("spatial generator needs features, samples, and noise >= 0");
  }
  Rng root = Rng(seed).split("spatial");
  DomainDataset ds;
  ds.task = TaskKind::kRegression;
  ds.num_classes = 0;

  const std::size_t cells = opt.rows * opt.cols;
  std::set<DomainId> ids;
  for (std::size_t c = 0; c < cells; ++c) ids.insert(static_cast<DomainId>(c));
  AdjacencyGraph graph(ids, {});

  for (std::size_t r = 0; r < opt.rows; ++r) {
    for (std::size_t c = 0; c < opt.cols; ++c) {
      const auto id = static_cast<DomainId>(r * opt.cols + c);
      // latitude decreases southwards, longitude increases eastwards
      ds.meta[id] = {45.0 - 2.0 * static_cast<double>(r),
                     -120.0 + 3.0 * static_cast<double>(c)};
      if (c + 1 < opt.cols) graph.add_edge(id, id + 1);
      if (r + 1 < opt.rows) graph.add_edge(id, id + static_cast<DomainId>(opt.cols));

      Rng rng = root.split("cell").split(static_cast<std::uint64_t>(id));
      for (std::size_t i = 0; i < opt.samples_per_domain; ++i) {
        Example e;
        e.x.resize(opt.features);
        for (double& v : e.x) v = rng.normal();
        e.y = spatial_target(opt, r, c, e.x) + opt.noise * rng.normal();
        e.domain = id;
        ds.examples.push_back(std::move(e));
      }
    }
  }
  ds.adjacency = std::move(graph);

  const std::size_t train_cells = cells / 2;
  for (std::size_t k = 0; k < cells; ++k) {
    const auto id = static_cast<DomainId>(k);
    if (k < train_cells) {
      ds.splits[id] = Split::kTrain;
    } else {
      ds.splits[id] = ((k - train_cells) % 2 == 0) ? Split::kValid : Split::kTest;
    }
  }
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------

DatasetPaths dataset_paths_in(const std::string& dir) {
  const std::string base = dir.empty() || dir.back() == '/' ? dir : dir + "/";
  return {base + "data.csv", base + "meta.csv", base + "split.csv", base + "adjacency.txt"};
}

DomainDataset load_dataset(const DatasetPaths& paths, const LoadOptions& options) {
  using detail::parse_double;
  using detail::parse_int;
  DomainDataset ds;
  ds.task = options.task;

  // meta
  {
    const auto rows = detail::read_rows(paths.meta);
    if (rows.empty()) throw DataError("'" + paths.meta + "' is empty");
    const std::size_t width = rows[0].fields.size();
    if (width < 2) {
      throw MalformedRowError(paths.meta, rows[0].line,
                              "header must be domain_id, m_1, ..., m_k");
    }
    for (std::size_t k = 1; k < rows.size(); ++k) {
      const auto& r = rows[k];
      if (r.fields.size() != width) {
        throw MalformedRowError(paths.meta, r.line,
                                "expected " + std::to_string(width) + " fields, got " +
                                    std::to_string(r.fields.size()));
      }
      const DomainId id = parse_int(r.fields[0], paths.meta, r.line);
      std::vector<double> m;
      for (std::size_t c = 1; c < width; ++c) {
        m.push_back(parse_double(r.fields[c], paths.meta, r.line));
      }
      if (!ds.meta.emplace(id, std::move(m)).second) {
        throw MalformedRowError(paths.meta, r.line,
                                "duplicate meta-data for domain " + std::to_string(id));
      }
    }
  }

  // data
  {
    const auto rows = detail::read_rows(paths.data);
    if (rows.size() < 2) throw DataError("'" + paths.data + "' has no data rows");
    const std::size_t width = rows[0].fields.size();
    if (width < 3) {
      throw MalformedRowError(paths.data, rows[0].line,
                              "header must be domain_id, y, x_1, ..., x_k");
    }
    std::size_t max_label = 0;
    for (std::size_t k = 1; k < rows.size(); ++k) {
      const auto& r = rows[k];
      if (r.fields.size() != width) {
        throw MalformedRowError(paths.data, r.line,
                                "expected " + std::to_string(width) + " fields, got " +
                                    std::to_string(r.fields.size()));
      }
      Example e;
      e.domain = parse_int(r.fields[0], paths.data, r.line);
      e.y = parse_double(r.fields[1], paths.data, r.line);
      for (std::size_t c = 2; c < width; ++c) {
        e.x.push_back(parse_double(r.fields[c], paths.data, r.line));
      }
      if (!ds.meta.count(e.domain)) throw MissingMetaError(e.domain);
      if (ds.task == TaskKind::kClassification) {
        if (e.y < 0.0 || e.y != std::floor(e.y)) {
          throw MalformedRowError(paths.data, r.line, "class label must be a nonnegative integer");
        }
        max_label = std::max(max_label, static_cast<std::size_t>(e.y));
      }
      ds.examples.push_back(std::move(e));
    }
    ds.num_classes = ds.task == TaskKind::kClassification ? std::max<std::size_t>(2, max_label + 1) : 0;
  }

  std::set<DomainId> used;
  for (const auto& e : ds.examples) used.insert(e.domain);

  // splits
  if (!paths.split.empty()) {
    const auto rows = detail::read_rows(paths.split);
    for (std::size_t k = 1; k < rows.size(); ++k) {
      const auto& r = rows[k];
      if (r.fields.size() != 2) {
        throw MalformedRowError(paths.split, r.line, "expected domain_id, split");
      }
      const DomainId id = parse_int(r.fields[0], paths.split, r.line);
      Split s;
      try {
        s = split_from_string(r.fields[1]);
      } catch (const ConfigError&) {
        throw MalformedRowError(paths.split, r.line, "unknown split '" + r.fields[1] + "'");
      }
      auto [it, inserted] = ds.splits.emplace(id, s);
      if (!inserted) throw OverlappingSplitError(id);
      if (!ds.meta.count(id)) throw MissingMetaError(id);
    }
  } else if (options.split_rule) {
    constexpr Split cycle[] = {Split::kTrain, Split::kValid, Split::kTest};
    std::size_t k = 0;
    for (DomainId id : used) ds.splits[id] = cycle[k++ % 3];
  } else {
    throw ConfigError("no split file and no split rule given");
  }

  // adjacency
  if (!paths.adjacency.empty()) {
    const auto rows = detail::read_rows(paths.adjacency, ' ');
    std::set<DomainId> ids;
    for (const auto& [id, m] : ds.meta) ids.insert(id);
    AdjacencyGraph g(ids, {});
    for (const auto& r : rows) {
      if (r.fields.size() != 2) {
        throw MalformedRowError(paths.adjacency, r.line, "expected 'id_i id_j'");
      }
      const DomainId i = parse_int(r.fields[0], paths.adjacency, r.line);
      const DomainId j = parse_int(r.fields[1], paths.adjacency, r.line);
      if (!g.contains(i)) throw MissingMetaError(i);
      if (!g.contains(j)) throw MissingMetaError(j);
      g.add_edge(i, j);
    }
    ds.adjacency = std::move(g);
  }

  ds.validate();
  return ds;
}

void write_dataset(const DomainDataset& ds, const DatasetPaths& paths) {
  using detail::format_double;
  {
    std::ostringstream out;
    out << "domain_id,y";
    for (std::size_t k = 0; k < ds.input_dim(); ++k) out << ",x_" << (k + 1);
    out << '\n';
    for (const auto& e : ds.examples) {
      out << e.domain << ',' << format_double(e.y);
      for (double v : e.x) out << ',' << format_double(v);
      out << '\n';
    }
    detail::write_file_atomic(paths.data, out.str());
  }
  {
    std::ostringstream out;
    out << "domain_id";
    for (std::size_t k = 0; k < ds.meta_dim(); ++k) out << ",m_" << (k + 1);
    out << '\n';
    for (const auto& [id, m] : ds.meta) {
      out << id;
      for (double v : m) out << ',' << format_double(v);
      out << '\n';
    }
    detail::write_file_atomic(paths.meta, out.str());
  }
  {
    std::ostringstream out;
    out << "domain_id,split\n";
    for (const auto& [id, s] : ds.splits) out << id << ',' << to_string(s) << '\n';
    detail::write_file_atomic(paths.split, out.str());
  }
  if (ds.adjacency && !paths.adjacency.empty()) {
    std::ostringstream out;
    for (const auto& [i, j] : ds.adjacency->edges()) out << i << ' ' << j << '\n';
    detail::write_file_atomic(paths.adjacency, out.str());
  }
}

}  // namespace d3g
