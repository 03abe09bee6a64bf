#include "d3g/relations.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "csv.hpp"
#include "d3g/errors.hpp"
#include "d3g/log.hpp"
#include "d3g/rng.hpp"

namespace d3g {

double fixed_angle_similarity(double theta_i, double theta_j) {
  // cos is 2*pi periodic, so wrapping the difference is implicit.
  return std::max(0.0, std::cos(theta_i - theta_j));
}

AdjacencyGraph::AdjacencyGraph(std::set<DomainId> ids,
                               std::span<const std::pair<DomainId, DomainId>> edges)
    : ids_(std::move(ids)) {
  for (const auto& [i, j] : edges) add_edge(i, j);
}

void AdjacencyGraph::add_edge(DomainId i, DomainId j) {
  if (!contains(i)) throw DataError("adjacency: unknown domain id " + std::to_string(i));
  if (!contains(j)) throw DataError("adjacency: unknown domain id " + std::to_string(j));
  if (i == j) return;
  edges_.emplace(std::min(i, j), std::max(i, j));
}

std::vector<std::pair<DomainId, DomainId>> AdjacencyGraph::edges() const {
  return {edges_.begin(), edges_.end()};
}

double AdjacencyGraph::similarity(DomainId i, DomainId j) const {
  if (!contains(i)) throw DataError("adjacency: unknown domain id " + std::to_string(i));
  if (!contains(j)) throw DataError("adjacency: unknown domain id " + std::to_string(j));
  if (i == j) return 1.0;
  return edges_.count({std::min(i, j), std::max(i, j)}) ? 1.0 : 0.0;
}

double fixed_adjacency(const AdjacencyGraph& graph, DomainId i, DomainId j) {
  return graph.similarity(i, j);
}

double FixedRelation::operator()(DomainId i, std::span<const double> meta_i,
                                 DomainId j, std::span<const double> meta_j) const {
  switch (kind_) {
    case Kind::kAngle:
      if (meta_i.empty() || meta_j.empty()) {
        throw DataError("angle relation needs at least one meta-data column");
      }
      if (i == j) return 1.0;
      return fixed_angle_similarity(meta_i[0], meta_j[0]);
    case Kind::kAdjacency:
      return graph_.similarity(i, j);
  }
  return 0.0;
}

std::string to_string(FixedRelation::Kind kind) {
  return kind == FixedRelation::Kind::kAngle ? "angle" : "adjacency";
}

// ---------------------------------------------------------------------------

void RelationNet::validate() const {
  encoder.validate();
  if (masks.empty()) throw ConfigError("relation net needs at least one similarity head");
  for (const auto& w : masks) {
    if (w.size() != encoder.output_dim()) {
      throw ConfigError("similarity mask width differs from encoder output");
    }
  }
}

RelationNet RelationNet::zeros_like() const {
  RelationNet z{encoder.zeros_like(), masks};
  for (auto& w : z.masks) std::fill(w.begin(), w.end(), 0.0);
  return z;
}

void RelationNet::set_zero() {
  encoder.set_zero();
  for (auto& w : masks) std::fill(w.begin(), w.end(), 0.0);
}

std::vector<std::span<double>> RelationNet::blocks() {
  auto out = encoder.blocks();
  for (auto& w : masks) out.emplace_back(w);
  return out;
}

std::vector<std::span<const double>> RelationNet::blocks() const {
  auto out = encoder.blocks();
  for (const auto& w : masks) out.emplace_back(w);
  return out;
}

RelationNet make_relation_net(const RelationNetShape& shape, Rng& rng) {
  if (shape.heads == 0 || shape.width == 0 || shape.meta_dim == 0) {
    throw ConfigError("relation net shape must be positive");
  }
  const std::size_t dims[] = {shape.meta_dim, shape.width, shape.width};
  const Activation acts[] = {Activation::kTanh, Activation::kTanh};
  RelationNet net;
  net.encoder = make_dense(dims, acts, rng);
  net.masks.assign(shape.heads, std::vector<double>(shape.width, 1.0));
  for (auto& w : net.masks) {
    for (double& v : w) v += rng.uniform(-shape.mask_jitter, shape.mask_jitter);
  }
  return net;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

namespace {

// Mean masked cosine between two representations.
double masked_cosine(const RelationNet& net, std::span<const double> p,
                     std::span<const double> q) {
  std::vector<double> u(p.size()), v(q.size());
  double s = 0.0;
  for (const auto& w : net.masks) {
    for (std::size_t k = 0; k < p.size(); ++k) {
      u[k] = w[k] * p[k];
      v[k] = w[k] * q[k];
    }
    s += cosine(u, v);
  }
  return s / static_cast<double>(net.masks.size());
}

}  // namespace

double learned_relation(const RelationNet& net, std::span<const double> meta_i,
                        std::span<const double> meta_j) {
  if (meta_i.size() != net.encoder.input_dim() ||
      meta_j.size() != net.encoder.input_dim()) {
    throw ConfigError("meta-data width does not match the relation encoder");
  }
  const auto p = forward(net.encoder, meta_i);
  const auto q = forward(net.encoder, meta_j);
  return masked_cosine(net, p, q);
}

LearnedRelationGraph::LearnedRelationGraph(const RelationNet& net,
                                           std::span<const std::vector<double>> metas)
    : net_(&net), tapes_(metas.size()), values_(metas.size(), metas.size(), 0.0) {
  for (std::size_t k = 0; k < metas.size(); ++k) {
    if (metas[k].size() != net.encoder.input_dim()) {
      throw ConfigError("meta-data width does not match the relation encoder");
    }
    forward(net.encoder, metas[k], &tapes_[k]);
  }
  for (std::size_t i = 0; i < metas.size(); ++i) {
    values_(i, i) = 1.0;
    for (std::size_t j = i + 1; j < metas.size(); ++j) {
      const double a = masked_cosine(net, tapes_[i].output(), tapes_[j].output());
      values_(i, j) = a;
      values_(j, i) = a;
    }
  }
}

void LearnedRelationGraph::backward(const Matrix& grad, RelationNet& grads) const {
  const std::size_t n = tapes_.size();
  if (grad.rows() != n || grad.cols() != n) {
    throw ConfigError("relation gradient has the wrong shape");
  }
  const RelationNet& net = *net_;
  const std::size_t width = net.encoder.output_dim();
  const double inv_heads = 1.0 / static_cast<double>(net.masks.size());
  std::vector<std::vector<double>> grad_rep(n, std::vector<double>(width, 0.0));
  std::vector<double> u(width), v(width);

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double upstream = (grad(i, j) + grad(j, i)) * inv_heads;
      if (upstream == 0.0) continue;
      const auto p = tapes_[i].output();
      const auto q = tapes_[j].output();
      for (std::size_t r = 0; r < net.masks.size(); ++r) {
        const auto& w = net.masks[r];
        auto& gw = grads.masks[r];
        for (std::size_t k = 0; k < width; ++k) {
          u[k] = w[k] * p[k];
          v[k] = w[k] * q[k];
        }
        const double nu = norm2(u);
        const double nv = norm2(v);
        if (nu == 0.0 || nv == 0.0) continue;  // cosine pinned to 0
        const double c = dot(u, v) / (nu * nv);
        for (std::size_t k = 0; k < width; ++k) {
          // d cos / du and d cos / dv
          const double du = v[k] / (nu * nv) - c * u[k] / (nu * nu);
          const double dv = u[k] / (nu * nv) - c * v[k] / (nv * nv);
          gw[k] += upstream * (du * p[k] + dv * q[k]);
          grad_rep[i][k] += upstream * du * w[k];
          grad_rep[j][k] += upstream * dv * w[k];
        }
      }
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    d3g::backward(net.encoder, tapes_[k], grad_rep[k], grads.encoder);
  }
}

// ---------------------------------------------------------------------------

namespace {

void check_beta(double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw ConfigError("beta must lie in [0, 1], got " + std::to_string(beta));
  }
}

}  // namespace

double fuse(double fixed, double learned, double beta) {
  check_beta(beta);
  return std::max(0.0, beta * fixed + (1.0 - beta) * learned);
}

Matrix fuse(const Matrix& fixed, const Matrix& learned, double beta) {
  check_beta(beta);
  if (fixed.rows() != learned.rows() || fixed.cols() != learned.cols()) {
    throw ConfigError("fuse: fixed and learned matrices differ in shape");
  }
  Matrix out(fixed.rows(), fixed.cols());
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    out.data()[i] = std::max(0.0, beta * fixed.data()[i] + (1.0 - beta) * learned.data()[i]);
  }
  return out;
}

std::size_t RelationMatrix::index_of(DomainId id) const {
  auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) {
    throw ConfigError("relation matrix has no domain " + std::to_string(id));
  }
  return static_cast<std::size_t>(it - ids.begin());
}

RelationMatrix build_matrix(std::span<const DomainId> ids, const MetaMap& meta,
                            const FixedRelation& fixed, const RelationNet* net,
                            double beta) {
  check_beta(beta);
  if (!net && beta != 1.0) {
    throw ConfigError("learned relations requested without a relation net");
  }
  std::vector<std::vector<double>> metas;
  metas.reserve(ids.size());
  for (DomainId id : ids) {
    auto it = meta.find(id);
    if (it == meta.end()) throw MissingMetaError(id);
    metas.push_back(it->second);
  }
  RelationMatrix rm;
  rm.ids.assign(ids.begin(), ids.end());
  rm.beta = beta;
  const std::size_t n = ids.size();
  rm.fixed = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double a = fixed(ids[i], metas[i], ids[j], metas[j]);
      rm.fixed(i, j) = a;
      rm.fixed(j, i) = a;
    }
  }
  rm.learned = net ? LearnedRelationGraph(*net, metas).values() : Matrix(n, n);
  rm.fused = fuse(rm.fixed, rm.learned, beta);
  return rm;
}

SimplexWeights normalize_weights(std::span<const double> row) {
  if (row.empty()) throw ConfigError("cannot normalize an empty relation row");
  double sum = 0.0;
  for (double a : row) {
    if (!(a >= 0.0) || !std::isfinite(a)) {
      throw ConfigError("relation weights must be finite and nonnegative");
    }
    sum += a;
  }
  SimplexWeights out;
  out.weights.resize(row.size());
  if (sum > 0.0) {
    for (std::size_t k = 0; k < row.size(); ++k) out.weights[k] = row[k] / sum;
  } else {
    warn("relation row is all zero; falling back to uniform weights");
    std::fill(out.weights.begin(), out.weights.end(),
              1.0 / static_cast<double>(row.size()));
    out.fell_back = true;
  }
  return out;
}

void write_relation_csv(const std::string& path, std::span<const DomainId> ids,
                        const Matrix& m) {
  if (m.rows() != ids.size() || m.cols() != ids.size()) {
    throw ConfigError("relation export: matrix does not match the id list");
  }
  std::ostringstream out;
  out << "domain_id";
  for (DomainId id : ids) out << ',' << id;
  out << '\n';
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i];
    for (std::size_t j = 0; j < ids.size(); ++j) out << ',' << detail::format_double(m(i, j));
    out << '\n';
  }
  detail::write_file_atomic(path, out.str());
}

std::pair<std::vector<DomainId>, Matrix> read_relation_csv(const std::string& path) {
  const auto rows = detail::read_rows(path);
  if (rows.empty()) throw DataError("'" + path + "' is empty");
  std::vector<DomainId> ids;
  for (std::size_t k = 1; k < rows[0].fields.size(); ++k) {
    ids.push_back(detail::parse_int(rows[0].fields[k], path, rows[0].line));
  }
  if (rows.size() != ids.size() + 1) {
    throw DataError("'" + path + "' is not a square relation matrix");
  }
  Matrix m(ids.size(), ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& r = rows[i + 1];
    if (r.fields.size() != ids.size() + 1) {
      throw MalformedRowError(path, r.line, "expected " + std::to_string(ids.size() + 1) + " fields");
    }
    for (std::size_t j = 0; j < ids.size(); ++j) {
      m(i, j) = detail::parse_double(r.fields[j + 1], path, r.line);
    }
  }
  return {ids, m};
}

}  // namespace d3g
