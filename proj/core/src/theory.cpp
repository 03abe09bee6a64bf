#include "d3g/theory.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <sstream>

#include "csv.hpp"
#include "d3g/errors.hpp"

namespace d3g::theory {

namespace {

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

LatentDomain draw_latent(Rng& rng, std::size_t dim, double lipschitz) {
  LatentDomain d;
  d.z.resize(dim);
  for (auto& v : d.z) v = rng.uniform();
  d.slope = true_slope(d.z, lipschitz);
  return d;
}

Estimate mean_and_error(std::span<const double> values) {
  const auto n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double var = values.size() > 1 ? ss / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

}  // namespace

double true_slope(std::span<const double> z, double lipschitz) {
  if (z.empty()) return 0.0;
  double s = 0.0;
  for (double v : z) s += v;
  return lipschitz * s / std::sqrt(static_cast<double>(z.size()));
}

World sample_world(const WorldConfig& config) {
  if (config.train_domains == 0 || config.dim == 0 || config.samples < 2) {
    throw ConfigError("world needs training domains, dim >= 1 and at least 2 samples");
  }
  if (!(config.lipschitz >= 0.0) || !(config.noise >= 0.0)) {
    throw ConfigError("lipschitz constant and noise must be nonnegative");
  }
  World w;
  w.config = config;
  const Rng root(config.seed);
  for (std::size_t k = 0; k < config.train_domains; ++k) {
    Rng rng = root.split("domain").split(k);
    w.train.push_back(draw_latent(rng, config.dim, config.lipschitz));
    DomainSample s;
    s.e.resize(config.samples);
    s.y.resize(config.samples);
    for (std::size_t i = 0; i < config.samples; ++i) {
      s.e[i] = rng.uniform(-1.0, 1.0);
      s.y[i] = w.train.back().slope * s.e[i] + config.noise * rng.normal();
    }
    w.data.push_back(std::move(s));
  }
  for (std::size_t t = 0; t < config.test_domains; ++t) {
    Rng rng = root.split("test").split(t);
    w.test.push_back(draw_latent(rng, config.dim, config.lipschitz));
  }
  return w;
}

bool lipschitz_certificate(const World& world, std::size_t pairs, std::size_t probes,
                           std::uint64_t seed) {
  std::vector<const LatentDomain*> all;
  for (const auto& d : world.train) all.push_back(&d);
  for (const auto& d : world.test) all.push_back(&d);
  if (all.size() < 2 || probes < 2) return true;
  Rng rng(seed);
  for (std::size_t p = 0; p < pairs; ++p) {
    const auto i = rng.below(all.size());
    auto j = rng.below(all.size() - 1);
    if (j >= i) ++j;
    double sup = 0.0;
    for (std::size_t q = 0; q < probes; ++q) {
      const double e = -1.0 + 2.0 * static_cast<double>(q) / static_cast<double>(probes - 1);
      sup = std::max(sup, std::abs(all[i]->slope * e - all[j]->slope * e));
    }
    const double bound = world.config.lipschitz * distance(all[i]->z, all[j]->z);
    if (sup > bound + 1e-12) return false;
  }
  return true;
}

std::vector<double> fit_heads(const World& world) {
  std::vector<double> fitted;
  for (std::size_t k = 0; k < world.data.size(); ++k) {
    const auto& s = world.data[k];
    double ee = 0.0, ey = 0.0;
    for (std::size_t i = 0; i < s.e.size(); ++i) {
      ee += s.e[i] * s.e[i];
      ey += s.e[i] * s.y[i];
    }
    if (ee == 0.0) {
      throw NumericalError("singular design in training domain " + std::to_string(k));
    }
    fitted.push_back(ey / ee);
  }
  return fitted;
}

double ThresholdEstimator::slope_for(std::span<const LatentDomain> train,
                                     std::span<const double> z_test) const {
  if (!(bandwidth > 0.0)) throw ConfigError("bandwidth must be > 0");
  if (train.size() != fitted.size()) {
    throw ConfigError("fitted heads do not match the training domains");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < train.size(); ++k) {
    if (distance(train[k].z, z_test) < bandwidth) {
      sum += fitted[k];
      ++count;
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

double threshold_predict(const ThresholdEstimator& est, std::span<const LatentDomain> train,
                         std::span<const double> z_test, double e) {
  return est.slope_for(train, z_test) * e;
}

double uniform_slope(std::span<const double> fitted) {
  if (fitted.empty()) return 0.0;
  double sum = 0.0;
  for (double s : fitted) sum += s;
  return sum / static_cast<double>(fitted.size());
}

Estimate excess_risk(const std::function<double(double)>& predict, const LatentDomain& test,
                     double noise, std::size_t n_eval, Rng& rng) {
  if (n_eval == 0) throw ConfigError("n_eval must be > 0");
  std::vector<double> diffs(n_eval);
  for (auto& d : diffs) {
    const double e = rng.uniform(-1.0, 1.0);
    const double eps = noise * rng.normal();
    const double truth = test.slope * e;
    const double y = truth + eps;
    d = std::abs(predict(e) - y) - std::abs(truth - y);
  }
  return mean_and_error(diffs);
}

Estimate world_excess_risk(const World& world,
                           const std::function<double(const LatentDomain&)>& slope_for,
                           std::size_t n_eval) {
  if (world.test.empty()) throw ConfigError("world has no test domains");
  const Rng root = Rng(world.config.seed).split("eval");
  double mean = 0.0, var = 0.0;
  for (std::size_t t = 0; t < world.test.size(); ++t) {
    const double slope = slope_for(world.test[t]);
    Rng rng = root.split(t);
    const auto est = excess_risk([slope](double e) { return slope * e; }, world.test[t],
                                 world.config.noise, n_eval, rng);
    mean += est.mean;
    var += est.std_error * est.std_error;
  }
  const auto T = static_cast<double>(world.test.size());
  return {mean / T, std::sqrt(var) / T};
}

double bandwidth_schedule(double c0, std::size_t n, std::size_t train_domains,
                          std::size_t dim) {
  if (!(c0 > 0.0) || n == 0 || train_domains == 0) {
    throw ConfigError("bandwidth schedule needs c0 > 0, n > 0 and N > 0");
  }
  const double nn = static_cast<double>(n) * static_cast<double>(train_domains);
  return c0 * std::pow(nn, -1.0 / (static_cast<double>(dim) + 2.0));
}

std::vector<ScalingRow> scaling_experiment(const ScalingConfig& config) {
  if (config.seeds == 0) throw ConfigError("scaling experiment needs at least one seed");
  if (!std::is_sorted(config.grid.begin(), config.grid.end()) ||
      std::adjacent_find(config.grid.begin(), config.grid.end()) != config.grid.end()) {
    throw ConfigError("grid must be strictly increasing");
  }
  std::vector<ScalingRow> rows;
  for (std::size_t N : config.grid) {
    const double B = bandwidth_schedule(config.c0, config.samples, N, config.dim);
    std::vector<double> per_seed;
    for (std::size_t s = 0; s < config.seeds; ++s) {
      WorldConfig wc;
      wc.train_domains = N;
      wc.dim = config.dim;
      wc.lipschitz = config.lipschitz;
      wc.samples = config.samples;
      wc.noise = config.noise;
      wc.test_domains = config.test_domains;
      wc.seed = config.first_seed + s;
      const World world = sample_world(wc);
      const ThresholdEstimator est{B, fit_heads(world)};
      per_seed.push_back(world_excess_risk(
                             world,
                             [&](const LatentDomain& t) { return est.slope_for(world.train, t.z); },
                             config.n_eval)
                             .mean);
    }
    const auto e = mean_and_error(per_seed);
    rows.push_back({N, config.dim, config.samples, B, e.mean, e.std_error, config.seeds});
  }
  return rows;
}

double select_bandwidth_constant(ScalingConfig config, std::span<const double> candidates,
                                 std::uint64_t heldout_first_seed, std::size_t heldout_seeds) {
  if (candidates.empty()) throw ConfigError("no bandwidth candidates");
  config.first_seed = heldout_first_seed;
  config.seeds = heldout_seeds;
  double best = candidates.front();
  double best_score = std::numeric_limits<double>::infinity();
  for (double c0 : candidates) {
    config.c0 = c0;
    double score = 0.0;
    for (const auto& row : scaling_experiment(config)) score += row.mean_excess_risk;
    if (score < best_score) {
      best_score = score;
      best = c0;
    }
  }
  return best;
}

std::string scaling_csv(std::span<const ScalingRow> rows) {
  std::ostringstream out;
  out << "N_tr,r,n,B,mean_excess_risk,stderr,seeds\n";
  for (const auto& r : rows) {
    out << r.train_domains << ',' << r.dim << ',' << r.samples << ','
        << detail::format_double(r.bandwidth) << ','
        << detail::format_double(r.mean_excess_risk) << ','
        << detail::format_double(r.std_error) << ',' << r.seeds << '\n';
  }
  return out.str();
}

Estimate averaging_oracle(std::size_t n_mc, std::uint64_t seed, bool use_true_head) {
  if (n_mc < 2) throw ConfigError("averaging oracle needs at least 2 samples");
  Rng rng = Rng(seed).split("averaging");
  std::vector<double> sq(n_mc);
  for (auto& v : sq) {
    const double d = rng.uniform();
    const double e = rng.normal();
    const double estimate = use_true_head ? d * e : 0.5 * e;
    const double r = estimate - d * e;
    v = r * r;
  }
  return mean_and_error(sq);
}

}  // namespace d3g::theory
