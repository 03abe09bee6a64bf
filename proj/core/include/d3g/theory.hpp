#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "d3g/rng.hpp"

namespace d3g::theory {

/// Domain with latent representation z in [0,1]^r and true head
/// h(e) = slope * e, slope = G * sum(z) / sqrt(r). For r = 1 this is the
/// h^(d)(e) = d * e family of the averaging lower bound.
struct LatentDomain {
  std::vector<double> z;
  double slope = 0.0;
};

struct DomainSample {
  std::vector<double> e;
  std::vector<double> y;
};

struct WorldConfig {
  std::size_t train_domains = 8;
  std::size_t dim = 2;  // r
  double lipschitz = 1.0;  // G
  std::size_t samples = 50;  // n per training domain
  double noise = 0.1;  // sigma
  std::size_t test_domains = 1;
  std::uint64_t seed = 0;
};

struct World {
  WorldConfig config;
  std::vector<LatentDomain> train;
  std::vector<LatentDomain> test;
  std::vector<DomainSample> data;  // one per training domain
};

double true_slope(std::span<const double> z, double lipschitz);

/// Domain k's latent and data come from stream (seed, k), so worlds that
/// differ only in train_domains share their first domains.
World sample_world(const WorldConfig& config);

/// Checks |h_i - h_j|_inf <= G ||z_i - z_j|| on `pairs` random domain pairs
/// and `probes` evenly spaced inputs in [-1, 1].
bool lipschitz_certificate(const World& world, std::size_t pairs,
                           std::size_t probes, std::uint64_t seed);

/// Least-squares slope through the origin per training domain. Throws
/// NumericalError for a singular design (all e == 0).
std::vector<double> fit_heads(const World& world);

struct ThresholdEstimator {
  double bandwidth = 1.0;  // B
  std::vector<double> fitted;  // slopes, one per training domain

  /// Mean fitted slope over domains with ||z_i - z_t|| < B; 0 if none.
  double slope_for(std::span<const LatentDomain> train,
                   std::span<const double> z_test) const;
};

double threshold_predict(const ThresholdEstimator& est,
                         std::span<const LatentDomain> train,
                         std::span<const double> z_test, double e);

/// Mean of all fitted heads.
double uniform_slope(std::span<const double> fitted);

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo E|f_hat(e) - y| - E|h(e) - y| with e ~ U[-1,1],
/// y = h(e) + sigma * N(0,1), using the same draws for both terms.
Estimate excess_risk(const std::function<double(double)>& predict,
                     const LatentDomain& test, double noise, std::size_t n_eval,
                     Rng& rng);

/// B = c0 * (n * N)^(-1/(r+2)).
double bandwidth_schedule(double c0, std::size_t n, std::size_t train_domains,
                          std::size_t dim);

struct ScalingConfig {
  std::size_t dim = 2;
  double lipschitz = 1.0;
  std::size_t samples = 50;
  double noise = 0.1;
  std::vector<std::size_t> grid = {8, 16, 32, 64};
  std::size_t seeds = 20;
  /// Unseen test domains per world; a seed's risk is their average.
  std::size_t test_domains = 10;
  std::uint64_t first_seed = 0;
  double c0 = 2.0;
  std::size_t n_eval = 10000;
};

struct ScalingRow {
  std::size_t train_domains = 0;
  std::size_t dim = 0;
  std::size_t samples = 0;
  double bandwidth = 0.0;
  double mean_excess_risk = 0.0;
  double std_error = 0.0;
  std::size_t seeds = 0;

  bool operator==(const ScalingRow&) const = default;
};

/// Threshold estimator with B from bandwidth_schedule, one row per grid entry.
/// Evaluation draws depend on (seed, test domain) only, so rows share them.
std::vector<ScalingRow> scaling_experiment(const ScalingConfig& config);

/// Excess risk of the linear predictor slope_for(test) * e, averaged over
/// the world's test domains. Test domain t draws from stream (seed, "eval", t).
Estimate world_excess_risk(const World& world,
                           const std::function<double(const LatentDomain&)>& slope_for,
                           std::size_t n_eval);

/// Picks c0 from candidates by the smallest excess risk summed over the
/// grid, using seeds disjoint from the main experiment.
double select_bandwidth_constant(ScalingConfig config,
                                 std::span<const double> candidates,
                                 std::uint64_t heldout_first_seed,
                                 std::size_t heldout_seeds);

/// "N_tr,r,n,B,mean_excess_risk,stderr,seeds" table.
std::string scaling_csv(std::span<const ScalingRow> rows);

/// d ~ U[0,1], e ~ N(0,1), h^(d)(e) = d e, averaged head e/2.
/// Estimates E[(h_avg - h^(d))^2]; population value 1/12.
/// With use_true_head the estimator is h^(d) itself and the error is 0.
Estimate averaging_oracle(std::size_t n_mc, std::uint64_t seed,
                          bool use_true_head = false);

inline constexpr double kAveragingOracleTarget = 1.0 / 12.0;

}  // namespace d3g::theory
