#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "d3g/errors.hpp"
#include "d3g/gradcheck.hpp"
#include "d3g/loss.hpp"
#include "d3g/mlp.hpp"
#include "d3g/optim.hpp"
#include "d3g/rng.hpp"
#include "oracles.hpp"

namespace d3g {
namespace {

DenseParams single_layer(Activation act) {
  DenseParams p;
  p.layers.emplace_back(2, 2, act);
  p.layers[0].w(0, 0) = 1.0;
  p.layers[0].w(1, 1) = 1.0;
  return p;
}

DenseParams random_net(std::uint64_t seed, Activation hidden = Activation::kTanh) {
  Rng rng = Rng(seed).split("net");
  const std::size_t dims[] = {3, 5, 2};
  const Activation acts[] = {hidden, Activation::kIdentity};
  return make_dense(dims, acts, rng);
}

std::vector<double> random_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

TEST(Forward, IdentityLayer) {
  const std::vector<double> x{1.0, 2.0};
  EXPECT_EQ(forward(single_layer(Activation::kIdentity), x), (std::vector<double>{1.0, 2.0}));
}

TEST(Forward, ReluLayer) {
  const std::vector<double> x{-1.0, 2.0};
  EXPECT_EQ(forward(single_layer(Activation::kRelu), x), (std::vector<double>{0.0, 2.0}));
}

TEST(Forward, MatchesStraightLineEvaluation) {
  Rng rng(7);
  for (std::uint64_t s = 0; s < 20; ++s) {
    for (Activation a : {Activation::kRelu, Activation::kTanh}) {
      const auto net = random_net(s, a);
      const auto x = random_vector(rng, 3);
      const auto got = forward(net, x);
      const auto want = oracle::forward(net, x);
      ASSERT_EQ(got.size(), want.size());
      for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got[k], want[k], 1e-14);
    }
  }
}

TEST(Forward, RejectsWrongInputWidth) {
  const std::vector<double> x{1.0, 2.0, 3.0};
  EXPECT_THROW(forward(single_layer(Activation::kIdentity), x), ConfigError);
}

TEST(Backward, LinearLayer) {
  DenseParams p;
  p.layers.emplace_back(3, 2, Activation::kIdentity);
  p.layers[0].weight = {1, 2, 3, 4, 5, 6};
  const std::vector<double> x{0.5, -1.0, 2.0};
  const std::vector<double> g{1.5, -2.0};
  Tape tape;
  forward(p, x, &tape);
  const auto r = backward(p, tape, g);
  for (std::size_t o = 0; o < 2; ++o) {
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_DOUBLE_EQ(r.grad_params.layers[0].w(o, i), g[o] * x[i]);
    }
    EXPECT_DOUBLE_EQ(r.grad_params.layers[0].bias[o], g[o]);
  }
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(r.grad_input[i], p.layers[0].w(0, i) * g[0] + p.layers[0].w(1, i) * g[1]);
  }
}

TEST(Backward, ZeroGradOutputGivesZeroGradients) {
  const auto net = random_net(3);
  Tape tape;
  const std::vector<double> x{0.1, 0.2, 0.3};
  forward(net, x, &tape);
  const auto r = backward(net, tape, std::vector<double>{0.0, 0.0});
  for (const auto& b : r.grad_params.blocks()) {
    for (double v : b) EXPECT_EQ(v, 0.0);
  }
  for (double v : r.grad_input) EXPECT_EQ(v, 0.0);
}

TEST(Backward, MatchesFiniteDifferences) {
  Rng rng(11);
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto net = random_net(s);
    const auto x = random_vector(rng, 3);
    const auto g = random_vector(rng, 2);
    Tape tape;
    forward(net, x, &tape);
    auto r = backward(net, tape, g);
    const auto fn = [&] {
      const auto y = forward(net, x);
      return y[0] * g[0] + y[1] * g[1];
    };
    EXPECT_LT(grad_check(fn, net.blocks(), r.grad_params.blocks()).max_relative_error, 1e-5);

    auto xin = x;
    const auto fx = [&] {
      const auto y = forward(net, xin);
      return y[0] * g[0] + y[1] * g[1];
    };
    const std::span<double> xs[] = {xin};
    const std::span<double> gs[] = {r.grad_input};
    EXPECT_LT(grad_check(fx, xs, gs).max_relative_error, 1e-5);
  }
}

TEST(Backward, RejectsStaleTape) {
  const auto net = random_net(1);
  Tape tape;
  forward(single_layer(Activation::kIdentity), std::vector<double>{1.0, 2.0}, &tape);
  EXPECT_THROW(backward(net, tape, std::vector<double>{1.0, 1.0}), ConfigError);
}

TEST(LossMse, Examples) {
  const std::vector<double> a{1.0, 2.0};
  EXPECT_EQ(loss_mse(a, a).loss, 0.0);
  EXPECT_DOUBLE_EQ(loss_mse(std::vector<double>{1.0}, std::vector<double>{3.0}).loss, 4.0);
  EXPECT_THROW(loss_mse(a, std::vector<double>{1.0}), ConfigError);
}

TEST(LossMse, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    auto pred = random_vector(rng, 4);
    const auto target = random_vector(rng, 4);
    auto lg = loss_mse(pred, target);
    EXPECT_NEAR(lg.loss, [&] {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += (pred[k] - target[k]) * (pred[k] - target[k]);
      return s / 4.0;
    }(), 1e-14);
    const std::span<double> p[] = {pred};
    const std::span<double> g[] = {lg.grad};
    EXPECT_LT(grad_check([&] { return loss_mse(pred, target).loss; }, p, g).max_relative_error,
              1e-5);
  }
}

TEST(LossCe, Examples) {
  EXPECT_NEAR(loss_ce(std::vector<double>{0.0, 0.0}, 0).loss, std::log(2.0), 1e-15);
  const auto big = loss_ce(std::vector<double>{1000.0, 0.0}, 0);
  EXPECT_TRUE(std::isfinite(big.loss));
  EXPECT_NEAR(big.loss, 0.0, 1e-12);
  EXPECT_TRUE(std::isfinite(big.grad[0]) && std::isfinite(big.grad[1]));
  EXPECT_THROW(loss_ce(std::vector<double>{0.0, 0.0}, 2), ConfigError);
}

TEST(LossCe, GradientSumsToZeroAndMatchesFiniteDifferences) {
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    auto logits = random_vector(rng, 5);
    const std::size_t label = rng.below(5);
    auto lg = loss_ce(logits, label);
    EXPECT_NEAR(lg.loss, oracle::cross_entropy(logits, label), 1e-12);
    EXPECT_NEAR(std::accumulate(lg.grad.begin(), lg.grad.end(), 0.0), 0.0, 1e-15);
    const std::span<double> p[] = {logits};
    const std::span<double> g[] = {lg.grad};
    EXPECT_LT(grad_check([&] { return loss_ce(logits, label).loss; }, p, g).max_relative_error,
              1e-5);
  }
}

TEST(Softmax, SumsToOne) {
  Rng rng(13);
  for (int t = 0; t < 200; ++t) {
    auto logits = random_vector(rng, 1 + rng.below(10));
    for (double& l : logits) l *= 50.0;
    const auto p = softmax(logits);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(Adam, ZeroGradientKeepsParams) {
  std::vector<double> theta{1.0, -2.0};
  std::vector<double> grad{0.0, 0.0};
  const std::span<double> p[] = {theta};
  const std::span<double> g[] = {grad};
  AdamState state;
  adam_step(p, g, state, {.learning_rate = 0.1, .weight_decay = 0.0});
  EXPECT_EQ(theta, (std::vector<double>{1.0, -2.0}));
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, DescendsOnSquare) {
  std::vector<double> theta{1.0};
  std::vector<double> grad{2.0 * theta[0]};
  const std::span<double> p[] = {theta};
  const std::span<double> g[] = {grad};
  AdamState state;
  adam_step(p, g, state, {.learning_rate = 0.1});
  EXPECT_LT(theta[0], 1.0);
}

TEST(Adam, ReachesQuadraticOptimum) {
  // f = sum_k c_k (theta_k - t_k)^2, minimum 0 at t.
  const std::vector<double> c{1.0, 3.0, 0.5};
  const std::vector<double> t{0.7, -0.4, 0.2};
  std::vector<double> theta{0.0, 0.0, 0.0};
  std::vector<double> grad(3);
  const std::span<double> p[] = {theta};
  const std::span<double> g[] = {grad};
  AdamState state;
  const auto f = [&] {
    double s = 0.0;
    for (std::size_t k = 0; k < 3; ++k) s += c[k] * (theta[k] - t[k]) * (theta[k] - t[k]);
    return s;
  };
  for (int step = 0; step < 200; ++step) {
    for (std::size_t k = 0; k < 3; ++k) grad[k] = 2.0 * c[k] * (theta[k] - t[k]);
    adam_step(p, g, state, {.learning_rate = 0.05});
  }
  EXPECT_LT(f(), 1e-4);
  EXPECT_EQ(state.step, 200);
}

TEST(Adam, DecoupledWeightDecay) {
  std::vector<double> theta{2.0};
  std::vector<double> grad{0.0};
  const std::span<double> p[] = {theta};
  const std::span<double> g[] = {grad};
  AdamState state;
  adam_step(p, g, state, {.learning_rate = 0.1, .weight_decay = 0.5});
  EXPECT_DOUBLE_EQ(theta[0], 2.0 - 0.1 * 0.5 * 2.0);
}

TEST(Adam, RejectsNonFiniteGradientsAndLeavesParams) {
  std::vector<double> theta{1.0, 2.0};
  std::vector<double> grad{0.5, std::nan("")};
  const std::span<double> p[] = {theta};
  const std::span<double> g[] = {grad};
  AdamState state;
  EXPECT_THROW(adam_step(p, g, state, {}), NumericalError);
  EXPECT_EQ(theta, (std::vector<double>{1.0, 2.0}));
}

TEST(Adam, RejectsShapeMismatch) {
  std::vector<double> theta{1.0, 2.0};
  std::vector<double> grad{0.5};
  const std::span<double> p[] = {theta};
  const std::span<double> g[] = {grad};
  AdamState state;
  EXPECT_THROW(adam_step(p, g, state, {}), ConfigError);
}

TEST(GradCheck, ConstantFunction) {
  std::vector<double> theta{1.0, 2.0, 3.0};
  std::vector<double> zeros(3, 0.0);
  const std::span<double> p[] = {theta};
  const std::span<double> g[] = {zeros};
  EXPECT_EQ(grad_check([] { return 4.0; }, p, g).max_relative_error, 0.0);
}

TEST(GradCheck, SumOfParams) {
  std::vector<double> a{1.0, -2.0};
  std::vector<double> b{0.5};
  std::vector<double> ones_a(2, 1.0), ones_b(1, 1.0);
  const std::span<double> p[] = {a, b};
  const std::span<double> g[] = {ones_a, ones_b};
  const auto r = grad_check([&] { return a[0] + a[1] + b[0]; }, p, g);
  EXPECT_LT(r.max_relative_error, 1e-9);
  EXPECT_EQ(r.coordinates, 3u);
  EXPECT_EQ(a, (std::vector<double>{1.0, -2.0}));
}

TEST(GradCheck, DetectsWrongGradient) {
  std::vector<double> a{1.0};
  std::vector<double> wrong{3.0};
  const std::span<double> p[] = {a};
  const std::span<double> g[] = {wrong};
  EXPECT_GT(grad_check([&] { return a[0] * a[0]; }, p, g).max_relative_error, 0.1);
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  Rng a = Rng(42).split("data").split(3);
  Rng b = Rng(42).split("data").split(3);
  Rng c = Rng(42).split("data").split(4);
  for (int k = 0; k < 100; ++k) {
    const auto va = a.next_u64();
    EXPECT_EQ(va, b.next_u64());
    EXPECT_NE(va, c.next_u64());
  }
}

TEST(Rng, UniformAndNormalMoments) {
  Rng rng(1);
  double su = 0.0, sn = 0.0, sn2 = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.02);
}

}  // namespace
}  // namespace d3g
