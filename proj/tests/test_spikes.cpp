#include <gtest/gtest.h>

#include <random>

#include "dcs/model.hpp"
#include "dcs/sensing.hpp"
#include "dcs/solver.hpp"
#include "dcs/spikes.hpp"

using namespace dcs;

namespace {

Series column(std::initializer_list<double> values) {
  Series s;
  for (double v : values) s.push_back(Vector::Constant(1, v));
  return s;
}

// bands of half-width h around every sample
std::pair<Series, Series> bands(const Series& x, double h) {
  Series lo, hi;
  for (const auto& v : x) {
    lo.push_back(v.array() - h);
    hi.push_back(v.array() + h);
  }
  return {lo, hi};
}

SpikeTrain detect(const Series& x, double h, double theta) {
  const auto [lo, hi] = bands(x, h);
  return detect_spikes(x, lo, hi, theta);
}

}  // namespace

TEST(ExtractInnovations, Identities) {
  const auto traj = propagate_states(0.8, make_innovations(10, {2, 1, 3, 1}, InnovationMode::exact_sparse(), {}, 4));
  const Series w = extract_innovations(traj.states, 0.8);
  for (std::size_t t = 0; t < 4; ++t) EXPECT_LE((w[t] - traj.innovations[t]).norm(), 1e-14);

  const Series w0 = extract_innovations(traj.states, 0.0);
  for (std::size_t t = 0; t < 4; ++t) EXPECT_EQ(w0[t], traj.states[t]);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Series x;
  for (int t = 0; t < 5; ++t) x.push_back(Vector::NullaryExpr(3, [&] { return g(rng); }));
  const Series wr = extract_innovations(x, -0.3);
  for (std::size_t t = 0; t < 5; ++t)
    for (Eigen::Index j = 0; j < 3; ++j)
      EXPECT_DOUBLE_EQ(wr[t](j), x[t](j) + (t ? 0.3 * x[t - 1](j) : 0.0));
}

TEST(DetectSpikes, ConstantTraceHasNone) {
  EXPECT_EQ(detect(column({0, 0, 0, 0}), 0.0, 0.9).count(), 0u);
  EXPECT_EQ(detect(column({2, 2, 2, 2}), 0.0, 1.0 - 1e-6).count(), 1u);  // onset from x_0 = 0
  EXPECT_EQ(detect(zero_series(6, 3), 0.1, 0.5).count(), 0u);
}

TEST(DetectSpikes, SingleJumpWithTightBands) {
  // x = 0, 0, 3, 2.7, 2.43, ... ; spike at the jump time 2
  Series x = column({0, 0, 3});
  for (int k = 0; k < 5; ++k) x.push_back(0.9 * x.back());
  const auto train = detect(x, 0.0, 0.9);
  ASSERT_EQ(train.times[0].size(), 1u);
  EXPECT_EQ(train.times[0][0], 2u);
  EXPECT_NEAR(train.amplitudes[0][0], 3.0, 1e-14);
}

TEST(DetectSpikes, BandsGateSmallRises) {
  const Series x = column({0, 1, 0.5, 0.6, 0.2, 2.0, 1.0});
  // tight bands: rises at 1, 3 and 5
  auto train = detect(x, 0.0, 0.5);
  EXPECT_EQ(train.times[0], (std::vector<std::size_t>{1, 3, 5}));
  EXPECT_NEAR(train.amplitudes[0][1], 0.6 - 0.25, 1e-15);
  // half-width 0.2: the 0.5 -> 0.6 rise is inside the bands
  train = detect(x, 0.2, 0.5);
  EXPECT_EQ(train.times[0], (std::vector<std::size_t>{1, 5}));
}

TEST(DetectSpikes, PlateauCountsOnce) {
  const auto train = detect(column({0, 2, 2, 2, 1, 1, 3}), 0.0, 0.5);
  EXPECT_EQ(train.times[0], (std::vector<std::size_t>{1, 6}));
}

TEST(DetectSpikes, MonotoneInBandWidth) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int k = 0; k < 20; ++k) {
    Series x;
    for (int t = 0; t < 60; ++t) x.push_back(Vector::NullaryExpr(4, [&] { return g(rng); }));
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    for (double h : {0.0, 0.1, 0.3, 0.6, 1.0, 2.0}) {
      const std::size_t n = detect(x, h, 0.7).count();
      EXPECT_LE(n, prev);
      prev = n;
    }
  }
}

TEST(DetectSpikes, ExactRecoveryWithZeroWidthBands) {
  // innovations at least two samples apart with w > (1 - theta) x_{t-1}, so every
  // one starts its own rise: x stays below 2.1 / (1 - theta^2) = 2.8
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index p = 15;
    const std::size_t T = 40;
    Series w(T, Vector::Zero(p));
    std::vector<std::vector<std::size_t>> truth(p);
    for (Eigen::Index j = 0; j < p; ++j)
      for (std::size_t t = 0; t < T; ++t)
        if ((truth[j].empty() || t >= truth[j].back() + 2) && u(rng) < 0.15) {
          w[t](j) = 1.1 + u(rng);
          truth[j].push_back(t);
        }
    const auto traj = propagate_states(0.5, w);
    const auto train = detect(traj.states, 0.0, 0.5);
    for (Eigen::Index j = 0; j < p; ++j) {
      ASSERT_EQ(train.times[static_cast<std::size_t>(j)], truth[j]) << "trial " << trial << " coord " << j;
      for (std::size_t k = 0; k < truth[j].size(); ++k)
        EXPECT_NEAR(train.amplitudes[j][k], w[truth[j][k]](j), 1e-12);
    }
  }
}

TEST(DetectSpikes, NoiseRejection) {
  // pure-noise observations of a zero state, deconvolved with the solver's own bands
  const Eigen::Index p = 5;
  const std::size_t T = 200;
  const auto ens = identity_ensemble(p, T);
  SolverConfig cfg;
  cfg.theta_policy = ThetaPolicy::kFixed;
  cfg.theta_init = 0.95;
  cfg.lambda_scale = 0.5;
  int quiet = 0;
  int traces = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Series y = observe(ens, zero_series(T, p), 0.1, seed);
    const auto r = run(ens, y, std::vector<int>(T, 1), 0.1, cfg);
    const auto train = detect_spikes(r.states, confidence_bands(r, 0.9), r.theta);
    for (const auto& times : train.times) {
      quiet += times.size() <= 1 ? 1 : 0;
      ++traces;
    }
  }
  EXPECT_GE(quiet, 0.9 * traces);
}

TEST(DetectSpikes, TimesIncreasingAndAmplitudesNonzero) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  Series x;
  for (int t = 0; t < 100; ++t) x.push_back(Vector::NullaryExpr(5, [&] { return g(rng); }));
  const auto train = detect(x, 0.05, 0.6);
  for (std::size_t j = 0; j < 5; ++j) {
    for (std::size_t k = 1; k < train.times[j].size(); ++k) EXPECT_LT(train.times[j][k - 1], train.times[j][k]);
    for (double a : train.amplitudes[j]) EXPECT_NE(a, 0.0);
  }
  const auto raster = train.raster();
  EXPECT_EQ(raster.size(), train.count());
}

TEST(DetectSpikes, MisalignedBands) {
  const Series x = column({0, 1, 2});
  const Series short_band = column({0, 1});
  EXPECT_THROW(detect_spikes(x, short_band, x, 0.5), ValidationError);
}
