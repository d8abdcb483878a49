#include <gtest/gtest.h>

#include <random>

#include "dcs/basis_pursuit.hpp"
#include "dcs/model.hpp"
#include "dcs/sensing.hpp"

using namespace dcs;

namespace {

// Exhaustive lasso solver: for every support S and sign pattern z on S, solve
// A_S'A_S x = A_S'y - lambda z, keep candidates whose signs agree with z and
// whose off-support correlations stay within lambda; return the one with the
// smallest objective.
Vector enumerate_lasso(const Matrix& A, const Vector& y, double lambda) {
  const int p = static_cast<int>(A.cols());
  Vector best = Vector::Zero(p);
  double best_f = bp_objective(A, y, best, lambda);
  for (int mask = 1; mask < (1 << p); ++mask) {
    std::vector<int> S;
    for (int j = 0; j < p; ++j)
      if (mask >> j & 1) S.push_back(j);
    const int k = static_cast<int>(S.size());
    if (k > A.rows()) continue;
    Matrix As(A.rows(), k);
    for (int i = 0; i < k; ++i) As.col(i) = A.col(S[i]);
    for (int signs = 0; signs < (1 << k); ++signs) {
      Vector z(k);
      for (int i = 0; i < k; ++i) z(i) = (signs >> i & 1) ? -1.0 : 1.0;
      const Vector xs = (As.transpose() * As).ldlt().solve(As.transpose() * y - lambda * z);
      if (((xs.array() * z.array()) <= 0.0).any()) continue;
      Vector x = Vector::Zero(p);
      for (int i = 0; i < k; ++i) x(S[i]) = xs(i);
      if (bp_kkt_residual(A, y, x, lambda) > 1e-9 * lambda) continue;
      const double f = bp_objective(A, y, x, lambda);
      if (f < best_f) {
        best_f = f;
        best = x;
      }
    }
  }
  return best;
}

BPConfig tight() {
  BPConfig c;
  c.tolerance = 1e-15;
  c.kkt_tol = 1e-10;
  c.max_iterations = 200000;
  return c;
}

}  // namespace

TEST(SoftThreshold, Definition) {
  Vector v(5);
  v << 3, -3, 0.5, -0.5, 0;
  Vector e(5);
  e << 2, -2, 0, 0, 0;
  EXPECT_EQ(soft_threshold(v, 1.0), e);
}

TEST(BasisPursuit, ZeroDataGivesZero) {
  const Matrix A = build_ensemble(8, {5}, 1).base();
  const auto r = basis_pursuit_denoise(A, Vector::Zero(5), 0.1);
  EXPECT_EQ(r.x.norm(), 0.0);
  EXPECT_TRUE(r.converged);
}

TEST(BasisPursuit, IdentityIsSoftThreshold) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  const Vector y = Vector::NullaryExpr(10, [&] { return g(rng); });
  const auto r = basis_pursuit_denoise(Matrix::Identity(10, 10), y, 0.4, tight());
  EXPECT_LE((r.x - soft_threshold(y, 0.4)).norm(), 1e-12);
}

TEST(BasisPursuit, MatchesSupportEnumeration) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto ens = build_ensemble(6, {4}, seed);
    const auto truth = make_innovations(6, {2}, InnovationMode::exact_sparse(), {}, seed + 50);
    const Series y = observe(ens, truth, 1e-6, seed + 60);
    const Matrix A = ens.base();
    const double lambda = 0.02;
    const Vector ref = enumerate_lasso(A, y[0], lambda);
    ASSERT_LE(bp_kkt_residual(A, y[0], ref, lambda), 1e-9 * lambda);
    const auto r = basis_pursuit_denoise(A, y[0], lambda, tight());
    EXPECT_LE((r.x - ref).norm() / std::max(ref.norm(), 1e-12), 1e-5) << "seed " << seed;
  }
}

TEST(BasisPursuit, KktAndMonotoneObjective) {
  const auto ens = build_ensemble(40, {20}, 3);
  const auto truth = make_innovations(40, {4}, InnovationMode::exact_sparse(), {}, 4);
  const Series y = observe(ens, truth, 0.01, 5);
  const Matrix A = ens.base();
  const double lambda = 0.05;
  const auto r = basis_pursuit_denoise(A, y[0], lambda);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.kkt_residual, 1e-4 * lambda);

  // the restart rule keeps the objective monotone: more iterations never hurt
  double prev = bp_objective(A, y[0], Vector::Zero(40), lambda);
  for (int k : {1, 2, 5, 10, 50, 200}) {
    BPConfig c;
    c.max_iterations = k;
    const double f = basis_pursuit_denoise(A, y[0], lambda, c).objective;
    EXPECT_LE(f, prev + 1e-14);
    prev = f;
  }
}

TEST(BasisPursuit, BudgetExhaustionIsFlagged) {
  const auto ens = build_ensemble(40, {20}, 3);
  const Series y = observe(ens, make_innovations(40, {4}, InnovationMode::exact_sparse(), {}, 4), 0.01, 5);
  BPConfig c;
  c.max_iterations = 3;
  const auto r = basis_pursuit_denoise(ens.base(), y[0], 1e-3, c);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 3);
  EXPECT_EQ(r.x.size(), 40);
}

TEST(BasisPursuit, RejectsBadInput) {
  const Matrix A = Matrix::Identity(3, 3);
  EXPECT_THROW(basis_pursuit_denoise(A, Vector::Zero(3), 0.0), ValidationError);
  EXPECT_THROW(basis_pursuit_denoise(A, Vector::Zero(2), 1.0), ValidationError);
  BPConfig c;
  c.tolerance = 0.0;
  EXPECT_THROW(basis_pursuit_denoise(A, Vector::Zero(3), 1.0, c), ValidationError);
}

TEST(BpSequence, StepsAreIndependent) {
  const auto ens = build_ensemble(12, {8, 5, 6}, 9);
  const auto traj = propagate_states(0.9, make_innovations(12, {2, 1, 1}, InnovationMode::exact_sparse(), {}, 3));
  const Series y = observe(ens, traj.states, 0.01, 4);
  const std::vector<double> lam{0.05, 0.04, 0.03};
  const auto seq = bp_sequence(ens, y, lam);
  for (std::size_t t = 0; t < 3; ++t) {
    const auto single = basis_pursuit_denoise(ens.matrix(t), y[t], lam[t]);
    EXPECT_EQ(seq.states[t], single.x);
  }
  EXPECT_TRUE(seq.all_converged());

  const auto one = bp_sequence(MeasurementEnsemble(ens.base(), {8}), Series{y[0]}, {0.05});
  EXPECT_EQ(one.states[0], seq.states[0]);
}

TEST(BpSequence, IdentityNoiselessThresholdsObservations) {
  const auto ens = identity_ensemble(6, 3);
  const auto traj = propagate_states(0.5, make_innovations(6, {2, 2, 2}, InnovationMode::exact_sparse(), {}, 1));
  const Series y = observe(ens, traj.states, 0.0, 1);
  BPConfig c = tight();
  const auto seq = bp_sequence(ens, y, {0.1, 0.1, 0.1}, c);
  for (std::size_t t = 0; t < 3; ++t) EXPECT_LE((seq.states[t] - soft_threshold(y[t], 0.1)).norm(), 1e-12);
}

TEST(BpLambdas, MatchedToDefaultRule) {
  const auto ens = build_ensemble(50, {20, 10}, 2);
  const auto lam = bp_lambdas(ens, {4, 2}, 0.2, 0.5);
  for (std::size_t t = 0; t < 2; ++t) {
    const double n = ens.rows(t);
    const double s = t ? 2.0 : 4.0;
    const double rule = 0.5 * 2.0 * std::sqrt(2.0) * std::sqrt(0.2) * std::sqrt(s / n * std::log(50.0));
    EXPECT_NEAR(lam[t], rule * n * 0.2 / std::sqrt(s), 1e-14);
  }
  EXPECT_THROW(bp_lambdas(ens, {4}, 0.2), ValidationError);
}
