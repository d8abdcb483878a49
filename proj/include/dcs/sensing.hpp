#ifndef DCS_SENSING_HPP
#define DCS_SENSING_HPP

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "dcs/core.hpp"
#include "dcs/ensemble.hpp"
#include "dcs/model.hpp"

namespace dcs {

/// i.i.d. N(0, 1/n_1) base matrix, so columns have unit expected norm.
inline MeasurementEnsemble build_ensemble(Eigen::Index p, const std::vector<int>& row_counts,
                                          std::uint64_t seed) {
  require(p > 0, "state dimension must be positive");
  require(!row_counts.empty(), "row_counts must be non-empty");
  const int n1 = row_counts.front();
  require(n1 > 0, "row counts must be positive");
  for (int n : row_counts) require(n <= n1, "row count n_t exceeds n_1");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(n1)));
  Matrix base(n1, p);
  // fill row-major so that prefixes of the random stream define prefixes of rows
  for (int i = 0; i < n1; ++i)
    for (Eigen::Index j = 0; j < p; ++j) base(i, j) = gauss(rng);
  return MeasurementEnsemble(std::move(base), row_counts, seed);
}

/// A_t = I for every t (pure denoising).
inline MeasurementEnsemble identity_ensemble(Eigen::Index p, std::size_t T) {
  return MeasurementEnsemble(Matrix::Identity(p, p),
                             std::vector<int>(T, static_cast<int>(p)), 0);
}

struct RowCountPlan {
  std::vector<int> rows;
  double C = 0.0;  // n_t = ceil(C s_t log p)
};

/// Row counts n_t = ceil(C s_t log p), with C chosen so that the most common
/// sparsity level maps to exactly (1 - compression) * p rows. n_1 is raised to
/// the maximum so the ensemble stays nested.
inline RowCountPlan row_counts_for_compression(Eigen::Index p, const std::vector<int>& schedule,
                                               double compression) {
  require(p > 1, "need p > 1 for the log p rule");
  require(!schedule.empty(), "schedule must be non-empty");
  require(compression >= 0.0 && compression < 1.0, "compression must lie in [0, 1)");
  std::map<int, int> freq;
  for (int s : schedule) {
    require(s >= 1, "s_t must be >= 1");
    ++freq[s];
  }
  int s_ref = freq.begin()->first;
  int best = 0;
  for (auto [s, c] : freq)
    if (c > best) best = c, s_ref = s;

  const double logp = std::log(static_cast<double>(p));
  RowCountPlan plan;
  plan.C = (1.0 - compression) * static_cast<double>(p) / (s_ref * logp);
  for (int s : schedule) {
    const int n = static_cast<int>(std::ceil(plan.C * s * logp - 1e-9));
    plan.rows.push_back(std::max({n, s, 1}));
  }
  plan.rows.front() = *std::max_element(plan.rows.begin(), plan.rows.end());
  return plan;
}

/// y_t = A_t x_t + v_t with v_t ~ N(0, sigma2 I).
inline Series observe(const MeasurementEnsemble& ens, const Series& states, double sigma2,
                      std::uint64_t seed) {
  require(sigma2 >= 0.0, "sigma2 must be non-negative");
  require(states.size() == ens.steps(), "trajectory length differs from ensemble");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sd = std::sqrt(sigma2);
  Series y;
  y.reserve(states.size());
  for (std::size_t t = 0; t < states.size(); ++t) {
    require(states[t].size() == ens.dim(), "state dimension differs from ensemble");
    Vector yt = ens.matrix(t) * states[t];
    for (Eigen::Index i = 0; i < yt.size(); ++i) yt(i) += sd * gauss(rng);
    y.push_back(std::move(yt));
  }
  return y;
}

inline double signal_energy(const MeasurementEnsemble& ens, const Series& states) {
  double e = 0.0;
  for (std::size_t t = 0; t < states.size(); ++t) e += (ens.matrix(t) * states[t]).squaredNorm();
  return e;
}

/// Rescales a trajectory so that 10 log10(sum ||A_t x_t||^2 / (sigma2 sum n_t)) = snr_db.
inline StateTrajectory scale_to_snr(const MeasurementEnsemble& ens, StateTrajectory traj,
                                    double sigma2, double snr_db) {
  require(sigma2 > 0.0, "sigma2 must be positive");
  const double e = signal_energy(ens, traj.states);
  require(e > 0.0, "cannot scale a zero trajectory to a target SNR");
  const double target = std::pow(10.0, snr_db / 10.0) * sigma2 * static_cast<double>(ens.total_rows());
  const double c = std::sqrt(target / e);
  for (auto& x : traj.states) x *= c;
  for (auto& w : traj.innovations) w *= c;
  return traj;
}

inline double empirical_snr_db(const MeasurementEnsemble& ens, const Series& states,
                               const Series& y) {
  double noise = 0.0;
  for (std::size_t t = 0; t < states.size(); ++t)
    noise += (y[t] - ens.matrix(t) * states[t]).squaredNorm();
  return 10.0 * std::log10(signal_energy(ens, states) / noise);
}

/// Smallest eps such that the truth is feasible for the constrained problem:
/// max_t sqrt(n_1/n_t) ||y_t - A_t x_t||.
inline double feasibility_noise_level(const MeasurementEnsemble& ens, const Series& states,
                                      const Series& y) {
  double eps = 0.0;
  for (std::size_t t = 0; t < states.size(); ++t) {
    const double r = (y[t] - ens.matrix(t) * states[t]).norm();
    eps = std::max(eps, std::sqrt(static_cast<double>(ens.max_rows()) / ens.rows(t)) * r);
  }
  return eps;
}

inline double binomial(Eigen::Index n, Eigen::Index k) {
  double c = 1.0;
  for (Eigen::Index i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return c;
}

/// Exact restricted isometry constant by enumerating every s-column
/// submatrix. Refuses when C(p, s) exceeds `budget`.
inline double rip_constant(const Matrix& a, Eigen::Index s, double budget = 1e5) {
  const Eigen::Index p = a.cols();
  require(s >= 1 && s <= p, "s out of range");
  if (binomial(p, s) > budget)
    throw BudgetError("rip_constant: C(p, s) exceeds the enumeration budget");

  const Matrix gram = a.transpose() * a;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(s));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Matrix sub(s, s);
  Eigen::SelfAdjointEigenSolver<Matrix> eig;
  double delta = 0.0;
  while (true) {
    for (Eigen::Index i = 0; i < s; ++i)
      for (Eigen::Index j = 0; j < s; ++j) sub(i, j) = gram(idx[i], idx[j]);
    eig.compute(sub, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    delta = std::max({delta, ev(s - 1) - 1.0, 1.0 - ev(0)});

    Eigen::Index k = s - 1;
    while (k >= 0 && idx[k] == p - s + k) --k;
    if (k < 0) break;
    ++idx[k];
    for (Eigen::Index i = k + 1; i < s; ++i) idx[i] = idx[i - 1] + 1;
  }
  return delta;
}

/// Certified upper bound on the RIP constant from Gershgorin discs of the
/// Gram matrix: max_i |G_ii - 1| + (sum of the s-1 largest |G_ik|, k != i).
/// Cost O(p^2 log p), so usable where enumeration is not.
inline double rip_upper_bound(const Matrix& a, Eigen::Index s) {
  const Eigen::Index p = a.cols();
  require(s >= 1 && s <= p, "s out of range");
  const Matrix gram = a.transpose() * a;
  std::vector<double> off;
  double bound = 0.0;
  for (Eigen::Index i = 0; i < p; ++i) {
    off.clear();
    for (Eigen::Index k = 0; k < p; ++k)
      if (k != i) off.push_back(std::abs(gram(i, k)));
    std::partial_sort(off.begin(), off.begin() + (s - 1), off.end(), std::greater<>());
    double r = std::abs(gram(i, i) - 1.0);
    for (Eigen::Index k = 0; k < s - 1; ++k) r += off[k];
    bound = std::max(bound, r);
  }
  return bound;
}

}  // namespace dcs

#endif  // DCS_SENSING_HPP
