#ifndef DCS_MODEL_HPP
#define DCS_MODEL_HPP

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "dcs/core.hpp"
#include "dcs/ensemble.hpp"

namespace dcs {

/// Parameters of the compressible AR(1) state-space model
///   x_t = theta x_{t-1} + w_t,   y_t = A_t x_t + v_t,   v_t ~ N(0, sigma2 I)
/// with x_0 = 0.
struct ModelParams {
  double theta = 0.95;
  double sigma2 = 1.0;
  double lambda = 1.0;
  double eps_smooth = 1e-10;
  std::vector<int> sparsity_schedule;  // s_t
  Eigen::Index p = 0;
  std::vector<int> row_counts;  // n_t

  std::size_t steps() const { return sparsity_schedule.size(); }

  void validate() const {
    require(std::abs(theta) < 1.0, "|theta| must be < 1");
    require(sigma2 > 0.0, "sigma2 must be positive");
    require(lambda >= 0.0, "lambda must be non-negative");
    require(eps_smooth > 0.0, "eps_smooth must be positive");
    require(p > 0, "state dimension must be positive");
    require(!sparsity_schedule.empty(), "sparsity schedule must be non-empty");
    require(row_counts.size() == sparsity_schedule.size(),
            "row_counts and sparsity schedule lengths differ");
    for (std::size_t t = 0; t < sparsity_schedule.size(); ++t) {
      require(sparsity_schedule[t] >= 1, "s_t must be >= 1");
      require(sparsity_schedule[t] <= row_counts[t], "s_t must not exceed n_t");
    }
  }
};

struct StateTrajectory {
  Series states;
  Series innovations;

  std::size_t steps() const { return states.size(); }
  Eigen::Index dim() const { return states.empty() ? 0 : states.front().size(); }
};

struct AmplitudeSpec {
  double low = 0.5;
  double high = 2.0;
  bool random_sign = false;
  double scale = 1.0;
};

struct InnovationMode {
  enum class Kind { kExactSparse, kCompressible };
  Kind kind = Kind::kExactSparse;
  double xi = 0.5;

  static InnovationMode exact_sparse() { return {}; }
  static InnovationMode compressible(double xi) { return {Kind::kCompressible, xi}; }
};

/// Draws w_1..w_T. Exact-sparse mode places s_t nonzeros on a uniformly random
/// support with magnitudes U(low, high). Compressible mode uses magnitudes
/// proportional to k^{-1/xi}, randomly signed and permuted, normalized to unit
/// l2 norm and multiplied by `amp.scale`.
inline Series make_innovations(Eigen::Index p, const std::vector<int>& schedule,
                               const InnovationMode& mode, const AmplitudeSpec& amp,
                               std::uint64_t seed) {
  require(p > 0, "state dimension must be positive");
  if (mode.kind == InnovationMode::Kind::kCompressible)
    require(mode.xi > 0.0 && mode.xi < 1.0, "xi must lie in (0, 1)");
  require(amp.low <= amp.high && amp.low >= 0.0, "invalid amplitude range");
  for (int s : schedule) {
    require(s >= 0, "sparsity must be non-negative");
    require(s <= p, "sparsity s_t exceeds dimension p");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> magnitude(amp.low, amp.high);
  std::bernoulli_distribution coin(0.5);
  std::vector<Eigen::Index> index(static_cast<std::size_t>(p));

  Series w;
  w.reserve(schedule.size());
  for (int s : schedule) {
    Vector wt = Vector::Zero(p);
    std::iota(index.begin(), index.end(), Eigen::Index{0});
    if (mode.kind == InnovationMode::Kind::kExactSparse) {
      // partial Fisher-Yates: the first s slots become the support
      for (int k = 0; k < s; ++k) {
        std::uniform_int_distribution<Eigen::Index> pick(k, p - 1);
        std::swap(index[k], index[pick(rng)]);
      }
      for (int k = 0; k < s; ++k) {
        double a = amp.scale * magnitude(rng);
        if (amp.random_sign && coin(rng)) a = -a;
        wt(index[k]) = a;
      }
    } else if (s > 0) {
      std::shuffle(index.begin(), index.end(), rng);
      for (Eigen::Index k = 0; k < p; ++k) {
        double a = std::pow(static_cast<double>(k + 1), -1.0 / mode.xi);
        if (coin(rng)) a = -a;
        wt(index[k]) = a;
      }
      wt *= amp.scale / wt.norm();
    }
    w.push_back(std::move(wt));
  }
  return w;
}

/// Runs the recursion x_t = theta x_{t-1} + w_t from x_0 = 0.
inline StateTrajectory propagate_states(double theta, Series innovations) {
  require(std::abs(theta) < 1.0, "|theta| must be < 1");
  StateTrajectory traj;
  traj.states.reserve(innovations.size());
  for (std::size_t t = 0; t < innovations.size(); ++t) {
    if (t == 0)
      traj.states.push_back(innovations[0]);
    else
      traj.states.push_back(theta * traj.states[t - 1] + innovations[t]);
  }
  traj.innovations = std::move(innovations);
  return traj;
}

/// x_t - theta x_{t-1} for t = 1..T, with x_0 = 0.
inline Series innovations_of(const Series& states, double theta) {
  Series w;
  w.reserve(states.size());
  for (std::size_t t = 0; t < states.size(); ++t)
    w.push_back(t == 0 ? states[0] : Vector(states[t] - theta * states[t - 1]));
  return w;
}

struct BestSTerm {
  std::vector<Eigen::Index> support;  // ascending
  Vector approximant;
  double sigma = 0.0;  // l1 norm of the remainder
};

/// Best s-term approximation in the l1 sense; ties in magnitude go to the
/// lower index.
inline BestSTerm best_s_term(const Vector& v, Eigen::Index s) {
  require(s >= 0 && s <= v.size(), "s out of range");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(v.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(v(a)) > std::abs(v(b));
  });
  BestSTerm out;
  out.approximant = Vector::Zero(v.size());
  out.support.assign(order.begin(), order.begin() + s);
  std::sort(out.support.begin(), out.support.end());
  for (Eigen::Index k = 0; k < s; ++k) out.approximant(order[k]) = v(order[k]);
  for (Eigen::Index k = s; k < v.size(); ++k) out.sigma += std::abs(v(order[k]));
  return out;
}

struct CompressibilityReport {
  std::vector<double> sigma;  // sigma_{s_t}(x_t - theta x_{t-1})
  std::vector<std::vector<Eigen::Index>> supports;
};

inline CompressibilityReport compressibility(const Series& states, double theta,
                                             const std::vector<int>& schedule) {
  require(states.size() == schedule.size(), "schedule length does not match states");
  CompressibilityReport rep;
  const Series w = innovations_of(states, theta);
  for (std::size_t t = 0; t < w.size(); ++t) {
    BestSTerm b = best_s_term(w[t], schedule[t]);
    rep.sigma.push_back(b.sigma);
    rep.supports.push_back(std::move(b.support));
  }
  return rep;
}

/// Per-time terms of the Lagrangian objective
///   lambda ||x_t - theta x_{t-1}||_1 / sqrt(s_t) + ||y_t - A_t x_t||^2 / (2 sigma2 n_t).
inline std::vector<double> dual_objective_terms(const Series& states, double theta,
                                                const MeasurementEnsemble& ens, const Series& y,
                                                const ModelParams& params) {
  const std::size_t T = states.size();
  require(T == ens.steps() && T == params.steps(), "time dimensions differ");
  check_observations(ens, y);
  std::vector<double> terms(T);
  for (std::size_t t = 0; t < T; ++t) {
    require(states[t].size() == ens.dim(), "state dimension differs from ensemble");
    const Vector d = t == 0 ? states[0] : Vector(states[t] - theta * states[t - 1]);
    const double n = ens.rows(t);
    const double penalty = params.lambda * d.lpNorm<1>() / std::sqrt(params.sparsity_schedule[t]);
    const double misfit = (y[t] - ens.matrix(t) * states[t]).squaredNorm() / (2.0 * params.sigma2 * n);
    terms[t] = penalty + misfit;
  }
  return terms;
}

inline double dual_objective(const Series& states, double theta, const MeasurementEnsemble& ens,
                             const Series& y, const ModelParams& params) {
  const auto terms = dual_objective_terms(states, theta, ens, y, params);
  return std::accumulate(terms.begin(), terms.end(), 0.0);
}

/// Right-hand side of the stable-recovery guarantee for a fixed, known theta:
///   (1 - theta^T)/(1 - theta) * (12.6 (1 + (sqrt n1 - sqrt n2)/(T sqrt n2)) eps
///                                + (3/T) sum_t sigma_{s_t} / sqrt(s_t)).
inline double theorem_bound(double theta, std::size_t T, double n1, double n2, double eps_noise,
                            const std::vector<double>& sigma_terms,
                            const std::vector<int>& schedule) {
  require(std::abs(theta) < 1.0, "|theta| must be < 1");
  require(T >= 1, "T must be positive");
  require(n1 >= n2 && n2 >= 1.0, "need n1 >= n2 >= 1");
  require(eps_noise >= 0.0, "noise level must be non-negative");
  require(sigma_terms.size() == T && schedule.size() == T, "per-time inputs must have length T");
  const double Td = static_cast<double>(T);
  const double prefactor = (1.0 - std::pow(theta, Td)) / (1.0 - theta);
  const double noise = 12.6 * (1.0 + (std::sqrt(n1) - std::sqrt(n2)) / (Td * std::sqrt(n2))) * eps_noise;
  double tail = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    require(schedule[t] >= 1, "s_t must be >= 1");
    tail += sigma_terms[t] / std::sqrt(static_cast<double>(schedule[t]));
  }
  return prefactor * (noise + 3.0 / Td * tail);
}

}  // namespace dcs

#endif  // DCS_MODEL_HPP
