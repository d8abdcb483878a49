#ifndef DCS_BASIS_PURSUIT_HPP
#define DCS_BASIS_PURSUIT_HPP

#include <algorithm>
#include <limits>
#include <vector>

#include "dcs/core.hpp"
#include "dcs/ensemble.hpp"
#include "dcs/solver.hpp"

namespace dcs {

struct BPConfig {
  int max_iterations = 50000;
  double tolerance = 1e-12;  // relative objective change
  double kkt_tol = 1e-4;     // subgradient residual, relative to lambda
};

struct BPResult {
  Vector x;
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;  // false means the iteration budget ran out
};

inline Vector soft_threshold(const Vector& v, double tau) {
  return (v.array().abs() - tau).cwiseMax(0.0) * v.array().sign();
}

/// max_j of the distance from A'(y - Ax)_j to lambda * d|x_j|.
inline double bp_kkt_residual(const Matrix& A, const Vector& y, const Vector& x, double lambda) {
  const Vector g = A.transpose() * (y - A * x);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double r = x(j) != 0.0 ? std::abs(g(j) - lambda * (x(j) > 0 ? 1.0 : -1.0))
                                 : std::max(std::abs(g(j)) - lambda, 0.0);
    worst = std::max(worst, r);
  }
  return worst;
}

inline double bp_objective(const Matrix& A, const Vector& y, const Vector& x, double lambda) {
  return lambda * x.lpNorm<1>() + 0.5 * (y - A * x).squaredNorm();
}

/// min_x lambda ||x||_1 + 1/2 ||y - A x||^2 by FISTA with a monotone restart:
/// whenever an accelerated step raises the objective, momentum is reset and a
/// plain proximal-gradient step is taken from the current iterate.
inline BPResult basis_pursuit_denoise(const Matrix& A, const Vector& y, double lambda,
                                      const BPConfig& cfg = {}) {
  require(lambda > 0.0, "lambda_bp must be positive");
  require(A.rows() == y.size(), "A and y dimensions differ");
  require(cfg.max_iterations > 0 && cfg.tolerance > 0.0 && cfg.kkt_tol > 0.0, "invalid BP config");

  const Eigen::Index p = A.cols();
  const Matrix small_gram = A.rows() < p ? Matrix(A * A.transpose()) : Matrix(A.transpose() * A);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(small_gram, Eigen::EigenvaluesOnly);
  const double lip = std::max(eig.eigenvalues().maxCoeff() * (1.0 + 1e-10), 1e-300);

  auto prox_step = [&](const Vector& z) {
    return soft_threshold(z - A.transpose() * (A * z - y) / lip, lambda / lip);
  };

  BPResult res;
  Vector x = Vector::Zero(p);
  Vector z = x;
  double t = 1.0;
  double f = bp_objective(A, y, x, lambda);
  for (int k = 1; k <= cfg.max_iterations; ++k) {
    Vector x_new = prox_step(z);
    double f_new = bp_objective(A, y, x_new, lambda);
    if (f_new > f) {
      t = 1.0;
      x_new = prox_step(x);
      f_new = bp_objective(A, y, x_new, lambda);
    }
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = x_new + ((t - 1.0) / t_new) * (x_new - x);
    t = t_new;
    const double rel = std::abs(f - f_new) / std::max(std::abs(f), std::numeric_limits<double>::min());
    x = std::move(x_new);
    f = f_new;
    res.iterations = k;
    if (rel < cfg.tolerance || k % 25 == 0) {
      res.kkt_residual = bp_kkt_residual(A, y, x, lambda);
      if (rel < cfg.tolerance && res.kkt_residual <= cfg.kkt_tol * lambda) {
        res.converged = true;
        break;
      }
    }
  }
  res.kkt_residual = bp_kkt_residual(A, y, x, lambda);
  res.x = std::move(x);
  res.objective = f;
  return res;
}

/// Per-step lambda for the static baseline: the default rule evaluated with
/// that step's s_t and n_t, expressed in the 1/2||y - Ax||^2 scaling, i.e.
/// lambda_t * n_t * sigma2 / sqrt(s_t).
inline std::vector<double> bp_lambdas(const MeasurementEnsemble& ens, const std::vector<int>& schedule,
                                      double sigma2, double scale = 1.0) {
  require(schedule.size() == ens.steps(), "schedule length does not match ensemble");
  std::vector<double> out;
  for (std::size_t t = 0; t < schedule.size(); ++t) {
    const double n = ens.rows(t);
    const double lam = scale * default_lambda(std::sqrt(sigma2), schedule[t], n, static_cast<double>(ens.dim()));
    out.push_back(lam * n * sigma2 / std::sqrt(static_cast<double>(schedule[t])));
  }
  return out;
}

struct BPSequence {
  Series states;
  std::vector<BPResult> steps;
  bool all_converged() const {
    return std::all_of(steps.begin(), steps.end(), [](const BPResult& r) { return r.converged; });
  }
};

/// Basis pursuit applied independently at every time step.
inline BPSequence bp_sequence(const MeasurementEnsemble& ens, const Series& y,
                              const std::vector<double>& lambdas, const BPConfig& cfg = {}) {
  check_observations(ens, y);
  require(lambdas.size() == ens.steps(), "one lambda per step required");
  BPSequence out;
  for (std::size_t t = 0; t < ens.steps(); ++t) {
    const Matrix A = ens.matrix(t);
    BPResult r = basis_pursuit_denoise(A, y[t], lambdas[t], cfg);
    out.states.push_back(r.x);
    out.steps.push_back(std::move(r));
  }
  return out;
}

}  // namespace dcs

#endif  // DCS_BASIS_PURSUIT_HPP
