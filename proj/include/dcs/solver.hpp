#ifndef DCS_SOLVER_HPP
#define DCS_SOLVER_HPP

#include <algorithm>
#include <numeric>
#include <optional>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "dcs/core.hpp"
#include "dcs/ensemble.hpp"
#include "dcs/model.hpp"
#include "dcs/smoother.hpp"

namespace dcs {

enum class ThetaPolicy { kFixed, kEstimated };

struct SolverConfig {
  double lambda = 1.0;       // used as-is unless lambda_auto
  bool lambda_auto = true;   // lambda = lambda_scale * default_lambda(...)
  double lambda_scale = 1.0;
  double eps_smooth = 1e-10;
  int outer_iterations = 20;  // L
  int inner_iterations = 5;   // M
  double objective_tol = 1e-6;  // relative change of the smoothed objective; 0 disables
  double state_tol = 0.0;       // relative change of the state sequence; 0 disables
  double theta_init = 0.5;      // the known theta under ThetaPolicy::kFixed
  ThetaPolicy theta_policy = ThetaPolicy::kEstimated;
  // theta EM on the uniform-weight warm start (estimated policy only); stops
  // early once theta moves by less than warm_theta_tol
  int warm_theta_iterations = 20;
  double warm_theta_tol = 1e-4;

  void validate() const {
    require(outer_iterations >= 1 && inner_iterations >= 1, "L and M must be >= 1");
    require(warm_theta_iterations >= 0 && warm_theta_tol >= 0.0, "invalid warm start settings");
    require(objective_tol >= 0.0 && state_tol >= 0.0, "tolerances must be non-negative");
    require(eps_smooth > 0.0, "eps_smooth must be positive");
    require(std::abs(theta_init) < 1.0, "|theta_init| must be < 1");
    if (lambda_auto)
      require(lambda_scale > 0.0, "lambda_scale must be positive");
    else
      require(lambda > 0.0, "lambda must be positive");
  }
};

inline constexpr double kThetaClampMargin = 1e-6;

/// lambda = 2 sqrt(2) sigma sqrt((s/n) log p), with s/n = sum_t s_t / sum_t n_t.
inline double default_lambda(double sigma, double s_total, double n_total, double p) {
  require(sigma >= 0.0 && s_total > 0.0 && n_total > 0.0 && p > 1.0,
          "default_lambda needs sigma >= 0 and positive totals");
  return 2.0 * std::sqrt(2.0) * sigma * std::sqrt(s_total / n_total * std::log(p));
}

/// IRLS weights 1 / (sqrt(s_t) sqrt(d_tj^2 + eps^2)), d_t = x_t - theta x_{t-1}.
inline Series outer_weights(const Series& states, double theta, const std::vector<int>& schedule,
                            double eps) {
  require(eps > 0.0, "eps must be positive");
  require(states.size() == schedule.size(), "schedule length does not match states");
  Series w;
  w.reserve(states.size());
  for (std::size_t t = 0; t < states.size(); ++t) {
    const Vector d = t == 0 ? states[0] : Vector(states[t] - theta * states[t - 1]);
    const double rs = std::sqrt(static_cast<double>(schedule[t]));
    w.push_back(((d.array().square() + eps * eps).sqrt() * rs).inverse().matrix());
  }
  return w;
}

/// Q_t = diag(1 / (lambda w_t)), R_t = n_t sigma2 I.
inline InnerSSMSpec inner_spec_from_weights(const Series& weights, double lambda, double theta,
                                            const MeasurementEnsemble& ens, double sigma2) {
  require(lambda > 0.0, "lambda must be positive for the reweighted model");
  require(sigma2 > 0.0, "sigma2 must be positive");
  require(weights.size() == ens.steps(), "weights length does not match ensemble");
  InnerSSMSpec spec{ens, theta, {}, {}};
  spec.q.reserve(weights.size());
  for (std::size_t t = 0; t < weights.size(); ++t) {
    require((weights[t].array() > 0.0).all(), "weights must be positive");
    spec.q.push_back((lambda * weights[t].array()).inverse().matrix());
    spec.r.push_back(ens.rows(t) * sigma2);
  }
  return spec;
}

struct ThetaUpdate {
  double theta = 0.0;
  double unclamped = 0.0;
  bool clamped = false;
  bool degenerate = false;  // zero denominator; theta left unchanged
};

/// Weighted ratio of smoothed lag-one and lag-zero second moments,
/// clamped to |theta| <= 1 - 1e-6. Needs a full-mode smoother result.
inline ThetaUpdate update_theta(const SmootherResult& sm, const Series& weights, double theta_current) {
  require(sm.has_covariances(), "theta update needs smoothed covariances");
  require(weights.size() == sm.means.size(), "weights length does not match smoother output");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t t = 1; t < sm.means.size(); ++t) {
    const auto& prev = sm.means[t - 1];
    const auto& cur = sm.means[t];
    num += (weights[t].array() * (prev.array() * cur.array() + sm.lag_one[t].diagonal().array())).sum();
    den += (weights[t].array() * (prev.array().square() + sm.covariances[t - 1].diagonal().array())).sum();
  }
  ThetaUpdate u;
  if (!(den > 0.0) || !std::isfinite(num / den)) {
    u.theta = u.unclamped = theta_current;
    u.degenerate = true;
    return u;
  }
  u.unclamped = num / den;
  const double hi = 1.0 - kThetaClampMargin;
  u.theta = std::clamp(u.unclamped, -hi, hi);
  u.clamped = u.theta != u.unclamped;
  return u;
}

/// lambda sum sqrt(d^2 + eps^2)/sqrt(s_t) + sum ||y_t - A_t x_t||^2 / (2 n_t sigma2)
inline double smoothed_objective(const Series& states, double theta, const MeasurementEnsemble& ens,
                                 const Series& y, const std::vector<int>& schedule, double lambda,
                                 double sigma2, double eps) {
  double total = 0.0;
  for (std::size_t t = 0; t < states.size(); ++t) {
    const Vector d = t == 0 ? states[0] : Vector(states[t] - theta * states[t - 1]);
    total += lambda * (d.array().square() + eps * eps).sqrt().sum() / std::sqrt(static_cast<double>(schedule[t]));
    total += (y[t] - ens.matrix(t) * states[t]).squaredNorm() / (2.0 * ens.rows(t) * sigma2);
  }
  return total;
}

/// The reweighted quadratic objective for weights w (fixed from the previous
/// iterate), plus the constant that makes it touch the smoothed objective at
/// that iterate:
///   lambda/2 sum w (d^2 + eps^2) + lambda/2 sum 1/(s_t w) + data term.
inline double majorizer_value(const Series& weights, const Series& states, double theta,
                              const MeasurementEnsemble& ens, const Series& y,
                              const std::vector<int>& schedule, double lambda, double sigma2,
                              double eps) {
  double total = 0.0;
  for (std::size_t t = 0; t < states.size(); ++t) {
    const Vector d = t == 0 ? states[0] : Vector(states[t] - theta * states[t - 1]);
    const auto w = weights[t].array();
    total += 0.5 * lambda * (w * (d.array().square() + eps * eps)).sum();
    total += 0.5 * lambda * (w * schedule[t]).inverse().sum();
    total += (y[t] - ens.matrix(t) * states[t]).squaredNorm() / (2.0 * ens.rows(t) * sigma2);
  }
  return total;
}

struct InnerResult {
  Series states;
  double theta = 0.0;           // theta after the last M-step
  double theta_smoothed = 0.0;  // theta used by the last smoother pass
  SmootherResult smoother;
  int clamp_events = 0;
};

/// Inner EM for one outer iteration: alternate a fixed-interval smoother pass
/// (E-step) with the theta update (M-step), M times. With a fixed theta the
/// repeated passes are identical, so a single pass is made.
inline InnerResult run_inner_em(const MeasurementEnsemble& ens, const Series& y, const Series& weights,
                                double theta, double lambda, double sigma2, const SolverConfig& cfg,
                                bool want_covariances = true) {
  const bool estimate = cfg.theta_policy == ThetaPolicy::kEstimated;
  const SmootherMode mode = (estimate || want_covariances) ? SmootherMode::kFull : SmootherMode::kMeansOnly;
  const int passes = estimate ? cfg.inner_iterations : 1;

  InnerResult out;
  out.theta = theta;
  for (int m = 0; m < passes; ++m) {
    const InnerSSMSpec spec = inner_spec_from_weights(weights, lambda, out.theta, ens, sigma2);
    out.smoother = fixed_interval_smooth(spec, y, mode);
    out.theta_smoothed = out.theta;
    if (estimate) {
      const ThetaUpdate u = update_theta(out.smoother, weights, out.theta);
      out.clamp_events += u.clamped ? 1 : 0;
      out.theta = u.theta;
    }
  }
  out.states = out.smoother.means;
  return out;
}

struct DeconvolutionResult {
  Series states;
  double theta = 0.0;
  Series innovations;
  MatrixSeries covariances;  // Sigma_{t|T} of the final inner Gaussian model
  double lambda = 0.0;
  std::vector<double> objective_trace;   // smoothed objective at x^(0), x^(1), ...
  std::vector<double> surrogate_trace;   // majorizer at its minimizer, one per outer iteration
  std::vector<double> dual_trace;        // Lagrangian (eps = 0) objective at x^(0), x^(1), ...
  std::vector<double> theta_trace;       // theta^(0), theta^(1), ...
  int iterations = 0;
  bool converged = false;
  int clamp_events = 0;
};

namespace detail {

inline double relative_change(const Series& a, const Series& b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    num += (a[t] - b[t]).squaredNorm();
    den += b[t].squaredNorm();
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace detail

inline double resolve_lambda(const SolverConfig& cfg, const MeasurementEnsemble& ens,
                             const std::vector<int>& schedule, double sigma2) {
  if (!cfg.lambda_auto) return cfg.lambda;
  const double s_total = std::accumulate(schedule.begin(), schedule.end(), 0.0);
  return cfg.lambda_scale * default_lambda(std::sqrt(sigma2), s_total,
                                           static_cast<double>(ens.total_rows()),
                                           static_cast<double>(ens.dim()));
}

/// Nested EM: outer IRLS reweighting around an inner smoother/theta EM.
inline DeconvolutionResult run(const MeasurementEnsemble& ens, const Series& y,
                               const std::vector<int>& schedule, double sigma2, const SolverConfig& cfg) {
  cfg.validate();
  check_observations(ens, y);
  require(schedule.size() == ens.steps(), "schedule length does not match ensemble");
  for (std::size_t t = 0; t < schedule.size(); ++t)
    require(schedule[t] >= 1, "s_t must be >= 1");
  require(sigma2 > 0.0, "sigma2 must be positive");

  const std::size_t T = ens.steps();
  const Eigen::Index p = ens.dim();
  const double eps = cfg.eps_smooth;
  const double lambda = resolve_lambda(cfg, ens, schedule, sigma2);
  require(lambda > 0.0, "resolved lambda must be positive");

  ModelParams lagrangian;
  lagrangian.lambda = lambda;
  lagrangian.sigma2 = sigma2;
  lagrangian.sparsity_schedule = schedule;

  DeconvolutionResult res;
  res.lambda = lambda;
  double theta = cfg.theta_init;

  // warm start: smoother pass with uniform weights, Q_t = I / lambda. When theta
  // is estimated it is first run to a fixed point of the theta update under
  // this Gaussian model; the reweighted updates that follow move theta only
  // slowly because heavily weighted entries already sit on the current theta.
  Series weights(T, Vector::Ones(p));
  SmootherResult last;
  if (cfg.theta_policy == ThetaPolicy::kEstimated) {
    for (int m = 0; m < cfg.warm_theta_iterations; ++m) {
      const InnerSSMSpec warm = inner_spec_from_weights(weights, lambda, theta, ens, sigma2);
      last = fixed_interval_smooth(warm, y, SmootherMode::kFull);
      const ThetaUpdate u = update_theta(last, weights, theta);
      res.clamp_events += u.clamped ? 1 : 0;
      const double moved = std::abs(u.theta - theta);
      theta = u.theta;
      if (moved < cfg.warm_theta_tol) break;
    }
  }
  {
    const InnerSSMSpec warm = inner_spec_from_weights(weights, lambda, theta, ens, sigma2);
    last = fixed_interval_smooth(warm, y, SmootherMode::kMeansOnly);
  }
  Series x = last.means;
  double theta_smoothed = theta;

  auto record = [&](const Series& states, double th) {
    res.objective_trace.push_back(smoothed_objective(states, th, ens, y, schedule, lambda, sigma2, eps));
    res.dual_trace.push_back(dual_objective(states, th, ens, y, lagrangian));
    res.theta_trace.push_back(th);
  };
  record(x, theta);

  for (int l = 0; l < cfg.outer_iterations; ++l) {
    weights = outer_weights(x, theta, schedule, eps);
    InnerResult inner = run_inner_em(ens, y, weights, theta, lambda, sigma2, cfg, false);
    res.clamp_events += inner.clamp_events;
    res.surrogate_trace.push_back(
        majorizer_value(weights, inner.states, inner.theta, ens, y, schedule, lambda, sigma2, eps));

    const double state_change = detail::relative_change(inner.states, x);
    x = std::move(inner.states);
    theta = inner.theta;
    theta_smoothed = inner.theta_smoothed;
    last = std::move(inner.smoother);
    record(x, theta);
    res.iterations = l + 1;

    const double f_prev = res.objective_trace[res.objective_trace.size() - 2];
    const double f_cur = res.objective_trace.back();
    const double obj_change = std::abs(f_prev - f_cur) / std::max(std::abs(f_prev), 1e-300);
    if ((cfg.objective_tol > 0.0 && obj_change < cfg.objective_tol) ||
        (cfg.state_tol > 0.0 && state_change < cfg.state_tol)) {
      res.converged = true;
      break;
    }
  }

  if (!last.has_covariances()) {
    // same model as the pass that produced x, so the means are reproduced exactly
    const InnerSSMSpec spec = inner_spec_from_weights(weights, lambda, theta_smoothed, ens, sigma2);
    last = fixed_interval_smooth(spec, y, SmootherMode::kFull);
    x = last.means;
  }
  res.states = std::move(x);
  res.theta = theta;
  res.innovations = innovations_of(res.states, theta);
  res.covariances = std::move(last.covariances);
  return res;
}

struct ConfidenceBands {
  Series lower;
  Series upper;
  double z = 0.0;
  double level = 0.0;
};

/// Two-sided Gaussian quantile for a central coverage level, e.g. 0.90 -> 1.6449.
inline double central_quantile(double level) {
  require(level > 0.0 && level < 1.0, "confidence level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * level);
}

/// x_tj -/+ z sqrt(Sigma_{t|T, jj}) from the final inner Gaussian model.
inline ConfidenceBands confidence_bands(const Series& states, const MatrixSeries& covariances, double level) {
  require(states.size() == covariances.size(), "covariances missing for confidence bands");
  ConfidenceBands b;
  b.level = level;
  b.z = central_quantile(level);
  for (std::size_t t = 0; t < states.size(); ++t) {
    const Vector var = covariances[t].diagonal();
    const double tol = 1e-8 * std::max(std::abs(var.sum()), 1e-300);
    if ((var.array() < -tol).any()) throw ValidationError("smoothed covariance is not PSD");
    const Vector half = b.z * var.cwiseMax(0.0).cwiseSqrt();
    b.lower.push_back(states[t] - half);
    b.upper.push_back(states[t] + half);
  }
  return b;
}

inline ConfidenceBands confidence_bands(const DeconvolutionResult& res, double level) {
  return confidence_bands(res.states, res.covariances, level);
}

}  // namespace dcs

#endif  // DCS_SOLVER_HPP
