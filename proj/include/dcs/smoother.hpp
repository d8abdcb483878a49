#ifndef DCS_SMOOTHER_HPP
#define DCS_SMOOTHER_HPP

#include <map>
#include <vector>

#include "dcs/core.hpp"
#include "dcs/ensemble.hpp"

namespace dcs {

/// Gaussian inner model
///   x_t = theta x_{t-1} + w_t,  w_t ~ N(0, diag(q_t)),  x_0 = 0
///   y_t = A_t x_t + v_t,        v_t ~ N(0, r_t I)
struct InnerSSMSpec {
  const MeasurementEnsemble& ensemble;
  double theta = 0.0;
  Series q;               // diagonal of Q_t, one p-vector per step
  std::vector<double> r;  // R_t = r_t I

  std::size_t steps() const { return q.size(); }
  Eigen::Index dim() const { return ensemble.dim(); }

  void validate() const {
    require(std::abs(theta) < 1.0, "|theta| must be < 1");
    require(!q.empty(), "inner model needs at least one step");
    require(q.size() == ensemble.steps() && r.size() == q.size(),
            "inner model lengths do not match the ensemble");
    for (std::size_t t = 0; t < q.size(); ++t) {
      require(q[t].size() == dim(), "Q_t has wrong dimension");
      require(q[t].allFinite() && (q[t].array() > 0.0).all(), "Q_t entries must be finite and positive");
      require(std::isfinite(r[t]) && r[t] > 0.0, "R_t must be finite and positive");
    }
  }
};

struct FilterResult {
  Series means;              // x_{t|t}
  MatrixSeries covariances;  // P_{t|t}
};

enum class SmootherMode { kFull, kMeansOnly };

struct SmootherResult {
  Series means;              // x_{t|T}
  MatrixSeries covariances;  // Sigma_{t|T}; empty in kMeansOnly
  /// lag_one[t] = Cov(x_{t-1}, x_t | y_{1:T}) for t >= 1; lag_one[0] = 0 (x_0 is fixed).
  MatrixSeries lag_one;
  Series filtered_means;
  MatrixSeries filtered_covariances;

  bool has_covariances() const { return !covariances.empty(); }
};

namespace detail {

inline Matrix predicted_covariance(const InnerSSMSpec& spec, const FilterResult& f, std::size_t t) {
  if (t == 0) return Matrix(spec.q[0].asDiagonal());
  Matrix p = spec.theta * spec.theta * f.covariances[t - 1];
  p.diagonal() += spec.q[t];
  return p;
}

}  // namespace detail

/// Kalman forward pass, started from x_0 = 0 with zero covariance so the first
/// prediction has covariance Q_1. When n_t <= p the update is the Joseph form
/// (I - KA) P (I - KA)' + r K K'; for n_t > p the equivalent p-dimensional
/// form P (I + A'A P / r)^{-1} is used instead of factoring an n_t x n_t matrix.
inline FilterResult forward_filter(const InnerSSMSpec& spec, const Series& y) {
  spec.validate();
  check_observations(spec.ensemble, y);
  require(all_finite(y), "observations must be finite");

  const std::size_t T = spec.steps();
  const Eigen::Index p = spec.dim();
  const double theta = spec.theta;
  std::map<int, Matrix> gram;  // A_t'A_t for the p-dimensional update, keyed by n_t

  FilterResult f;
  f.means.reserve(T);
  f.covariances.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    Vector x_pred = t == 0 ? Vector::Zero(p) : Vector(theta * f.means[t - 1]);
    Matrix P_pred = detail::predicted_covariance(spec, f, t);

    const auto A = spec.ensemble.matrix(t);
    const int n = spec.ensemble.rows(t);
    const double r = spec.r[t];
    const Vector resid = y[t] - A * x_pred;

    Vector x_f;
    Matrix P_f;
    if (n <= p) {
      const Matrix AP = A * P_pred;
      Matrix S = AP * A.transpose();
      S.diagonal().array() += r;
      Eigen::LLT<Matrix> llt(S);
      if (llt.info() != Eigen::Success) throw ValidationError("innovation covariance not positive definite");
      // K = P A' S^{-1}, solved from the right against S = L L'
      Matrix K = AP.transpose();
      llt.matrixU().solveInPlace<Eigen::OnTheRight>(K);
      llt.matrixL().solveInPlace<Eigen::OnTheRight>(K);
      x_f = x_pred + K * resid;
      Matrix MP = P_pred;
      MP.noalias() -= K * AP;
      Matrix C = MP * A.transpose();
      C -= r * K;
      P_f = MP;
      P_f.noalias() -= C * K.transpose();
    } else {
      auto it = gram.find(n);
      if (it == gram.end()) it = gram.emplace(n, Matrix(A.transpose() * A)).first;
      Matrix B = P_pred * it->second / r;
      B.diagonal().array() += 1.0;
      P_f = B.partialPivLu().solve(P_pred);
      symmetrize(P_f);
      x_f = x_pred + P_f * (A.transpose() * resid) / r;
    }
    symmetrize(P_f);
    f.means.push_back(std::move(x_f));
    f.covariances.push_back(std::move(P_f));
  }
  return f;
}

/// Rauch-Tung-Striebel backward pass over a forward filter. The lag-one
/// covariances use Cov(x_t, x_{t+1} | y) = J_t Sigma_{t+1|T}, which equals the
/// classical lag-one recursion started from (I - K_T A_T) theta P_{T-1|T-1}.
inline SmootherResult fixed_interval_smooth(const InnerSSMSpec& spec, const Series& y,
                                            SmootherMode mode = SmootherMode::kFull) {
  FilterResult f = forward_filter(spec, y);
  const std::size_t T = spec.steps();
  const Eigen::Index p = spec.dim();
  const double theta = spec.theta;
  const bool full = mode == SmootherMode::kFull;

  SmootherResult s;
  s.means.assign(T, Vector());
  s.means[T - 1] = f.means[T - 1];
  if (full) {
    s.covariances.assign(T, Matrix());
    s.lag_one.assign(T, Matrix());
    s.covariances[T - 1] = f.covariances[T - 1];
    s.lag_one[0] = Matrix::Zero(p, p);
  }

  Eigen::LLT<Matrix> llt;
  for (std::size_t k = T - 1; k-- > 0;) {
    const Matrix P_pred = detail::predicted_covariance(spec, f, k + 1);
    llt.compute(P_pred);
    if (llt.info() != Eigen::Success) throw ValidationError("predicted covariance not positive definite");

    // x_{k|T} = x_{k|k} + J_k (x_{k+1|T} - theta x_{k|k}),  J_k = theta P_{k|k} P_{k+1|k}^{-1}
    const Vector gap = s.means[k + 1] - theta * f.means[k];
    s.means[k] = f.means[k] + theta * (f.covariances[k] * llt.solve(gap));

    if (full) {
      const Matrix Jt = theta * llt.solve(f.covariances[k]);  // J_k'
      const Matrix D = s.covariances[k + 1] - P_pred;
      Matrix P_s = f.covariances[k];
      P_s.noalias() += Jt.transpose() * (D * Jt);
      symmetrize(P_s);
      s.lag_one[k + 1].noalias() = Jt.transpose() * s.covariances[k + 1];
      s.covariances[k] = std::move(P_s);
    }
  }
  s.filtered_means = std::move(f.means);
  s.filtered_covariances = std::move(f.covariances);
  return s;
}

}  // namespace dcs

#endif  // DCS_SMOOTHER_HPP
