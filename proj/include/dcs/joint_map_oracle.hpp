#ifndef DCS_JOINT_MAP_ORACLE_HPP
#define DCS_JOINT_MAP_ORACLE_HPP

#include "dcs/core.hpp"
#include "dcs/smoother.hpp"

namespace dcs {

struct JointMoments {
  Series means;
  MatrixSeries covariances;  // diagonal blocks of the posterior covariance
  MatrixSeries lag_one;      // lag_one[t] = block (t-1, t); lag_one[0] = 0
  Matrix precision;          // the assembled pT x pT precision
};

/// Dense reference solution of the inner Gaussian model: assemble the
/// block-tridiagonal posterior precision, solve the normal equations and
/// invert. Only meant for small problems (p * T <= 2000).
inline JointMoments joint_map_oracle(const InnerSSMSpec& spec, const Series& y) {
  spec.validate();
  check_observations(spec.ensemble, y);
  const auto T = static_cast<Eigen::Index>(spec.steps());
  const Eigen::Index p = spec.dim();
  if (p * T > 2000) throw BudgetError("joint_map_oracle: p*T exceeds 2000");

  const double th = spec.theta;
  Matrix H = Matrix::Zero(p * T, p * T);
  Vector b = Vector::Zero(p * T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    const Vector qinv = spec.q[ut].cwiseInverse();
    // prior factor exp(-(x_t - th x_{t-1})' Q_t^{-1} (x_t - th x_{t-1}) / 2)
    H.block(t * p, t * p, p, p).diagonal() += qinv;
    if (t > 0) {
      H.block((t - 1) * p, (t - 1) * p, p, p).diagonal() += th * th * qinv;
      H.block((t - 1) * p, t * p, p, p).diagonal() -= th * qinv;
      H.block(t * p, (t - 1) * p, p, p).diagonal() -= th * qinv;
    }
    const Matrix A = spec.ensemble.matrix(ut);
    H.block(t * p, t * p, p, p) += A.transpose() * A / spec.r[ut];
    b.segment(t * p, p) += A.transpose() * y[ut] / spec.r[ut];
  }

  Eigen::LLT<Matrix> llt(H);
  if (llt.info() != Eigen::Success) throw ValidationError("joint precision is singular");
  const Vector mean = llt.solve(b);
  const Matrix cov = llt.solve(Matrix::Identity(p * T, p * T));

  JointMoments out;
  for (Eigen::Index t = 0; t < T; ++t) {
    out.means.push_back(mean.segment(t * p, p));
    out.covariances.push_back(cov.block(t * p, t * p, p, p));
    out.lag_one.push_back(t == 0 ? Matrix(Matrix::Zero(p, p)) : Matrix(cov.block((t - 1) * p, t * p, p, p)));
  }
  out.precision = std::move(H);
  return out;
}

}  // namespace dcs

#endif  // DCS_JOINT_MAP_ORACLE_HPP
