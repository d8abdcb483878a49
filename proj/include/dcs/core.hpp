#ifndef DCS_CORE_HPP
#define DCS_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// One vector per time step, t = 1..T stored at index t-1.
using Series = std::vector<Vector>;
using MatrixSeries = std::vector<Matrix>;

/// Raised when inputs violate a documented precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised on file-system or format failures.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a brute-force computation would exceed its combinatorial guard.
class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

inline Series zero_series(std::size_t T, Eigen::Index p) {
  return Series(T, Vector::Zero(p));
}

inline bool all_finite(const Series& s) {
  for (const auto& v : s)
    if (!v.allFinite()) return false;
  return true;
}

inline void symmetrize(Matrix& m) {
  m = 0.5 * (m + m.transpose()).eval();
}

}  // namespace dcs

#endif  // DCS_CORE_HPP
