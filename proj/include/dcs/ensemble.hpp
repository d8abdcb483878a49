#ifndef DCS_ENSEMBLE_HPP
#define DCS_ENSEMBLE_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "dcs/core.hpp"

namespace dcs {

/// Nested measurement matrices: A_t is the first n_t rows of a shared base
/// matrix A_1, so only A_1 is stored. Time indices are zero-based here, so
/// `rows(0)` is n_1.
class MeasurementEnsemble {
 public:
  MeasurementEnsemble(Matrix base, std::vector<int> row_counts, std::uint64_t seed = 0)
      : base_(std::move(base)), row_counts_(std::move(row_counts)), seed_(seed) {
    require(!row_counts_.empty(), "ensemble needs at least one time step");
    require(base_.cols() > 0, "ensemble dimension must be positive");
    require(base_.rows() == row_counts_.front(),
            "base matrix must have n_1 = row_counts[0] rows");
    for (int n : row_counts_) {
      require(n > 0, "row counts must be positive");
      require(n <= row_counts_.front(), "row count n_t exceeds n_1");
    }
  }

  Eigen::Index dim() const { return base_.cols(); }
  std::size_t steps() const { return row_counts_.size(); }
  int rows(std::size_t t) const { return row_counts_.at(t); }
  int max_rows() const { return row_counts_.front(); }

  /// A_t as a view into the base matrix.
  auto matrix(std::size_t t) const { return base_.topRows(rows(t)); }

  /// sqrt(n_1 / n_t) * A_t
  Matrix scaled(std::size_t t) const {
    return std::sqrt(static_cast<double>(max_rows()) / rows(t)) * base_.topRows(rows(t));
  }

  const Matrix& base() const { return base_; }
  const std::vector<int>& row_counts() const { return row_counts_; }
  std::uint64_t seed() const { return seed_; }

  long total_rows() const {
    long n = 0;
    for (int r : row_counts_) n += r;
    return n;
  }

 private:
  Matrix base_;
  std::vector<int> row_counts_;
  std::uint64_t seed_;
};

inline void check_observations(const MeasurementEnsemble& ens, const Series& y) {
  require(y.size() == ens.steps(), "observation count does not match ensemble length");
  for (std::size_t t = 0; t < y.size(); ++t)
    require(y[t].size() == ens.rows(t), "observation length does not match n_t");
}

}  // namespace dcs

#endif  // DCS_ENSEMBLE_HPP
