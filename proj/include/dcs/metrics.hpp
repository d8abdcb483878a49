#ifndef DCS_METRICS_HPP
#define DCS_METRICS_HPP

#include <algorithm>
#include <cstdlib>
#include <optional>
#include <vector>

#include "dcs/core.hpp"
#include "dcs/spikes.hpp"

namespace dcs {

/// (1/T) sum_t ||a_t - b_t||_2
inline double time_averaged_error(const Series& a, const Series& b) {
  require(a.size() == b.size() && !a.empty(), "series lengths differ");
  double total = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    require(a[t].size() == b[t].size(), "series dimensions differ");
    total += (a[t] - b[t]).norm();
  }
  return total / static_cast<double>(a.size());
}

/// sum_t ||x_t - xhat_t||^2 / sum_t ||x_t||^2 (plain squared error when the truth is zero).
inline double relative_mse(const Series& truth, const Series& estimate) {
  require(truth.size() == estimate.size() && !truth.empty(), "series lengths differ");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    require(truth[t].size() == estimate[t].size(), "series dimensions differ");
    num += (truth[t] - estimate[t]).squaredNorm();
    den += truth[t].squaredNorm();
  }
  return den > 0.0 ? num / den : num;
}

struct DetectionScore {
  std::size_t true_spikes = 0;
  std::size_t detected = 0;
  std::size_t matched = 0;
  double precision = 1.0;  // 1 when nothing was detected
  double recall = 1.0;     // 1 when there was nothing to find
  double f1 = 1.0;
};

/// True spike positions: the nonzero entries of the innovation sequence.
inline std::vector<std::vector<std::size_t>> spike_times(const Series& innovations) {
  const Eigen::Index p = innovations.empty() ? 0 : innovations.front().size();
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(p));
  for (std::size_t t = 0; t < innovations.size(); ++t)
    for (Eigen::Index j = 0; j < p; ++j)
      if (innovations[t](j) != 0.0) out[static_cast<std::size_t>(j)].push_back(t);
  return out;
}

/// One-to-one matching per coordinate, earliest pairs first, allowing
/// |t_true - t_detected| <= window.
inline std::size_t match_times(const std::vector<std::size_t>& truth,
                               const std::vector<std::size_t>& detected, std::size_t window) {
  std::vector<bool> used(detected.size(), false);
  std::size_t hits = 0;
  for (std::size_t t : truth) {
    for (std::size_t k = 0; k < detected.size(); ++k) {
      if (used[k]) continue;
      const std::size_t gap = t > detected[k] ? t - detected[k] : detected[k] - t;
      if (gap <= window) {
        used[k] = true;
        ++hits;
        break;
      }
    }
  }
  return hits;
}

inline DetectionScore score_detection(const std::vector<std::vector<std::size_t>>& truth,
                                      const std::vector<std::vector<std::size_t>>& detected,
                                      std::size_t window = 1) {
  require(truth.size() == detected.size(), "spike rasters have different coordinate counts");
  DetectionScore s;
  for (std::size_t j = 0; j < truth.size(); ++j) {
    s.true_spikes += truth[j].size();
    s.detected += detected[j].size();
    s.matched += match_times(truth[j], detected[j], window);
  }
  if (s.detected > 0) s.precision = static_cast<double>(s.matched) / static_cast<double>(s.detected);
  if (s.true_spikes > 0) s.recall = static_cast<double>(s.matched) / static_cast<double>(s.true_spikes);
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

struct MetricsRecord {
  double error = 0.0;  // time-averaged l2 error
  double relative_mse = 0.0;
  DetectionScore detection;
  std::optional<double> bound;          // right-hand side of the stability bound, if supplied
  std::optional<bool> bound_satisfied;  // error <= bound
};

inline MetricsRecord compute_metrics(const Series& true_states, const Series& true_innovations,
                                     const Series& estimate, const SpikeTrain& detected,
                                     std::optional<double> bound = std::nullopt) {
  require(true_states.size() == estimate.size(), "truth and estimate lengths differ");
  MetricsRecord m;
  m.error = time_averaged_error(true_states, estimate);
  m.relative_mse = relative_mse(true_states, estimate);
  m.detection = score_detection(spike_times(true_innovations), detected.times);
  if (bound) {
    m.bound = bound;
    m.bound_satisfied = m.error <= *bound;
  }
  return m;
}

/// Noise variance from a quiet stretch [begin, end) of the traces: per-coordinate
/// sample variance, then the median across coordinates.
inline double estimate_noise_variance(const Series& traces, std::size_t begin, std::size_t end) {
  require(begin < end && end <= traces.size(), "inactive range out of bounds");
  require(end - begin >= 30, "inactive range must span at least 30 samples");
  const Eigen::Index p = traces.front().size();
  require(p > 0, "traces have no coordinates");
  const double n = static_cast<double>(end - begin);
  std::vector<double> var(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    double mean = 0.0;
    for (std::size_t t = begin; t < end; ++t) mean += traces[t](j);
    mean /= n;
    double ss = 0.0;
    for (std::size_t t = begin; t < end; ++t) ss += (traces[t](j) - mean) * (traces[t](j) - mean);
    var[static_cast<std::size_t>(j)] = ss / (n - 1.0);
  }
  const auto mid = var.begin() + static_cast<std::ptrdiff_t>(var.size() / 2);
  std::nth_element(var.begin(), mid, var.end());
  if (var.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(var.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace dcs

#endif  // DCS_METRICS_HPP
