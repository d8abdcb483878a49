#ifndef DCS_SPIKES_HPP
#define DCS_SPIKES_HPP

#include <optional>
#include <vector>

#include "dcs/core.hpp"
#include "dcs/model.hpp"
#include "dcs/solver.hpp"

namespace dcs {

struct Spike {
  Eigen::Index coordinate = 0;
  std::size_t time = 0;  // zero-based time index
  double amplitude = 0.0;
};

struct SpikeTrain {
  std::vector<std::vector<std::size_t>> times;  // per coordinate, strictly increasing
  std::vector<std::vector<double>> amplitudes;
  double theta = 0.0;

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& v : times) n += v.size();
    return n;
  }

  /// Flattened (coordinate, time) order.
  std::vector<Spike> raster() const {
    std::vector<Spike> out;
    for (std::size_t j = 0; j < times.size(); ++j)
      for (std::size_t k = 0; k < times[j].size(); ++k)
        out.push_back({static_cast<Eigen::Index>(j), times[j][k], amplitudes[j][k]});
    return out;
  }
};

/// w_t = x_t - theta x_{t-1}, x_0 = 0.
inline Series extract_innovations(const Series& states, double theta) {
  return innovations_of(states, theta);
}

namespace detail {

struct Run {
  std::size_t first;
  std::size_t last;
  double value;
};

}  // namespace detail

/// Confidence-bound spike rule applied to each coordinate's state trace.
///
/// The trace is prefixed with the known x_0 = 0 (zero-width band), plateaus
/// are collapsed to single runs and strict local extrema are located. A peak
/// yields a spike when its lower band exceeds the upper band at the end of the
/// immediately preceding trough. The spike is placed at the first sample of
/// the rise and carries the innovation estimate at that sample.
inline SpikeTrain detect_spikes(const Series& states, const Series& lower, const Series& upper,
                                double theta) {
  const std::size_t T = states.size();
  require(lower.size() == T && upper.size() == T, "bands are not aligned with the states");
  const Eigen::Index p = T ? states.front().size() : 0;
  for (std::size_t t = 0; t < T; ++t)
    require(states[t].size() == p && lower[t].size() == p && upper[t].size() == p,
            "bands are not aligned with the states");

  const Series w = extract_innovations(states, theta);
  SpikeTrain train;
  train.theta = theta;
  train.times.resize(static_cast<std::size_t>(p));
  train.amplitudes.resize(static_cast<std::size_t>(p));

  // position k in the extended trace is time k-1; position 0 is x_0
  auto value = [&](Eigen::Index j, std::size_t k) { return k == 0 ? 0.0 : states[k - 1](j); };
  auto lo = [&](Eigen::Index j, std::size_t k) { return k == 0 ? 0.0 : lower[k - 1](j); };
  auto hi = [&](Eigen::Index j, std::size_t k) { return k == 0 ? 0.0 : upper[k - 1](j); };

  std::vector<detail::Run> runs;
  for (Eigen::Index j = 0; j < p; ++j) {
    runs.clear();
    for (std::size_t k = 0; k <= T; ++k) {
      const double v = value(j, k);
      if (!runs.empty() && runs.back().value == v)
        runs.back().last = k;
      else
        runs.push_back({k, k, v});
    }
    if (runs.size() < 2) continue;

    std::optional<std::size_t> trough;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const double v = runs[i].value;
      const bool below_prev = i == 0 || runs[i - 1].value > v;
      const bool below_next = i + 1 == runs.size() || runs[i + 1].value > v;
      const bool above_prev = i == 0 || runs[i - 1].value < v;
      const bool above_next = i + 1 == runs.size() || runs[i + 1].value < v;
      if (below_prev && below_next) {
        trough = i;
      } else if (above_prev && above_next && trough) {
        const std::size_t t_end = runs[*trough].last;
        const std::size_t peak = runs[i].first;
        if (lo(j, peak) > hi(j, t_end)) {
          const std::size_t onset = t_end;  // extended position t_end + 1 is time t_end
          const double amp = w[onset](j);
          if (amp != 0.0) {
            train.times[j].push_back(onset);
            train.amplitudes[j].push_back(amp);
          }
        }
        trough.reset();
      }
    }
  }
  return train;
}

inline SpikeTrain detect_spikes(const Series& states, const ConfidenceBands& bands, double theta) {
  return detect_spikes(states, bands.lower, bands.upper, theta);
}

}  // namespace dcs

#endif  // DCS_SPIKES_HPP
