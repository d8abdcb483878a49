#ifndef DCS_EXPERIMENT_HPP
#define DCS_EXPERIMENT_HPP

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "dcs/core.hpp"
#include "dcs/ensemble.hpp"
#include "dcs/model.hpp"
#include "dcs/sensing.hpp"
#include "dcs/solver.hpp"

namespace dcs {

/// Sparsity schedule s_1 = first, s_t = rest for t >= 2.
struct Schedule {
  int first = 8;
  int rest = 4;

  std::vector<int> expand(std::size_t T) const {
    std::vector<int> s(T, rest);
    if (T > 0) s[0] = first;
    return s;
  }
};

/// Everything about a simulated cell except the grid coordinates.
struct SimulationSpec {
  Eigen::Index p = 200;
  std::size_t T = 200;
  double theta = 0.95;
  double sigma2 = 0.1;
  InnovationMode innovations = InnovationMode::exact_sparse();
  AmplitudeSpec amplitudes;

  void validate() const {
    require(p >= 2 && T >= 1, "need p >= 2 and T >= 1");
    require(std::abs(theta) < 1.0, "|theta| must be < 1");
    require(sigma2 > 0.0, "sigma2 must be positive");
  }
};

struct SimulatedCell {
  std::uint64_t seed = 0;
  double snr_db = 0.0;
  double compression = 0.0;
  Schedule schedule;
  std::vector<int> sparsity;
  RowCountPlan plan;
  MeasurementEnsemble ensemble;
  StateTrajectory truth;
  Series observations;
  double measured_snr_db = 0.0;
};

/// Independent sub-seeds for the innovations, the ensemble and the noise.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline SimulatedCell simulate_cell(const SimulationSpec& spec, const Schedule& schedule, double snr_db,
                                   double compression, std::uint64_t seed) {
  spec.validate();
  SimulatedCell c{seed, snr_db, compression, schedule, schedule.expand(spec.T), {},
                  MeasurementEnsemble(Matrix::Zero(1, 1), {1}, 0), {}, {}, 0.0};
  c.plan = row_counts_for_compression(spec.p, c.sparsity, compression);
  c.ensemble = build_ensemble(spec.p, c.plan.rows, derive_seed(seed, 1));
  Series w = make_innovations(spec.p, c.sparsity, spec.innovations, spec.amplitudes, derive_seed(seed, 0));
  c.truth = scale_to_snr(c.ensemble, propagate_states(spec.theta, std::move(w)), spec.sigma2, snr_db);
  c.observations = observe(c.ensemble, c.truth.states, spec.sigma2, derive_seed(seed, 2));
  c.measured_snr_db = empirical_snr_db(c.ensemble, c.truth.states, c.observations);
  return c;
}

/// A sweep over SNR x compression x schedule, repeated for each seed.
struct ExperimentSpec {
  std::vector<std::uint64_t> seeds;
  std::vector<double> snrs_db{5.0};
  std::vector<double> compressions{0.0, 0.25, 0.5, 0.75};
  std::vector<Schedule> schedules{Schedule{}};
  SimulationSpec simulation;
  SolverConfig solver;
  std::string output_dir = "out";

  struct Cell {
    std::uint64_t seed;
    double snr_db;
    double compression;
    Schedule schedule;
  };

  void validate() const {
    require(!seeds.empty() && !snrs_db.empty() && !compressions.empty() && !schedules.empty(),
            "experiment grid must not be empty");
    require(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() == seeds.size(), "seeds must be distinct");
    for (double c : compressions) require(c >= 0.0 && c < 1.0, "compression must lie in [0, 1)");
    for (const auto& s : schedules) require(s.first >= 1 && s.rest >= 1, "sparsity levels must be >= 1");
    simulation.validate();
    solver.validate();
  }

  /// Grid order: seed, then SNR, then compression, then schedule.
  std::vector<Cell> cells() const {
    std::vector<Cell> out;
    for (auto seed : seeds)
      for (double snr : snrs_db)
        for (double c : compressions)
          for (const auto& s : schedules) out.push_back({seed, snr, c, s});
    return out;
  }
};

/// Worker count from DCS_WORKERS, else the hardware concurrency (at least 1).
inline unsigned worker_count() {
  if (const char* env = std::getenv("DCS_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    require(end != env && *end == '\0' && v >= 1, "DCS_WORKERS must be a positive integer");
    return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs job(i) for i in [0, n) on up to `workers` threads. The first exception
/// is rethrown after all workers have stopped; later jobs are skipped.
inline void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& job) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (!failed) {
      const std::size_t i = next++;
      if (i >= n) return;
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned k = 0; k < workers; ++k) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace dcs

#endif  // DCS_EXPERIMENT_HPP
