// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: dcs_acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dcs/basis_pursuit.hpp"
#include "dcs/experiment.hpp"
#include "dcs/joint_map_oracle.hpp"
#include "dcs/metrics.hpp"
#include "dcs/sensing.hpp"
#include "dcs/smoother.hpp"
#include "dcs/solver.hpp"
#include "dcs/spikes.hpp"

using namespace dcs;
using Clock = std::chrono::steady_clock;

namespace {

// Frozen fixture. The lambda multiplier and the noise variance were chosen on
// calibration seeds 11-14, which are disjoint from the seeds used here.
constexpr double kSigma2 = 0.1;
constexpr double kLambdaScale = 0.5;
constexpr double kRatioThreshold = 0.7;
constexpr double kThetaTolerance = 0.05;
constexpr double kRecallThreshold = 0.8;
constexpr double kThetaSnrDb = 25.0;     // criterion 5 ("SNR >= 20 dB")
constexpr double kDetectionSnrDb = 30.0; // criterion 6 (SNR not fixed by the claim)
constexpr std::uint64_t kSeedBase = 1000;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

SimulationSpec paper_spec() {
  SimulationSpec s;
  s.p = 200;
  s.T = 200;
  s.theta = 0.95;
  s.sigma2 = kSigma2;
  return s;
}

SolverConfig known_theta_config() {
  SolverConfig c;
  c.lambda_scale = kLambdaScale;
  c.eps_smooth = 1e-10;
  c.theta_policy = ThetaPolicy::kFixed;
  c.theta_init = 0.95;
  c.objective_tol = 0.0;  // all 20 outer iterations
  return c;
}

double relative_error(const Series& a, const Series& b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    num += (a[t] - b[t]).squaredNorm();
    den += b[t].squaredNorm();
  }
  return std::sqrt(num / std::max(den, 1e-300));
}

double relative_error(const MatrixSeries& a, const MatrixSeries& b, std::size_t from = 0) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t t = from; t < a.size(); ++t) {
    num += (a[t] - b[t]).squaredNorm();
    den += b[t].squaredNorm();
  }
  return std::sqrt(num / std::max(den, 1e-300));
}

// ---------------------------------------------------------------------------

Outcome criterion_1() {
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<int> pick_p(1, 8);
  std::uniform_int_distribution<int> pick_T(1, 5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const int p = pick_p(rng);
    const int T = pick_T(rng);
    std::uniform_int_distribution<int> pick_n(1, p + 2);
    std::vector<int> rows(T);
    for (auto& n : rows) n = pick_n(rng);
    rows[0] = *std::max_element(rows.begin(), rows.end());
    const MeasurementEnsemble ens = build_ensemble(p, rows, rng());
    InnerSSMSpec spec{ens, 1.9 * unit(rng) - 0.95, {}, {}};
    for (int t = 0; t < T; ++t) {
      Vector q(p);
      for (int j = 0; j < p; ++j) q(j) = std::pow(10.0, -3.0 + 4.0 * unit(rng));
      spec.q.push_back(q);
      spec.r.push_back(0.05 + 2.0 * unit(rng));
    }
    Series y;
    std::normal_distribution<double> gauss;
    for (int t = 0; t < T; ++t) {
      Vector v(rows[t]);
      for (auto& e : v) e = gauss(rng);
      y.push_back(v);
    }
    const SmootherResult sm = fixed_interval_smooth(spec, y);
    const JointMoments ref = joint_map_oracle(spec, y);
    worst = std::max({worst, relative_error(sm.means, ref.means), relative_error(sm.covariances, ref.covariances),
                      T > 1 ? relative_error(sm.lag_one, ref.lag_one, 1) : 0.0});
  }
  const double elapsed = seconds_since(t0);
  return {worst <= 1e-8 && elapsed < 10.0,
          "50 specs, max relative error " + fmt(worst, 3) + " (<= 1e-8), " + fmt(elapsed, 3) + " s (< 10 s)"};
}

// Criteria 2, 3 and 7 share the 5 dB paper-config runs at compression 0.5.
struct PaperRun {
  DeconvolutionResult dcs;
  double solve_seconds = 0.0;
  double dcs_error = 0.0;
  double bp_error = 0.0;
  double coverage = 0.0;
};

std::vector<PaperRun>& paper_runs(std::size_t count) {
  static std::vector<PaperRun> runs;
  const SimulationSpec spec = paper_spec();
  const SolverConfig cfg = known_theta_config();
  while (runs.size() < count) {
    const std::uint64_t seed = kSeedBase + runs.size();
    const SimulatedCell cell = simulate_cell(spec, Schedule{8, 4}, 5.0, 0.5, seed);
    PaperRun r;
    const auto t0 = Clock::now();
    r.dcs = run(cell.ensemble, cell.observations, cell.sparsity, spec.sigma2, cfg);
    r.solve_seconds = seconds_since(t0);
    r.dcs_error = time_averaged_error(cell.truth.states, r.dcs.states);
    const auto lambdas = bp_lambdas(cell.ensemble, cell.sparsity, spec.sigma2, kLambdaScale);
    r.bp_error = time_averaged_error(cell.truth.states, bp_sequence(cell.ensemble, cell.observations, lambdas).states);
    const ConfidenceBands bands = confidence_bands(r.dcs, 0.9);
    std::size_t inside = 0;
    std::size_t total = 0;
    for (std::size_t t = 0; t < spec.T; ++t)
      for (Eigen::Index j = 0; j < spec.p; ++j) {
        const double v = cell.truth.states[t](j);
        inside += (v >= bands.lower[t](j) && v <= bands.upper[t](j)) ? 1 : 0;
        ++total;
      }
    r.coverage = static_cast<double>(inside) / static_cast<double>(total);
    runs.push_back(std::move(r));
  }
  return runs;
}

Outcome criterion_2() {
  const auto& runs = paper_runs(20);
  double solve = 0.0;
  double worst_rise = 0.0;  // largest increase relative to the scale
  int monotone = 0;
  for (std::size_t k = 0; k < 20; ++k) {
    const auto& r = runs[k].dcs;
    solve += runs[k].solve_seconds;
    const double scale = std::abs(r.objective_trace.front());
    bool ok = true;
    auto check = [&](const std::vector<double>& trace) {
      for (std::size_t i = 1; i < trace.size(); ++i) {
        const double rise = (trace[i] - trace[i - 1]) / scale;
        worst_rise = std::max(worst_rise, rise);
        if (rise > 1e-9) ok = false;
      }
    };
    check(r.surrogate_trace);
    check(r.objective_trace);
    monotone += ok ? 1 : 0;
  }
  return {monotone == 20 && solve < 300.0,
          "non-increasing in " + std::to_string(monotone) + "/20 runs (largest relative rise " + fmt(worst_rise, 3) +
              ", tol 1e-9), solve time " + fmt(solve, 4) + " s (< 300 s)"};
}

Outcome criterion_3() {
  const auto& runs = paper_runs(20);
  int wins = 0;
  std::vector<double> ratios;
  for (std::size_t k = 0; k < 20; ++k) {
    wins += runs[k].dcs_error < runs[k].bp_error ? 1 : 0;
    ratios.push_back(runs[k].dcs_error / runs[k].bp_error);
  }
  std::sort(ratios.begin(), ratios.end());
  const double median = 0.5 * (ratios[9] + ratios[10]);
  return {wins >= 18 && median <= kRatioThreshold,
          "dcs beats basis pursuit in " + std::to_string(wins) + "/20 (>= 18), median error ratio " + fmt(median) +
              " (<= " + fmt(kRatioThreshold) + ")"};
}

Outcome criterion_4() {
  constexpr Eigen::Index p = 40;
  constexpr std::size_t T = 10;
  constexpr int s = 2;
  constexpr int rows = 3000;
  constexpr double theta = 0.95;
  constexpr double sigma2 = 0.01;
  const std::vector<int> schedule(T, s);
  const std::vector<int> row_counts(T, rows);
  const auto t0 = Clock::now();
  int held = 0;
  int rejected = 0;
  int trials = 0;
  double worst_margin = 0.0;
  for (std::uint64_t k = 0; trials < 100; ++k) {
    const std::uint64_t seed = derive_seed(kSeedBase + 400, k);
    // Exhaustive delta_8 over C(40, 8) supports is out of reach; the Gershgorin
    // certificate upper-bounds it, so acceptance here implies delta_8 < 1/3.
    // All steps share n_t = n_1, so the rescaled ensembles coincide with A_1.
    MeasurementEnsemble ens = build_ensemble(p, row_counts, derive_seed(seed, 1));
    if (rip_upper_bound(ens.base(), 4 * s) >= 1.0 / 3.0) {
      ++rejected;
      if (rejected > 1000) break;
      continue;
    }
    ++trials;
    const auto truth =
        propagate_states(theta, make_innovations(p, schedule, InnovationMode::exact_sparse(), {}, derive_seed(seed, 0)));
    const Series y = observe(ens, truth.states, sigma2, derive_seed(seed, 2));
    SolverConfig cfg;
    cfg.theta_policy = ThetaPolicy::kFixed;
    cfg.theta_init = theta;
    const DeconvolutionResult r = run(ens, y, schedule, sigma2, cfg);
    // the bound covers every solution feasible at level eps; take eps so that
    // both the truth and the estimate are feasible
    const double eps = std::max(feasibility_noise_level(ens, truth.states, y), feasibility_noise_level(ens, r.states, y));
    const double bound = theorem_bound(theta, T, rows, rows, eps,
                                       compressibility(truth.states, theta, schedule).sigma, schedule);
    const double err = time_averaged_error(truth.states, r.states);
    held += err <= bound ? 1 : 0;
    worst_margin = std::max(worst_margin, err / bound);
  }
  const double elapsed = seconds_since(t0);
  return {trials == 100 && held == 100 && elapsed < 120.0,
          "bound held in " + std::to_string(held) + "/" + std::to_string(trials) + " (largest error/bound " +
              fmt(worst_margin, 3) + ", " + std::to_string(rejected) + " ensembles rejected), " + fmt(elapsed, 3) +
              " s (< 120 s)"};
}

Outcome criterion_5() {
  const SimulationSpec spec = paper_spec();
  SolverConfig cfg = known_theta_config();
  cfg.theta_policy = ThetaPolicy::kEstimated;
  cfg.theta_init = 0.5;
  cfg.objective_tol = 1e-6;
  int within = 0;
  double worst = 0.0;
  std::string thetas;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const SimulatedCell cell = simulate_cell(spec, Schedule{8, 4}, kThetaSnrDb, 0.5, kSeedBase + 500 + k);
    const DeconvolutionResult r = run(cell.ensemble, cell.observations, cell.sparsity, spec.sigma2, cfg);
    const double dev = std::abs(r.theta - 0.95);
    within += dev <= kThetaTolerance ? 1 : 0;
    worst = std::max(worst, dev);
    thetas += (k ? "," : "") + fmt(r.theta, 3);
  }
  return {within >= 18, "|theta_hat - 0.95| <= " + fmt(kThetaTolerance) + " in " + std::to_string(within) +
                            "/20 (>= 18), worst deviation " + fmt(worst, 3) + " at " + fmt(kThetaSnrDb, 3) +
                            " dB; theta_hat = " + thetas};
}

Outcome criterion_6() {
  const SimulationSpec spec = paper_spec();
  const SolverConfig cfg = known_theta_config();
  std::size_t found = 0;
  std::size_t total = 0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const SimulatedCell cell = simulate_cell(spec, Schedule{8, 4}, kDetectionSnrDb, 0.75, kSeedBase + 600 + k);
    const DeconvolutionResult r = run(cell.ensemble, cell.observations, cell.sparsity, spec.sigma2, cfg);
    const SpikeTrain train = detect_spikes(r.states, confidence_bands(r, 0.9), r.theta);

    std::vector<double> amps;
    for (const auto& w : cell.truth.innovations)
      for (Eigen::Index j = 0; j < w.size(); ++j)
        if (w(j) != 0.0) amps.push_back(std::abs(w(j)));
    std::sort(amps.begin(), amps.end());
    const double cut = amps[(amps.size() * 3) / 4];  // top quartile by magnitude

    std::vector<std::vector<std::size_t>> strong(static_cast<std::size_t>(spec.p));
    for (std::size_t t = 0; t < spec.T; ++t)
      for (Eigen::Index j = 0; j < spec.p; ++j)
        if (std::abs(cell.truth.innovations[t](j)) >= cut && cell.truth.innovations[t](j) != 0.0)
          strong[static_cast<std::size_t>(j)].push_back(t);
    for (std::size_t j = 0; j < strong.size(); ++j) {
      total += strong[j].size();
      found += match_times(strong[j], train.times[j], 1);
    }
  }
  const double recall = static_cast<double>(found) / static_cast<double>(total);
  return {recall >= kRecallThreshold, "top-quartile recall " + fmt(recall) + " (" + std::to_string(found) + "/" +
                                          std::to_string(total) + ", >= " + fmt(kRecallThreshold) +
                                          ") at compression 0.75, " + fmt(kDetectionSnrDb, 3) + " dB"};
}

Outcome criterion_7() {
  const auto& runs = paper_runs(50);
  double mean = 0.0;
  double lo = 1.0;
  double hi = 0.0;
  for (std::size_t k = 0; k < 50; ++k) {
    mean += runs[k].coverage / 50.0;
    lo = std::min(lo, runs[k].coverage);
    hi = std::max(hi, runs[k].coverage);
  }
  return {mean >= 0.85 && mean <= 0.97, "mean 90% band coverage " + fmt(mean) + " over 50 trials (range " + fmt(lo) +
                                            ".." + fmt(hi) + "), target [0.85, 0.97]"};
}

Outcome criterion_8() {
  SimulationSpec spec = paper_spec();
  spec.p = 100;
  SolverConfig cfg = known_theta_config();
  cfg.theta_policy = ThetaPolicy::kEstimated;
  cfg.theta_init = 0.5;
  cfg.outer_iterations = 5;
  cfg.inner_iterations = 2;
  cfg.warm_theta_iterations = 2;
  cfg.warm_theta_tol = 0.0;
  auto timed = [&](std::size_t T, std::uint64_t seed) {
    spec.T = T;
    const SimulatedCell cell = simulate_cell(spec, Schedule{8, 4}, 5.0, 0.5, seed);
    const auto t0 = Clock::now();
    const auto r = run(cell.ensemble, cell.observations, cell.sparsity, spec.sigma2, cfg);
    const double s = seconds_since(t0);
    if (r.iterations != cfg.outer_iterations) return -1.0;
    return s;
  };
  std::vector<double> ratios;
  for (std::uint64_t k = 0; k < 5; ++k) {
    const double a = timed(200, kSeedBase + 800 + k);
    const double b = timed(400, kSeedBase + 800 + k);
    ratios.push_back(a > 0.0 && b > 0.0 ? b / a : 0.0);
  }
  std::sort(ratios.begin(), ratios.end());
  const double median = ratios[2];
  return {median >= 1.7 && median <= 2.3,
          "median time ratio T=400/T=200 " + fmt(median) + " (ratios " + fmt(ratios.front()) + ".." +
              fmt(ratios.back()) + "), target [1.7, 2.3]"};
}

Outcome criterion_9() {
  double worst = 0.0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const std::uint64_t seed = derive_seed(kSeedBase + 900, k);
    const Eigen::Index p = 50;
    const int n = 25;
    const int s = 3;
    const double sigma2 = 0.1;
    const MeasurementEnsemble ens = build_ensemble(p, {n}, derive_seed(seed, 1));
    const auto truth =
        propagate_states(0.5, make_innovations(p, {s}, InnovationMode::exact_sparse(), {}, derive_seed(seed, 0)));
    const Series y = observe(ens, truth.states, sigma2, derive_seed(seed, 2));

    SolverConfig cfg;
    cfg.lambda_scale = kLambdaScale;
    cfg.theta_policy = ThetaPolicy::kFixed;
    cfg.theta_init = 0.5;  // irrelevant at T = 1 since x_0 = 0
    cfg.outer_iterations = 6000;
    cfg.objective_tol = 0.0;
    const DeconvolutionResult r = run(ens, y, {s}, sigma2, cfg);

    BPConfig bc;
    bc.max_iterations = 200000;
    bc.tolerance = 1e-15;
    bc.kkt_tol = 1e-9;
    // matched lambda: the T = 1 objective times n sigma2
    const double lambda_bp = r.lambda * n * sigma2 / std::sqrt(static_cast<double>(s));
    const BPResult bp = basis_pursuit_denoise(ens.matrix(0), y[0], lambda_bp, bc);
    const double den = std::max(bp.x.norm(), 1e-12);
    worst = std::max(worst, (r.states[0] - bp.x).norm() / den);
  }
  return {worst <= 1e-4, "T=1 vs basis pursuit, max relative difference " + fmt(worst, 3) + " over 20 (<= 1e-4)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria = {
      {1, {"smoother matches joint oracle", criterion_1}},
      {2, {"surrogate monotonicity", criterion_2}},
      {3, {"baseline dominance", criterion_3}},
      {4, {"stability bound", criterion_4}},
      {5, {"theta recovery", criterion_5}},
      {6, {"compression robustness", criterion_6}},
      {7, {"band coverage", criterion_7}},
      {8, {"linear-in-T scaling", criterion_8}},
      {9, {"static reduction", criterion_9}},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& [id, entry] : criteria) {
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = entry.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << id << " (" << entry.first << "): " << o.detail
              << " [" << fmt(seconds_since(t0), 4) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
