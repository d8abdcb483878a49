// dcs: simulate, deconvolve, baseline, metrics and bound-check subcommands.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dcs/basis_pursuit.hpp"
#include "dcs/cell_io.hpp"
#include "dcs/config_json.hpp"
#include "dcs/experiment.hpp"
#include "dcs/metrics.hpp"
#include "dcs/sensing.hpp"
#include "dcs/solver.hpp"
#include "dcs/spikes.hpp"
#include "dcs/trace_io.hpp"

namespace fs = std::filesystem;
using namespace dcs;

namespace {

struct SolverFlags {
  std::string config_path;
  std::optional<double> lambda;
  std::optional<double> lambda_scale;
  std::optional<double> eps;
  std::optional<int> outer;
  std::optional<int> inner;
  std::optional<double> objective_tol;
  std::optional<double> theta_init;
  std::optional<std::string> theta_policy;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Solver config JSON (keys as in SolverConfig)");
    cmd->add_option("--lambda", lambda, "Fixed lambda (disables the default rule)");
    cmd->add_option("--lambda-scale", lambda_scale, "Multiplier on the default lambda rule");
    cmd->add_option("--eps", eps, "IRLS smoothing epsilon");
    cmd->add_option("--outer", outer, "Outer iterations L");
    cmd->add_option("--inner", inner, "Inner iterations M");
    cmd->add_option("--objective-tol", objective_tol, "Relative objective change for early stop (0 = off)");
    cmd->add_option("--theta-init", theta_init, "Initial theta (the known theta when fixed)");
    cmd->add_option("--theta-policy", theta_policy, "fixed | estimated");
  }

  SolverConfig resolve(SolverConfig base) const {
    if (!config_path.empty()) base = load_solver_config(config_path, base);
    if (lambda) {
      base.lambda = *lambda;
      base.lambda_auto = false;
    }
    if (lambda_scale) base.lambda_scale = *lambda_scale;
    if (eps) base.eps_smooth = *eps;
    if (outer) base.outer_iterations = *outer;
    if (inner) base.inner_iterations = *inner;
    if (objective_tol) base.objective_tol = *objective_tol;
    if (theta_init) base.theta_init = *theta_init;
    if (theta_policy) base.theta_policy = theta_policy_from_string(*theta_policy);
    base.validate();
    return base;
  }
};

std::pair<std::size_t, std::size_t> parse_range(const std::string& s) {
  const auto colon = s.find(':');
  require(colon != std::string::npos, "range must look like begin:end");
  try {
    return {std::stoul(s.substr(0, colon)), std::stoul(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw ValidationError("range must look like begin:end, got '" + s + "'");
  }
}

void write_objective_csv(const std::string& path, const DeconvolutionResult& r) {
  std::ostringstream os;
  os << "iteration,objective,dual_objective,theta,surrogate\n";
  for (std::size_t i = 0; i < r.objective_trace.size(); ++i) {
    os << i << ',' << format_double(r.objective_trace[i]) << ',' << format_double(r.dual_trace[i]) << ','
       << format_double(r.theta_trace[i]) << ',';
    if (i >= 1) os << format_double(r.surrogate_trace[i - 1]);
    os << '\n';
  }
  save_text(path, os.str());
}

void write_result(const fs::path& out, const DeconvolutionResult& r, const ConfidenceBands& bands,
                  const SpikeTrain& spikes) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string());
  save_series_csv((out / "states.csv").string(), r.states);
  save_series_csv((out / "innovations.csv").string(), r.innovations);
  save_series_csv((out / "lower.csv").string(), bands.lower);
  save_series_csv((out / "upper.csv").string(), bands.upper);
  save_raster_csv((out / "spikes.csv").string(), spikes);
  write_objective_csv((out / "objective.csv").string(), r);
  const nlohmann::json summary = {{"theta", r.theta},       {"lambda", r.lambda},
                                  {"iterations", r.iterations}, {"converged", r.converged},
                                  {"clamp_events", r.clamp_events}, {"band_level", bands.level},
                                  {"spikes", spikes.count()}};
  save_text((out / "result.json").string(), summary.dump(2) + "\n");
}

int cmd_simulate(const std::vector<std::uint64_t>& seeds, const std::vector<double>& snrs,
                 const std::vector<double>& comps, const Schedule& schedule, const SimulationSpec& sim,
                 const std::string& out) {
  ExperimentSpec spec;
  spec.seeds = seeds;
  spec.snrs_db = snrs;
  spec.compressions = comps;
  spec.schedules = {schedule};
  spec.simulation = sim;
  spec.output_dir = out;
  spec.validate();
  const auto cells = spec.cells();
  std::mutex log_mutex;
  parallel_for(cells.size(), worker_count(), [&](std::size_t i) {
    const auto& c = cells[i];
    const SimulatedCell cell = simulate_cell(sim, c.schedule, c.snr_db, c.compression, c.seed);
    save_cell(fs::path(out) / cell_name(cell), cell, sim);
    std::lock_guard lock(log_mutex);
    std::cout << cell_name(cell) << " measured_snr_db=" << format_double(cell.measured_snr_db) << '\n';
  });
  return 0;
}

struct DeconvolveInput {
  std::string cell;
  std::string trace;
  double fps = 30.0;
  std::optional<double> sigma2;
  std::string inactive;
  double ratio = 1.0;
  int sparsity = 4;
  int sparsity_first = 0;
  std::uint64_t seed = 1;
  double level = 0.9;
  std::string out;
};

int cmd_deconvolve(const DeconvolveInput& in, const SolverFlags& flags) {
  require(in.cell.empty() != in.trace.empty(), "give exactly one of --cell or --trace");
  require(in.level > 0.0 && in.level < 1.0, "--level must lie in (0, 1)");

  std::optional<MeasurementEnsemble> ens;
  Series y;
  std::vector<int> schedule;
  double sigma2 = 0.0;
  SolverConfig base;
  fs::path out = in.out;

  if (!in.cell.empty()) {
    LoadedCell c = load_cell(in.cell);
    ens = c.ensemble;
    y = std::move(c.observations);
    schedule = c.sparsity;
    sigma2 = in.sigma2.value_or(c.sigma2);
    if (out.empty()) out = fs::path(in.cell) / "dcs";
  } else {
    std::optional<std::pair<std::size_t, std::size_t>> range;
    if (!in.inactive.empty()) range = parse_range(in.inactive);
    const TraceDataset data = load_trace_dataset(in.trace, in.fps, range);
    if (in.sigma2) {
      sigma2 = *in.sigma2;
    } else {
      require(range.has_value(), "give --sigma2 or an --inactive range for noise estimation");
      sigma2 = estimate_noise_variance(data.traces, range->first, range->second);
    }
    require(sigma2 > 0.0, "noise variance must be positive (constant traces?)");
    const std::size_t T = data.samples();
    const Eigen::Index p = data.coordinates();
    schedule.assign(T, in.sparsity);
    if (in.sparsity_first > 0) schedule[0] = in.sparsity_first;
    require(in.ratio > 0.0 && in.ratio <= 1.0, "--ratio must lie in (0, 1]");
    if (in.ratio == 1.0) {
      ens = identity_ensemble(p, T);
      y = data.traces;
    } else {
      const int n = std::max(1, static_cast<int>(std::ceil(in.ratio * static_cast<double>(p))));
      ens = build_ensemble(p, std::vector<int>(T, n), in.seed);
      for (std::size_t t = 0; t < T; ++t) y.push_back(ens->matrix(t) * data.traces[t]);
      // trace noise seen through rows of squared norm p / n
      sigma2 *= static_cast<double>(p) / n;
    }
    if (out.empty()) out = "dcs_out";
  }

  const SolverConfig cfg = flags.resolve(base);
  const DeconvolutionResult r = run(*ens, y, schedule, sigma2, cfg);
  const ConfidenceBands bands = confidence_bands(r, in.level);
  const SpikeTrain spikes = detect_spikes(r.states, bands, r.theta);
  write_result(out, r, bands, spikes);
  std::cout << "theta=" << format_double(r.theta) << " lambda=" << format_double(r.lambda)
            << " iterations=" << r.iterations << " spikes=" << spikes.count() << " -> " << out.string() << '\n';
  return 0;
}

int cmd_baseline(const std::string& cell_dir, double lambda_scale, const std::string& out_arg) {
  LoadedCell c = load_cell(cell_dir);
  const auto lambdas = bp_lambdas(c.ensemble, c.sparsity, c.sigma2, lambda_scale);
  const BPSequence bp = bp_sequence(c.ensemble, c.observations, lambdas);
  const fs::path out = out_arg.empty() ? fs::path(cell_dir) / "bp" : fs::path(out_arg);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string());
  save_series_csv((out / "states.csv").string(), bp.states);
  // no bands for the static baseline: spikes are read off the estimate itself
  const SpikeTrain spikes = detect_spikes(bp.states, bp.states, bp.states, c.theta);
  save_raster_csv((out / "spikes.csv").string(), spikes);
  const nlohmann::json summary = {{"all_converged", bp.all_converged()}, {"lambda_scale", lambda_scale}};
  save_text((out / "result.json").string(), summary.dump(2) + "\n");
  std::cout << "basis pursuit converged=" << bp.all_converged() << " -> " << out.string() << '\n';
  return 0;
}

SpikeTrain load_raster(const std::string& path, Eigen::Index p) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  SpikeTrain train;
  train.times.resize(static_cast<std::size_t>(p));
  train.amplitudes.resize(static_cast<std::size_t>(p));
  std::string line;
  std::getline(in, line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_commas(line);
    if (f.size() != 3) throw ValidationError(path + ": line " + std::to_string(line_no) + ": expected 3 values");
    const auto j = detail::parse_index(f[0], line_no);
    require(j < p, path + ": coordinate out of range");
    train.times[static_cast<std::size_t>(j)].push_back(static_cast<std::size_t>(detail::parse_index(f[1], line_no)));
    train.amplitudes[static_cast<std::size_t>(j)].push_back(detail::parse_double(f[2], line_no));
  }
  return train;
}

int cmd_metrics(const std::string& root, const std::string& out_arg) {
  std::vector<fs::path> cells;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && fs::exists(e.path() / "cell.json")) cells.push_back(e.path());
  std::sort(cells.begin(), cells.end());
  require(!cells.empty(), "no cell directories under " + root);

  std::ostringstream os;
  os << "cell,seed,snr_db,compression,method,error,relative_mse,precision,recall,f1,bound,bound_satisfied\n";
  for (const auto& dir : cells) {
    LoadedCell c = load_cell(dir);
    require(!c.truth.states.empty(), dir.string() + ": ground truth missing");
    const auto comp = compressibility(c.truth.states, c.theta, c.sparsity);
    const auto& rows = c.ensemble.row_counts();
    const double n2 = rows.size() > 1 ? rows[1] : rows[0];
    const double bound = theorem_bound(c.theta, c.ensemble.steps(), rows[0], n2,
                                       feasibility_noise_level(c.ensemble, c.truth.states, c.observations),
                                       comp.sigma, c.sparsity);
    for (const char* method : {"dcs", "bp"}) {
      const fs::path res = dir / method;
      if (!fs::exists(res / "states.csv")) continue;
      const Series est = load_series_csv((res / "states.csv").string());
      const SpikeTrain spikes = load_raster((res / "spikes.csv").string(), c.ensemble.dim());
      const MetricsRecord m = compute_metrics(c.truth.states, c.truth.innovations, est, spikes, bound);
      os << dir.filename().string() << ',' << c.meta.at("seed").get<std::uint64_t>() << ','
         << format_double(c.meta.at("snr_db").get<double>()) << ','
         << format_double(c.meta.at("compression").get<double>()) << ',' << method << ','
         << format_double(m.error) << ',' << format_double(m.relative_mse) << ','
         << format_double(m.detection.precision) << ',' << format_double(m.detection.recall) << ','
         << format_double(m.detection.f1) << ',' << format_double(*m.bound) << ','
         << (*m.bound_satisfied ? 1 : 0) << '\n';
    }
  }
  const std::string out = out_arg.empty() ? (fs::path(root) / "metrics.csv").string() : out_arg;
  save_text(out, os.str());
  std::cout << "wrote " << out << '\n';
  return 0;
}

struct BoundCheck {
  int trials = 100;
  Eigen::Index p = 40;
  std::size_t T = 10;
  int s = 2;
  int rows = 3000;
  double theta = 0.95;
  double sigma2 = 1e-2;
  std::uint64_t seed = 1;
  int max_draws = 20;
};

int cmd_bound_check(const BoundCheck& b) {
  require(b.trials >= 1 && b.rows >= 1 && b.s >= 1, "invalid bound-check settings");
  const Eigen::Index order = 4 * b.s;
  const std::vector<int> schedule(b.T, b.s);
  const std::vector<int> rows(b.T, b.rows);
  int held = 0;
  int rejected = 0;
  std::cout << "trial,error,bound,holds\n";
  for (int k = 0; k < b.trials; ++k) {
    const std::uint64_t seed = derive_seed(b.seed, static_cast<std::uint64_t>(k));
    std::optional<MeasurementEnsemble> ens;
    for (int draw = 0; draw < b.max_draws && !ens; ++draw) {
      MeasurementEnsemble cand = build_ensemble(b.p, rows, derive_seed(seed, 10 + static_cast<std::uint64_t>(draw)));
      const double delta = binomial(b.p, order) <= 1e5 ? rip_constant(cand.base(), order)
                                                       : rip_upper_bound(cand.base(), order);
      if (delta < 1.0 / 3.0)
        ens = std::move(cand);
      else
        ++rejected;
    }
    if (!ens) throw ValidationError("no ensemble passed the RIP check; increase --rows");
    const auto truth = propagate_states(
        b.theta, make_innovations(b.p, schedule, InnovationMode::exact_sparse(), {}, derive_seed(seed, 0)));
    const Series y = observe(*ens, truth.states, b.sigma2, derive_seed(seed, 2));
    SolverConfig cfg;
    cfg.theta_policy = ThetaPolicy::kFixed;
    cfg.theta_init = b.theta;
    const DeconvolutionResult r = run(*ens, y, schedule, b.sigma2, cfg);
    const double eps = std::max(feasibility_noise_level(*ens, truth.states, y),
                                feasibility_noise_level(*ens, r.states, y));
    const double bound = theorem_bound(b.theta, b.T, b.rows, b.rows, eps,
                                       compressibility(truth.states, b.theta, schedule).sigma, schedule);
    const double err = time_averaged_error(truth.states, r.states);
    const bool ok = err <= bound;
    held += ok ? 1 : 0;
    std::cout << k << ',' << format_double(err) << ',' << format_double(bound) << ',' << (ok ? 1 : 0) << '\n';
  }
  std::cout << "# bound held in " << held << "/" << b.trials << " trials (" << rejected
            << " ensembles rejected by the RIP check)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic compressive sensing: simulation, deconvolution and evaluation"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate ground truth, ensembles and observations for a grid");
  std::vector<std::uint64_t> seeds{1};
  std::vector<double> snrs{5.0};
  std::vector<double> comps{0.0, 0.25, 0.5, 0.75};
  Schedule schedule;
  SimulationSpec sim_spec;
  std::string sim_out = "out";
  std::string innovations = "sparse";
  double xi = 0.5;
  sim->add_option("--seeds", seeds, "Seeds (distinct)");
  sim->add_option("--snr", snrs, "SNR levels in dB");
  sim->add_option("--compression", comps, "Compression levels 1 - n/p");
  sim->add_option("--s1", schedule.first, "Sparsity at t = 1");
  sim->add_option("--s", schedule.rest, "Sparsity for t >= 2");
  sim->add_option("--p", sim_spec.p, "State dimension");
  sim->add_option("--T", sim_spec.T, "Number of time steps");
  sim->add_option("--theta", sim_spec.theta, "State transition parameter");
  sim->add_option("--sigma2", sim_spec.sigma2, "Measurement noise variance");
  sim->add_option("--innovations", innovations, "sparse | compressible")->check(CLI::IsMember({"sparse", "compressible"}));
  sim->add_option("--xi", xi, "Decay exponent for compressible innovations");
  sim->add_option("--out", sim_out, "Output directory");

  // deconvolve
  auto* dec = app.add_subcommand("deconvolve", "Run the dynamic CS solver on a cell or a trace CSV");
  DeconvolveInput din;
  SolverFlags dflags;
  dec->add_option("--cell", din.cell, "Cell directory written by simulate");
  dec->add_option("--trace", din.trace, "Trace CSV (header coord_0..coord_{p-1})");
  dec->add_option("--fps", din.fps, "Sampling rate of the trace");
  dec->add_option("--sigma2", din.sigma2, "Noise variance (overrides cell/estimate)");
  dec->add_option("--inactive", din.inactive, "Inactive sample range begin:end for noise estimation");
  dec->add_option("--ratio", din.ratio, "n/p for compressive trace mode (1 = identity observation)");
  dec->add_option("--sparsity", din.sparsity, "Assumed innovation sparsity s_t for traces");
  dec->add_option("--sparsity-first", din.sparsity_first, "Assumed s_1 for traces (default: --sparsity)");
  dec->add_option("--seed", din.seed, "Seed of the compressive ensemble");
  dec->add_option("--level", din.level, "Confidence band level");
  dec->add_option("--out", din.out, "Output directory (default: <cell>/dcs or dcs_out)");
  dflags.attach(dec);

  // baseline
  auto* base = app.add_subcommand("baseline", "Per-step basis pursuit on a cell");
  std::string base_cell;
  std::string base_out;
  double base_scale = SolverConfig{}.lambda_scale;
  base->add_option("--cell", base_cell, "Cell directory")->required();
  base->add_option("--lambda-scale", base_scale, "Multiplier on the per-step lambda rule");
  base->add_option("--out", base_out, "Output directory (default: <cell>/bp)");

  // metrics
  auto* met = app.add_subcommand("metrics", "Score dcs/ and bp/ results in every cell under a root");
  std::string met_root;
  std::string met_out;
  met->add_option("--root", met_root, "Directory holding cell directories")->required();
  met->add_option("--out", met_out, "Metrics CSV (default: <root>/metrics.csv)");

  // bound-check
  auto* bnd = app.add_subcommand("bound-check", "Check the stability bound on toy exact-sparse instances");
  BoundCheck bc;
  bnd->add_option("--trials", bc.trials, "Number of trials");
  bnd->add_option("--p", bc.p, "State dimension");
  bnd->add_option("--T", bc.T, "Number of time steps");
  bnd->add_option("--s", bc.s, "Sparsity per step");
  bnd->add_option("--rows", bc.rows, "Rows per step (large enough for the RIP certificate)");
  bnd->add_option("--theta", bc.theta, "State transition parameter");
  bnd->add_option("--sigma2", bc.sigma2, "Measurement noise variance");
  bnd->add_option("--seed", bc.seed, "Base seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) {
      if (innovations == "compressible") sim_spec.innovations = InnovationMode::compressible(xi);
      return cmd_simulate(seeds, snrs, comps, schedule, sim_spec, sim_out);
    }
    if (*dec) return cmd_deconvolve(din, dflags);
    if (*base) return cmd_baseline(base_cell, base_scale, base_out);
    if (*met) return cmd_metrics(met_root, met_out);
    if (*bnd) return cmd_bound_check(bc);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
