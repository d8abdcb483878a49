#ifndef DCS_CELL_IO_HPP
#define DCS_CELL_IO_HPP

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "dcs/ensemble_io.hpp"
#include "dcs/experiment.hpp"
#include "dcs/trace_io.hpp"

namespace dcs {

/// Directory name of a grid cell, e.g. seed7_snr5_comp0.5_s8-4.
inline std::string cell_name(const SimulatedCell& c) {
  return "seed" + std::to_string(c.seed) + "_snr" + format_double(c.snr_db) + "_comp" +
         format_double(c.compression) + "_s" + std::to_string(c.schedule.first) + "-" +
         std::to_string(c.schedule.rest);
}

inline nlohmann::json cell_metadata(const SimulatedCell& c, const SimulationSpec& spec) {
  return {{"seed", c.seed},
          {"p", spec.p},
          {"T", spec.T},
          {"theta", spec.theta},
          {"sigma2", spec.sigma2},
          {"snr_db", c.snr_db},
          {"measured_snr_db", c.measured_snr_db},
          {"compression", c.compression},
          {"s_first", c.schedule.first},
          {"s_rest", c.schedule.rest},
          {"row_constant", c.plan.C},
          {"row_counts", c.plan.rows}};
}

/// Writes cell.json, ensemble.bin, states.csv, innovations.csv and
/// observations.csv into dir (created if missing).
inline void save_cell(const std::filesystem::path& dir, const SimulatedCell& c, const SimulationSpec& spec) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  save_text((dir / "cell.json").string(), cell_metadata(c, spec).dump(2) + "\n");
  save_ensemble((dir / "ensemble.bin").string(), c.ensemble);
  save_series_csv((dir / "states.csv").string(), c.truth.states);
  save_series_csv((dir / "innovations.csv").string(), c.truth.innovations);
  save_observations_csv((dir / "observations.csv").string(), c.observations);
}

struct LoadedCell {
  nlohmann::json meta;
  MeasurementEnsemble ensemble;
  Series observations;
  StateTrajectory truth;  // empty when the files are absent
  std::vector<int> sparsity;
  double sigma2 = 0.0;
  double theta = 0.0;
};

inline nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

inline LoadedCell load_cell(const std::filesystem::path& dir) {
  nlohmann::json meta = load_json((dir / "cell.json").string());
  MeasurementEnsemble ens = load_ensemble((dir / "ensemble.bin").string());
  LoadedCell c{meta, ens, load_observations_csv((dir / "observations.csv").string(), ens), {}, {}, 0.0, 0.0};
  try {
    const Schedule s{meta.at("s_first").get<int>(), meta.at("s_rest").get<int>()};
    c.sparsity = s.expand(ens.steps());
    c.sigma2 = meta.at("sigma2").get<double>();
    c.theta = meta.at("theta").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError((dir / "cell.json").string() + ": " + e.what());
  }
  if (std::filesystem::exists(dir / "states.csv")) c.truth.states = load_series_csv((dir / "states.csv").string());
  if (std::filesystem::exists(dir / "innovations.csv"))
    c.truth.innovations = load_series_csv((dir / "innovations.csv").string());
  return c;
}

}  // namespace dcs

#endif  // DCS_CELL_IO_HPP
