#ifndef DCS_TRACE_IO_HPP
#define DCS_TRACE_IO_HPP

#include <charconv>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "dcs/core.hpp"
#include "dcs/ensemble.hpp"
#include "dcs/spikes.hpp"

namespace dcs {

/// Traces as read from disk: one p-vector per sample.
struct TraceDataset {
  Series traces;
  double fps = 30.0;
  std::optional<std::pair<std::size_t, std::size_t>> inactive;  // [begin, end)

  std::size_t samples() const { return traces.size(); }
  Eigen::Index coordinates() const { return traces.empty() ? 0 : traces.front().size(); }

  void validate() const {
    require(traces.size() >= 2, "a trace dataset needs at least 2 samples");
    require(all_finite(traces), "trace entries must be finite");
    require(fps > 0.0, "sampling rate must be positive");
  }
};

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view field, std::size_t line_no) {
  field = trim(field);
  double v = 0.0;
  const auto r = std::from_chars(field.data(), field.data() + field.size(), v);
  if (r.ec != std::errc() || r.ptr != field.data() + field.size())
    throw ValidationError("line " + std::to_string(line_no) + ": not a number: '" + std::string(field) + "'");
  return v;
}

inline long long parse_index(std::string_view field, std::size_t line_no) {
  field = trim(field);
  long long v = 0;
  const auto r = std::from_chars(field.data(), field.data() + field.size(), v);
  if (r.ec != std::errc() || r.ptr != field.data() + field.size() || v < 0)
    throw ValidationError("line " + std::to_string(line_no) + ": not an index: '" + std::string(field) + "'");
  return v;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

inline void finish(std::ostream& os, const std::string& what) {
  os.flush();
  if (!os) throw IoError("write failed: " + what);
}

}  // namespace detail

/// Wide layout: header coord_0..coord_{p-1}, one row per time sample.
inline void write_series_csv(std::ostream& os, const Series& s) {
  require(!s.empty(), "nothing to write");
  const Eigen::Index p = s.front().size();
  for (Eigen::Index j = 0; j < p; ++j) os << (j ? "," : "") << "coord_" << j;
  os << '\n';
  for (const auto& row : s) {
    require(row.size() == p, "ragged series");
    for (Eigen::Index j = 0; j < p; ++j) os << (j ? "," : "") << format_double(row(j));
    os << '\n';
  }
}

inline Series read_series_csv(std::istream& is) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(is, line)) throw ValidationError("line 1: missing header");
  const auto header = detail::split_commas(detail::trim(line));
  for (std::size_t j = 0; j < header.size(); ++j)
    if (detail::trim(header[j]) != "coord_" + std::to_string(j))
      throw ValidationError("line 1: expected column coord_" + std::to_string(j));
  const auto p = static_cast<Eigen::Index>(header.size());

  Series out;
  while (std::getline(is, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_commas(line);
    if (static_cast<Eigen::Index>(fields.size()) != p)
      throw ValidationError("line " + std::to_string(line_no) + ": expected " + std::to_string(p) +
                            " values, found " + std::to_string(fields.size()));
    Vector row(p);
    for (Eigen::Index j = 0; j < p; ++j) row(j) = detail::parse_double(fields[static_cast<std::size_t>(j)], line_no);
    out.push_back(std::move(row));
  }
  return out;
}

inline void save_series_csv(const std::string& path, const Series& s) {
  auto out = detail::open_out(path);
  write_series_csv(out, s);
  detail::finish(out, path);
}

inline Series load_series_csv(const std::string& path) {
  auto in = detail::open_in(path);
  return read_series_csv(in);
}

/// Reads a trace CSV into a dataset and validates it.
inline TraceDataset load_trace_dataset(const std::string& path, double fps,
                                       std::optional<std::pair<std::size_t, std::size_t>> inactive = {}) {
  TraceDataset d{load_series_csv(path), fps, inactive};
  d.validate();
  return d;
}

/// Long layout: time_index,row,value for every measurement.
inline void write_observations_csv(std::ostream& os, const Series& y) {
  os << "time_index,row,value\n";
  for (std::size_t t = 0; t < y.size(); ++t)
    for (Eigen::Index i = 0; i < y[t].size(); ++i) os << t << ',' << i << ',' << format_double(y[t](i)) << '\n';
}

inline Series read_observations_csv(std::istream& is, const MeasurementEnsemble& ens) {
  Series y;
  for (std::size_t t = 0; t < ens.steps(); ++t) y.push_back(Vector::Constant(ens.rows(t), std::nan("")));
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(is, line) || detail::trim(line) != "time_index,row,value")
    throw ValidationError("line 1: expected header time_index,row,value");
  while (std::getline(is, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_commas(line);
    if (f.size() != 3)
      throw ValidationError("line " + std::to_string(line_no) + ": expected 3 values, found " + std::to_string(f.size()));
    const auto t = static_cast<std::size_t>(detail::parse_index(f[0], line_no));
    const auto i = detail::parse_index(f[1], line_no);
    if (t >= ens.steps() || i >= ens.rows(t))
      throw ValidationError("line " + std::to_string(line_no) + ": index outside the ensemble");
    y[t](i) = detail::parse_double(f[2], line_no);
  }
  for (std::size_t t = 0; t < y.size(); ++t)
    if (!y[t].allFinite()) throw ValidationError("observations missing or non-finite at time " + std::to_string(t));
  return y;
}

inline void save_observations_csv(const std::string& path, const Series& y) {
  auto out = detail::open_out(path);
  write_observations_csv(out, y);
  detail::finish(out, path);
}

inline Series load_observations_csv(const std::string& path, const MeasurementEnsemble& ens) {
  auto in = detail::open_in(path);
  return read_observations_csv(in, ens);
}

/// coordinate,time_index,amplitude, ordered by coordinate then time.
inline void write_raster_csv(std::ostream& os, const SpikeTrain& train) {
  os << "coordinate,time_index,amplitude\n";
  for (const Spike& s : train.raster()) os << s.coordinate << ',' << s.time << ',' << format_double(s.amplitude) << '\n';
}

inline void save_raster_csv(const std::string& path, const SpikeTrain& train) {
  auto out = detail::open_out(path);
  write_raster_csv(out, train);
  detail::finish(out, path);
}

inline void save_text(const std::string& path, const std::string& text) {
  auto out = detail::open_out(path);
  out << text;
  detail::finish(out, path);
}

}  // namespace dcs

#endif  // DCS_TRACE_IO_HPP
