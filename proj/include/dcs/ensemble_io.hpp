#ifndef DCS_ENSEMBLE_IO_HPP
#define DCS_ENSEMBLE_IO_HPP

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "dcs/ensemble.hpp"

namespace dcs {

// Container layout, all fields little-endian:
//   magic  "DCSENS01"        8 bytes
//   p, T, seed               3 x u64
//   row_counts               T x u64
//   A_1                      n_1 x p f64, row-major
inline constexpr std::array<char, 8> kEnsembleMagic = {'D', 'C', 'S', 'E', 'N', 'S', '0', '1'};

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw IoError("ensemble file truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline void write_ensemble(std::ostream& os, const MeasurementEnsemble& ens) {
  os.write(kEnsembleMagic.data(), kEnsembleMagic.size());
  detail::put_u64(os, static_cast<std::uint64_t>(ens.dim()));
  detail::put_u64(os, ens.steps());
  detail::put_u64(os, ens.seed());
  for (int n : ens.row_counts()) detail::put_u64(os, static_cast<std::uint64_t>(n));
  const Matrix& a = ens.base();
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) detail::put_u64(os, std::bit_cast<std::uint64_t>(a(i, j)));
  if (!os) throw IoError("failed writing ensemble");
}

inline MeasurementEnsemble read_ensemble(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kEnsembleMagic)
    throw IoError("not an ensemble container");
  const auto p = detail::get_u64(is);
  const auto T = detail::get_u64(is);
  const auto seed = detail::get_u64(is);
  if (p == 0 || T == 0 || p > (1u << 24) || T > (1u << 24)) throw IoError("corrupt ensemble header");
  std::vector<int> rows(T);
  for (auto& n : rows) {
    const auto v = detail::get_u64(is);
    if (v == 0 || v > (1u << 24)) throw IoError("corrupt row count");
    n = static_cast<int>(v);
  }
  Matrix a(rows.front(), static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = std::bit_cast<double>(detail::get_u64(is));
  try {
    return MeasurementEnsemble(std::move(a), std::move(rows), seed);
  } catch (const ValidationError& e) {
    throw IoError(std::string("invalid ensemble: ") + e.what());
  }
}

inline void save_ensemble(const std::string& path, const MeasurementEnsemble& ens) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_ensemble(os, ens);
}

inline MeasurementEnsemble load_ensemble(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return read_ensemble(is);
}

}  // namespace dcs

#endif  // DCS_ENSEMBLE_IO_HPP
