#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "qdcascade/correlation.hpp"
#include "qdcascade/errors.hpp"

// Little-endian layout:
//   char[8]  magic "QDCMAP01"
//   uint32   version (1)
//   uint32   reserved (0)
//   uint64   n_rows
//   float64  lattice unit (ps)
//   int64    lattice position of each t node          [n_rows]
//   uint64   number of τ nodes in each row            [n_rows]
//   float64  (re, im) pairs, row by row, τ ascending  [Σ n_tau]
// The τ nodes of row i are the t nodes below T - t_i followed by T - t_i.

namespace qdc {

inline constexpr char kMapMagic[8] = {'Q', 'D', 'C', 'M', 'A', 'P', '0', '1'};
inline constexpr std::uint32_t kMapVersion = 1;

namespace detail {

static_assert(sizeof(double) == 8);

inline bool host_is_little_endian() {
  const std::uint16_t x = 1;
  unsigned char b;
  std::memcpy(&b, &x, 1);
  return b == 1;
}

template <class T>
void put(std::ostream& os, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if (!host_is_little_endian()) std::reverse(b, b + sizeof(T));
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw IoError("truncated correlation dump");
  if (!host_is_little_endian()) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace detail

inline void write_correlation_map(const std::string& path, const CorrelationMap& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  const TimeGrid& tg = m.grid.t_grid();
  os.write(kMapMagic, 8);
  detail::put<std::uint32_t>(os, kMapVersion);
  detail::put<std::uint32_t>(os, 0);
  detail::put<std::uint64_t>(os, tg.size());
  detail::put<double>(os, tg.unit());
  for (std::size_t i = 0; i < tg.size(); ++i) detail::put<std::int64_t>(os, tg.lattice(i));
  for (std::size_t i = 0; i < tg.size(); ++i) detail::put<std::uint64_t>(os, m.grid.row_size(i));
  for (const cplx& v : m.values) {
    detail::put<double>(os, v.real());
    detail::put<double>(os, v.imag());
  }
  if (!os) throw IoError("failed writing " + path);
}

inline CorrelationMap read_correlation_map(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMapMagic, 8) != 0) throw IoError(path + ": not a correlation dump");
  if (detail::get<std::uint32_t>(is) != kMapVersion) throw IoError(path + ": unsupported version");
  detail::get<std::uint32_t>(is);
  const auto n = detail::get<std::uint64_t>(is);
  const double unit = detail::get<double>(is);
  std::vector<long> nodes(n);
  for (auto& x : nodes) x = static_cast<long>(detail::get<std::int64_t>(is));
  CorrelationMap m{TwoTimeGrid(TimeGrid(unit, nodes)), {}};
  for (std::size_t i = 0; i < n; ++i)
    if (detail::get<std::uint64_t>(is) != m.grid.row_size(i)) throw GridMismatch(path + ": row sizes do not match the grid");
  m.values.resize(m.grid.total_points());
  for (auto& v : m.values) {
    const double re = detail::get<double>(is);
    const double im = detail::get<double>(is);
    v = cplx(re, im);
  }
  return m;
}

}  // namespace qdc
