#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hawkesq/errors.hpp"

namespace hawkesq {

/// One realised event sequence of a (multivariate) point process on (0, T].
struct PointPath {
  double horizon = 0.0;
  std::vector<std::vector<double>> times;  // per dimension, strictly increasing

  std::size_t dimension() const noexcept { return times.size(); }

  /// N_i(0, t] for t in [0, T].
  std::size_t count(std::size_t dim, double t) const {
    const auto& ts = times.at(dim);
    return static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), t) - ts.begin());
  }

  std::size_t total(std::size_t dim) const { return times.at(dim).size(); }

  /// Throws unless every dimension is strictly increasing inside (0, T].
  void check() const {
    for (const auto& ts : times) {
      for (std::size_t n = 0; n < ts.size(); ++n) {
        if (!(ts[n] > 0.0) || ts[n] > horizon) throw ArgumentError("point path: event outside (0, T]");
        if (n > 0 && !(ts[n] > ts[n - 1])) throw ArgumentError("point path: times not strictly increasing");
      }
    }
  }

  bool operator==(const PointPath&) const = default;
};

// CSV layout: header "replication,dimension,event_time", one row per event.
inline void write_paths_csv(std::ostream& os, std::span<const PointPath> paths) {
  os << "replication,dimension,event_time\n";
  os.precision(17);
  for (std::size_t r = 0; r < paths.size(); ++r)
    for (std::size_t d = 0; d < paths[r].dimension(); ++d)
      for (double t : paths[r].times[d]) os << r << ',' << d << ',' << t << '\n';
}

/// Reads the CSV layout back. Horizon and dimension are not stored in CSV and
/// must be supplied.
inline std::vector<PointPath> read_paths_csv(std::istream& is, double horizon, std::size_t dimension) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("replication,dimension,event_time", 0) != 0)
    throw ConfigError("point path csv: missing header");
  std::vector<PointPath> paths;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::size_t r = 0, d = 0;
    double t = 0.0;
    char c1 = 0, c2 = 0;
    if (!(row >> r >> c1 >> d >> c2 >> t) || c1 != ',' || c2 != ',')
      throw ConfigError("point path csv: malformed row '" + line + "'");
    if (d >= dimension) throw ConfigError("point path csv: dimension index out of range");
    while (paths.size() <= r) paths.push_back(PointPath{horizon, std::vector<std::vector<double>>(dimension)});
    paths[r].times[d].push_back(t);
  }
  for (const auto& p : paths) p.check();
  return paths;
}

namespace detail {
template <class T>
void put_le(std::ostream& os, T value) {
  static_assert(std::endian::native == std::endian::little, "binary cache assumes a little-endian host");
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  os.write(buf, sizeof(T));
}
template <class T>
T get_le(std::istream& is) {
  T value{};
  char buf[sizeof(T)];
  if (!is.read(buf, sizeof(T))) throw ConfigError("point path binary: truncated stream");
  std::memcpy(&value, buf, sizeof(T));
  return value;
}
}  // namespace detail

/// Binary cache: "HKPP" magic, u32 version (1), u64 path count, then per path
/// u32 dimension, f64 horizon and, per dimension, u64 count followed by that
/// many f64 event times. All little-endian.
inline void write_paths_binary(std::ostream& os, std::span<const PointPath> paths) {
  os.write("HKPP", 4);
  detail::put_le<std::uint32_t>(os, 1);
  detail::put_le<std::uint64_t>(os, paths.size());
  for (const auto& p : paths) {
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.dimension()));
    detail::put_le<double>(os, p.horizon);
    for (const auto& ts : p.times) {
      detail::put_le<std::uint64_t>(os, ts.size());
      for (double t : ts) detail::put_le<double>(os, t);
    }
  }
}

inline std::vector<PointPath> read_paths_binary(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "HKPP") throw ConfigError("point path binary: bad magic");
  if (detail::get_le<std::uint32_t>(is) != 1) throw ConfigError("point path binary: unsupported version");
  const auto n = detail::get_le<std::uint64_t>(is);
  std::vector<PointPath> paths(n);
  for (auto& p : paths) {
    p.times.resize(detail::get_le<std::uint32_t>(is));
    p.horizon = detail::get_le<double>(is);
    for (auto& ts : p.times) {
      ts.resize(detail::get_le<std::uint64_t>(is));
      for (double& t : ts) t = detail::get_le<double>(is);
    }
    p.check();
  }
  return paths;
}

}  // namespace hawkesq
