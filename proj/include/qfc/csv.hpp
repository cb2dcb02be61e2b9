#pragma once

// Locale-independent CSV serialization of records, state trajectories,
// tracked moments, and innovations paths. Reals are written with 17
// significant digits so round-trips are bit-exact.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qfc/record.hpp"

namespace qfc {

struct IoError : Error {
  using Error::Error;
};

namespace detail {

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  return in;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline double parse_real(const std::string& s, const std::string& where) {
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw IoError("malformed number '" + s + "' in " + where);
  }
  if (pos != s.size()) throw IoError("trailing garbage in number '" + s + "' in " + where);
  return v;
}

}  // namespace detail

// records: t, dY — one row per step, t being the left endpoint of the step.
inline void write_record_csv(const std::string& path, const MeasurementRecord& record) {
  auto out = detail::open_out(path);
  out << "t,dY\n";
  for (std::size_t k = 0; k < record.n_steps(); ++k)
    out << detail::format_real(record.grid[k]) << ','
        << detail::format_real(record.increments[k]) << '\n';
  if (!out) throw IoError("write failure: " + path);
}

inline MeasurementRecord read_record_csv(const std::string& path, Scheme scheme) {
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line) || detail::split_csv_line(line)[0] != "t")
    throw IoError("missing record header in " + path);
  MeasurementRecord rec;
  rec.scheme = scheme;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != 2)
      throw IoError(path + ":" + std::to_string(row) + ": expected 2 columns");
    rec.grid.push_back(detail::parse_real(f[0], path));
    rec.increments.push_back(detail::parse_real(f[1], path));
  }
  if (rec.increments.empty()) throw IoError("empty record in " + path);
  // Stored rows carry left endpoints; rebuild the uniform grid from the step
  // size so repeated write/read cycles are bit-exact.
  if (rec.grid.size() < 2)
    throw IoError("record in " + path + " has a single row; step size is ambiguous");
  const double t0 = rec.grid.front();
  const double dt = rec.grid[1] - rec.grid[0];
  std::vector<double> grid(rec.increments.size() + 1);
  for (std::size_t k = 0; k < grid.size(); ++k)
    grid[k] = t0 + dt * static_cast<double>(k);
  for (std::size_t k = 0; k < rec.grid.size(); ++k)
    if (std::abs(grid[k] - rec.grid[k]) > 1e-12)
      throw IoError("record in " + path + " has a non-uniform time column");
  rec.grid = std::move(grid);
  rec.validate();
  return rec;
}

// states: t, then re/im of the density-matrix entries row-major.
inline void write_states_csv(const std::string& path, const std::vector<double>& grid,
                             const std::vector<DensityMatrix>& states) {
  if (grid.size() != states.size())
    throw IoError("write_states_csv: grid/state length mismatch");
  auto out = detail::open_out(path);
  const int dim = states.empty() ? 0 : states.front().dim();
  out << 't';
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      out << ",re_" << i << j << ",im_" << i << j;
  out << '\n';
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out << detail::format_real(grid[k]);
    const Mat& rho = states[k].mat();
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        out << ',' << detail::format_real(rho(i, j).real()) << ','
            << detail::format_real(rho(i, j).imag());
    out << '\n';
  }
  if (!out) throw IoError("write failure: " + path);
}

// moments: t, then one column per tracked observable.
inline void write_moments_csv(const std::string& path, const std::vector<double>& grid,
                              const std::vector<std::string>& names,
                              const std::vector<std::vector<double>>& moments) {
  if (names.size() != moments.size())
    throw IoError("write_moments_csv: name/column count mismatch");
  auto out = detail::open_out(path);
  out << 't';
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out << detail::format_real(grid[k]);
    for (const auto& col : moments) {
      if (col.size() != grid.size())
        throw IoError("write_moments_csv: column length mismatch");
      out << ',' << detail::format_real(col[k]);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failure: " + path);
}

// innovations: t, increment — one row per step.
inline void write_innovations_csv(const std::string& path, const std::vector<double>& grid,
                                  const std::vector<double>& innovations) {
  if (grid.size() != innovations.size() + 1)
    throw IoError("write_innovations_csv: grid/increment length mismatch");
  auto out = detail::open_out(path);
  out << "t,increment\n";
  for (std::size_t k = 0; k < innovations.size(); ++k)
    out << detail::format_real(grid[k]) << ',' << detail::format_real(innovations[k])
        << '\n';
  if (!out) throw IoError("write failure: " + path);
}

}  // namespace qfc
