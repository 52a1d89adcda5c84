#pragma once

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nfde/history.hpp"

namespace nfde {

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::invalid_argument("csv: cannot parse number '" + std::string(s) + "'");
  return v;
}

/// Rows t, z_1, ..., z_m for every `stride`-th node in [0, t_end].
inline void write_trajectory_csv(std::ostream& out, const Trajectory& tr, long stride = 1) {
  if (stride < 1) throw std::invalid_argument("csv: stride must be >= 1");
  out << "t";
  for (int i = 0; i < tr.dim(); ++i) out << ",z_" << i + 1;
  out << '\n';
  for (long n = 0; n <= tr.last(); n += stride) {
    out << format_double(static_cast<double>(n) * tr.step());
    for (int i = 0; i < tr.dim(); ++i) out << ',' << format_double(tr.value(n, i));
    out << '\n';
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

/// History from a file with header s,x_1..x_m and rows at uniformly spaced s ending at 0.
inline History read_history_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("csv: empty file '" + path + "'");
  const auto header = split_csv_line(line);
  if (header.size() < 2) throw std::invalid_argument("csv: need a time column and at least one component");
  const std::size_t m = header.size() - 1;
  std::vector<double> times;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != m + 1) throw std::invalid_argument("csv: ragged row in '" + path + "'");
    times.push_back(parse_double(cells[0]));
    for (std::size_t i = 0; i < m; ++i) values.push_back(parse_double(cells[i + 1]));
  }
  if (times.size() < 2) throw std::invalid_argument("csv: need at least two rows");
  const double step = times[1] - times[0];
  if (!(step > 0.0)) throw std::invalid_argument("csv: times must increase");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (std::abs(times[k] - times[k - 1] - step) > 1e-9 * std::max(1.0, std::abs(times[k])))
      throw std::invalid_argument("csv: times must be uniformly spaced");
  if (std::abs(times.back()) > 1e-9 * step) throw std::invalid_argument("csv: last row must be at s = 0");
  Eigen::MatrixXd s(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(times.size()));
  for (std::size_t k = 0; k < times.size(); ++k)
    for (std::size_t i = 0; i < m; ++i) s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = values[k * m + i];
  return History(step, std::move(s));
}

inline void write_history_csv(std::ostream& out, const History& x) {
  out << "s";
  for (int i = 0; i < x.dim(); ++i) out << ",x_" << i + 1;
  out << '\n';
  for (long k = 0; k < x.nodes(); ++k) {
    out << format_double(x.node_time(k));
    for (int i = 0; i < x.dim(); ++i) out << ',' << format_double(x.samples()(i, k));
    out << '\n';
  }
}

} // namespace nfde
