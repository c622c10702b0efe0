#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "opkl/grid.hpp"

namespace opkl {

/// Shortest round-trip decimal form of a double; integral values print as
/// plain integers.
[[nodiscard]] inline std::string format_double(double v) {
  char buf[32];
  if (std::isfinite(v) && std::abs(v) < 1e15 && v == std::floor(v)) {
    std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
    return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Prefer the shortest representation that parses back exactly.
  for (int prec = 1; prec < 17; ++prec) {
    char probe[32];
    std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
    if (std::strtod(probe, nullptr) == v) return probe;
  }
  return buf;
}

/// Columnar table of doubles written and read as CSV with a header line.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void write(const std::string& path, const std::string& preamble = "") const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    if (!preamble.empty()) out << preamble << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i)
      out << (i ? "," : "") << columns[i];
    out << '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i)
        out << (i ? "," : "") << format_double(row[i]);
      out << '\n';
    }
  }

  static CsvTable read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    CsvTable t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
      if (!line.empty() && line[0] == '#') continue;
      if (trim_ws(line).empty()) continue;
      std::stringstream ss(line);
      std::string cell;
      if (!have_header) {
        while (std::getline(ss, cell, ',')) t.columns.push_back(trim_ws(cell));
        have_header = true;
        continue;
      }
      std::vector<double> row;
      while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
      if (row.size() != t.columns.size())
        throw std::runtime_error(path + ": row width does not match header");
      t.rows.push_back(std::move(row));
    }
    if (!have_header) throw std::runtime_error(path + ": no header line");
    return t;
  }

  [[nodiscard]] int column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    return -1;
  }

private:
  static std::string trim_ws(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }
};

/// Grid function as rows (x, value).
inline void write_fn_csv(const GridFn& f, const std::string& path) {
  CsvTable t;
  t.columns = {"x", "value"};
  for (int i = 0; i < f.grid.size(); ++i)
    t.rows.push_back({f.grid.points()[i], f.values[i]});
  t.write(path);
}

[[nodiscard]] inline GridFn read_fn_csv(const std::string& path) {
  const CsvTable t = CsvTable::read(path);
  if (t.columns != std::vector<std::string>{"x", "value"})
    throw std::runtime_error(path + ": expected header x,value");
  Eigen::VectorXd xs(t.rows.size()), vs(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    xs[i] = t.rows[i][0];
    vs[i] = t.rows[i][1];
  }
  return GridFn(Grid1D::from_points(xs), vs);
}

/// Kernel matrix with a shape preamble comment.
inline void write_green_csv(const Eigen::MatrixXd& g, const Grid1D& gy, const Grid1D& gx,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "# gridY=" << gy.size() << " gridX=" << gx.size() << " domain=[" << gx.a() << ","
      << gx.b() << "]\n";
  for (int i = 0; i < g.rows(); ++i) {
    for (int j = 0; j < g.cols(); ++j) out << (j ? "," : "") << format_double(g(i, j));
    out << '\n';
  }
}

[[nodiscard]] inline Eigen::MatrixXd read_green_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path + ": no data rows");
  Eigen::MatrixXd g(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw std::runtime_error(path + ": ragged rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j) g(i, j) = rows[i][j];
  }
  return g;
}

}  // namespace opkl
