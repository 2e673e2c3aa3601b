#include "ucgm/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ucgm {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void ensure_parent(const std::filesystem::path& path) {
  const auto parent = path.parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

void write_points_csv(const std::filesystem::path& path, const Eigen::MatrixXd& points) {
  ensure_parent(path);
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "sample_index";
  for (Eigen::Index r = 0; r < points.rows(); ++r) os << ",dim_" << r;
  os << '\n';
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    os << j;
    for (Eigen::Index r = 0; r < points.rows(); ++r) os << ',' << format_double(points(r, j));
    os << '\n';
  }
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(is, line)) return table;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                 ": not a number: '" + cell + "'");
      }
      row.push_back(v);
    }
    if (row.size() != table.header.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected " + std::to_string(table.header.size()) + " fields");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

Eigen::MatrixXd read_points_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  std::vector<int> cols;
  for (int d = 0;; ++d) {
    const int c = table.column("dim_" + std::to_string(d));
    if (c < 0) break;
    cols.push_back(c);
  }
  if (cols.empty()) {
    const int c = table.column("x0");
    if (c < 0) throw std::runtime_error(path.string() + ": no dim_* or x0 columns");
    cols.push_back(c);
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(cols.size()),
                      static_cast<Eigen::Index>(table.rows.size()));
  for (std::size_t j = 0; j < table.rows.size(); ++j) {
    for (std::size_t r = 0; r < cols.size(); ++r) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
          table.rows[j][static_cast<std::size_t>(cols[r])];
    }
  }
  return out;
}

}  // namespace ucgm
