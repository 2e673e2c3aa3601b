#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ucgm {

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

/// Writes sample_index,dim_0,...,dim_{d-1} with one row per column of points (d x n).
void write_points_csv(const std::filesystem::path& path, const Eigen::MatrixXd& points);

/// Reads points back: dim_* columns when present, otherwise the x0 column of oracle output.
/// Throws std::runtime_error on a missing file or malformed rows.
Eigen::MatrixXd read_points_csv(const std::filesystem::path& path);

/// Plain table read: header names and numeric rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  int column(const std::string& name) const;  ///< -1 when absent
};
CsvTable read_csv(const std::filesystem::path& path);

/// Creates the parent directory of path when needed.
void ensure_parent(const std::filesystem::path& path);

}  // namespace ucgm
