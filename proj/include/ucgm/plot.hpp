#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ucgm {

/// Per-step clean estimates, one d x B matrix per step, with their times.
struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> steps;
};

/// Self-contained SVG: histogram for 1D points, scatter for 2D. When a trajectory is given
/// each chain is drawn as one polyline (value against time for 1D, in the plane for 2D).
/// Throws std::invalid_argument for dimensions other than 1 or 2.
std::string render_svg(const Eigen::MatrixXd& points, const Trajectory* trajectory = nullptr,
                       const std::string& title = "");

/// Writes step,time,sample_index,dim_* rows.
void write_history_csv(const std::filesystem::path& path, const Trajectory& trajectory);
Trajectory read_history_csv(const std::filesystem::path& path);

}  // namespace ucgm
