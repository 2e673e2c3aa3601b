#include "ucgm/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "ucgm/io.hpp"

namespace ucgm {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 480.0;
constexpr double kMargin = 48.0;

struct Range {
  double lo = 0.0;
  double hi = 1.0;
  void include(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double p = 0.05 * (hi - lo);
    lo -= p;
    hi += p;
  }
};

struct Frame {
  Range x;
  Range y;
  double px(double v) const { return kMargin + (v - x.lo) / (x.hi - x.lo) * (kWidth - 2 * kMargin); }
  double py(double v) const {
    return kHeight - kMargin - (v - y.lo) / (y.hi - y.lo) * (kHeight - 2 * kMargin);
  }
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

void axes(std::ostringstream& svg, const Frame& f, const std::string& title) {
  svg << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kWidth - 2 * kMargin
      << "\" height=\"" << kHeight - 2 * kMargin
      << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";
  const double bottom = kHeight - kMargin + 16;
  svg << "<text x=\"" << kMargin << "\" y=\"" << bottom << "\" font-size=\"11\">" << num(f.x.lo)
      << "</text>\n";
  svg << "<text x=\"" << kWidth - kMargin << "\" y=\"" << bottom
      << "\" font-size=\"11\" text-anchor=\"end\">" << num(f.x.hi) << "</text>\n";
  svg << "<text x=\"" << kMargin - 4 << "\" y=\"" << kHeight - kMargin
      << "\" font-size=\"11\" text-anchor=\"end\">" << num(f.y.lo) << "</text>\n";
  svg << "<text x=\"" << kMargin - 4 << "\" y=\"" << kMargin + 10
      << "\" font-size=\"11\" text-anchor=\"end\">" << num(f.y.hi) << "</text>\n";
  if (!title.empty()) {
    svg << "<text x=\"" << kWidth / 2 << "\" y=\"" << kMargin / 2
        << "\" font-size=\"14\" text-anchor=\"middle\">" << title << "</text>\n";
  }
}

}  // namespace

std::string render_svg(const Eigen::MatrixXd& points, const Trajectory* trajectory,
                       const std::string& title) {
  const Eigen::Index d = points.rows();
  if (points.cols() > 0 && d != 1 && d != 2) {
    throw std::invalid_argument("plot: only 1D or 2D samples can be drawn");
  }
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  Frame f;
  bool any = false;
  auto add = [&](double x, double y) {
    if (!any) {
      f.x = {x, x};
      f.y = {y, y};
      any = true;
    }
    f.x.include(x);
    f.y.include(y);
  };

  const bool traj = trajectory && !trajectory->steps.empty();
  if (traj) {
    for (std::size_t s = 0; s < trajectory->steps.size(); ++s) {
      const auto& m = trajectory->steps[s];
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (m.rows() == 1) {
          add(trajectory->times[s], m(0, j));
        } else {
          add(m(0, j), m(1, j));
        }
      }
    }
  }

  if (d == 2 || traj) {
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      if (d == 2) {
        add(points(0, j), points(1, j));
      } else {
        add(0.0, points(0, j));
      }
    }
    if (any) {
      f.x.pad();
      f.y.pad();
    }
    axes(svg, f, title);
    if (traj) {
      const Eigen::Index chains = trajectory->steps.front().cols();
      for (Eigen::Index j = 0; j < chains; ++j) {
        svg << "<polyline fill=\"none\" stroke=\"#c44\" stroke-opacity=\"0.5\" points=\"";
        for (std::size_t s = 0; s < trajectory->steps.size(); ++s) {
          const auto& m = trajectory->steps[s];
          if (j >= m.cols()) continue;
          const double x = m.rows() == 1 ? trajectory->times[s] : m(0, j);
          const double y = m.rows() == 1 ? m(0, j) : m(1, j);
          svg << num(f.px(x)) << ',' << num(f.py(y)) << ' ';
        }
        svg << "\"/>\n";
      }
    }
    if (d == 2) {
      for (Eigen::Index j = 0; j < points.cols(); ++j) {
        svg << "<circle cx=\"" << num(f.px(points(0, j))) << "\" cy=\"" << num(f.py(points(1, j)))
            << "\" r=\"1.5\" fill=\"#246\" fill-opacity=\"0.6\"/>\n";
      }
    }
  } else {
    // 1D histogram.
    constexpr int kBins = 40;
    std::vector<int> counts(kBins, 0);
    if (points.cols() > 0) {
      f.x = {points.minCoeff(), points.maxCoeff()};
      f.x.pad();
      for (Eigen::Index j = 0; j < points.cols(); ++j) {
        int b = static_cast<int>((points(0, j) - f.x.lo) / (f.x.hi - f.x.lo) * kBins);
        counts[static_cast<std::size_t>(std::clamp(b, 0, kBins - 1))]++;
      }
      f.y = {0.0, static_cast<double>(*std::max_element(counts.begin(), counts.end())) * 1.05};
    }
    axes(svg, f, title);
    const double bw = (f.x.hi - f.x.lo) / kBins;
    for (int b = 0; b < kBins && points.cols() > 0; ++b) {
      if (counts[static_cast<std::size_t>(b)] == 0) continue;
      const double x0 = f.px(f.x.lo + b * bw);
      const double x1 = f.px(f.x.lo + (b + 1) * bw);
      const double top = f.py(counts[static_cast<std::size_t>(b)]);
      svg << "<rect x=\"" << num(x0) << "\" y=\"" << num(top) << "\" width=\"" << num(x1 - x0)
          << "\" height=\"" << num(f.py(0.0) - top) << "\" fill=\"#246\" fill-opacity=\"0.7\"/>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_history_csv(const std::filesystem::path& path, const Trajectory& trajectory) {
  ensure_parent(path);
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  const Eigen::Index d = trajectory.steps.empty() ? 0 : trajectory.steps.front().rows();
  os << "step,time,sample_index";
  for (Eigen::Index r = 0; r < d; ++r) os << ",dim_" << r;
  os << '\n';
  for (std::size_t s = 0; s < trajectory.steps.size(); ++s) {
    const auto& m = trajectory.steps[s];
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      os << s << ',' << format_double(trajectory.times[s]) << ',' << j;
      for (Eigen::Index r = 0; r < m.rows(); ++r) os << ',' << format_double(m(r, j));
      os << '\n';
    }
  }
}

Trajectory read_history_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const int cs = table.column("step");
  const int ct = table.column("time");
  const int ci = table.column("sample_index");
  if (cs < 0 || ct < 0 || ci < 0) throw std::runtime_error(path.string() + ": not a history file");
  std::vector<int> dims;
  for (int r = 0;; ++r) {
    const int c = table.column("dim_" + std::to_string(r));
    if (c < 0) break;
    dims.push_back(c);
  }
  if (dims.empty()) throw std::runtime_error(path.string() + ": no dim_* columns");
  std::map<int, std::vector<const std::vector<double>*>> by_step;
  for (const auto& row : table.rows) by_step[static_cast<int>(row[static_cast<std::size_t>(cs)])].push_back(&row);
  Trajectory out;
  for (const auto& [step, rows] : by_step) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(dims.size()), static_cast<Eigen::Index>(rows.size()));
    for (const auto* row : rows) {
      const auto j = static_cast<Eigen::Index>((*row)[static_cast<std::size_t>(ci)]);
      if (j < 0 || j >= m.cols()) throw std::runtime_error(path.string() + ": bad sample_index");
      for (std::size_t r = 0; r < dims.size(); ++r) {
        m(static_cast<Eigen::Index>(r), j) = (*row)[static_cast<std::size_t>(dims[r])];
      }
    }
    out.times.push_back((*rows.front())[static_cast<std::size_t>(ct)]);
    out.steps.push_back(std::move(m));
  }
  return out;
}

}  // namespace ucgm
