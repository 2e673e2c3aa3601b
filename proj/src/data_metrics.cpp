#include "ucgm/data_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ucgm {

namespace {

std::vector<double> parse_numbers(const std::string& text, char sep, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) {
      throw std::invalid_argument("dataset spec: bad number '" + item + "' in " + what);
    }
    out.push_back(v);
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

Eigen::MatrixXd subsample(const Eigen::MatrixXd& m, int cap, std::mt19937_64& rng) {
  if (m.cols() <= cap) return m;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(m.cols()));
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<Eigen::Index> pick(static_cast<std::size_t>(cap));
  std::sample(idx.begin(), idx.end(), pick.begin(), cap, rng);
  Eigen::MatrixXd out(m.rows(), cap);
  for (int j = 0; j < cap; ++j) out.col(j) = m.col(pick[static_cast<std::size_t>(j)]);
  return out;
}

double mean_cross_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    total += (b.colwise() - a.col(i)).colwise().norm().sum();
  }
  return total / (static_cast<double>(a.cols()) * static_cast<double>(b.cols()));
}

double mean_self_distance(const Eigen::MatrixXd& a) {
  const Eigen::Index n = a.cols();
  if (n < 2) return 0.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const auto rest = a.rightCols(n - i - 1);
    total += (rest.colwise() - a.col(i)).colwise().norm().sum();
  }
  return 2.0 * total / (static_cast<double>(n) * static_cast<double>(n - 1));
}

}  // namespace

int DatasetSpec::dim() const {
  switch (kind) {
    case DatasetKind::TwoMoons:
    case DatasetKind::SCurve:
    case DatasetKind::SwissRoll:
      return 2;
    case DatasetKind::Bimodal:
    case DatasetKind::Gaussian:
      return 1;
    case DatasetKind::Gmm:
      return mixture.dim();
  }
  return 0;
}

int DatasetSpec::num_classes() const {
  switch (kind) {
    case DatasetKind::TwoMoons: return 2;
    case DatasetKind::Bimodal: return 2;
    case DatasetKind::Gmm: return static_cast<int>(mixture.size());
    default: return 0;
  }
}

std::string DatasetSpec::to_string() const {
  switch (kind) {
    case DatasetKind::TwoMoons: return "two_moons:" + fmt(noise);
    case DatasetKind::SCurve: return "s_curve:" + fmt(noise);
    case DatasetKind::SwissRoll: return "swiss_roll:" + fmt(noise);
    case DatasetKind::Bimodal: return "bimodal:" + fmt(m) + "," + fmt(sigma);
    case DatasetKind::Gaussian: return "gaussian:" + fmt(m) + "," + fmt(sigma);
    case DatasetKind::Gmm: {
      std::string s = "gmm:";
      for (std::size_t j = 0; j < mixture.size(); ++j) {
        if (j) s += ",";
        s += fmt(mixture.weights[j]) + "/" + fmt(mixture.means[j][0]) + "/" +
             fmt(std::sqrt(mixture.covariances[j](0, 0)));
      }
      return s;
    }
  }
  return "";
}

DatasetSpec DatasetSpec::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);
  DatasetSpec spec;
  if (name == "two_moons" || name == "s_curve" || name == "swiss_roll") {
    spec.kind = name == "two_moons" ? DatasetKind::TwoMoons
                : name == "s_curve" ? DatasetKind::SCurve
                                    : DatasetKind::SwissRoll;
    if (!args.empty()) {
      const auto v = parse_numbers(args, ',', text);
      if (v.size() != 1) throw std::invalid_argument("dataset spec: " + name + " takes one noise level");
      spec.noise = v[0];
    }
    if (!(spec.noise >= 0.0)) throw std::invalid_argument("dataset spec: noise must be >= 0");
    return spec;
  }
  if (name == "bimodal" || name == "gaussian") {
    const auto v = parse_numbers(args, ',', text);
    if (v.size() != 2) throw std::invalid_argument("dataset spec: " + name + " needs <m>,<sigma>");
    if (!(v[1] > 0.0)) throw std::invalid_argument("dataset spec: sigma must be > 0");
    spec.kind = name == "bimodal" ? DatasetKind::Bimodal : DatasetKind::Gaussian;
    spec.m = v[0];
    spec.sigma = v[1];
    spec.mixture = name == "bimodal" ? GaussianMixture::bimodal(v[0], v[1])
                                     : GaussianMixture::gaussian_1d(v[0], v[1]);
    return spec;
  }
  if (name == "gmm") {
    spec.kind = DatasetKind::Gmm;
    std::stringstream ss(args);
    std::string comp;
    double total = 0.0;
    while (std::getline(ss, comp, ',')) {
      const auto v = parse_numbers(comp, '/', text);
      if (v.size() != 3) throw std::invalid_argument("dataset spec: gmm components are <w>/<m>/<sigma>");
      if (!(v[0] > 0.0) || !(v[2] > 0.0)) {
        throw std::invalid_argument("dataset spec: gmm weights and sigmas must be > 0");
      }
      spec.mixture.weights.push_back(v[0]);
      spec.mixture.means.push_back(Eigen::VectorXd::Constant(1, v[1]));
      spec.mixture.covariances.push_back(Eigen::MatrixXd::Constant(1, 1, v[2] * v[2]));
      total += v[0];
    }
    if (spec.mixture.weights.empty()) throw std::invalid_argument("dataset spec: gmm needs components");
    for (double& w : spec.mixture.weights) w /= total;
    spec.mixture.validate();
    return spec;
  }
  throw std::invalid_argument("unknown dataset '" + name + "'");
}

Eigen::MatrixXd Dataset::raw() const {
  return (samples.array().colwise() * scale.array()).colwise() + shift.array();
}

Eigen::MatrixXd Dataset::standardize(const Eigen::MatrixXd& raw_points) const {
  if (raw_points.rows() != shift.size()) throw std::invalid_argument("standardize: dimension mismatch");
  return ((raw_points.array().colwise() - shift.array()).colwise() / scale.array()).matrix();
}

Eigen::MatrixXd sample_raw(const DatasetSpec& spec, int n, std::mt19937_64& rng,
                           std::vector<int>* labels) {
  if (n < 1) throw std::invalid_argument("dataset: n must be >= 1");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double pi = std::numbers::pi;
  Eigen::MatrixXd out(spec.dim(), n);
  if (labels) labels->assign(static_cast<std::size_t>(n), 0);
  for (int j = 0; j < n; ++j) {
    int label = 0;
    switch (spec.kind) {
      case DatasetKind::TwoMoons: {
        label = j % 2;
        const double th = pi * unit(rng);
        if (label == 0) {
          out(0, j) = std::cos(th);
          out(1, j) = std::sin(th);
        } else {
          out(0, j) = 1.0 - std::cos(th);
          out(1, j) = 0.5 - std::sin(th);
        }
        out(0, j) += spec.noise * normal(rng);
        out(1, j) += spec.noise * normal(rng);
        break;
      }
      case DatasetKind::SCurve: {
        const double t = 3.0 * pi * (unit(rng) - 0.5);
        out(0, j) = std::sin(t) + spec.noise * normal(rng);
        out(1, j) = (t >= 0.0 ? 1.0 : -1.0) * (std::cos(t) - 1.0) + spec.noise * normal(rng);
        break;
      }
      case DatasetKind::SwissRoll: {
        const double t = 1.5 * pi * (1.0 + 2.0 * unit(rng));
        out(0, j) = t * std::cos(t) + spec.noise * normal(rng);
        out(1, j) = t * std::sin(t) + spec.noise * normal(rng);
        break;
      }
      case DatasetKind::Bimodal:
      case DatasetKind::Gaussian:
      case DatasetKind::Gmm: {
        const auto& mix = spec.mixture;
        const double u = unit(rng);
        double acc = 0.0;
        std::size_t k = mix.size() - 1;
        for (std::size_t c = 0; c < mix.size(); ++c) {
          acc += mix.weights[c];
          if (u < acc) {
            k = c;
            break;
          }
        }
        label = static_cast<int>(k);
        out(0, j) = mix.means[k][0] + std::sqrt(mix.covariances[k](0, 0)) * normal(rng);
        break;
      }
    }
    if (labels) (*labels)[static_cast<std::size_t>(j)] = label;
  }
  return out;
}

Dataset make_dataset(const DatasetSpec& spec, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset ds;
  ds.spec = spec;
  ds.seed = seed;
  const Eigen::MatrixXd raw = sample_raw(spec, n, rng, &ds.labels);
  ds.shift = raw.rowwise().mean();
  const Eigen::MatrixXd centered = raw.colwise() - ds.shift;
  ds.scale = (centered.array().square().rowwise().sum() / static_cast<double>(n)).sqrt();
  for (Eigen::Index r = 0; r < ds.scale.size(); ++r) {
    if (!(ds.scale[r] > 0.0)) ds.scale[r] = 1.0;
  }
  ds.samples = (centered.array().colwise() / ds.scale.array()).matrix();
  return ds;
}

double wasserstein1_1d(std::span<const double> a, std::span<const double> b, std::uint64_t seed) {
  if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein1_1d: empty input");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  if (x.size() != y.size()) {
    std::mt19937_64 rng(seed);
    std::vector<double>& longer = x.size() > y.size() ? x : y;
    const std::size_t keep = std::min(x.size(), y.size());
    std::vector<double> picked(keep);
    std::sample(longer.begin(), longer.end(), picked.begin(), keep, rng);
    longer = std::move(picked);
  }
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += std::abs(x[i] - y[i]);
  return total / static_cast<double>(x.size());
}

double energy_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::uint64_t seed,
                       int cap) {
  if (a.cols() == 0 || b.cols() == 0) throw std::invalid_argument("energy_distance: empty input");
  if (a.rows() != b.rows()) throw std::invalid_argument("energy_distance: dimension mismatch");
  if (cap < 2) throw std::invalid_argument("energy_distance: cap must be >= 2");
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd sa = subsample(a, cap, rng);
  const Eigen::MatrixXd sb = subsample(b, cap, rng);
  return 2.0 * mean_cross_distance(sa, sb) - mean_self_distance(sa) - mean_self_distance(sb);
}

}  // namespace ucgm
