#include "ucgm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace ucgm {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

void require_1d(const GaussianMixture& mixture, const char* op) {
  mixture.validate();
  if (mixture.dim() != 1) throw std::invalid_argument(std::string(op) + ": mixture must be 1D");
}

double component_sigma(const GaussianMixture& mixture, std::size_t j) {
  return std::sqrt(mixture.covariances[j](0, 0));
}

struct Component {
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::VectorXd centered;  // x_t − γ m_j
  double log_weight_density = 0.0;
};

// Log-weights log w_j + log N(x_t; γ m_j, γ²Σ_j + α²I) with their factorizations.
std::vector<Component> noised_components(const Eigen::VectorXd& x_t, double alpha, double gamma,
                                         const GaussianMixture& mixture) {
  mixture.validate();
  if (x_t.size() != mixture.dim()) throw std::invalid_argument("mixture: dimension mismatch");
  const auto d = x_t.size();
  std::vector<Component> out(mixture.size());
  for (std::size_t j = 0; j < mixture.size(); ++j) {
    Eigen::MatrixXd cov = gamma * gamma * mixture.covariances[j];
    cov.diagonal().array() += alpha * alpha;
    out[j].llt.compute(cov);
    if (out[j].llt.info() != Eigen::Success) {
      throw std::domain_error("mixture: singular noised covariance");
    }
    const Eigen::MatrixXd L = out[j].llt.matrixL();
    const double min_diag = L.diagonal().minCoeff();
    if (!(min_diag > 1e-150)) throw std::domain_error("mixture: singular noised covariance");
    out[j].centered = x_t - gamma * mixture.means[j];
    const Eigen::VectorXd w = out[j].llt.matrixL().solve(out[j].centered);
    const double log_det = 2.0 * L.diagonal().array().log().sum();
    out[j].log_weight_density = std::log(mixture.weights[j]) - 0.5 * w.squaredNorm() -
                                0.5 * log_det -
                                0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi);
  }
  return out;
}

// Normalized responsibilities plus the log-sum-exp.
std::vector<double> responsibilities(const std::vector<Component>& comps, double* log_total) {
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& c : comps) top = std::max(top, c.log_weight_density);
  double sum = 0.0;
  std::vector<double> r(comps.size());
  for (std::size_t j = 0; j < comps.size(); ++j) {
    r[j] = std::exp(comps[j].log_weight_density - top);
    sum += r[j];
  }
  for (double& v : r) v /= sum;
  if (log_total) *log_total = top + std::log(sum);
  return r;
}

}  // namespace

void GaussianMixture::validate() const {
  if (weights.empty()) throw std::invalid_argument("mixture: no components");
  if (means.size() != weights.size() || covariances.size() != weights.size()) {
    throw std::invalid_argument("mixture: weights, means and covariances differ in count");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw std::invalid_argument("mixture: weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("mixture: weights must sum to 1");
  const auto d = means.front().size();
  if (d < 1) throw std::invalid_argument("mixture: empty mean vector");
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const auto& c = covariances[j];
    if (means[j].size() != d || c.rows() != d || c.cols() != d) {
      throw std::invalid_argument("mixture: inconsistent component dimensions");
    }
    if (!c.isApprox(c.transpose(), 1e-12)) throw std::invalid_argument("mixture: covariance not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("mixture: covariance not SPD");
  }
}

GaussianMixture GaussianMixture::bimodal(double m, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("bimodal: sigma must be > 0");
  GaussianMixture g;
  g.weights = {0.5, 0.5};
  g.means = {Eigen::VectorXd::Constant(1, -m), Eigen::VectorXd::Constant(1, m)};
  g.covariances = {Eigen::MatrixXd::Constant(1, 1, sigma * sigma),
                   Eigen::MatrixXd::Constant(1, 1, sigma * sigma)};
  return g;
}

GaussianMixture GaussianMixture::gaussian_1d(double mu, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian: sigma must be > 0");
  GaussianMixture g;
  g.weights = {1.0};
  g.means = {Eigen::VectorXd::Constant(1, mu)};
  g.covariances = {Eigen::MatrixXd::Constant(1, 1, sigma * sigma)};
  return g;
}

OracleSchedule OracleSchedule::ou(double s) {
  if (!(s > 0.0)) throw std::invalid_argument("OU rate must be > 0");
  return {ScheduleKind::OU, s};
}

double OracleSchedule::alpha(double t) const {
  switch (kind) {
    case ScheduleKind::OU: return std::sqrt(-std::expm1(-2.0 * rate * t));
    case ScheduleKind::Triangular: return std::sin(kHalfPi * t);
    case ScheduleKind::Linear: return t;
  }
  return 0.0;
}

double OracleSchedule::gamma(double t) const {
  switch (kind) {
    case ScheduleKind::OU: return std::exp(-rate * t);
    case ScheduleKind::Triangular: return std::cos(kHalfPi * t);
    case ScheduleKind::Linear: return 1.0 - t;
  }
  return 0.0;
}

double OracleSchedule::dalpha(double t) const {
  switch (kind) {
    case ScheduleKind::OU: return rate * std::exp(-2.0 * rate * t) / alpha(t);
    case ScheduleKind::Triangular: return kHalfPi * std::cos(kHalfPi * t);
    case ScheduleKind::Linear: return 1.0;
  }
  return 0.0;
}

double OracleSchedule::dgamma(double t) const {
  switch (kind) {
    case ScheduleKind::OU: return -rate * std::exp(-rate * t);
    case ScheduleKind::Triangular: return -kHalfPi * std::sin(kHalfPi * t);
    case ScheduleKind::Linear: return -1.0;
  }
  return 0.0;
}

double OracleSchedule::alpha_dalpha(double t) const {
  switch (kind) {
    case ScheduleKind::OU: return rate * std::exp(-2.0 * rate * t);
    case ScheduleKind::Triangular: return kHalfPi * std::sin(kHalfPi * t) * std::cos(kHalfPi * t);
    case ScheduleKind::Linear: return t;
  }
  return 0.0;
}

std::string OracleSchedule::name() const {
  switch (kind) {
    case ScheduleKind::OU: return "ou:" + std::to_string(rate);
    case ScheduleKind::Triangular: return "triangular";
    case ScheduleKind::Linear: return "linear";
  }
  return "?";
}

OracleSchedule parse_oracle_schedule(const std::string& spec) {
  if (spec == "triangular") return OracleSchedule::triangular();
  if (spec == "linear") return OracleSchedule::linear();
  if (spec.rfind("ou:", 0) == 0) {
    std::size_t used = 0;
    double s = 0.0;
    try {
      s = std::stod(spec.substr(3), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != spec.size() - 3) throw std::invalid_argument("bad OU rate in '" + spec + "'");
    return OracleSchedule::ou(s);
  }
  throw std::invalid_argument("unknown oracle schedule '" + spec + "' (ou:<s>|triangular|linear)");
}

Eigen::VectorXd gmm_marginal_score(const Eigen::VectorXd& x_t, double t,
                                   const GaussianMixture& mixture, const OracleSchedule& schedule) {
  const auto comps = noised_components(x_t, schedule.alpha(t), schedule.gamma(t), mixture);
  const auto r = responsibilities(comps, nullptr);
  Eigen::VectorXd score = Eigen::VectorXd::Zero(x_t.size());
  for (std::size_t j = 0; j < comps.size(); ++j) score -= r[j] * comps[j].llt.solve(comps[j].centered);
  return score;
}

double gmm_log_density(const Eigen::VectorXd& x_t, double t, const GaussianMixture& mixture,
                       const OracleSchedule& schedule) {
  const auto comps = noised_components(x_t, schedule.alpha(t), schedule.gamma(t), mixture);
  double total = 0.0;
  responsibilities(comps, &total);
  return total;
}

double drift_bracket(double t, const OracleSchedule& schedule) {
  const double g = schedule.gamma(t);
  if (g == 0.0) throw std::domain_error("drift_bracket: gamma(t) = 0");
  const double a = schedule.alpha(t);
  return schedule.alpha_dalpha(t) - schedule.dgamma(t) / g * a * a;
}

Eigen::VectorXd pf_ode_drift(const Eigen::VectorXd& x_t, double t, const GaussianMixture& mixture,
                             const OracleSchedule& schedule) {
  const double g = schedule.gamma(t);
  if (g == 0.0) throw std::domain_error("pf_ode_drift: gamma(t) = 0");
  return (schedule.dgamma(t) / g) * x_t -
         drift_bracket(t, schedule) * gmm_marginal_score(x_t, t, mixture, schedule);
}

double bimodal_drift(double x_t, double t, double m, double sigma2,
                     const OracleSchedule& schedule) {
  const double g = schedule.gamma(t);
  if (g == 0.0) throw std::domain_error("bimodal_drift: gamma(t) = 0");
  const double a = schedule.alpha(t);
  const double var = g * g * sigma2 + a * a;
  const double score = -(x_t - g * m * std::tanh(g * m * x_t / var)) / var;
  return (schedule.dgamma(t) / g) * x_t - drift_bracket(t, schedule) * score;
}

OdeField bimodal_drift_field(double m, double sigma2, const OracleSchedule& schedule) {
  return [m, sigma2, schedule](const Eigen::MatrixXd& x, double t) {
    const double g = schedule.gamma(t);
    if (g == 0.0) throw std::domain_error("bimodal_drift: gamma(t) = 0");
    const double a = schedule.alpha(t);
    const double var = g * g * sigma2 + a * a;
    const double lin = schedule.dgamma(t) / g;
    const double br = drift_bracket(t, schedule);
    const Eigen::ArrayXXd xa = x.array();
    const Eigen::ArrayXXd score = -(xa - g * m * (g * m / var * xa).tanh()) / var;
    return Eigen::MatrixXd((lin * xa - br * score).matrix());
  };
}

double hermite_trajectory(double x1, double s, double t) {
  if (!(x1 > 0.0) || !(s > 0.0)) throw std::invalid_argument("hermite_trajectory: need x1, s > 0");
  return std::sqrt(x1 * x1 + 2.0 * s * (1.0 - t));
}

Eigen::MatrixXd rk4_integrate(const OdeField& drift, const Eigen::MatrixXd& init, double t_start,
                              double t_end, int steps) {
  if (steps < 1) throw std::invalid_argument("rk4_integrate: steps must be >= 1");
  const double h = (t_end - t_start) / steps;
  Eigen::MatrixXd x = init;
  for (int i = 0; i < steps; ++i) {
    const double t = t_start + i * h;
    const Eigen::MatrixXd k1 = drift(x, t);
    const Eigen::MatrixXd k2 = drift(x + 0.5 * h * k1, t + 0.5 * h);
    const Eigen::MatrixXd k3 = drift(x + 0.5 * h * k2, t + 0.5 * h);
    const double t_next = i + 1 == steps ? t_end : t + h;
    const Eigen::MatrixXd k4 = drift(x + h * k3, t_next);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite()) {
      throw std::runtime_error("rk4_integrate: non-finite state at t=" + std::to_string(t_next));
    }
  }
  return x;
}

double mixture_cdf(double x, const GaussianMixture& mixture) {
  require_1d(mixture, "mixture_cdf");
  double p = 0.0;
  for (std::size_t j = 0; j < mixture.size(); ++j) {
    p += mixture.weights[j] * normal_cdf((x - mixture.means[j][0]) / component_sigma(mixture, j));
  }
  return p;
}

double mixture_quantile(double p, const GaussianMixture& mixture) {
  require_1d(mixture, "mixture_quantile");
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("mixture_quantile: p must be in (0, 1)");
  double lo_mean = mixture.means[0][0];
  double hi_mean = lo_mean;
  double max_sigma = 0.0;
  for (std::size_t j = 0; j < mixture.size(); ++j) {
    lo_mean = std::min(lo_mean, mixture.means[j][0]);
    hi_mean = std::max(hi_mean, mixture.means[j][0]);
    max_sigma = std::max(max_sigma, component_sigma(mixture, j));
  }
  double lo = lo_mean - 10.0 * max_sigma;
  double hi = hi_mean + 10.0 * max_sigma;
  for (int k = 0; k < 64 && mixture_cdf(lo, mixture) > p; ++k) lo -= (hi - lo);
  for (int k = 0; k < 64 && mixture_cdf(hi, mixture) < p; ++k) hi += (hi - lo);
  for (int k = 0; k < 200 && hi - lo > 1e-12; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (mixture_cdf(mid, mixture) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double terminal_cdf(double x1, const GaussianMixture& mixture, const OracleSchedule& schedule) {
  require_1d(mixture, "terminal_cdf");
  const double a = schedule.alpha(1.0);
  const double g = schedule.gamma(1.0);
  double p = 0.0;
  for (std::size_t j = 0; j < mixture.size(); ++j) {
    const double var = g * g * mixture.covariances[j](0, 0) + a * a;
    p += mixture.weights[j] * normal_cdf((x1 - g * mixture.means[j][0]) / std::sqrt(var));
  }
  return p;
}

double quantile_transport(double x1, const GaussianMixture& mixture,
                          const OracleSchedule& schedule) {
  return mixture_quantile(terminal_cdf(x1, mixture, schedule), mixture);
}

double interpolant_constant(double t, double T) {
  if (!(T > 0.0)) throw std::invalid_argument("interpolant_constant: T must be > 0");
  return std::pow(std::cos(t / T), T);
}

double gaussian_optimal_predictor(double x_t, double t, double mu, PredictorMode mode, double T) {
  const double g = std::cos(kHalfPi * t);
  double c = 1.0;
  switch (mode) {
    case PredictorMode::Diffusion: c = g; break;
    case PredictorMode::Consistency: c = 1.0; break;
    case PredictorMode::Interpolated: c = interpolant_constant(t, T); break;
  }
  return mu + c * (x_t - g * mu);
}

OrderProbe difference_order_probe(const std::function<double(double)>& f,
                                  const std::function<double(double)>& df, double t,
                                  const std::vector<double>& eps) {
  if (eps.size() < 2) throw std::invalid_argument("difference_order_probe: need two or more eps");
  OrderProbe out;
  const double exact = df(t);
  const double f0 = f(t);
  for (double e : eps) {
    if (!(e > 0.0)) throw std::invalid_argument("difference_order_probe: eps must be > 0");
    out.forward_errors.push_back(std::abs((f(t + e) - f0) / e - exact));
    out.central_errors.push_back(std::abs((f(t + e) - f(t - e)) / (2.0 * e) - exact));
  }
  auto slope = [&](const std::vector<double>& err) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(eps.size());
    for (std::size_t k = 0; k < eps.size(); ++k) {
      const double lx = std::log(eps[k]);
      const double ly = std::log(std::max(err[k], 1e-300));
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
  };
  out.forward_slope = slope(out.forward_errors);
  out.central_slope = slope(out.central_errors);
  return out;
}

PosteriorMeans gmm_posterior(const Eigen::VectorXd& x_t, double alpha, double gamma,
                             const GaussianMixture& mixture) {
  const auto comps = noised_components(x_t, alpha, gamma, mixture);
  const auto r = responsibilities(comps, nullptr);
  PosteriorMeans out{Eigen::VectorXd::Zero(x_t.size()), Eigen::VectorXd::Zero(x_t.size())};
  for (std::size_t j = 0; j < comps.size(); ++j) {
    const Eigen::VectorXd w = comps[j].llt.solve(comps[j].centered);
    out.x += r[j] * (mixture.means[j] + gamma * (mixture.covariances[j] * w));
    out.z += r[j] * (alpha * w);
  }
  return out;
}

Eigen::VectorXd optimal_field(const Eigen::VectorXd& x_t, double t, const GaussianMixture& mixture,
                              Transport transport) {
  const auto c = eval_coefficients(transport, t);
  const auto post = gmm_posterior(x_t, c.alpha, c.gamma, mixture);
  return c.alpha_hat * post.z + c.gamma_hat * post.x;
}

OdeField optimal_field_fn(const GaussianMixture& mixture, Transport transport) {
  return [mixture, transport](const Eigen::MatrixXd& x, double t) {
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      out.col(j) = optimal_field(x.col(j), t, mixture, transport);
    }
    return out;
  };
}

}  // namespace ucgm
