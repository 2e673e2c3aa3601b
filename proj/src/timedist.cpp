#include "ucgm/timedist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/beta.hpp>

namespace ucgm {

void BetaParams::validate() const {
  if (!(theta1 > 0.0) || !(theta2 > 0.0)) {
    throw std::invalid_argument("Beta shape parameters must be positive");
  }
}

void KumaParams::validate() const {
  if (!(a > 0.0) || !(b > 0.0) || !(c > 0.0)) {
    throw std::invalid_argument("Kumaraswamy parameters must be positive");
  }
}

double sample_beta(const BetaParams& params, std::mt19937_64& rng) {
  params.validate();
  // libstdc++'s gamma_distribution is the Marsaglia–Tsang squeeze sampler, with the
  // U^{1/θ} boost for θ < 1.
  std::gamma_distribution<double> g1(params.theta1, 1.0);
  std::gamma_distribution<double> g2(params.theta2, 1.0);
  const double a = g1(rng);
  const double b = g2(rng);
  const double sum = a + b;
  if (sum <= 0.0) return 0.5;  // both draws underflowed
  return std::clamp(a / sum, 0.0, 1.0);
}

double beta_cdf(double t, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("beta_cdf: shapes must be positive");
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return boost::math::ibeta(a, b, t);
}

double kumaraswamy(double t, const KumaParams& p) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double inner = -std::expm1(p.b * std::log1p(-std::pow(t, p.a)));  // 1 − (1 − t^a)^b
  return std::pow(inner, p.c);
}

double timeshift(double t, double s) {
  if (!(s > 0.0)) throw std::invalid_argument("timeshift: s must be positive");
  return s * t / (1.0 + (s - 1.0) * t);
}

std::vector<double> build_schedule(int steps, const std::optional<KumaParams>& warp) {
  if (steps < 1) throw std::invalid_argument("build_schedule: need at least one step");
  if (warp) warp->validate();
  std::vector<double> out(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) {
    const double u = 1.0 - static_cast<double>(i) / steps;
    out[static_cast<std::size_t>(i)] = warp ? kumaraswamy(u, *warp) : u;
  }
  out.front() = 1.0;
  out.back() = 0.0;
  return out;
}

SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& objective,
                          std::vector<double> start, double initial_step, int max_iterations,
                          double tolerance) {
  const std::size_t n = start.size();
  std::vector<std::vector<double>> simplex(n + 1, start);
  for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += initial_step;
  std::vector<double> values(n + 1);
  for (std::size_t i = 0; i <= n; ++i) values[i] = objective(simplex[i]);

  std::vector<std::size_t> order(n + 1);
  auto point_along = [&](const std::vector<double>& centroid, const std::vector<double>& worst,
                         double coef) {
    std::vector<double> p(n);
    for (std::size_t k = 0; k < n; ++k) p[k] = centroid[k] + coef * (worst[k] - centroid[k]);
    return p;
  };

  int iter = 0;
  for (; iter < max_iterations; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto l, auto r) { return values[l] < values[r]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];
    if (std::abs(values[worst] - values[best]) <= tolerance * (1.0 + std::abs(values[best]))) {
      break;
    }
    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k] / static_cast<double>(n);
    }
    auto reflected = point_along(centroid, simplex[worst], -1.0);
    const double f_reflected = objective(reflected);
    if (f_reflected < values[best]) {
      auto expanded = point_along(centroid, simplex[worst], -2.0);
      const double f_expanded = objective(expanded);
      if (f_expanded < f_reflected) {
        simplex[worst] = std::move(expanded);
        values[worst] = f_expanded;
      } else {
        simplex[worst] = std::move(reflected);
        values[worst] = f_reflected;
      }
      continue;
    }
    if (f_reflected < values[second]) {
      simplex[worst] = std::move(reflected);
      values[worst] = f_reflected;
      continue;
    }
    const bool outside = f_reflected < values[worst];
    auto contracted = point_along(centroid, simplex[worst], outside ? -0.5 : 0.5);
    const double f_contracted = objective(contracted);
    if (f_contracted < (outside ? f_reflected : values[worst])) {
      simplex[worst] = std::move(contracted);
      values[worst] = f_contracted;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t k = 0; k < n; ++k) {
        simplex[i][k] = simplex[best][k] + 0.5 * (simplex[i][k] - simplex[best][k]);
      }
      values[i] = objective(simplex[i]);
    }
  }
  const auto best_it = std::min_element(values.begin(), values.end());
  const auto best_idx = static_cast<std::size_t>(best_it - values.begin());
  return {simplex[best_idx], *best_it, iter};
}

namespace {

std::vector<double> uniform_grid(std::size_t grid) {
  if (grid < 2) throw std::invalid_argument("fit grid needs at least 2 points");
  std::vector<double> ts(grid);
  for (std::size_t i = 0; i < grid; ++i) ts[i] = static_cast<double>(i) / (grid - 1);
  return ts;
}

std::vector<double> checked_target(const TimeWarp& target, const std::vector<double>& ts) {
  std::vector<double> values(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) values[i] = target(ts[i]);
  if (std::abs(values.front()) > 1e-9 || std::abs(values.back() - 1.0) > 1e-9) {
    throw std::invalid_argument("fit target must map 0 to 0 and 1 to 1");
  }
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (!(values[i] >= values[i - 1])) {
      throw std::invalid_argument("fit target is not monotone nondecreasing at t=" +
                                  std::to_string(ts[i]));
    }
  }
  return values;
}

}  // namespace

KumaFit fit_kuma_to_target(const TimeWarp& target, std::size_t grid) {
  const auto ts = uniform_grid(grid);
  const auto values = checked_target(target, ts);

  auto mse = [&](const KumaParams& p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const double e = kumaraswamy(ts[i], p) - values[i];
      acc += e * e;
    }
    return acc / static_cast<double>(ts.size());
  };
  auto from_log = [](const std::vector<double>& v) {
    return KumaParams{std::exp(v[0]), std::exp(v[1]), std::exp(v[2])};
  };
  auto objective = [&](const std::vector<double>& v) {
    for (double x : v) {
      if (std::abs(x) > 6.0) return std::numeric_limits<double>::max();
    }
    return mse(from_log(v));
  };

  KumaFit fit;
  fit.identity_error = mse(KumaParams{});
  fit.fitted_error = fit.identity_error;
  // g1 = g3 along a and c near the identity, so one seed alone can stall on that ridge.
  const std::vector<std::vector<double>> seeds = {
      {0.0, 0.0, 0.0}, {0.0, std::log(2.0), std::log(0.5)}, {std::log(0.5), 0.0, std::log(2.0)}};
  for (const auto& seed : seeds) {
    auto result = nelder_mead(objective, seed, 0.2, 6000, 1e-15);
    // Polish once from the optimum to escape a collapsed simplex.
    result = nelder_mead(objective, result.point, 0.05, 6000, 1e-16);
    if (result.value < fit.fitted_error) {
      fit.fitted_error = result.value;
      fit.params = from_log(result.point);
    }
  }
  return fit;
}

double lognorm_transform(double t, double mu, double sigma) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const boost::math::normal_distribution<double> standard;
  const double q = boost::math::quantile(standard, t);
  return 1.0 / (1.0 + std::exp(-mu - sigma * q));
}

BetaFit fit_beta_to_target(const TimeWarp& target, std::size_t grid) {
  const auto ts = uniform_grid(grid);
  const auto values = checked_target(target, ts);
  auto sup_gap = [&](const std::vector<double>& v) {
    if (std::abs(v[0]) > 6.0 || std::abs(v[1]) > 6.0) return std::numeric_limits<double>::max();
    const double a = std::exp(v[0]), b = std::exp(v[1]);
    double worst = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      worst = std::max(worst, std::abs(beta_cdf(ts[i], a, b) - values[i]));
    }
    return worst;
  };
  auto result = nelder_mead(sup_gap, {0.0, 0.0}, 0.3, 3000, 1e-12);
  result = nelder_mead(sup_gap, result.point, 0.05, 3000, 1e-14);
  return {BetaParams{std::exp(result.point[0]), std::exp(result.point[1])}, result.value};
}

}  // namespace ucgm
