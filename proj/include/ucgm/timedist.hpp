#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <random>
#include <vector>

namespace ucgm {

struct BetaParams {
  double theta1 = 1.0;
  double theta2 = 1.0;
  void validate() const;
};

/// Generalized Kumaraswamy warp (1 − (1 − t^a)^b)^c; (1,1,1) is the identity.
struct KumaParams {
  double a = 1.0;
  double b = 1.0;
  double c = 1.0;
  void validate() const;
};

/// Draws t ~ Beta(θ1, θ2) as G1 / (G1 + G2) with G_i ~ Gamma(θ_i, 1).
double sample_beta(const BetaParams& params, std::mt19937_64& rng);

/// Regularized incomplete beta I_t(a, b), continued-fraction evaluation.
double beta_cdf(double t, double a, double b);

double kumaraswamy(double t, const KumaParams& params);

/// s·t / (1 + (s − 1)·t)
double timeshift(double t, double s);

/// N+1 strictly decreasing times t_i = warp(1 − i/N); endpoints are exactly 1 and 0.
std::vector<double> build_schedule(int steps, const std::optional<KumaParams>& warp = std::nullopt);

using TimeWarp = std::function<double(double)>;

struct KumaFit {
  KumaParams params;
  double fitted_error = 0.0;    ///< mean squared error on the grid
  double identity_error = 0.0;  ///< same error for the identity map
};

/// Least-squares fit of a Kumaraswamy warp to a monotone target on a uniform grid,
/// by Nelder–Mead in log-parameter space restarted from three seeds.
/// Throws std::invalid_argument for a non-monotone target or bad endpoints.
KumaFit fit_kuma_to_target(const TimeWarp& target, std::size_t grid = 512);

/// Logit-normal time transform 1 / (1 + exp(−μ − σ·Φ^{-1}(t))).
double lognorm_transform(double t, double mu, double sigma);

struct BetaFit {
  BetaParams params;
  double ks_distance = 0.0;  ///< sup-norm gap on the grid
};

/// Fits I_t(a, b) to a monotone warp minimizing the sup-norm gap (diagnostic only).
BetaFit fit_beta_to_target(const TimeWarp& target, std::size_t grid = 512);

/// Derivative-free simplex minimizer used by the schedule fits.
struct SimplexResult {
  std::vector<double> point;
  double value = 0.0;
  int iterations = 0;
};
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& objective,
                          std::vector<double> start, double initial_step = 0.25,
                          int max_iterations = 4000, double tolerance = 1e-14);

}  // namespace ucgm
