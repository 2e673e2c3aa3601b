#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ucgm/transport.hpp"

namespace ucgm {

/// Weighted sum of Gaussians N(m_j, Σ_j) in R^d.
struct GaussianMixture {
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;

  int dim() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }
  std::size_t size() const { return weights.size(); }

  /// Weights positive and summing to 1 within 1e-12, shapes consistent, covariances SPD.
  void validate() const;

  /// ½N(−m, σ²) + ½N(m, σ²) on the line.
  static GaussianMixture bimodal(double m, double sigma);
  static GaussianMixture gaussian_1d(double mu, double sigma);
};

enum class ScheduleKind { OU, Triangular, Linear };

/// Forward process x_t = α(t)·z + γ(t)·x used by the closed-form PF-ODE.
struct OracleSchedule {
  ScheduleKind kind = ScheduleKind::Linear;
  double rate = 1.0;  ///< OU rate s

  static OracleSchedule ou(double s);
  static OracleSchedule triangular() { return {ScheduleKind::Triangular, 1.0}; }
  static OracleSchedule linear() { return {ScheduleKind::Linear, 1.0}; }

  double alpha(double t) const;
  double gamma(double t) const;
  double dalpha(double t) const;
  double dgamma(double t) const;
  /// α·α′, finite at t = 0 for every kind.
  double alpha_dalpha(double t) const;
  std::string name() const;
};

/// Parses "ou:<s>", "triangular" or "linear".
OracleSchedule parse_oracle_schedule(const std::string& spec);

/// ∇ log p_t(x_t) of the noised mixture. Throws std::domain_error when a marginal
/// covariance γ²Σ_j + α²I is singular.
Eigen::VectorXd gmm_marginal_score(const Eigen::VectorXd& x_t, double t,
                                   const GaussianMixture& mixture, const OracleSchedule& schedule);

double gmm_log_density(const Eigen::VectorXd& x_t, double t, const GaussianMixture& mixture,
                       const OracleSchedule& schedule);

/// α·α′ − (γ′/γ)·α²
double drift_bracket(double t, const OracleSchedule& schedule);

/// (γ′/γ)·x_t − bracket·score. Throws std::domain_error where γ(t) = 0.
Eigen::VectorXd pf_ode_drift(const Eigen::VectorXd& x_t, double t, const GaussianMixture& mixture,
                             const OracleSchedule& schedule);

/// Closed-form drift for the symmetric two-peak mixture with variance sigma2.
double bimodal_drift(double x_t, double t, double m, double sigma2, const OracleSchedule& schedule);

/// Same drift applied elementwise to a batch of independent 1D states.
using OdeField = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&, double)>;
OdeField bimodal_drift_field(double m, double sigma2, const OracleSchedule& schedule);

/// √(x1² + 2s(1 − t))
double hermite_trajectory(double x1, double s, double t);

/// Classical RK4 from t_start to t_end (either direction). Throws std::runtime_error on a
/// non-finite state.
Eigen::MatrixXd rk4_integrate(const OdeField& drift, const Eigen::MatrixXd& init, double t_start,
                              double t_end, int steps);

/// 1D mixture CDF and its inverse (bisection to 1e-10 on a bracket that widens if needed).
double mixture_cdf(double x, const GaussianMixture& mixture);
double mixture_quantile(double p, const GaussianMixture& mixture);

/// CDF of the schedule's t = 1 marginal; equals Φ when γ(1) = 0.
double terminal_cdf(double x1, const GaussianMixture& mixture, const OracleSchedule& schedule);

/// F0^{-1}(F1(x1)): the monotone map from the t = 1 marginal onto the data law.
double quantile_transport(double x1, const GaussianMixture& mixture,
                          const OracleSchedule& schedule);

enum class PredictorMode { Diffusion, Consistency, Interpolated };

/// c(t; T) = cos(t/T)^T
double interpolant_constant(double t, double T);

/// μ + c·(x_t − γ(t)μ) with γ = cos(πt/2) and c = γ, 1 or c(t; T) by mode.
double gaussian_optimal_predictor(double x_t, double t, double mu, PredictorMode mode,
                                  double T = 1.0);

struct OrderProbe {
  double forward_slope = 0.0;
  double central_slope = 0.0;
  std::vector<double> forward_errors;
  std::vector<double> central_errors;
};

/// Least-squares log–log slopes of forward and central difference errors over eps.
OrderProbe difference_order_probe(const std::function<double(double)>& f,
                                  const std::function<double(double)>& df, double t,
                                  const std::vector<double>& eps);

struct PosteriorMeans {
  Eigen::VectorXd x;  ///< E[x | x_t]
  Eigen::VectorXd z;  ///< E[z | x_t]
};

/// Posterior means under x_t = α·z + γ·x with x from the mixture and z ~ N(0, I).
PosteriorMeans gmm_posterior(const Eigen::VectorXd& x_t, double alpha, double gamma,
                             const GaussianMixture& mixture);

/// Minimizer of E‖F − (α̂z + γ̂x)‖² for a transport family: α̂·E[z|x_t] + γ̂·E[x|x_t].
Eigen::VectorXd optimal_field(const Eigen::VectorXd& x_t, double t, const GaussianMixture& mixture,
                              Transport transport);

/// Batched optimal_field, usable as a perfect estimator.
OdeField optimal_field_fn(const GaussianMixture& mixture, Transport transport);

}  // namespace ucgm
