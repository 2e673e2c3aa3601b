#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ucgm/estimator.hpp"
#include "ucgm/timedist.hpp"
#include "ucgm/transport.hpp"

namespace ucgm {

/// Network output F(x_t, t) for a d x B batch at one shared time.
using FieldFn = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&, double)>;

/// Wraps a parameter snapshot; cond empty means ∅ for every column, a single entry is
/// broadcast, otherwise one label per column.
FieldFn make_field(const MlpParams& params, std::vector<int> cond = {});

enum class RhoKind {
  Constant,     ///< fixed ρ
  SdeFormula,   ///< clip(|Δt|·2α(t_i)/α(t_{i+1}), 0, 1)
  SdeAlt,  ///< clip(2Δt·α(t_i)/α(t_{i+1})², 0, 1)
  EqualLambda,  ///< ρ = λ of the trained model
};

struct RhoPolicy {
  RhoKind kind = RhoKind::EqualLambda;
  double value = 0.0;  ///< ρ for Constant, λ for EqualLambda

  static RhoPolicy constant(double rho) { return {RhoKind::Constant, rho}; }
  static RhoPolicy equal_lambda(double lambda) { return {RhoKind::EqualLambda, lambda}; }
  static RhoPolicy sde() { return {RhoKind::SdeFormula, 0.0}; }
  static RhoPolicy sde_alt() { return {RhoKind::SdeAlt, 0.0}; }
};

struct SamplerConfig {
  int steps = 64;      ///< requested evaluation budget N
  int order = 1;       ///< ν ∈ {1, 2}
  double kappa = 0.4;  ///< extrapolation ratio
  RhoPolicy rho;
  std::vector<double> schedule;     ///< empty: build_schedule(effective_steps(), warp)
  std::optional<KumaParams> warp;
  std::uint64_t seed = 0;

  /// Steps after the ν = 2 halving N ← ⌊(N+1)/2⌋.
  int effective_steps() const { return order == 2 ? (steps + 1) / 2 : steps; }
  void validate() const;
};

struct SamplingTrace {
  Eigen::MatrixXd final;
  std::vector<Eigen::MatrixXd> history;  ///< clean estimate x̂_i of every step
  std::vector<double> times;             ///< t_i of every step
  int evaluations = 0;
};

/// Schedule actually used by sample(): validated copy of config.schedule or the built one.
std::vector<double> resolve_schedule(const SamplerConfig& config);

/// ρ for the step t_i → t_next under a policy; zero whenever t_next is the terminal time.
double step_rho(const RhoPolicy& policy, double t_i, double t_next, Transport transport);

double rho_sde(double t_i, double t_next, Transport transport);
double rho_sde_alt(double t_i, double t_next, Transport transport);

/// Decomposition / extrapolation / stochastic reconstruction loop. ema_field supplies the
/// main evaluation at t_i; live_field the ν = 2 corrector evaluation at t_{i+1}.
SamplingTrace sample(const FieldFn& ema_field, const FieldFn& live_field,
                     const SamplerConfig& config, const Eigen::MatrixXd& init,
                     Transport transport);

/// Explicit Euler over a decreasing schedule: x ← x + drift(x, t_i)·(t_{i+1} − t_i).
Eigen::MatrixXd euler_reference(const FieldFn& drift, const Eigen::MatrixXd& init,
                                const std::vector<double>& schedule);

}  // namespace ucgm
