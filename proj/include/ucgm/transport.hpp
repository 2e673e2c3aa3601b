#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace ucgm {

/// The six named transport-coefficient families.
enum class Transport { Linear, ReLinear, TrigFlow, EDM, TrigLinear, Random };

/// α, γ, α̂, γ̂ at one time, plus the prediction denominator α·γ̂ − α̂·γ.
struct CoefficientSample {
  double t = 0.0;
  double alpha = 0.0;
  double gamma = 0.0;
  double alpha_hat = 0.0;
  double gamma_hat = 0.0;
  double denom = 0.0;
};

/// Throws std::domain_error when t is outside [0, 1].
CoefficientSample eval_coefficients(Transport family, double t);

/// Noise level of the EDM family, exp(4 (2.68 t − 1.59)).
double edm_sigma(double t);

std::string_view transport_name(Transport family);

/// Accepts the lowercase CLI names; throws std::invalid_argument otherwise.
Transport parse_transport(std::string_view name);

struct ConstraintCheck {
  bool pass = true;
  double worst_t = 0.0;      ///< grid point with the largest violation (or smallest margin)
  double worst_value = 0.0;  ///< the offending quantity at worst_t
  std::string detail;
};

/// Per-constraint outcome of validate_family. Violations are reported, never thrown.
struct ValidationReport {
  Transport family = Transport::Linear;
  std::size_t grid_points = 0;
  ConstraintCheck alpha_boundary;      // α(0)=0, α(1)=1
  ConstraintCheck alpha_monotone;      // dα/dt ≥ 0
  ConstraintCheck gamma_boundary;      // γ(0)=1, γ(1)=0
  ConstraintCheck gamma_monotone;      // dγ/dt ≤ 0
  ConstraintCheck denom_nonzero;       // |α·γ̂ − α̂·γ| > 0 on (0,1)

  bool constraint_a() const { return alpha_boundary.pass && alpha_monotone.pass; }
  bool constraint_b() const { return gamma_boundary.pass && gamma_monotone.pass; }
  bool constraint_c() const { return denom_nonzero.pass; }
  bool all_pass() const { return constraint_a() && constraint_b() && constraint_c(); }
};

/// Checks the three transport constraints on a uniform grid using one-sided differences.
ValidationReport validate_family(Transport family, std::size_t grid_points = 1024);

}  // namespace ucgm
