#include "ucgm/transport.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace ucgm {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;
constexpr double kBoundaryTol = 1e-12;
constexpr double kDenomTol = 1e-12;

constexpr std::array<std::pair<Transport, std::string_view>, 6> kNames{{
    {Transport::Linear, "linear"},
    {Transport::ReLinear, "relinear"},
    {Transport::TrigFlow, "trigflow"},
    {Transport::EDM, "edm"},
    {Transport::TrigLinear, "triglinear"},
    {Transport::Random, "random"},
}};

}  // namespace

double edm_sigma(double t) { return std::exp(4.0 * (2.68 * t - 1.59)); }

CoefficientSample eval_coefficients(Transport family, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    std::ostringstream msg;
    msg << "transport time " << t << " outside [0, 1]";
    throw std::domain_error(msg.str());
  }
  CoefficientSample c;
  c.t = t;
  switch (family) {
    case Transport::Linear:
      c.alpha = t;
      c.gamma = 1.0 - t;
      c.alpha_hat = 1.0;
      c.gamma_hat = -1.0;
      break;
    case Transport::ReLinear:
      c.alpha = 1.0 - t;
      c.gamma = t;
      c.alpha_hat = -1.0;
      c.gamma_hat = 1.0;
      break;
    case Transport::TrigFlow:
      c.alpha = std::sin(t * kHalfPi);
      c.gamma = std::cos(t * kHalfPi);
      c.alpha_hat = std::cos(t * kHalfPi);
      c.gamma_hat = -std::sin(t * kHalfPi);
      break;
    case Transport::EDM: {
      // σ_data is fixed at 0.5, hence the 0.25 = σ_data² terms.
      const double sigma = edm_sigma(t);
      const double norm = std::sqrt(sigma * sigma + 0.25);
      c.alpha = sigma / norm;
      c.gamma = 1.0 / norm;
      c.alpha_hat = -0.5 / norm;
      c.gamma_hat = 2.0 * sigma / norm;
      break;
    }
    case Transport::TrigLinear:
      c.alpha = std::sin(t * kHalfPi);
      c.gamma = std::cos(t * kHalfPi);
      c.alpha_hat = 1.0;
      c.gamma_hat = -1.0;
      break;
    case Transport::Random:
      c.alpha = std::sin(t * kHalfPi);
      c.gamma = 1.0 - t;
      c.alpha_hat = 1.0;
      c.gamma_hat = -1.0 - std::exp(-5.0 * t);
      break;
  }
  c.denom = c.alpha * c.gamma_hat - c.alpha_hat * c.gamma;
  return c;
}

std::string_view transport_name(Transport family) {
  for (const auto& [kind, name] : kNames) {
    if (kind == family) return name;
  }
  return "unknown";
}

Transport parse_transport(std::string_view name) {
  for (const auto& [kind, label] : kNames) {
    if (label == name) return kind;
  }
  throw std::invalid_argument("unknown transport '" + std::string(name) +
                              "' (expected linear|relinear|trigflow|edm|triglinear|random)");
}

namespace {

ConstraintCheck check_boundary(std::string_view label, double at0, double want0, double at1,
                               double want1) {
  ConstraintCheck out;
  const double err0 = std::abs(at0 - want0);
  const double err1 = std::abs(at1 - want1);
  out.pass = err0 <= kBoundaryTol && err1 <= kBoundaryTol;
  out.worst_t = err0 >= err1 ? 0.0 : 1.0;
  out.worst_value = err0 >= err1 ? at0 : at1;
  std::ostringstream msg;
  msg << label << "(0)=" << at0 << " (want " << want0 << "), " << label << "(1)=" << at1
      << " (want " << want1 << ")";
  out.detail = msg.str();
  return out;
}

}  // namespace

ValidationReport validate_family(Transport family, std::size_t grid_points) {
  if (grid_points < 2) throw std::invalid_argument("validate_family needs at least 2 grid points");
  ValidationReport report;
  report.family = family;
  report.grid_points = grid_points;

  const auto first = eval_coefficients(family, 0.0);
  const auto last = eval_coefficients(family, 1.0);
  report.alpha_boundary = check_boundary("alpha", first.alpha, 0.0, last.alpha, 1.0);
  report.gamma_boundary = check_boundary("gamma", first.gamma, 1.0, last.gamma, 0.0);

  // Forward differences between consecutive grid points; the worst slope is kept.
  double worst_alpha_slope = INFINITY, worst_alpha_t = 0.0;
  double worst_gamma_slope = -INFINITY, worst_gamma_t = 0.0;
  double min_denom = INFINITY, min_denom_t = 0.0;
  const double h = 1.0 / static_cast<double>(grid_points - 1);
  auto prev = first;
  for (std::size_t i = 1; i < grid_points; ++i) {
    const double t = i + 1 == grid_points ? 1.0 : static_cast<double>(i) * h;
    const auto cur = eval_coefficients(family, t);
    const double da = (cur.alpha - prev.alpha) / h;
    const double dg = (cur.gamma - prev.gamma) / h;
    if (da < worst_alpha_slope) { worst_alpha_slope = da; worst_alpha_t = prev.t; }
    if (dg > worst_gamma_slope) { worst_gamma_slope = dg; worst_gamma_t = prev.t; }
    if (i + 1 < grid_points && std::abs(cur.denom) < min_denom) {
      min_denom = std::abs(cur.denom);
      min_denom_t = t;
    }
    prev = cur;
  }

  report.alpha_monotone.pass = worst_alpha_slope >= 0.0;
  report.alpha_monotone.worst_t = worst_alpha_t;
  report.alpha_monotone.worst_value = worst_alpha_slope;
  report.alpha_monotone.detail = "min dalpha/dt = " + std::to_string(worst_alpha_slope);

  report.gamma_monotone.pass = worst_gamma_slope <= 0.0;
  report.gamma_monotone.worst_t = worst_gamma_t;
  report.gamma_monotone.worst_value = worst_gamma_slope;
  report.gamma_monotone.detail = "max dgamma/dt = " + std::to_string(worst_gamma_slope);

  report.denom_nonzero.pass = grid_points <= 2 || min_denom > kDenomTol;
  report.denom_nonzero.worst_t = min_denom_t;
  report.denom_nonzero.worst_value = grid_points <= 2 ? 0.0 : min_denom;
  report.denom_nonzero.detail = "min |denom| on interior = " + std::to_string(min_denom);
  return report;
}

}  // namespace ucgm
