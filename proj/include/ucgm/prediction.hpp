#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "ucgm/transport.hpp"

namespace ucgm {

/// Raised when α·γ̂ − α̂·γ is too close to zero to divide by.
class SingularCoefficientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kSingularDenomThreshold = 1e-12;

namespace detail {

template <typename A, typename B>
void require_same_shape(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b,
                        const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": dimension mismatch (" +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

inline void require_regular(const CoefficientSample& c, const char* op) {
  if (std::abs(c.denom) < kSingularDenomThreshold) {
    throw SingularCoefficientError(std::string(op) + ": singular transport denominator at t=" +
                                   std::to_string(c.t));
  }
}

}  // namespace detail

// All functions below work on vectors or on d×B batches (one column per sample) in
// either float or double; coefficients are cast to the argument's scalar type.

/// x_t = α·z + γ·x
template <typename DX, typename DZ>
typename DX::PlainObject interpolate(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DZ>& z,
                                     const CoefficientSample& c) {
  using S = typename DX::Scalar;
  detail::require_same_shape(x, z, "interpolate");
  return S(c.alpha) * z + S(c.gamma) * x;
}

/// z_t = α̂·z + γ̂·x, the regression target at λ = 0.
template <typename DX, typename DZ>
typename DX::PlainObject target_field(const Eigen::MatrixBase<DX>& x,
                                      const Eigen::MatrixBase<DZ>& z, const CoefficientSample& c) {
  using S = typename DX::Scalar;
  detail::require_same_shape(x, z, "target_field");
  return S(c.alpha_hat) * z + S(c.gamma_hat) * x;
}

/// Clean-data estimate f^x = (α·F − α̂·x_t) / denom.
template <typename DF, typename DX>
typename DF::PlainObject predict_x(const Eigen::MatrixBase<DF>& field,
                                   const Eigen::MatrixBase<DX>& x_t, const CoefficientSample& c) {
  using S = typename DF::Scalar;
  detail::require_same_shape(field, x_t, "predict_x");
  detail::require_regular(c, "predict_x");
  return (S(c.alpha) * field - S(c.alpha_hat) * x_t) / S(c.denom);
}

/// Noise estimate f^z = (γ̂·x_t − γ·F) / denom.
template <typename DF, typename DX>
typename DF::PlainObject predict_z(const Eigen::MatrixBase<DF>& field,
                                   const Eigen::MatrixBase<DX>& x_t, const CoefficientSample& c) {
  using S = typename DF::Scalar;
  detail::require_same_shape(field, x_t, "predict_z");
  detail::require_regular(c, "predict_z");
  return (S(c.gamma_hat) * x_t - S(c.gamma) * field) / S(c.denom);
}

}  // namespace ucgm
