#include "ucgm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "ucgm/prediction.hpp"

namespace ucgm {

FieldFn make_field(const MlpParams& params, std::vector<int> cond) {
  return [params, cond = std::move(cond)](const Eigen::MatrixXd& x, double t) {
    // Chunked so the hidden activations stay cache-sized for large sample batches.
    constexpr Eigen::Index kChunk = 2048;
    const double tt[1] = {t};
    const bool broadcast = cond.size() == 1;
    if (!broadcast && !cond.empty() && cond.size() != static_cast<std::size_t>(x.cols())) {
      throw std::invalid_argument("make_field: need one label per column (or one for all)");
    }
    Eigen::MatrixXd out(x.rows(), x.cols());
    std::vector<int> labels;
    for (Eigen::Index start = 0; start < x.cols(); start += kChunk) {
      const Eigen::Index len = std::min(kChunk, x.cols() - start);
      if (broadcast) {
        labels.assign(static_cast<std::size_t>(len), cond.front());
      } else if (!cond.empty()) {
        labels.assign(cond.begin() + start, cond.begin() + start + len);
      }
      out.middleCols(start, len) = forward(params, x.middleCols(start, len), tt, labels);
    }
    return out;
  };
}

void SamplerConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("sampler: steps must be >= 1");
  if (order != 1 && order != 2) throw std::invalid_argument("sampler: order must be 1 or 2");
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw std::invalid_argument("sampler: kappa must be in [0, 1]");
  if ((rho.kind == RhoKind::Constant || rho.kind == RhoKind::EqualLambda) &&
      !(rho.value >= 0.0 && rho.value <= 1.0)) {
    throw std::invalid_argument("sampler: rho must be in [0, 1]");
  }
  if (warp) warp->validate();
}

std::vector<double> resolve_schedule(const SamplerConfig& config) {
  config.validate();
  const int n = config.effective_steps();
  if (config.schedule.empty()) return build_schedule(n, config.warp);
  const auto& s = config.schedule;
  if (s.size() != static_cast<std::size_t>(n) + 1) {
    throw std::invalid_argument("sampler: schedule needs " + std::to_string(n + 1) +
                                " points for " + std::to_string(n) + " steps, got " +
                                std::to_string(s.size()));
  }
  if (s.front() != 1.0 || s.back() != 0.0) {
    throw std::invalid_argument("sampler: schedule must start at 1 and end at 0");
  }
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (!(s[i] < s[i - 1])) throw std::invalid_argument("sampler: schedule must strictly decrease");
  }
  return s;
}

double rho_sde(double t_i, double t_next, Transport transport) {
  const double a_next = eval_coefficients(transport, t_next).alpha;
  if (a_next == 0.0) return 0.0;
  const double a_i = eval_coefficients(transport, t_i).alpha;
  return std::clamp(std::abs(t_i - t_next) * 2.0 * a_i / a_next, 0.0, 1.0);
}

double rho_sde_alt(double t_i, double t_next, Transport transport) {
  const double a_next = eval_coefficients(transport, t_next).alpha;
  if (a_next == 0.0) return 0.0;
  const double a_i = eval_coefficients(transport, t_i).alpha;
  return std::clamp(2.0 * std::abs(t_i - t_next) * a_i / (a_next * a_next), 0.0, 1.0);
}

double step_rho(const RhoPolicy& policy, double t_i, double t_next, Transport transport) {
  if (t_next == 0.0) return 0.0;
  switch (policy.kind) {
    case RhoKind::Constant:
    case RhoKind::EqualLambda:
      return policy.value;
    case RhoKind::SdeFormula:
      return rho_sde(t_i, t_next, transport);
    case RhoKind::SdeAlt:
      return rho_sde_alt(t_i, t_next, transport);
  }
  return 0.0;
}

SamplingTrace sample(const FieldFn& ema_field, const FieldFn& live_field,
                     const SamplerConfig& config, const Eigen::MatrixXd& init,
                     Transport transport) {
  const std::vector<double> sched = resolve_schedule(config);
  const int n = static_cast<int>(sched.size()) - 1;
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SamplingTrace trace;
  Eigen::MatrixXd x = init;
  Eigen::MatrixXd prev_x_hat;
  Eigen::MatrixXd prev_z_hat;
  for (int i = 0; i < n; ++i) {
    const double t = sched[static_cast<std::size_t>(i)];
    const double t_next = sched[static_cast<std::size_t>(i) + 1];
    const auto c = eval_coefficients(transport, t);
    const auto c_next = eval_coefficients(transport, t_next);

    const Eigen::MatrixXd f = ema_field(x, t);
    ++trace.evaluations;
    const Eigen::MatrixXd x_raw = predict_x(f, x, c);
    const Eigen::MatrixXd z_raw = predict_z(f, x, c);
    trace.history.push_back(x_raw);
    trace.times.push_back(t);

    Eigen::MatrixXd x_hat = x_raw;
    Eigen::MatrixXd z_hat = z_raw;
    if (i >= 1) {
      x_hat += config.kappa * (x_raw - prev_x_hat);
      z_hat += config.kappa * (z_raw - prev_z_hat);
    }
    prev_x_hat = x_raw;
    prev_z_hat = z_raw;

    const double rho = step_rho(config.rho, t, t_next, transport);
    Eigen::MatrixXd noise_part = z_hat;
    if (rho > 0.0) {
      Eigen::MatrixXd fresh(x.rows(), x.cols());
      for (Eigen::Index k = 0; k < fresh.size(); ++k) fresh.data()[k] = normal(rng);
      noise_part = std::sqrt(1.0 - rho) * z_hat + std::sqrt(rho) * fresh;
    }
    Eigen::MatrixXd x_next = c_next.alpha * noise_part + c_next.gamma * x_hat;

    if (config.order == 2 && i < n - 1) {
      if (std::abs(c.alpha) < kSingularDenomThreshold) {
        throw SingularCoefficientError("sampler corrector: alpha(t_i) vanishes at t=" +
                                       std::to_string(t));
      }
      const Eigen::MatrixXd f_next = live_field(x_next, t_next);
      ++trace.evaluations;
      const Eigen::MatrixXd x_hat_next = predict_x(f_next, x_next, c_next);
      const double ratio = c_next.alpha / c.alpha;
      x_next = ratio * x + (c_next.gamma - ratio * c.gamma) * (0.5 * (x_hat + x_hat_next));
    }
    x = std::move(x_next);
  }
  trace.final = std::move(x);
  return trace;
}

Eigen::MatrixXd euler_reference(const FieldFn& drift, const Eigen::MatrixXd& init,
                                const std::vector<double>& schedule) {
  if (schedule.size() < 2) throw std::invalid_argument("euler_reference: need two or more times");
  Eigen::MatrixXd x = init;
  for (std::size_t i = 0; i + 1 < schedule.size(); ++i) {
    x += drift(x, schedule[i]) * (schedule[i + 1] - schedule[i]);
  }
  return x;
}

}  // namespace ucgm
