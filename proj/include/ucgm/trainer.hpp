#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ucgm/estimator.hpp"
#include "ucgm/prediction.hpp"
#include "ucgm/timedist.hpp"
#include "ucgm/transport.hpp"

namespace ucgm {

enum class LrSchedule { Constant, Cosine };

struct TrainerConfig {
  double lambda = 0.0;        ///< consistency ratio in [0, 1]
  double zeta = 0.0;          ///< enhancement ratio; 0 disables
  double s_threshold = 0.75;
  double epsilon = 0.005;     ///< central-difference half step for lambda = 1
  BetaParams beta{1.0, 1.0};
  Transport transport = Transport::Linear;

  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double weight_decay = 0.0;
  int warmup_steps = -1;      ///< -1: 500 when lambda = 1, otherwise 0
  LrSchedule lr_schedule = LrSchedule::Constant;

  int batch_size = 256;
  long total_steps = 20000;
  double ema_decay = 0.9999;
  double clip_bound = 1.0;
  double cond_dropout = 0.1;
  double time_min = 0.004;    ///< Beta draws are clamped into [time_min, time_max]
  double time_max = 0.996;
  std::uint64_t seed = 0;

  std::vector<int> hidden{64, 64, 64};
  Activation activation = Activation::SiLU;

  /// Throws std::invalid_argument describing the first bad field.
  void validate() const;
  int effective_warmup() const;
};

/// One training minibatch: x ~ data, z ~ N(0, I), t ~ Beta, labels with null dropout.
struct TrainingBatch {
  Eigen::MatrixXd x;  ///< d x B
  Eigen::MatrixXd z;  ///< d x B
  std::vector<double> t;
  std::vector<int> cond;  ///< empty when the data is unlabelled
};

struct StepRecord {
  long step = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double clip_rate = 0.0;  ///< fraction of Δf^x entries hitting the clip bound
  int forward_passes = 0;  ///< network evaluations spent on this batch
};

struct AdamState {
  MlpParams m;
  MlpParams v;
  long steps = 0;
};

struct TrainerState {
  MlpParams live;
  EmaState ema;
  AdamState adam;
  std::mt19937_64 rng;
  long step = 0;
};

/// Fresh model, EMA copy and zeroed optimizer moments, all seeded from config.seed.
TrainerState make_trainer_state(const TrainerConfig& config, int data_dim, int num_classes = 0);

/// data is d x n; labels empty or of length n.
TrainingBatch make_batch(std::mt19937_64& rng, const Eigen::MatrixXd& data,
                         std::span<const int> labels, const TrainerConfig& config);

/// f^x(F, x_t)·scale with the scale folded into the two coefficients, so the product never
/// passes through the (possibly tiny) unscaled prediction.
template <typename DF, typename DX>
typename DF::PlainObject scaled_predict_x(const Eigen::MatrixBase<DF>& field,
                                          const Eigen::MatrixBase<DX>& x_t,
                                          const CoefficientSample& c, double scale) {
  using S = typename DF::Scalar;
  detail::require_same_shape(field, x_t, "scaled_predict_x");
  detail::require_regular(c, "scaled_predict_x");
  return static_cast<S>(c.alpha * scale / c.denom) * field -
         static_cast<S>(c.alpha_hat * scale / c.denom) * x_t;
}

/// Distributive central difference f^x(F+)/(2ε) − f^x(F−)/(2ε).
template <typename V>
V central_difference_distributive(const V& f_plus, const V& x_plus, const CoefficientSample& c_plus,
                                  const V& f_minus, const V& x_minus,
                                  const CoefficientSample& c_minus, double epsilon) {
  const double scale = 1.0 / (2.0 * epsilon);
  return scaled_predict_x(f_plus, x_plus, c_plus, scale) -
         scaled_predict_x(f_minus, x_minus, c_minus, scale);
}

/// Subtract-then-scale reference form (f^x(F+) − f^x(F−))/(2ε), kept for comparison.
template <typename V>
V central_difference_naive(const V& f_plus, const V& x_plus, const CoefficientSample& c_plus,
                           const V& f_minus, const V& x_minus, const CoefficientSample& c_minus,
                           double epsilon) {
  using S = typename V::Scalar;
  const V diff = predict_x(f_plus, x_plus, c_plus) - predict_x(f_minus, x_minus, c_minus);
  return diff * static_cast<S>(1.0 / (2.0 * epsilon));
}

/// Enhanced pair (x⋆, z⋆) for one column.
struct EnhancedPair {
  Eigen::VectorXd x;
  Eigen::VectorXd z;
};

/// ξ with the unconditional EMA output: for t ≤ s, x⋆ = x + ζ(f^x(F_c) − f^x(F_u));
/// for t > s, x⋆ = x + ½(f^x(F_c) − x). z⋆ likewise with f^z.
EnhancedPair enhance_pair(const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                          const Eigen::VectorXd& x_t, double t, const Eigen::VectorXd& f_cond,
                          const Eigen::VectorXd& f_uncond, double zeta, double s_threshold,
                          Transport transport);

/// Teacher variant: for t ≤ s, x⋆ = x + ζ(f^x(F_teacher) − x); for t > s the ½ blend.
EnhancedPair enhance_pair_teacher(const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                                  const Eigen::VectorXd& x_t, double t,
                                  const Eigen::VectorXd& f_teacher, double zeta,
                                  double s_threshold, Transport transport);

/// f^x(F_t, x⋆_t, t)/(t − λt) − f^x(F_λ, x⋆_λt, λt)/(t − λt). At λ = 0 the second
/// prediction is x⋆ itself and f_lam / x_lam_star are ignored. Throws for t ≤ 0.
Eigen::VectorXd delta_fx_multistep(const Eigen::VectorXd& f_t, const Eigen::VectorXd& f_lam,
                                   const Eigen::VectorXd& x_t_star,
                                   const Eigen::VectorXd& x_lam_star,
                                   const Eigen::VectorXd& x_star, double t, double lambda,
                                   Transport transport);

/// f^x(F+, x⋆_{t+ε}, t+ε)/(2ε) − f^x(F−, x⋆_{t−ε}, t−ε)/(2ε), t clamped into [ε, 1 − ε].
Eigen::VectorXd delta_fx_consistency(const Eigen::VectorXd& f_plus, const Eigen::VectorXd& f_minus,
                                     const Eigen::VectorXd& x_plus_star,
                                     const Eigen::VectorXd& x_minus_star, double t,
                                     double epsilon, Transport transport);

/// Clamp used by the λ = 1 branch.
double clamp_consistency_time(double t, double epsilon);

struct TargetResult {
  Eigen::VectorXd target;
  int clipped = 0;  ///< entries of Δf^x outside [−clip_bound, clip_bound]
};

/// sg(F_t) − 4α/(αγ̂ − α̂γ) · clip(Δf^x, −b, b) / sin(t). Throws for t ≤ 0.
TargetResult compute_target(const Eigen::VectorXd& f_t, const Eigen::VectorXd& delta_fx,
                            const CoefficientSample& coeffs, double clip_bound);

struct LossResult {
  double loss = 0.0;
  Eigen::MatrixXd adjoint;  ///< dL/dF, d x B
};

/// mean over columns of cos(t_j)·‖F_j − target_j‖², with its adjoint.
LossResult loss_and_grad(const Eigen::MatrixXd& f, const Eigen::MatrixXd& target,
                         std::span<const double> t);

/// Teacher snapshot used by the teacher enhancement variant.
using Teacher = std::optional<MlpParams>;

struct GradientResult {
  StepRecord record;
  MlpParams gradient;
};

/// Loss and parameter gradient of one batch without touching any state.
GradientResult compute_gradient(const TrainerState& state, const TrainingBatch& batch,
                                const TrainerConfig& config, const Teacher& teacher = {});

/// AdamW update with warmup/decay, then one EMA update.
void apply_update(TrainerState& state, const MlpParams& gradient, const TrainerConfig& config);

/// One full training step on a given batch. Throws std::runtime_error on a non-finite loss.
StepRecord train_step(TrainerState& state, const TrainingBatch& batch, const TrainerConfig& config,
                      const Teacher& teacher = {});

struct TrainingResult {
  MlpParams live;
  MlpParams ema;
  std::vector<StepRecord> log;
};

using ProgressFn = std::function<void(const StepRecord&)>;

/// Runs config.total_steps steps on data (d x n). Throws std::invalid_argument for empty data.
TrainingResult train(const TrainerConfig& config, const Eigen::MatrixXd& data,
                     std::span<const int> labels = {}, int num_classes = 0,
                     const Teacher& teacher = {}, const ProgressFn& progress = {});

}  // namespace ucgm
