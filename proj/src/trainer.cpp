#include "ucgm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

#include "ucgm/prediction.hpp"

namespace ucgm {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("trainer config: " + what);
}

Eigen::MatrixXd interpolate_columns(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z,
                                    std::span<const double> t, Transport tr) {
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const auto c = eval_coefficients(tr, t[static_cast<std::size_t>(j)]);
    out.col(j) = c.alpha * z.col(j) + c.gamma * x.col(j);
  }
  return out;
}

double squared_norm(const MlpParams& p) {
  double s = 0.0;
  for (const auto& tensor : p.tensors()) {
    for (double v : tensor) s += v * v;
  }
  return s;
}

}  // namespace

void TrainerConfig::validate() const {
  require(lambda >= 0.0 && lambda <= 1.0, "lambda must be in [0, 1]");
  require(zeta >= 0.0, "zeta must be >= 0");
  require(s_threshold >= 0.0 && s_threshold <= 1.0, "s_threshold must be in [0, 1]");
  require(epsilon > 0.0 && epsilon < 0.5, "epsilon must be in (0, 0.5)");
  beta.validate();
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(beta1 >= 0.0 && beta1 < 1.0, "beta1 must be in [0, 1)");
  require(beta2 >= 0.0 && beta2 < 1.0, "beta2 must be in [0, 1)");
  require(adam_epsilon > 0.0, "adam_epsilon must be > 0");
  require(weight_decay >= 0.0, "weight_decay must be >= 0");
  require(warmup_steps >= -1, "warmup_steps must be >= 0 (or -1 for the default)");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(total_steps >= 0, "total_steps must be >= 0");
  require(ema_decay >= 0.0 && ema_decay <= 1.0, "ema_decay must be in [0, 1]");
  require(clip_bound > 0.0, "clip_bound must be > 0");
  require(cond_dropout >= 0.0 && cond_dropout <= 1.0, "cond_dropout must be in [0, 1]");
  require(time_min > 0.0 && time_min < time_max && time_max < 1.0,
          "need 0 < time_min < time_max < 1");
  require(!hidden.empty(), "hidden must list at least one width");
  for (int h : hidden) require(h >= 1, "hidden widths must be >= 1");
}

int TrainerConfig::effective_warmup() const {
  if (warmup_steps >= 0) return warmup_steps;
  return lambda == 1.0 ? 500 : 0;
}

TrainerState make_trainer_state(const TrainerConfig& config, int data_dim, int num_classes) {
  config.validate();
  MlpShape shape;
  shape.data_dim = data_dim;
  shape.hidden = config.hidden;
  shape.num_classes = num_classes;
  shape.activation = config.activation;
  TrainerState state;
  state.live = init_mlp(shape, config.seed);
  state.ema = make_ema(state.live, config.ema_decay);
  state.adam.m = state.live.zeros_like();
  state.adam.v = state.live.zeros_like();
  // Distinct stream from the one used by init_mlp.
  state.rng.seed(config.seed ^ 0x9E3779B97F4A7C15ULL);
  return state;
}

TrainingBatch make_batch(std::mt19937_64& rng, const Eigen::MatrixXd& data,
                         std::span<const int> labels, const TrainerConfig& config) {
  if (data.cols() == 0 || data.rows() == 0) throw std::invalid_argument("make_batch: empty dataset");
  if (!labels.empty() && labels.size() != static_cast<std::size_t>(data.cols())) {
    throw std::invalid_argument("make_batch: label count does not match the dataset");
  }
  const int batch = config.batch_size;
  TrainingBatch out;
  out.x.resize(data.rows(), batch);
  out.z.resize(data.rows(), batch);
  out.t.resize(static_cast<std::size_t>(batch));
  std::uniform_int_distribution<Eigen::Index> pick(0, data.cols() - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(batch));
  for (int j = 0; j < batch; ++j) {
    rows[static_cast<std::size_t>(j)] = pick(rng);
    out.x.col(j) = data.col(rows[static_cast<std::size_t>(j)]);
  }
  for (int j = 0; j < batch; ++j) {
    for (Eigen::Index r = 0; r < data.rows(); ++r) out.z(r, j) = normal(rng);
  }
  for (int j = 0; j < batch; ++j) {
    out.t[static_cast<std::size_t>(j)] =
        std::clamp(sample_beta(config.beta, rng), config.time_min, config.time_max);
  }
  if (!labels.empty()) {
    out.cond.resize(static_cast<std::size_t>(batch));
    for (int j = 0; j < batch; ++j) {
      const int label = labels[static_cast<std::size_t>(rows[static_cast<std::size_t>(j)])];
      out.cond[static_cast<std::size_t>(j)] = unit(rng) < config.cond_dropout ? kNullCondition : label;
    }
  }
  return out;
}

EnhancedPair enhance_pair(const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                          const Eigen::VectorXd& x_t, double t, const Eigen::VectorXd& f_cond,
                          const Eigen::VectorXd& f_uncond, double zeta, double s_threshold,
                          Transport transport) {
  const auto c = eval_coefficients(transport, t);
  const Eigen::VectorXd fx_c = predict_x(f_cond, x_t, c);
  const Eigen::VectorXd fz_c = predict_z(f_cond, x_t, c);
  if (t <= s_threshold) {
    const Eigen::VectorXd fx_u = predict_x(f_uncond, x_t, c);
    const Eigen::VectorXd fz_u = predict_z(f_uncond, x_t, c);
    return {x + zeta * (fx_c - fx_u), z + zeta * (fz_c - fz_u)};
  }
  return {x + 0.5 * (fx_c - x), z + 0.5 * (fz_c - z)};
}

EnhancedPair enhance_pair_teacher(const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                                  const Eigen::VectorXd& x_t, double t,
                                  const Eigen::VectorXd& f_teacher, double zeta,
                                  double s_threshold, Transport transport) {
  const auto c = eval_coefficients(transport, t);
  const Eigen::VectorXd fx = predict_x(f_teacher, x_t, c);
  const Eigen::VectorXd fz = predict_z(f_teacher, x_t, c);
  const double w = t <= s_threshold ? zeta : 0.5;
  return {x + w * (fx - x), z + w * (fz - z)};
}

Eigen::VectorXd delta_fx_multistep(const Eigen::VectorXd& f_t, const Eigen::VectorXd& f_lam,
                                   const Eigen::VectorXd& x_t_star,
                                   const Eigen::VectorXd& x_lam_star,
                                   const Eigen::VectorXd& x_star, double t, double lambda,
                                   Transport transport) {
  if (!(t > 0.0)) throw std::domain_error("delta_fx_multistep: t must be > 0");
  if (!(lambda >= 0.0 && lambda < 1.0)) {
    throw std::domain_error("delta_fx_multistep: lambda must be in [0, 1)");
  }
  const double scale = 1.0 / (t - lambda * t);
  const Eigen::VectorXd head =
      scaled_predict_x(f_t, x_t_star, eval_coefficients(transport, t), scale);
  if (lambda == 0.0) return head - x_star * scale;
  return head - scaled_predict_x(f_lam, x_lam_star, eval_coefficients(transport, lambda * t), scale);
}

double clamp_consistency_time(double t, double epsilon) {
  return std::clamp(t, epsilon, 1.0 - epsilon);
}

Eigen::VectorXd delta_fx_consistency(const Eigen::VectorXd& f_plus, const Eigen::VectorXd& f_minus,
                                     const Eigen::VectorXd& x_plus_star,
                                     const Eigen::VectorXd& x_minus_star, double t,
                                     double epsilon, Transport transport) {
  if (!(epsilon > 0.0 && epsilon < 0.5)) {
    throw std::domain_error("delta_fx_consistency: epsilon must be in (0, 0.5)");
  }
  const double tc = clamp_consistency_time(t, epsilon);
  return central_difference_distributive(f_plus, x_plus_star,
                                         eval_coefficients(transport, tc + epsilon), f_minus,
                                         x_minus_star, eval_coefficients(transport, tc - epsilon),
                                         epsilon);
}

TargetResult compute_target(const Eigen::VectorXd& f_t, const Eigen::VectorXd& delta_fx,
                            const CoefficientSample& coeffs, double clip_bound) {
  if (!(coeffs.t > 0.0)) throw std::domain_error("compute_target: t must be > 0");
  if (f_t.size() != delta_fx.size()) throw std::invalid_argument("compute_target: size mismatch");
  detail::require_regular(coeffs, "compute_target");
  TargetResult out;
  Eigen::VectorXd clipped = delta_fx;
  for (Eigen::Index i = 0; i < clipped.size(); ++i) {
    if (std::abs(clipped[i]) > clip_bound) ++out.clipped;
    clipped[i] = std::clamp(clipped[i], -clip_bound, clip_bound);
  }
  const double k = 4.0 * coeffs.alpha / coeffs.denom / std::sin(coeffs.t);
  out.target = f_t - k * clipped;
  return out;
}

LossResult loss_and_grad(const Eigen::MatrixXd& f, const Eigen::MatrixXd& target,
                         std::span<const double> t) {
  if (f.rows() != target.rows() || f.cols() != target.cols()) {
    throw std::invalid_argument("loss_and_grad: shape mismatch");
  }
  if (t.size() != static_cast<std::size_t>(f.cols())) {
    throw std::invalid_argument("loss_and_grad: need one time per column");
  }
  const double batch = static_cast<double>(f.cols());
  LossResult out;
  out.adjoint.resize(f.rows(), f.cols());
  for (Eigen::Index j = 0; j < f.cols(); ++j) {
    const double w = std::cos(t[static_cast<std::size_t>(j)]);
    const Eigen::VectorXd r = f.col(j) - target.col(j);
    out.loss += w * r.squaredNorm() / batch;
    out.adjoint.col(j) = (2.0 * w / batch) * r;
  }
  return out;
}

GradientResult compute_gradient(const TrainerState& state, const TrainingBatch& batch,
                                const TrainerConfig& config, const Teacher& teacher) {
  const Transport tr = config.transport;
  const Eigen::Index cols = batch.x.cols();
  const Eigen::Index d = batch.x.rows();
  if (batch.z.rows() != d || batch.z.cols() != cols ||
      batch.t.size() != static_cast<std::size_t>(cols)) {
    throw std::invalid_argument("train_step: inconsistent batch");
  }
  const bool consistency = config.lambda == 1.0;

  std::vector<double> t(batch.t);
  if (consistency) {
    for (double& v : t) v = clamp_consistency_time(v, config.epsilon);
  }
  const std::span<const int> cond(batch.cond);

  const Eigen::MatrixXd x_t = interpolate_columns(batch.x, batch.z, t, tr);
  ForwardCache cache;
  const Eigen::MatrixXd f = forward(state.live, x_t, t, cond, &cache);
  int passes = 1;

  // Enhanced pair (x⋆, z⋆).
  Eigen::MatrixXd xs = batch.x;
  Eigen::MatrixXd zs = batch.z;
  if (teacher && config.zeta > 0.0) {
    const Eigen::MatrixXd ft = forward(*teacher, x_t, t, cond);
    ++passes;
    for (Eigen::Index j = 0; j < cols; ++j) {
      auto p = enhance_pair_teacher(batch.x.col(j), batch.z.col(j), x_t.col(j),
                                    t[static_cast<std::size_t>(j)], ft.col(j), config.zeta,
                                    config.s_threshold, tr);
      xs.col(j) = p.x;
      zs.col(j) = p.z;
    }
  } else if (!teacher && config.zeta > 0.0 && config.zeta < 1.0) {
    const Eigen::MatrixXd fu = forward(state.ema.shadow, x_t, t);
    ++passes;
    for (Eigen::Index j = 0; j < cols; ++j) {
      auto p = enhance_pair(batch.x.col(j), batch.z.col(j), x_t.col(j),
                            t[static_cast<std::size_t>(j)], f.col(j), fu.col(j), config.zeta,
                            config.s_threshold, tr);
      xs.col(j) = p.x;
      zs.col(j) = p.z;
    }
  }

  Eigen::MatrixXd delta(d, cols);
  if (!consistency) {
    const Eigen::MatrixXd x_t_star = interpolate_columns(xs, zs, t, tr);
    Eigen::MatrixXd f_lam;
    Eigen::MatrixXd x_lam_star;
    if (config.lambda > 0.0) {
      std::vector<double> lt(t.size());
      for (std::size_t j = 0; j < t.size(); ++j) lt[j] = config.lambda * t[j];
      f_lam = forward(state.live, interpolate_columns(batch.x, batch.z, lt, tr), lt, cond);
      x_lam_star = interpolate_columns(xs, zs, lt, tr);
      ++passes;
    } else {
      f_lam = Eigen::MatrixXd::Zero(d, cols);
      x_lam_star = xs;
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      delta.col(j) = delta_fx_multistep(f.col(j), f_lam.col(j), x_t_star.col(j),
                                        x_lam_star.col(j), xs.col(j),
                                        t[static_cast<std::size_t>(j)], config.lambda, tr);
    }
  } else {
    std::vector<double> tp(t.size());
    std::vector<double> tm(t.size());
    for (std::size_t j = 0; j < t.size(); ++j) {
      tp[j] = t[j] + config.epsilon;
      tm[j] = t[j] - config.epsilon;
    }
    const Eigen::MatrixXd fp =
        forward(state.live, interpolate_columns(batch.x, batch.z, tp, tr), tp, cond);
    const Eigen::MatrixXd fm =
        forward(state.live, interpolate_columns(batch.x, batch.z, tm, tr), tm, cond);
    passes += 2;
    const Eigen::MatrixXd xp_star = interpolate_columns(xs, zs, tp, tr);
    const Eigen::MatrixXd xm_star = interpolate_columns(xs, zs, tm, tr);
    for (Eigen::Index j = 0; j < cols; ++j) {
      delta.col(j) = delta_fx_consistency(fp.col(j), fm.col(j), xp_star.col(j), xm_star.col(j),
                                          t[static_cast<std::size_t>(j)], config.epsilon, tr);
    }
  }

  Eigen::MatrixXd target(d, cols);
  long clipped = 0;
  for (Eigen::Index j = 0; j < cols; ++j) {
    auto r = compute_target(f.col(j), delta.col(j),
                            eval_coefficients(tr, t[static_cast<std::size_t>(j)]),
                            config.clip_bound);
    target.col(j) = r.target;
    clipped += r.clipped;
  }

  const LossResult lr = loss_and_grad(f, target, t);
  GradientResult out;
  out.gradient = backward(state.live, cache, lr.adjoint);
  out.record.step = state.step + 1;
  out.record.loss = lr.loss;
  out.record.grad_norm = std::sqrt(squared_norm(out.gradient));
  out.record.clip_rate = static_cast<double>(clipped) / static_cast<double>(d * cols);
  out.record.forward_passes = passes;
  return out;
}

void apply_update(TrainerState& state, const MlpParams& gradient, const TrainerConfig& config) {
  if (!gradient.same_shape(state.live)) throw std::invalid_argument("apply_update: shape mismatch");
  AdamState& adam = state.adam;
  ++adam.steps;
  const double k = static_cast<double>(adam.steps);
  double lr = config.learning_rate;
  const int warmup = config.effective_warmup();
  if (warmup > 0) lr *= std::min(1.0, k / warmup);
  if (config.lr_schedule == LrSchedule::Cosine && config.total_steps > 0) {
    const double frac = std::min(1.0, k / static_cast<double>(config.total_steps));
    lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
  }
  const double c1 = 1.0 - std::pow(config.beta1, k);
  const double c2 = 1.0 - std::pow(config.beta2, k);

  auto p = state.live.tensors();
  auto m = adam.m.tensors();
  auto v = adam.v.tensors();
  const auto g = gradient.tensors();
  for (std::size_t a = 0; a < p.size(); ++a) {
    for (std::size_t i = 0; i < p[a].size(); ++i) {
      m[a][i] = config.beta1 * m[a][i] + (1.0 - config.beta1) * g[a][i];
      v[a][i] = config.beta2 * v[a][i] + (1.0 - config.beta2) * g[a][i] * g[a][i];
      const double step = (m[a][i] / c1) / (std::sqrt(v[a][i] / c2) + config.adam_epsilon);
      p[a][i] -= lr * (step + config.weight_decay * p[a][i]);
    }
  }
  ema_update(state.ema, state.live);
  ++state.step;
}

StepRecord train_step(TrainerState& state, const TrainingBatch& batch, const TrainerConfig& config,
                      const Teacher& teacher) {
  GradientResult g = compute_gradient(state, batch, config, teacher);
  if (!std::isfinite(g.record.loss) || !std::isfinite(g.record.grad_norm)) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << g.record.step << " (loss " << g.record.loss
        << ", grad norm " << g.record.grad_norm << ")";
    throw std::runtime_error(msg.str());
  }
  apply_update(state, g.gradient, config);
  return g.record;
}

TrainingResult train(const TrainerConfig& config, const Eigen::MatrixXd& data,
                     std::span<const int> labels, int num_classes, const Teacher& teacher,
                     const ProgressFn& progress) {
  if (data.cols() == 0 || data.rows() == 0) throw std::invalid_argument("train: empty dataset");
  TrainerState state = make_trainer_state(config, static_cast<int>(data.rows()), num_classes);
  if (teacher && teacher->data_dim() != data.rows()) {
    throw std::invalid_argument("train: teacher does not match the data dimension");
  }
  TrainingResult out;
  out.log.reserve(static_cast<std::size_t>(config.total_steps));
  for (long s = 0; s < config.total_steps; ++s) {
    const TrainingBatch batch = make_batch(state.rng, data, labels, config);
    out.log.push_back(train_step(state, batch, config, teacher));
    if (progress) progress(out.log.back());
  }
  out.live = std::move(state.live);
  out.ema = std::move(state.ema.shadow);
  return out;
}

}  // namespace ucgm
