#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace ucgm {

enum class Activation : std::uint64_t { Tanh = 0, SiLU = 1 };

/// Condition label selecting the dedicated null row of the condition table.
inline constexpr int kNullCondition = -1;

/// sin and cos of (k+1)·π/2·t for k = 0..7.
inline constexpr int kTimeFeatures = 16;

struct MlpShape {
  int data_dim = 1;
  std::vector<int> hidden{64, 64, 64};
  int num_classes = 0;  ///< labelled classes; the table always carries one extra null row
  Activation activation = Activation::SiLU;
};

/// Parameters of F_θ(x_t, t, c): a dense tower over [x_t, time features] with a learned
/// condition table added to the first hidden pre-activation.
struct MlpParams {
  std::vector<Eigen::MatrixXd> weights;  ///< layer l maps in_l -> out_l, stored out_l x in_l
  std::vector<Eigen::VectorXd> biases;
  Eigen::MatrixXd cond_table;            ///< hidden_0 x (num_classes + 1), null row last
  Activation activation = Activation::SiLU;

  int data_dim() const { return weights.empty() ? 0 : static_cast<int>(weights.back().rows()); }
  int num_classes() const { return static_cast<int>(cond_table.cols()) - 1; }
  std::size_t parameter_count() const;

  /// Same shapes, all entries zero.
  MlpParams zeros_like() const;
  bool same_shape(const MlpParams& other) const;
  bool all_finite() const;

  /// Flat views over every tensor in a fixed order: (W_0, b_0, ..., W_L, b_L, cond_table).
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
};

/// Throws std::invalid_argument on an empty or zero-width layer list.
MlpParams init_mlp(const MlpShape& shape, std::uint64_t seed);

Eigen::VectorXd time_embedding(double t);

/// Activations kept by forward() for the reverse pass.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> layer_inputs;  ///< input to each dense layer
  std::vector<Eigen::MatrixXd> pre_activations;  ///< hidden pre-activations
  std::vector<int> cond_columns;
  bool empty() const { return layer_inputs.empty(); }
};

/// Batched evaluation. x_t is d x B; t holds B times (or one, broadcast); cond holds B
/// labels (or is empty, meaning ∅ for every column).
Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixXd& x_t,
                        std::span<const double> t, std::span<const int> cond = {},
                        ForwardCache* cache = nullptr);

/// Reverse-mode gradient of a scalar loss given dL/dF (d x B) and the cache of the forward
/// pass that produced F. Throws std::logic_error when the cache is empty.
MlpParams backward(const MlpParams& params, const ForwardCache& cache,
                   const Eigen::MatrixXd& output_adjoint);

struct EmaState {
  MlpParams shadow;
  double decay = 0.9999;
};

EmaState make_ema(const MlpParams& live, double decay);

/// shadow <- decay * shadow + (1 - decay) * live
void ema_update(EmaState& ema, const MlpParams& live);

class WeightFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void save_weights(const MlpParams& params, const std::filesystem::path& path);
MlpParams load_weights(const std::filesystem::path& path);

}  // namespace ucgm
