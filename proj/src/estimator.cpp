#include "ucgm/estimator.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

namespace ucgm {

namespace {

Eigen::MatrixXd activate(const Eigen::MatrixXd& pre, Activation act) {
  if (act == Activation::Tanh) return pre.array().tanh().matrix();
  return (pre.array() / (1.0 + (-pre.array()).exp())).matrix();
}

// Derivative of the activation evaluated at the pre-activation.
Eigen::ArrayXXd activation_slope(const Eigen::MatrixXd& pre, Activation act) {
  if (act == Activation::Tanh) {
    const Eigen::ArrayXXd th = pre.array().tanh();
    return 1.0 - th * th;
  }
  const Eigen::ArrayXXd sig = 1.0 / (1.0 + (-pre.array()).exp());
  return sig * (1.0 + pre.array() * (1.0 - sig));
}

int cond_column(const MlpParams& params, int label) {
  const int classes = params.num_classes();
  if (label == kNullCondition) return classes;
  if (label < 0 || label >= classes) {
    throw std::invalid_argument("condition label " + std::to_string(label) + " outside [0, " +
                                std::to_string(classes) + ")");
  }
  return label;
}

}  // namespace

std::size_t MlpParams::parameter_count() const {
  std::size_t n = static_cast<std::size_t>(cond_table.size());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  }
  return n;
}

MlpParams MlpParams::zeros_like() const {
  MlpParams out;
  out.activation = activation;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.weights.push_back(Eigen::MatrixXd::Zero(weights[l].rows(), weights[l].cols()));
    out.biases.push_back(Eigen::VectorXd::Zero(biases[l].size()));
  }
  out.cond_table = Eigen::MatrixXd::Zero(cond_table.rows(), cond_table.cols());
  return out;
}

bool MlpParams::same_shape(const MlpParams& other) const {
  if (weights.size() != other.weights.size() || biases.size() != other.biases.size()) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != other.weights[l].rows() ||
        weights[l].cols() != other.weights[l].cols() ||
        biases[l].size() != other.biases[l].size()) {
      return false;
    }
  }
  return cond_table.rows() == other.cond_table.rows() &&
         cond_table.cols() == other.cond_table.cols();
}

bool MlpParams::all_finite() const {
  for (const auto& t : tensors()) {
    for (double v : t) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

std::vector<std::span<double>> MlpParams::tensors() {
  std::vector<std::span<double>> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.emplace_back(weights[l].data(), static_cast<std::size_t>(weights[l].size()));
    out.emplace_back(biases[l].data(), static_cast<std::size_t>(biases[l].size()));
  }
  out.emplace_back(cond_table.data(), static_cast<std::size_t>(cond_table.size()));
  return out;
}

std::vector<std::span<const double>> MlpParams::tensors() const {
  std::vector<std::span<const double>> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.emplace_back(weights[l].data(), static_cast<std::size_t>(weights[l].size()));
    out.emplace_back(biases[l].data(), static_cast<std::size_t>(biases[l].size()));
  }
  out.emplace_back(cond_table.data(), static_cast<std::size_t>(cond_table.size()));
  return out;
}

MlpParams init_mlp(const MlpShape& shape, std::uint64_t seed) {
  if (shape.data_dim < 1) throw std::invalid_argument("init_mlp: data_dim must be >= 1");
  if (shape.hidden.empty()) throw std::invalid_argument("init_mlp: need at least one hidden layer");
  for (int h : shape.hidden) {
    if (h < 1) throw std::invalid_argument("init_mlp: hidden widths must be >= 1");
  }
  if (shape.num_classes < 0) throw std::invalid_argument("init_mlp: negative class count");

  std::mt19937_64 rng(seed);
  MlpParams p;
  p.activation = shape.activation;
  std::vector<int> dims;
  dims.push_back(shape.data_dim + kTimeFeatures);
  dims.insert(dims.end(), shape.hidden.begin(), shape.hidden.end());
  dims.push_back(shape.data_dim);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    std::uniform_real_distribution<double> u(-bound, bound);
    Eigen::MatrixXd w(dims[l + 1], dims[l]);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    Eigen::VectorXd b(dims[l + 1]);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = u(rng);
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  p.cond_table = Eigen::MatrixXd::Zero(shape.hidden.front(), shape.num_classes + 1);
  return p;
}

Eigen::VectorXd time_embedding(double t) {
  Eigen::VectorXd e(kTimeFeatures);
  for (int k = 0; k < kTimeFeatures / 2; ++k) {
    const double freq = (k + 1) * std::numbers::pi / 2.0;
    e[2 * k] = std::sin(freq * t);
    e[2 * k + 1] = std::cos(freq * t);
  }
  return e;
}

Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixXd& x_t,
                        std::span<const double> t, std::span<const int> cond,
                        ForwardCache* cache) {
  const int d = params.data_dim();
  const Eigen::Index batch = x_t.cols();
  if (x_t.rows() != d) {
    throw std::invalid_argument("forward: input has " + std::to_string(x_t.rows()) +
                                " rows, model expects " + std::to_string(d));
  }
  if (t.size() != 1 && t.size() != static_cast<std::size_t>(batch)) {
    throw std::invalid_argument("forward: need one time per column (or a single time)");
  }
  if (!cond.empty() && cond.size() != static_cast<std::size_t>(batch)) {
    throw std::invalid_argument("forward: need one condition per column (or none)");
  }

  Eigen::MatrixXd input(d + kTimeFeatures, batch);
  input.topRows(d) = x_t;
  if (t.size() == 1) {
    input.bottomRows(kTimeFeatures) = time_embedding(t[0]).replicate(1, batch);
  } else {
    for (Eigen::Index j = 0; j < batch; ++j) {
      input.col(j).tail(kTimeFeatures) = time_embedding(t[static_cast<std::size_t>(j)]);
    }
  }

  std::vector<int> columns(static_cast<std::size_t>(batch), params.num_classes());
  if (!cond.empty()) {
    for (std::size_t j = 0; j < cond.size(); ++j) columns[j] = cond_column(params, cond[j]);
  }

  if (cache) {
    cache->layer_inputs.clear();
    cache->pre_activations.clear();
    cache->cond_columns = columns;
  }

  const std::size_t layers = params.weights.size();
  Eigen::MatrixXd h = std::move(input);
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd pre = params.weights[l] * h;
    pre.colwise() += params.biases[l];
    if (l == 0) {
      for (Eigen::Index j = 0; j < batch; ++j) {
        pre.col(j) += params.cond_table.col(columns[static_cast<std::size_t>(j)]);
      }
    }
    if (cache) cache->layer_inputs.push_back(h);
    if (l + 1 == layers) return pre;
    h = activate(pre, params.activation);
    if (cache) cache->pre_activations.push_back(std::move(pre));
  }
  return h;  // unreachable: weights is never empty for an initialized model
}

MlpParams backward(const MlpParams& params, const ForwardCache& cache,
                   const Eigen::MatrixXd& output_adjoint) {
  if (cache.empty()) throw std::logic_error("backward: forward cache is empty");
  const std::size_t layers = params.weights.size();
  if (cache.layer_inputs.size() != layers || cache.pre_activations.size() + 1 != layers) {
    throw std::logic_error("backward: cache does not match the model");
  }
  if (output_adjoint.rows() != params.data_dim() ||
      output_adjoint.cols() != cache.layer_inputs.front().cols()) {
    throw std::invalid_argument("backward: adjoint shape does not match the forward batch");
  }

  MlpParams grad = params.zeros_like();
  Eigen::MatrixXd delta = output_adjoint;
  for (std::size_t l = layers; l-- > 0;) {
    grad.weights[l].noalias() = delta * cache.layer_inputs[l].transpose();
    grad.biases[l] = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = params.weights[l].transpose() * delta;
    delta = (back.array() * activation_slope(cache.pre_activations[l - 1], params.activation))
                .matrix();
  }
  for (std::size_t j = 0; j < cache.cond_columns.size(); ++j) {
    grad.cond_table.col(cache.cond_columns[j]) += delta.col(static_cast<Eigen::Index>(j));
  }
  return grad;
}

EmaState make_ema(const MlpParams& live, double decay) {
  if (!(decay >= 0.0 && decay <= 1.0)) throw std::invalid_argument("EMA decay must be in [0, 1]");
  return EmaState{live, decay};
}

void ema_update(EmaState& ema, const MlpParams& live) {
  if (!ema.shadow.same_shape(live)) throw std::invalid_argument("ema_update: shape mismatch");
  auto shadow = ema.shadow.tensors();
  const auto current = live.tensors();
  const double keep = ema.decay;
  const double take = 1.0 - ema.decay;
  for (std::size_t k = 0; k < shadow.size(); ++k) {
    for (std::size_t i = 0; i < shadow[k].size(); ++i) {
      shadow[k][i] = keep * shadow[k][i] + take * current[k][i];
    }
  }
}

// ---------------------------------------------------------------------------
// Weight files: "UCGMW1\n", u64 layer count, then per dense layer u64 rows, u64 cols,
// row-major f64 weights and the f64 bias; then the condition table as one more
// (rows, cols, row-major data) block and a trailing u64 activation code. All integers
// and floats little-endian.

namespace {

constexpr char kMagic[] = "UCGMW1\n";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

void put_u64(std::ostream& os, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(bytes, 8);
}

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& is) {
  unsigned char bytes[8];
  if (!is.read(reinterpret_cast<char*>(bytes), 8)) throw WeightFileError("weight file truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

void put_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  put_u64(os, static_cast<std::uint64_t>(m.rows()));
  put_u64(os, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(os, m(r, c));
  }
}

Eigen::MatrixXd get_matrix(std::istream& is) {
  constexpr std::uint64_t kMaxDim = 1u << 20;
  const auto rows = get_u64(is);
  const auto cols = get_u64(is);
  if (rows == 0 || cols == 0 || rows > kMaxDim || cols > kMaxDim) {
    throw WeightFileError("weight file has an implausible matrix shape");
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = get_f64(is);
  }
  return m;
}

}  // namespace

void save_weights(const MlpParams& params, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw WeightFileError("cannot open " + path.string() + " for writing");
  os.write(kMagic, kMagicLen);
  put_u64(os, params.weights.size());
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    put_matrix(os, params.weights[l]);
    for (Eigen::Index i = 0; i < params.biases[l].size(); ++i) put_f64(os, params.biases[l][i]);
  }
  put_matrix(os, params.cond_table);
  put_u64(os, static_cast<std::uint64_t>(params.activation));
  if (!os) throw WeightFileError("failed writing " + path.string());
}

MlpParams load_weights(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw WeightFileError("cannot open " + path.string());
  char magic[kMagicLen];
  if (!is.read(magic, kMagicLen) || std::memcmp(magic, kMagic, kMagicLen) != 0) {
    throw WeightFileError(path.string() + " is not a UCGMW1 weight file");
  }
  const auto layers = get_u64(is);
  if (layers == 0 || layers > 1024) throw WeightFileError("weight file has a bad layer count");

  MlpParams p;
  for (std::uint64_t l = 0; l < layers; ++l) {
    p.weights.push_back(get_matrix(is));
    Eigen::VectorXd b(p.weights.back().rows());
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = get_f64(is);
    p.biases.push_back(std::move(b));
  }
  p.cond_table = get_matrix(is);
  const auto act = get_u64(is);
  if (act > static_cast<std::uint64_t>(Activation::SiLU)) {
    throw WeightFileError("weight file has an unknown activation code");
  }
  p.activation = static_cast<Activation>(act);
  if (is.peek() != std::char_traits<char>::eof()) {
    throw WeightFileError("weight file has trailing bytes");
  }

  const auto data_dim = p.weights.back().rows();
  if (p.weights.front().cols() != data_dim + kTimeFeatures) {
    throw WeightFileError("weight file: first layer width does not match the data dimension");
  }
  for (std::size_t l = 1; l < p.weights.size(); ++l) {
    if (p.weights[l].cols() != p.weights[l - 1].rows()) {
      throw WeightFileError("weight file: layer shapes do not chain");
    }
  }
  if (p.cond_table.rows() != p.weights.front().rows()) {
    throw WeightFileError("weight file: condition table height does not match layer 0");
  }
  return p;
}

}  // namespace ucgm
