#include "doctest.h"

#include <stdexcept>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "gradcheck.hpp"
#include "ucgm/estimator.hpp"

using namespace ucgm;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("ucgm_test_" + name);
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = n01(rng);
  return m;
}

void randomize(MlpParams& p, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n01;
  for (auto t : p.tensors()) {
    for (double& v : t) v = scale * n01(rng);
  }
}

}  // namespace

TEST_SUITE("estimator") {

TEST_CASE("init is deterministic and validates shapes") {
  MlpShape shape{2, {16, 16}, 3, Activation::SiLU};
  const auto a = init_mlp(shape, 42);
  const auto b = init_mlp(shape, 42);
  const auto c = init_mlp(shape, 43);
  REQUIRE(a.same_shape(b));
  CHECK(a.weights[0] == b.weights[0]);
  CHECK(a.biases[2] == b.biases[2]);
  CHECK(a.weights[0] != c.weights[0]);
  CHECK(a.weights[0].cols() == 2 + kTimeFeatures);
  CHECK(a.data_dim() == 2);
  CHECK(a.num_classes() == 3);
  CHECK(a.cond_table.cols() == 4);
  CHECK(a.all_finite());

  CHECK_THROWS_AS(init_mlp(MlpShape{1, {}, 0, Activation::Tanh}, 1), std::invalid_argument);
  CHECK_THROWS_AS(init_mlp(MlpShape{1, {8, 0}, 0, Activation::Tanh}, 1), std::invalid_argument);
  CHECK_THROWS_AS(init_mlp(MlpShape{0, {8}, 0, Activation::Tanh}, 1), std::invalid_argument);
}

TEST_CASE("time embedding") {
  const auto e = time_embedding(0.0);
  for (int k = 0; k < kTimeFeatures / 2; ++k) {
    CHECK(e[2 * k] == 0.0);
    CHECK(e[2 * k + 1] == 1.0);
  }
  CHECK(time_embedding(1.0)[0] == doctest::Approx(1.0));
  CHECK(time_embedding(0.5)[2] == doctest::Approx(1.0));
  CHECK(time_embedding(0.125)[14] == doctest::Approx(1.0));  // top frequency 4π
  // Smooth enough in t for central differences at ε = 1e-3.
  const double eps = 1e-3;
  CHECK((time_embedding(0.4 + eps) - time_embedding(0.4 - eps)).lpNorm<Eigen::Infinity>() <
        8.0 * std::numbers::pi * eps * 1.0001);
}

TEST_CASE("forward basics") {
  auto p = init_mlp(MlpShape{2, {8, 8}, 2, Activation::Tanh}, 1);
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd x = random_matrix(2, 5, rng);
  const double t[] = {0.3};
  const auto y1 = forward(p, x, t);
  const auto y2 = forward(p, x, t);
  CHECK(y1.rows() == 2);
  CHECK(y1.cols() == 5);
  CHECK(y1 == y2);

  auto zero = p.zeros_like();
  CHECK(forward(zero, x, t).isZero(0.0));

  // ∅ selects the last table column; an explicit label selects its own.
  p.cond_table.col(2).setConstant(0.7);
  p.cond_table.col(0).setConstant(-0.4);
  const std::vector<int> nulls(5, kNullCondition);
  const std::vector<int> zeros(5, 0);
  CHECK(forward(p, x, t, nulls) == forward(p, x, t));
  CHECK(forward(p, x, t, zeros) != forward(p, x, t));
  ForwardCache cache;
  forward(p, x, t, nulls, &cache);
  CHECK(cache.cond_columns == std::vector<int>(5, 2));

  CHECK_THROWS_AS(forward(p, random_matrix(3, 5, rng), t), std::invalid_argument);
  const std::vector<int> bad(5, 2);
  CHECK_THROWS_AS(forward(p, x, t, bad), std::invalid_argument);
  const double two_times[] = {0.1, 0.2};
  CHECK_THROWS_AS(forward(p, x, two_times), std::invalid_argument);
}

TEST_CASE("per-column times match single-time calls") {
  const auto p = init_mlp(MlpShape{1, {8}, 0, Activation::SiLU}, 9);
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd x = random_matrix(1, 3, rng);
  const double ts[] = {0.1, 0.5, 0.9};
  const auto y = forward(p, x, ts);
  for (int j = 0; j < 3; ++j) {
    const double t1[] = {ts[j]};
    CHECK((forward(p, x.col(j), t1) - y.col(j)).norm() < 1e-15);
  }
}

TEST_CASE("backward of ||F||^2/2 at zero weights is zero") {
  auto p = init_mlp(MlpShape{1, {8}, 0, Activation::SiLU}, 1).zeros_like();
  std::mt19937_64 rng(4);
  ForwardCache cache;
  const double t[] = {0.4};
  const auto y = forward(p, random_matrix(1, 4, rng), t, {}, &cache);
  const auto g = backward(p, cache, y);
  for (const auto& tensor : g.tensors()) {
    for (double v : tensor) CHECK(v == 0.0);
  }
  CHECK(g.same_shape(p));
  CHECK_THROWS_AS(backward(p, ForwardCache{}, y), std::logic_error);
}

TEST_CASE("gradient check on 20 random tiny nets") {
  std::mt19937_64 rng(2024);
  for (int k = 0; k < 20; ++k) {
    const int d = 1 + k % 2;
    const int h = k % 4 < 2 ? 8 : 16;
    const Activation act = k % 3 == 0 ? Activation::Tanh : Activation::SiLU;
    auto p = init_mlp(MlpShape{d, {h, h}, 2, act}, static_cast<std::uint64_t>(k));
    randomize(p, rng, 0.5);
    const Eigen::MatrixXd x = random_matrix(d, 3, rng);
    const Eigen::MatrixXd y = random_matrix(d, 3, rng);
    const std::vector<double> t{0.1, 0.55, 0.93};
    const std::vector<int> cond{0, kNullCondition, 1};
    auto loss = [&](const MlpParams& q) {
      return 0.5 * (forward(q, x, t, cond) - y).squaredNorm();
    };
    ForwardCache cache;
    const auto f = forward(p, x, t, cond, &cache);
    const auto g = backward(p, cache, f - y);
    const auto r = testing::check_gradient(p, g, loss);
    CHECK(r.max_rel < 1e-6);
    CHECK(r.global_rel < 1e-6);
  }
}

TEST_CASE("output is Lipschitz in x on a bounded box") {
  const auto p = init_mlp(MlpShape{2, {16, 16}, 0, Activation::SiLU}, 5);
  std::mt19937_64 rng(6);
  const double t[] = {0.5};
  // Crude bound: product of spectral norms times the activation slope bound (1.1 for SiLU).
  double lip = 1.0;
  for (const auto& w : p.weights) {
    lip *= Eigen::JacobiSVD<Eigen::MatrixXd>(w).singularValues()(0) * 1.1;
  }
  for (int k = 0; k < 100; ++k) {
    const Eigen::MatrixXd x = random_matrix(2, 1, rng);
    const Eigen::MatrixXd dx = 1e-3 * random_matrix(2, 1, rng);
    CHECK((forward(p, x + dx, t) - forward(p, x, t)).norm() <= lip * dx.norm() + 1e-12);
  }
}

TEST_CASE("ema update") {
  const auto live = init_mlp(MlpShape{1, {4}, 0, Activation::Tanh}, 1);
  auto ema = make_ema(live.zeros_like(), 0.0);
  ema_update(ema, live);
  CHECK(ema.shadow.weights[0] == live.weights[0]);

  auto frozen = make_ema(live.zeros_like(), 1.0);
  ema_update(frozen, live);
  CHECK(frozen.shadow.weights[0].isZero(0.0));

  MlpParams twos = live;
  for (auto t : twos.tensors()) std::fill(t.begin(), t.end(), 2.0);
  auto half = make_ema(live.zeros_like(), 0.5);
  ema_update(half, twos);
  for (const auto& t : half.shadow.tensors()) {
    for (double v : t) CHECK(v == 1.0);
  }

  const auto other = init_mlp(MlpShape{1, {5}, 0, Activation::Tanh}, 1);
  CHECK_THROWS_AS(ema_update(half, other), std::invalid_argument);
  CHECK_THROWS_AS(make_ema(live, 1.5), std::invalid_argument);
}

TEST_CASE("weight files round-trip bitwise") {
  auto p = init_mlp(MlpShape{2, {8, 6}, 3, Activation::Tanh}, 77);
  std::mt19937_64 rng(8);
  randomize(p, rng, 1.0);
  const auto path = temp_file("weights.ucgmw");
  save_weights(p, path);
  const auto q = load_weights(path);
  REQUIRE(q.same_shape(p));
  CHECK(q.activation == p.activation);
  const auto a = p.tensors();
  const auto b = q.tensors();
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(std::equal(a[k].begin(), a[k].end(), b[k].begin()));
  }
  std::ifstream in(path, std::ios::binary);
  char magic[7];
  in.read(magic, 7);
  CHECK(std::string(magic, 7) == "UCGMW1\n");
}

TEST_CASE("corrupt weight files are rejected") {
  const auto p = init_mlp(MlpShape{1, {4}, 0, Activation::SiLU}, 1);
  const auto path = temp_file("trunc.ucgmw");
  save_weights(p, path);
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 9);
  CHECK_THROWS_AS(load_weights(path), WeightFileError);

  const auto padded = temp_file("padded.ucgmw");
  save_weights(p, padded);
  std::filesystem::resize_file(padded, size + 1);
  CHECK_THROWS_AS(load_weights(padded), WeightFileError);

  const auto bad = temp_file("magic.ucgmw");
  save_weights(p, bad);
  {
    std::fstream f(bad, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
  }
  CHECK_THROWS_AS(load_weights(bad), WeightFileError);
  CHECK_THROWS_AS(load_weights(temp_file("does_not_exist.ucgmw")), WeightFileError);
}

}  // TEST_SUITE
