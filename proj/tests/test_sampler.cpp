#include "doctest.h"

#include <stdexcept>
#include <cmath>
#include <random>

#include "ucgm/oracle.hpp"
#include "ucgm/prediction.hpp"
#include "ucgm/sampler.hpp"

using namespace ucgm;

namespace {

Eigen::MatrixXd gaussian_init(Eigen::Index d, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd m(d, n);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = n01(rng);
  return m;
}

MlpParams random_net(int d, std::uint64_t seed) {
  return init_mlp(MlpShape{d, {16, 16}, 0, Activation::SiLU}, seed);
}

double mean(const Eigen::MatrixXd& m) { return m.mean(); }
double variance(const Eigen::MatrixXd& m) {
  const double mu = m.mean();
  return (m.array() - mu).square().mean();
}

}  // namespace

TEST_SUITE("sampler") {

TEST_CASE("config validation and effective steps") {
  SamplerConfig c;
  CHECK(c.effective_steps() == 64);
  c.order = 2;
  CHECK(c.effective_steps() == 32);
  c.steps = 5;
  CHECK(c.effective_steps() == 3);
  c.steps = 1;
  CHECK(c.effective_steps() == 1);

  SamplerConfig bad;
  bad.steps = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = {};
  bad.kappa = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = {};
  bad.rho = RhoPolicy::constant(-0.1);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = {};
  bad.order = 3;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("explicit schedules are validated") {
  SamplerConfig c;
  c.steps = 2;
  c.schedule = {1.0, 0.5, 0.0};
  CHECK(resolve_schedule(c).size() == 3);
  c.schedule = {1.0, 0.0};
  CHECK_THROWS_AS(resolve_schedule(c), std::invalid_argument);
  c.schedule = {1.0, 0.6, 0.7, 0.0};
  c.steps = 3;
  CHECK_THROWS_AS(resolve_schedule(c), std::invalid_argument);
  c.schedule = {0.9, 0.5, 0.0};
  c.steps = 2;
  CHECK_THROWS_AS(resolve_schedule(c), std::invalid_argument);
  SamplerConfig d;
  d.steps = 4;
  const auto s = resolve_schedule(d);
  CHECK(s == std::vector<double>{1.0, 0.75, 0.5, 0.25, 0.0});
}

TEST_CASE("rho_sde examples") {
  CHECK(rho_sde(0.5, 0.4, Transport::Linear) == doctest::Approx(0.25));
  CHECK(rho_sde(0.5, 0.5, Transport::Linear) == 0.0);
  CHECK(rho_sde(0.9, 0.05, Transport::Linear) == 1.0);
  CHECK(rho_sde_alt(0.5, 0.4, Transport::Linear) == doctest::Approx(0.625));
  CHECK(step_rho(RhoPolicy::sde(), 0.5, 0.4, Transport::Linear) == doctest::Approx(0.25));
  CHECK(step_rho(RhoPolicy::sde(), 0.1, 0.0, Transport::Linear) == 0.0);
  CHECK(step_rho(RhoPolicy::constant(0.3), 0.1, 0.0, Transport::Linear) == 0.0);
  CHECK(step_rho(RhoPolicy::equal_lambda(1.0), 0.5, 0.25, Transport::Linear) == 1.0);
}

TEST_CASE("euler_reference basics") {
  const Eigen::MatrixXd init = gaussian_init(2, 3, 1);
  const std::vector<double> sched{1.0, 0.5, 0.0};
  const FieldFn zero = [](const Eigen::MatrixXd& x, double) {
    return Eigen::MatrixXd::Zero(x.rows(), x.cols()).eval();
  };
  CHECK((euler_reference(zero, init, sched) - init).norm() == 0.0);
  const FieldFn constant = [](const Eigen::MatrixXd& x, double) {
    return Eigen::MatrixXd::Constant(x.rows(), x.cols(), 0.7).eval();
  };
  const Eigen::MatrixXd out = euler_reference(constant, init, sched);
  CHECK((out - (init.array() - 0.7).matrix()).norm() < 1e-15);
}

TEST_CASE("Linear, rho 0, kappa 0, first order reduces to Euler") {
  const MlpParams net = random_net(2, 3);
  const FieldFn field = make_field(net);
  const Eigen::MatrixXd init = gaussian_init(2, 50, 2);
  SamplerConfig c;
  c.steps = 64;
  c.kappa = 0.0;
  c.rho = RhoPolicy::constant(0.0);
  const auto trace = sample(field, field, c, init, Transport::Linear);
  const Eigen::MatrixXd ref = euler_reference(field, init, resolve_schedule(c));
  CHECK((trace.final - ref).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(trace.evaluations == 64);
}

TEST_CASE("one-step sampling returns the clean prediction") {
  const MlpParams net = random_net(1, 4);
  const FieldFn field = make_field(net);
  const Eigen::MatrixXd init = gaussian_init(1, 20, 3);
  for (Transport tr : {Transport::Linear, Transport::TrigFlow}) {
    SamplerConfig c;
    c.steps = 1;
    c.kappa = 0.0;
    c.rho = RhoPolicy::constant(0.0);
    const auto trace = sample(field, field, c, init, tr);
    const Eigen::MatrixXd expect = predict_x(field(init, 1.0), init, eval_coefficients(tr, 1.0));
    CHECK((trace.final - expect).norm() < 1e-12);
  }
}

TEST_CASE("history holds one raw clean estimate per step") {
  const MlpParams net = random_net(1, 5);
  const FieldFn field = make_field(net);
  const Eigen::MatrixXd init = gaussian_init(1, 8, 4);
  SamplerConfig c;
  c.steps = 6;
  c.kappa = 0.5;
  c.rho = RhoPolicy::constant(0.0);
  const auto trace = sample(field, field, c, init, Transport::TrigFlow);
  REQUIRE(trace.history.size() == 6);
  REQUIRE(trace.times.size() == 6);
  CHECK(trace.times.front() == 1.0);
  for (std::size_t i = 1; i < trace.times.size(); ++i) CHECK(trace.times[i] < trace.times[i - 1]);
  const Eigen::MatrixXd first =
      predict_x(field(init, 1.0), init, eval_coefficients(Transport::TrigFlow, 1.0));
  CHECK((trace.history.front() - first).norm() < 1e-12);
}

TEST_CASE("extrapolation changes the trajectory only from the second step") {
  const MlpParams net = random_net(1, 6);
  const FieldFn field = make_field(net);
  const Eigen::MatrixXd init = gaussian_init(1, 8, 5);
  SamplerConfig a;
  a.steps = 1;
  a.kappa = 0.0;
  a.rho = RhoPolicy::constant(0.0);
  SamplerConfig b = a;
  b.kappa = 0.9;
  CHECK((sample(field, field, a, init, Transport::Linear).final -
         sample(field, field, b, init, Transport::Linear).final)
            .norm() == 0.0);
  a.steps = b.steps = 8;
  CHECK((sample(field, field, a, init, Transport::Linear).final -
         sample(field, field, b, init, Transport::Linear).final)
            .norm() > 1e-6);
}

TEST_CASE("second order keeps the evaluation budget") {
  const MlpParams net = random_net(1, 7);
  const FieldFn field = make_field(net);
  const Eigen::MatrixXd init = gaussian_init(1, 4, 6);
  for (int n : {1, 2, 5, 16, 64}) {
    SamplerConfig c;
    c.steps = n;
    c.order = 2;
    c.rho = RhoPolicy::constant(0.0);
    const auto trace = sample(field, field, c, init, Transport::Linear);
    CHECK(trace.evaluations <= n);
    CHECK(trace.history.size() == static_cast<std::size_t>(c.effective_steps()));
  }
}

TEST_CASE("second-order corrector beats first order on an exact field") {
  const auto mix = GaussianMixture::bimodal(2.0, 0.3);
  const Transport tr = Transport::TrigFlow;
  const OdeField exact = optimal_field_fn(mix, tr);
  const FieldFn field = [&](const Eigen::MatrixXd& x, double t) { return exact(x, t); };
  const Eigen::MatrixXd init = gaussian_init(1, 200, 7);
  SamplerConfig fine;
  fine.steps = 2048;
  fine.kappa = 0.0;
  fine.rho = RhoPolicy::constant(0.0);
  const Eigen::MatrixXd ref = sample(field, field, fine, init, tr).final;
  SamplerConfig c1 = fine;
  c1.steps = 16;
  SamplerConfig c2 = c1;
  c2.order = 2;
  const double e1 = (sample(field, field, c1, init, tr).final - ref).cwiseAbs().mean();
  const double e2 = (sample(field, field, c2, init, tr).final - ref).cwiseAbs().mean();
  CHECK(e2 < e1);
}

TEST_CASE("corrector rejects a vanishing alpha") {
  const MlpParams net = random_net(1, 8);
  const FieldFn field = make_field(net);
  SamplerConfig c;
  c.steps = 4;
  c.order = 2;
  c.rho = RhoPolicy::constant(0.0);
  CHECK_THROWS_AS(sample(field, field, c, gaussian_init(1, 3, 1), Transport::ReLinear),
                  SingularCoefficientError);
}

TEST_CASE("noise is seeded and only drawn when rho is positive") {
  const MlpParams net = random_net(1, 9);
  const FieldFn field = make_field(net);
  const Eigen::MatrixXd init = gaussian_init(1, 16, 8);
  SamplerConfig c;
  c.steps = 8;
  c.rho = RhoPolicy::constant(0.0);
  c.seed = 1;
  const Eigen::MatrixXd a = sample(field, field, c, init, Transport::Linear).final;
  c.seed = 2;
  CHECK((sample(field, field, c, init, Transport::Linear).final - a).norm() == 0.0);
  c.rho = RhoPolicy::constant(0.5);
  const Eigen::MatrixXd b = sample(field, field, c, init, Transport::Linear).final;
  CHECK((sample(field, field, c, init, Transport::Linear).final - b).norm() == 0.0);
  c.seed = 3;
  CHECK((sample(field, field, c, init, Transport::Linear).final - b).norm() > 1e-6);
}

TEST_CASE("deterministic sampling with an exact Gaussian field converges to the data law") {
  const auto mix = GaussianMixture::gaussian_1d(0.5, 1.0);
  const Eigen::MatrixXd init = gaussian_init(1, 20000, 9);
  for (Transport tr : {Transport::Linear, Transport::TrigFlow}) {
    const OdeField exact = optimal_field_fn(mix, tr);
    const FieldFn field = [&](const Eigen::MatrixXd& x, double t) { return exact(x, t); };
    SamplerConfig c;
    c.steps = 256;
    c.kappa = 0.0;
    c.rho = RhoPolicy::constant(0.0);
    const Eigen::MatrixXd out = sample(field, field, c, init, tr).final;
    CHECK(mean(out) == doctest::Approx(0.5).epsilon(0.02));
    CHECK(variance(out) == doctest::Approx(1.0).epsilon(0.02));
  }
}

TEST_CASE("stochastic reconstruction keeps unit noise variance") {
  // F(x, t) = x under Linear at t = 1 gives x̂ = 0 and ẑ = x_1, so the first step is
  // x' = ½(√(1−ρ)·x_1 + √ρ·ε) and the second history entry is x'/2.
  const FieldFn field = [](const Eigen::MatrixXd& x, double) { return x; };
  const Eigen::MatrixXd init = gaussian_init(1, 40000, 10);
  for (double rho : {0.0, 0.36, 1.0}) {
    SamplerConfig c;
    c.steps = 2;
    c.kappa = 0.0;
    c.rho = RhoPolicy::constant(rho);
    c.schedule = {1.0, 0.5, 0.0};
    c.seed = 4;
    const auto trace = sample(field, field, c, init, Transport::Linear);
    const Eigen::MatrixXd noise = trace.history[1] / 0.25;
    CHECK(variance(noise) == doctest::Approx(1.0).epsilon(0.03));
    const double corr = ((noise.array() - mean(noise)) * (init.array() - mean(init))).mean() /
                        std::sqrt(variance(noise) * variance(init));
    CHECK(corr == doctest::Approx(std::sqrt(1.0 - rho)).epsilon(0.02 + 0.02 * (rho == 1.0)));
    if (rho == 1.0) CHECK(std::abs(corr) < 0.02);
  }
}

TEST_CASE("make_field matches forward and broadcasts a single label") {
  const MlpParams net = init_mlp(MlpShape{2, {8}, 3, Activation::Tanh}, 10);
  const Eigen::MatrixXd x = gaussian_init(2, 5000, 10);
  const std::vector<double> t(5000, 0.3);
  const std::vector<int> labels(5000, 2);
  CHECK((make_field(net, {2})(x, 0.3) - forward(net, x, t, labels)).norm() < 1e-12);
  CHECK((make_field(net)(x, 0.3) - forward(net, x, t)).norm() < 1e-12);
  CHECK_THROWS_AS(make_field(net, {0, 1})(x, 0.3), std::invalid_argument);
}

}  // TEST_SUITE
