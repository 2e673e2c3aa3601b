#include "ucgm/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "ucgm/config.hpp"
#include "ucgm/data_metrics.hpp"
#include "ucgm/io.hpp"
#include "ucgm/oracle.hpp"
#include "ucgm/plot.hpp"
#include "ucgm/sampler.hpp"
#include "ucgm/timedist.hpp"
#include "ucgm/trainer.hpp"
#include "ucgm/transport.hpp"

namespace ucgm {

namespace {

namespace fs = std::filesystem;

std::uint64_t resolve_seed(std::uint64_t given) {
  const char* env = std::getenv("UCGM_SEED");
  if (!env || !*env) return given;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string("UCGM_SEED is not an unsigned integer: '") + env + "'");
  }
}

Transport transport_arg(const std::string& name) {
  try {
    return parse_transport(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index r = 0; r < rows; ++r) out(r, j) = normal(rng);
  }
  return out;
}

// ---- validate-transport ----------------------------------------------------------------

struct ValidateArgs {
  std::string transport = "linear";
  std::size_t grid = 1024;
};

int cmd_validate(const ValidateArgs& a, const fs::path& out_dir) {
  const auto report = validate_family(transport_arg(a.transport), a.grid);
  std::cout << "constraint,pass,worst_t,worst_value,detail\n";
  auto row = [](const char* name, const ConstraintCheck& c) {
    std::cout << name << ',' << (c.pass ? "true" : "false") << ',' << format_double(c.worst_t)
              << ',' << format_double(c.worst_value) << ',' << c.detail << '\n';
  };
  row("alpha_boundary", report.alpha_boundary);
  row("alpha_monotone", report.alpha_monotone);
  row("gamma_boundary", report.gamma_boundary);
  row("gamma_monotone", report.gamma_monotone);
  row("denom_nonzero", report.denom_nonzero);
  std::cout << "all," << (report.all_pass() ? "true" : "false") << ",,,\n";
  RunConfig meta;
  meta.set("transport", a.transport);
  write_run_meta(out_dir, meta, "validate-transport", 0);
  return 0;
}

// ---- train -------------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  long steps = -1;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, fs::path out_dir, bool out_dir_given) {
  RunConfig cfg = RunConfig::load(a.config);
  TrainerConfig tc = trainer_config_from(cfg);
  tc.seed = resolve_seed(tc.seed);
  if (a.steps >= 0) tc.total_steps = a.steps;
  if (!cfg.has("dataset")) throw ConfigError(a.config + ": missing required key 'dataset'");
  DatasetSpec spec;
  try {
    spec = DatasetSpec::parse(cfg.get("dataset", ""));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const long n = cfg.get_int("dataset.n", 100000);
  if (n < 1) throw ConfigError("dataset.n must be >= 1");
  if (!out_dir_given && cfg.has("output_dir")) out_dir = cfg.get("output_dir", ".");

  Teacher teacher;
  if (cfg.has("trainer.teacher")) teacher = load_weights(cfg.get("trainer.teacher", ""));
  const bool conditional = cfg.get_bool("trainer.conditional", false);

  const Dataset ds = make_dataset(spec, static_cast<int>(n), tc.seed);
  const std::span<const int> labels =
      conditional ? std::span<const int>(ds.labels) : std::span<const int>();
  const int classes = conditional ? spec.num_classes() : 0;

  fs::create_directories(out_dir / "weights");
  fs::create_directories(out_dir / "logs");
  const long every = std::max<long>(1, tc.total_steps / 20);
  ProgressFn progress;
  if (!a.quiet) {
    progress = [every](const StepRecord& r) {
      if (r.step % every == 0) {
        std::cerr << "step " << r.step << " loss " << r.loss << " grad_norm " << r.grad_norm
                  << " clip_rate " << r.clip_rate << '\n';
      }
    };
  }
  const TrainingResult res = train(tc, ds.samples, labels, classes, teacher, progress);
  save_weights(res.live, out_dir / "weights" / "live.ucgmw");
  save_weights(res.ema, out_dir / "weights" / "ema.ucgmw");
  {
    std::ofstream os(out_dir / "logs" / "loss.csv");
    os << "step,loss,grad_norm,clip_rate\n";
    for (const auto& r : res.log) {
      os << r.step << ',' << format_double(r.loss) << ',' << format_double(r.grad_norm) << ','
         << format_double(r.clip_rate) << '\n';
    }
  }
  RunConfig meta = cfg;
  put_trainer_config(meta, tc);
  meta.set("dataset", spec.to_string());
  meta.set("dataset.n", std::to_string(n));
  std::vector<double> shift(ds.shift.data(), ds.shift.data() + ds.shift.size());
  std::vector<double> scale(ds.scale.data(), ds.scale.data() + ds.scale.size());
  meta.set("dataset.shift", join_doubles(shift));
  meta.set("dataset.scale", join_doubles(scale));
  meta.set("output_dir", out_dir.string());
  write_run_meta(out_dir, meta, "train", tc.seed);
  std::cout << "weights," << (out_dir / "weights" / "ema.ucgmw").string() << '\n';
  std::cout << "final_loss," << format_double(res.log.empty() ? 0.0 : res.log.back().loss) << '\n';
  return 0;
}

// ---- sample ------------------------------------------------------------------------------

struct SampleArgs {
  std::string weights;
  std::string live_weights;
  std::string transport = "linear";
  int steps = 64;
  int order = 1;
  double kappa = 0.4;
  std::string rho = "lambda";
  double lambda = 0.0;
  std::string schedule = "uniform";
  int n_samples = 1000;
  std::uint64_t seed = 0;
  std::string out;
  std::string history;
  int cond = kNullCondition;
};

int cmd_sample(const SampleArgs& a, const fs::path& out_dir) {
  const Transport tr = transport_arg(a.transport);
  SamplerConfig sc;
  sc.steps = a.steps;
  sc.order = a.order;
  sc.kappa = a.kappa;
  sc.rho = parse_rho(a.rho, a.lambda);
  apply_schedule_spec(sc, a.schedule);
  sc.seed = resolve_seed(a.seed);
  try {
    sc.validate();
    resolve_schedule(sc);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (a.n_samples < 1) throw ConfigError("--n-samples must be >= 1");

  const MlpParams ema = load_weights(a.weights);
  const MlpParams live = a.live_weights.empty() ? ema : load_weights(a.live_weights);
  std::vector<int> cond;
  if (a.cond != kNullCondition) cond.push_back(a.cond);
  const Eigen::MatrixXd init =
      standard_normal(ema.data_dim(), a.n_samples, sc.seed ^ 0xA5A5A5A5A5A5A5A5ULL);
  const SamplingTrace trace = sample(make_field(ema, cond), make_field(live, cond), sc, init, tr);

  const fs::path out = a.out.empty() ? out_dir / "samples" / "samples.csv" : fs::path(a.out);
  write_points_csv(out, trace.final);
  if (!a.history.empty()) write_history_csv(a.history, Trajectory{trace.times, trace.history});

  RunConfig meta;
  meta.set("transport", a.transport);
  put_sampler_config(meta, sc);
  meta.set("sampler.n_samples", std::to_string(a.n_samples));
  write_run_meta(out_dir, meta, "sample", sc.seed);
  std::cout << "samples," << out.string() << "\nevaluations," << trace.evaluations << '\n';
  return 0;
}

// ---- oracle ------------------------------------------------------------------------------

struct OracleArgs {
  std::string mixture = "bimodal:2,0.3";
  std::string schedule = "ou:1";
  std::string mode = "quantile";
  int n = 10000;
  int steps = 2000;
  double t = 0.5;
  bool standardize = false;
  std::string out;
};

int cmd_oracle(const OracleArgs& a, const fs::path& out_dir) {
  DatasetSpec spec;
  OracleSchedule sched;
  try {
    spec = DatasetSpec::parse(a.mixture);
    sched = parse_oracle_schedule(a.schedule);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (spec.dim() != 1 || spec.mixture.size() == 0) {
    throw ConfigError("--mixture must be bimodal, gaussian or gmm (1D)");
  }
  if (a.n < 1) throw ConfigError("--n must be >= 1");
  if (a.mode != "integrate" && a.mode != "quantile" && a.mode != "drift") {
    throw ConfigError("--mode must be integrate, quantile or drift");
  }
  const GaussianMixture& mix = spec.mixture;
  double mean = 0.0;
  double second = 0.0;
  for (std::size_t j = 0; j < mix.size(); ++j) {
    const double m = mix.means[j][0];
    mean += mix.weights[j] * m;
    second += mix.weights[j] * (m * m + mix.covariances[j](0, 0));
  }
  const double sd = std::sqrt(second - mean * mean);
  auto frame = [&](double v) { return a.standardize ? (v - mean) / sd : v; };

  const fs::path out = a.out.empty() ? out_dir / "samples" / "oracle.csv" : fs::path(a.out);
  ensure_parent(out);
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot write " + out.string());

  if (a.mode == "drift") {
    os << "x,t,drift\n";
    for (int k = 0; k < a.n; ++k) {
      const double x = a.n == 1 ? 0.0 : -4.0 + 8.0 * k / (a.n - 1);
      const Eigen::VectorXd v = pf_ode_drift(Eigen::VectorXd::Constant(1, x), a.t, mix, sched);
      os << format_double(x) << ',' << format_double(a.t) << ',' << format_double(v[0]) << '\n';
    }
  } else {
    const boost::math::normal_distribution<double> standard;
    Eigen::MatrixXd x1(1, a.n);
    for (int k = 0; k < a.n; ++k) x1(0, k) = boost::math::quantile(standard, (k + 0.5) / a.n);
    Eigen::MatrixXd x0(1, a.n);
    if (a.mode == "quantile") {
      for (int k = 0; k < a.n; ++k) x0(0, k) = quantile_transport(x1(0, k), mix, sched);
    } else {
      if (a.steps < 1) throw ConfigError("--steps must be >= 1");
      const double start = sched.kind == ScheduleKind::Linear ? 1.0 - 1e-4 : 1.0;
      const OdeField drift = [&](const Eigen::MatrixXd& x, double t) {
        Eigen::MatrixXd out_d(x.rows(), x.cols());
        for (Eigen::Index j = 0; j < x.cols(); ++j) out_d.col(j) = pf_ode_drift(x.col(j), t, mix, sched);
        return out_d;
      };
      x0 = rk4_integrate(drift, x1, start, 0.0, a.steps);
    }
    os << "sample_index,x1,x0\n";
    for (int k = 0; k < a.n; ++k) {
      os << k << ',' << format_double(x1(0, k)) << ',' << format_double(frame(x0(0, k))) << '\n';
    }
  }
  RunConfig meta;
  meta.set("dataset", spec.to_string());
  write_run_meta(out_dir, meta, "oracle " + a.mode + " " + sched.name(), 0);
  std::cout << "oracle," << out.string() << '\n';
  return 0;
}

// ---- eval --------------------------------------------------------------------------------

struct EvalArgs {
  std::string generated;
  std::string reference;
  std::string metric = "w1";
  int n = 100000;
  std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& a, const fs::path& out_dir) {
  if (a.metric != "w1" && a.metric != "energy") throw ConfigError("--metric must be w1 or energy");
  const std::uint64_t seed = resolve_seed(a.seed);
  const Eigen::MatrixXd gen = read_points_csv(a.generated);
  Eigen::MatrixXd ref;
  if (fs::exists(a.reference)) {
    ref = read_points_csv(a.reference);
  } else {
    DatasetSpec spec;
    try {
      spec = DatasetSpec::parse(a.reference);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("--reference is neither a file nor a dataset spec: ") + e.what());
    }
    if (a.n < 1) throw ConfigError("--n must be >= 1");
    ref = make_dataset(spec, a.n, seed + 1).samples;
  }
  if (gen.rows() != ref.rows()) throw std::runtime_error("eval: generated and reference dimensions differ");
  double value = 0.0;
  if (a.metric == "w1") {
    if (gen.rows() != 1) throw ConfigError("w1 needs 1D samples");
    value = wasserstein1_1d(std::span<const double>(gen.data(), static_cast<std::size_t>(gen.size())),
                            std::span<const double>(ref.data(), static_cast<std::size_t>(ref.size())),
                            seed);
  } else {
    value = energy_distance(gen, ref, seed);
  }
  std::cout << "metric,value,n_generated,n_reference\n"
            << a.metric << ',' << format_double(value) << ',' << gen.cols() << ',' << ref.cols()
            << '\n';
  RunConfig meta;
  write_run_meta(out_dir, meta, "eval " + a.metric, seed);
  return 0;
}

// ---- fit-schedule ------------------------------------------------------------------------

struct FitArgs {
  std::string target = "shift:2";
  std::size_t grid = 512;
};

int cmd_fit(const FitArgs& a, const fs::path& out_dir) {
  TimeWarp target;
  if (a.target.rfind("shift:", 0) == 0) {
    const auto v = parse_double_list(a.target.substr(6), "--target");
    if (v.size() != 1 || !(v[0] > 0.0)) throw ConfigError("--target shift:<s> needs s > 0");
    const double s = v[0];
    target = [s](double t) { return timeshift(t, s); };
  } else if (a.target.rfind("lognorm:", 0) == 0) {
    const auto v = parse_double_list(a.target.substr(8), "--target");
    if (v.size() != 2 || !(v[1] > 0.0)) throw ConfigError("--target lognorm:<mu>,<sigma> needs sigma > 0");
    const double mu = v[0];
    const double sigma = v[1];
    target = [mu, sigma](double t) { return lognorm_transform(t, mu, sigma); };
  } else {
    throw ConfigError("--target must be shift:<s> or lognorm:<mu>,<sigma>");
  }
  if (a.grid < 2) throw ConfigError("--grid must be >= 2");
  const KumaFit fit = fit_kuma_to_target(target, a.grid);
  std::cout << "a,b,c,fitted_error,identity_error\n"
            << format_double(fit.params.a) << ',' << format_double(fit.params.b) << ','
            << format_double(fit.params.c) << ',' << format_double(fit.fitted_error) << ','
            << format_double(fit.identity_error) << '\n';
  RunConfig meta;
  write_run_meta(out_dir, meta, "fit-schedule " + a.target, 0);
  return 0;
}

// ---- plot --------------------------------------------------------------------------------

struct PlotArgs {
  std::string input;
  std::string history;
  std::string out;
  std::string title;
};

int cmd_plot(const PlotArgs& a, const fs::path& out_dir) {
  const Eigen::MatrixXd pts = a.input.empty() ? Eigen::MatrixXd(1, 0) : read_points_csv(a.input);
  Trajectory traj;
  if (!a.history.empty()) traj = read_history_csv(a.history);
  const std::string svg = render_svg(pts, a.history.empty() ? nullptr : &traj, a.title);
  const fs::path out = a.out.empty() ? out_dir / "plots" / "plot.svg" : fs::path(a.out);
  ensure_parent(out);
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot write " + out.string());
  os << svg;
  RunConfig meta;
  write_run_meta(out_dir, meta, "plot", 0);
  std::cout << "plot," << out.string() << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Unified trainer and sampler for continuous generative models"};
  app.require_subcommand(1);
  std::string out_dir = ".";
  app.add_option("--out-dir", out_dir, "Run directory for run.meta and default outputs");

  ValidateArgs va;
  auto* validate = app.add_subcommand("validate-transport", "Check the transport constraints");
  validate->add_option("--transport", va.transport)->required();
  validate->add_option("--grid", va.grid);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train an estimator from a config file");
  train_cmd->add_option("--config", ta.config)->required();
  train_cmd->add_option("--steps", ta.steps, "Override trainer.total_steps");
  train_cmd->add_flag("--quiet", ta.quiet);

  SampleArgs sa;
  auto* sample_cmd = app.add_subcommand("sample", "Generate samples from trained weights");
  sample_cmd->add_option("--weights", sa.weights, "EMA weights")->required();
  sample_cmd->add_option("--live-weights", sa.live_weights, "Weights for the order-2 corrector");
  sample_cmd->add_option("--transport", sa.transport);
  sample_cmd->add_option("--steps", sa.steps);
  sample_cmd->add_option("--order", sa.order);
  sample_cmd->add_option("--kappa", sa.kappa);
  sample_cmd->add_option("--rho", sa.rho, "lambda|sde|sde_alt|<float>");
  sample_cmd->add_option("--lambda", sa.lambda, "Consistency ratio used by --rho lambda");
  sample_cmd->add_option("--schedule", sa.schedule, "uniform|kuma:a,b,c|list:t0,...");
  sample_cmd->add_option("--n-samples", sa.n_samples);
  sample_cmd->add_option("--seed", sa.seed);
  sample_cmd->add_option("--out", sa.out);
  sample_cmd->add_option("--history", sa.history, "Per-step clean estimates CSV");
  sample_cmd->add_option("--cond", sa.cond, "Class label (default: null condition)");

  OracleArgs oa;
  auto* oracle_cmd = app.add_subcommand("oracle", "Closed-form probability-flow references");
  oracle_cmd->add_option("--mixture", oa.mixture);
  oracle_cmd->add_option("--schedule", oa.schedule, "ou:<s>|triangular|linear");
  oracle_cmd->add_option("--mode", oa.mode, "integrate|quantile|drift");
  oracle_cmd->add_option("--n", oa.n);
  oracle_cmd->add_option("--steps", oa.steps, "RK4 steps for --mode integrate");
  oracle_cmd->add_option("--t", oa.t, "Time for --mode drift");
  oracle_cmd->add_flag("--standardize", oa.standardize, "Emit x0 in zero-mean unit-variance units");
  oracle_cmd->add_option("--out", oa.out);

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Distance between generated and reference samples");
  eval_cmd->add_option("--generated", ea.generated)->required();
  eval_cmd->add_option("--reference", ea.reference, "CSV file or dataset spec")->required();
  eval_cmd->add_option("--metric", ea.metric, "w1|energy");
  eval_cmd->add_option("--n", ea.n, "Reference size for a dataset spec");
  eval_cmd->add_option("--seed", ea.seed);

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit-schedule", "Fit a Kumaraswamy warp to a target warp");
  fit_cmd->add_option("--target", fa.target, "shift:<s>|lognorm:<mu>,<sigma>");
  fit_cmd->add_option("--grid", fa.grid);

  PlotArgs pa;
  auto* plot_cmd = app.add_subcommand("plot", "Render samples or trajectories as SVG");
  plot_cmd->add_option("--input", pa.input);
  plot_cmd->add_option("--history", pa.history);
  plot_cmd->add_option("--out", pa.out);
  plot_cmd->add_option("--title", pa.title);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  const bool out_dir_given = app.count("--out-dir") > 0;
  try {
    if (validate->parsed()) return cmd_validate(va, out_dir);
    if (train_cmd->parsed()) return cmd_train(ta, out_dir, out_dir_given);
    if (sample_cmd->parsed()) return cmd_sample(sa, out_dir);
    if (oracle_cmd->parsed()) return cmd_oracle(oa, out_dir);
    if (eval_cmd->parsed()) return cmd_eval(ea, out_dir);
    if (fit_cmd->parsed()) return cmd_fit(fa, out_dir);
    if (plot_cmd->parsed()) return cmd_plot(pa, out_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace ucgm
