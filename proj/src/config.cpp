#include "ucgm/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "ucgm/io.hpp"

namespace ucgm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& text, const std::string& what) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError(what + ": expected a number, got '" + text + "'");
  }
  return v;
}

long to_long(const std::string& text, const std::string& what) {
  long v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError(what + ": expected an integer, got '" + text + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

}  // namespace

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "seed", "output_dir", "transport",
      "dataset", "dataset.n", "dataset.shift", "dataset.scale",
      "trainer.lambda", "trainer.zeta", "trainer.s_threshold", "trainer.epsilon",
      "trainer.time_beta", "trainer.learning_rate", "trainer.adam_beta1", "trainer.adam_beta2",
      "trainer.adam_epsilon", "trainer.weight_decay", "trainer.warmup_steps",
      "trainer.lr_schedule", "trainer.batch_size", "trainer.total_steps", "trainer.ema_decay",
      "trainer.clip_bound", "trainer.cond_dropout", "trainer.time_min", "trainer.time_max",
      "trainer.hidden", "trainer.activation", "trainer.conditional", "trainer.teacher",
      "sampler.steps", "sampler.order", "sampler.kappa", "sampler.rho", "sampler.schedule",
      "sampler.n_samples", "sampler.seed",
      "meta.command", "meta.version"};
  return keys;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& source) {
  const auto& known = known_config_keys();
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
    if (cfg.has(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    cfg.values[key] = value;
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << is.rdbuf();
  return parse(buf.str(), path.string());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& known = known_config_keys();
  if (std::find(known.begin(), known.end(), key) == known.end()) {
    throw ConfigError("unknown key '" + key + "'");
  }
  values[key] = value;
}

std::string RunConfig::get(const std::string& key, const std::string& fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : to_double(it->second, key);
}

long RunConfig::get_int(const std::string& key, long fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : to_long(it->second, key);
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = values.find(key);
  if (it == values.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + it->second + "'");
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : values) out += k + " = " + v + "\n";
  return out;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(to_double(item, what));
  return out;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
  std::vector<int> out;
  for (const auto& item : split(text, ',')) out.push_back(static_cast<int>(to_long(item, what)));
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += format_double(v[i]);
  }
  return out;
}

TrainerConfig trainer_config_from(const RunConfig& cfg) {
  TrainerConfig tc;
  try {
    tc.transport = parse_transport(cfg.get("transport", "linear"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("transport: ") + e.what());
  }
  tc.lambda = cfg.get_double("trainer.lambda", tc.lambda);
  tc.zeta = cfg.get_double("trainer.zeta", tc.zeta);
  tc.s_threshold = cfg.get_double("trainer.s_threshold", tc.s_threshold);
  tc.epsilon = cfg.get_double("trainer.epsilon", tc.epsilon);
  if (cfg.has("trainer.time_beta")) {
    const auto v = parse_double_list(cfg.get("trainer.time_beta", ""), "trainer.time_beta");
    if (v.size() != 2) throw ConfigError("trainer.time_beta: expected theta1,theta2");
    tc.beta = {v[0], v[1]};
  }
  tc.learning_rate = cfg.get_double("trainer.learning_rate", tc.learning_rate);
  tc.beta1 = cfg.get_double("trainer.adam_beta1", tc.beta1);
  tc.beta2 = cfg.get_double("trainer.adam_beta2", tc.beta2);
  tc.adam_epsilon = cfg.get_double("trainer.adam_epsilon", tc.adam_epsilon);
  tc.weight_decay = cfg.get_double("trainer.weight_decay", tc.weight_decay);
  tc.warmup_steps = static_cast<int>(cfg.get_int("trainer.warmup_steps", tc.warmup_steps));
  const std::string sched = cfg.get("trainer.lr_schedule", "constant");
  if (sched == "constant") {
    tc.lr_schedule = LrSchedule::Constant;
  } else if (sched == "cosine") {
    tc.lr_schedule = LrSchedule::Cosine;
  } else {
    throw ConfigError("trainer.lr_schedule: expected constant or cosine");
  }
  tc.batch_size = static_cast<int>(cfg.get_int("trainer.batch_size", tc.batch_size));
  tc.total_steps = cfg.get_int("trainer.total_steps", tc.total_steps);
  tc.ema_decay = cfg.get_double("trainer.ema_decay", tc.ema_decay);
  tc.clip_bound = cfg.get_double("trainer.clip_bound", tc.clip_bound);
  tc.cond_dropout = cfg.get_double("trainer.cond_dropout", tc.cond_dropout);
  tc.time_min = cfg.get_double("trainer.time_min", tc.time_min);
  tc.time_max = cfg.get_double("trainer.time_max", tc.time_max);
  if (cfg.has("trainer.hidden")) tc.hidden = parse_int_list(cfg.get("trainer.hidden", ""), "trainer.hidden");
  const std::string act = cfg.get("trainer.activation", "silu");
  if (act == "silu") {
    tc.activation = Activation::SiLU;
  } else if (act == "tanh") {
    tc.activation = Activation::Tanh;
  } else {
    throw ConfigError("trainer.activation: expected silu or tanh");
  }
  const long seed = cfg.get_int("seed", 0);
  if (seed < 0) throw ConfigError("seed must be >= 0");
  tc.seed = static_cast<std::uint64_t>(seed);
  try {
    tc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return tc;
}

void put_trainer_config(RunConfig& cfg, const TrainerConfig& tc) {
  cfg.set("transport", std::string(transport_name(tc.transport)));
  cfg.set("trainer.lambda", format_double(tc.lambda));
  cfg.set("trainer.zeta", format_double(tc.zeta));
  cfg.set("trainer.s_threshold", format_double(tc.s_threshold));
  cfg.set("trainer.epsilon", format_double(tc.epsilon));
  cfg.set("trainer.time_beta", join_doubles({tc.beta.theta1, tc.beta.theta2}));
  cfg.set("trainer.learning_rate", format_double(tc.learning_rate));
  cfg.set("trainer.adam_beta1", format_double(tc.beta1));
  cfg.set("trainer.adam_beta2", format_double(tc.beta2));
  cfg.set("trainer.adam_epsilon", format_double(tc.adam_epsilon));
  cfg.set("trainer.weight_decay", format_double(tc.weight_decay));
  cfg.set("trainer.warmup_steps", std::to_string(tc.warmup_steps));
  cfg.set("trainer.lr_schedule", tc.lr_schedule == LrSchedule::Cosine ? "cosine" : "constant");
  cfg.set("trainer.batch_size", std::to_string(tc.batch_size));
  cfg.set("trainer.total_steps", std::to_string(tc.total_steps));
  cfg.set("trainer.ema_decay", format_double(tc.ema_decay));
  cfg.set("trainer.clip_bound", format_double(tc.clip_bound));
  cfg.set("trainer.cond_dropout", format_double(tc.cond_dropout));
  cfg.set("trainer.time_min", format_double(tc.time_min));
  cfg.set("trainer.time_max", format_double(tc.time_max));
  std::string hidden;
  for (std::size_t i = 0; i < tc.hidden.size(); ++i) {
    hidden += (i ? "," : "") + std::to_string(tc.hidden[i]);
  }
  cfg.set("trainer.hidden", hidden);
  cfg.set("trainer.activation", tc.activation == Activation::Tanh ? "tanh" : "silu");
  cfg.set("seed", std::to_string(tc.seed));
}

RhoPolicy parse_rho(const std::string& text, double lambda) {
  if (text == "lambda") return RhoPolicy::equal_lambda(lambda);
  if (text == "sde") return RhoPolicy::sde();
  if (text == "sde_alt") return RhoPolicy::sde_alt();
  const double v = to_double(text, "rho");
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("rho must be in [0, 1]");
  return RhoPolicy::constant(v);
}

std::string rho_to_string(const RhoPolicy& rho) {
  switch (rho.kind) {
    case RhoKind::Constant: return format_double(rho.value);
    case RhoKind::EqualLambda: return "lambda";
    case RhoKind::SdeFormula: return "sde";
    case RhoKind::SdeAlt: return "sde_alt";
  }
  return "lambda";
}

void apply_schedule_spec(SamplerConfig& sc, const std::string& text) {
  sc.schedule.clear();
  sc.warp.reset();
  if (text == "uniform") return;
  if (text.rfind("kuma:", 0) == 0) {
    const auto v = parse_double_list(text.substr(5), "kuma schedule");
    if (v.size() != 3) throw ConfigError("kuma schedule needs a,b,c");
    sc.warp = KumaParams{v[0], v[1], v[2]};
    try {
      sc.warp->validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    return;
  }
  if (text.rfind("list:", 0) == 0) {
    sc.schedule = parse_double_list(text.substr(5), "schedule list");
    return;
  }
  throw ConfigError("schedule must be uniform, kuma:a,b,c or list:t0,...,tN");
}

std::string schedule_to_string(const SamplerConfig& sc) {
  if (!sc.schedule.empty()) return "list:" + join_doubles(sc.schedule);
  if (sc.warp) return "kuma:" + join_doubles({sc.warp->a, sc.warp->b, sc.warp->c});
  return "uniform";
}

SamplerConfig sampler_config_from(const RunConfig& cfg, double lambda) {
  SamplerConfig sc;
  sc.steps = static_cast<int>(cfg.get_int("sampler.steps", sc.steps));
  sc.order = static_cast<int>(cfg.get_int("sampler.order", sc.order));
  sc.kappa = cfg.get_double("sampler.kappa", sc.kappa);
  sc.rho = parse_rho(cfg.get("sampler.rho", "lambda"), lambda);
  apply_schedule_spec(sc, cfg.get("sampler.schedule", "uniform"));
  const long seed = cfg.get_int("sampler.seed", cfg.get_int("seed", 0));
  if (seed < 0) throw ConfigError("sampler.seed must be >= 0");
  sc.seed = static_cast<std::uint64_t>(seed);
  try {
    sc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return sc;
}

void put_sampler_config(RunConfig& cfg, const SamplerConfig& sc) {
  cfg.set("sampler.steps", std::to_string(sc.steps));
  cfg.set("sampler.order", std::to_string(sc.order));
  cfg.set("sampler.kappa", format_double(sc.kappa));
  cfg.set("sampler.rho", rho_to_string(sc.rho));
  cfg.set("sampler.schedule", schedule_to_string(sc));
  cfg.set("sampler.seed", std::to_string(sc.seed));
}

void write_run_meta(const std::filesystem::path& dir, RunConfig resolved, const std::string& command,
                    std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  resolved.set("meta.command", command);
  resolved.set("meta.version", kArtifactVersion);
  resolved.set("seed", std::to_string(seed));
  std::ofstream os(dir / "run.meta");
  if (!os) throw std::runtime_error("cannot write " + (dir / "run.meta").string());
  os << "# resolved configuration\n" << resolved.to_text();
}

}  // namespace ucgm
