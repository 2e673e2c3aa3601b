#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ucgm/sampler.hpp"
#include "ucgm/trainer.hpp"

namespace ucgm {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kArtifactVersion = "0.1.0";

/// Flat `key = value` configuration with `#` comments and dotted keys.
struct RunConfig {
  std::map<std::string, std::string> values;

  /// Throws ConfigError on syntax errors, duplicate keys or keys outside known_config_keys().
  static RunConfig parse(const std::string& text, const std::string& source = "<config>");
  static RunConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values.count(key) != 0; }
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Sorted `key = value` lines; parse(to_text()) reproduces values.
  std::string to_text() const;
};

const std::vector<std::string>& known_config_keys();

/// Reads the trainer.* keys and `transport`; throws ConfigError on bad values.
TrainerConfig trainer_config_from(const RunConfig& cfg);
void put_trainer_config(RunConfig& cfg, const TrainerConfig& tc);

/// Reads the sampler.* keys; lambda resolves the `lambda` ρ policy.
SamplerConfig sampler_config_from(const RunConfig& cfg, double lambda);
void put_sampler_config(RunConfig& cfg, const SamplerConfig& sc);

/// "lambda", "sde", "sde_alt" or a number in [0, 1].
RhoPolicy parse_rho(const std::string& text, double lambda);
std::string rho_to_string(const RhoPolicy& rho);

/// "uniform", "kuma:a,b,c" or "list:t0,t1,...": sets warp or schedule on the config.
void apply_schedule_spec(SamplerConfig& sc, const std::string& text);
std::string schedule_to_string(const SamplerConfig& sc);

std::vector<double> parse_double_list(const std::string& text, const std::string& what);
std::vector<int> parse_int_list(const std::string& text, const std::string& what);
std::string join_doubles(const std::vector<double>& v);

/// Writes dir/run.meta with the resolved configuration, seed, command and version.
void write_run_meta(const std::filesystem::path& dir, RunConfig resolved, const std::string& command,
                    std::uint64_t seed);

}  // namespace ucgm
