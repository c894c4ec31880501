#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nsergo/ergodicity_lab.hpp"
#include "nsergo/index_lattice.hpp"
#include "nsergo/sde_integrator.hpp"
#include "nsergo/steering.hpp"

namespace nsergo {

/// Problem with a config file or override; `line` is 0 for --set overrides and cross-key checks.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

/// Flat key=value store. `[section]` headers prefix the following keys with "section.";
/// `#` starts a comment. Only keys with a registered default are accepted.
class ConfigTable {
 public:
  ConfigTable();  // every key at its default

  void parse(const std::string& text, const std::string& source = "config");
  void parse_file(const std::string& path);
  /// "key=value" from the command line.
  void set(const std::string& assignment);

  const std::string& get(const std::string& key) const;
  bool known(const std::string& key) const { return values_.count(key) != 0; }
  /// Every key, grouped by section, values as given.
  std::string echo() const;

 private:
  void assign(const std::string& key, const std::string& value, int line, const std::string& source);
  std::map<std::string, std::string> values_;
};

struct SupportSpec {
  std::vector<std::pair<ModeIndex, int>> coords;  // mode and component 0..5 (r1 r2 r3 s1 s2 s3)
  double lo = -1.0, hi = 1.0;
  int bins = 4;
  double threshold = 0.95;
};

struct RunConfig {
  int N = 1;
  SimulationConfig sim;
  unsigned threads = 0;
  std::vector<ModeIndex> forced;
  double sigma0 = 1.0;
  std::vector<Eigen::Matrix3d> qr, qs;  // empty: sigma0 P_k

  double initial_energy = 0.0;
  std::uint64_t initial_seed = 1;
  std::string initial_file;

  ClosureOptions closure;
  int hormander_points = 1;
  std::uint32_t simulate_trajectory = 0;

  MixingOptions mixing;
  double mixing_energy_a = 0.0, mixing_energy_b = 10.0;
  std::uint64_t mixing_seed_a = 1, mixing_seed_b = 2;

  SupportSpec support;

  SteeringOptions steer;
  int steer_substeps = 32;
  double steer_initial_energy = 1.0, steer_target_energy = 1.0;
  std::uint64_t steer_initial_seed = 1, steer_target_seed = 2;

  int selftest_states = 1000;
  int selftest_pairs = 1000;

  std::string stability_warning;
  std::string echo;  // canonical text of the table this came from

  Truncation truncation() const { return Truncation(N); }
  NoiseSpec noise() const;
  /// Initial state from initial.file, or random_state(initial.energy, initial.seed), or zero.
  SpectralState initial_state() const;
};

/// Converts and validates every key: types, ranges, forced set inside K_N, noise matrices,
/// stability guard. Throws ConfigError naming the key.
RunConfig build_run_config(const ConfigTable& table);

}  // namespace nsergo
