#include "nsergo/config.hpp"

#include <charconv>
#include <fstream>
#include <regex>
#include <sstream>

namespace nsergo {

namespace {

// Registered keys and defaults, in echo order.
const std::vector<std::pair<std::string, std::string>>& defaults() {
  static const std::vector<std::pair<std::string, std::string>> d{
      {"N", "1"},
      {"nu", "1.0"},
      {"dt", "0.01"},
      {"horizon", "1.0"},
      {"seed", "1"},
      {"ensemble", "1"},
      {"scheme", "exponential_euler"},
      {"stride", "1"},
      {"threads", "0"},
      {"forced", "(1,0,0) (0,1,0) (0,0,1)"},
      {"sigma0", "1.0"},
      {"noise.qr", ""},
      {"noise.qs", ""},
      {"initial.energy", "0"},
      {"initial.seed", "1"},
      {"initial.file", ""},
      {"closure.growth_tolerance", "1e-9"},
      {"closure.zero_floor", "1e-10"},
      {"closure.shuffle_seed", ""},
      {"hormander.points", "1"},
      {"simulate.trajectory", "0"},
      {"mixing.energy_a", "0"},
      {"mixing.energy_b", "10"},
      {"mixing.seed_a", "1"},
      {"mixing.seed_b", "2"},
      {"mixing.quadratic_forms", "10"},
      {"mixing.dictionary_seed", "7"},
      {"mixing.plateau_factor", "1.5"},
      {"mixing.min_r_squared", "0.5"},
      {"support.coords", "(1,1,0):r3 (1,1,0):s3"},
      {"support.lo", "-1"},
      {"support.hi", "1"},
      {"support.bins", "4"},
      {"support.threshold", "0.95"},
      {"steer.T", "1.0"},
      {"steer.knots", "8"},
      {"steer.substeps", "32"},
      {"steer.max_iterations", "200"},
      {"steer.restarts", "8"},
      {"steer.lambda0", "1e-3"},
      {"steer.tolerance", "1e-6"},
      {"steer.initial_energy", "1"},
      {"steer.initial_seed", "1"},
      {"steer.target_energy", "1"},
      {"steer.target_seed", "2"},
      {"selftest.states", "1000"},
      {"selftest.pairs", "1000"},
  };
  return d;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T number(const ConfigTable& t, const std::string& key) {
  const std::string& v = t.get(key);
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(0, key + ": '" + v + "' is not a valid " + (std::is_integral_v<T> ? "integer" : "number"));
  return out;
}

double positive(const ConfigTable& t, const std::string& key) {
  const double v = number<double>(t, key);
  if (!(v > 0.0)) throw ConfigError(0, key + " must be positive");
  return v;
}

std::vector<ModeIndex> triples(const std::string& key, const std::string& text) {
  static const std::regex one(R"(\(\s*(-?\d+)\s*,\s*(-?\d+)\s*,\s*(-?\d+)\s*\))");
  std::vector<ModeIndex> out;
  std::string rest;
  auto last = text.cbegin();
  for (std::sregex_iterator it(text.begin(), text.end(), one), end; it != end; ++it) {
    rest.append(last, (*it)[0].first);
    last = (*it)[0].second;
    out.push_back(ModeIndex{std::stoi((*it)[1]), std::stoi((*it)[2]), std::stoi((*it)[3])});
  }
  rest.append(last, text.cend());
  if (rest.find_first_not_of(" \t,") != std::string::npos)
    throw ConfigError(0, key + ": expected index triples like (1,0,0), got '" + text + "'");
  return out;
}

std::vector<Eigen::Matrix3d> matrices(const std::string& key, const std::string& text) {
  std::vector<Eigen::Matrix3d> out;
  if (trim(text).empty()) return out;
  std::stringstream blocks(text);
  std::string block;
  while (std::getline(blocks, block, '|')) {
    std::stringstream rows(block);
    std::string row;
    Eigen::Matrix3d m;
    int r = 0;
    while (std::getline(rows, row, ';')) {
      if (r >= 3) throw ConfigError(0, key + ": more than 3 rows in a matrix");
      std::istringstream cells(row);
      for (int c = 0; c < 3; ++c)
        if (!(cells >> m(r, c))) throw ConfigError(0, key + ": each row needs 3 numbers");
      std::string extra;
      if (cells >> extra) throw ConfigError(0, key + ": each row needs 3 numbers");
      ++r;
    }
    if (r != 3) throw ConfigError(0, key + ": each matrix needs 3 rows separated by ';'");
    out.push_back(m);
  }
  return out;
}

std::vector<std::pair<ModeIndex, int>> coords(const std::string& key, const std::string& text) {
  static const std::regex one(R"(\(\s*(-?\d+)\s*,\s*(-?\d+)\s*,\s*(-?\d+)\s*\)\s*:\s*([rs])([123]))");
  std::vector<std::pair<ModeIndex, int>> out;
  std::string rest;
  auto last = text.cbegin();
  for (std::sregex_iterator it(text.begin(), text.end(), one), end; it != end; ++it) {
    rest.append(last, (*it)[0].first);
    last = (*it)[0].second;
    const int comp = ((*it)[4] == "s" ? 3 : 0) + std::stoi((*it)[5]) - 1;
    out.emplace_back(ModeIndex{std::stoi((*it)[1]), std::stoi((*it)[2]), std::stoi((*it)[3])}, comp);
  }
  rest.append(last, text.cend());
  if (rest.find_first_not_of(" \t,") != std::string::npos)
    throw ConfigError(0, key + ": expected entries like (1,1,0):r3, got '" + text + "'");
  return out;
}

}  // namespace

ConfigError::ConfigError(int line, const std::string& message)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}

ConfigTable::ConfigTable() {
  for (const auto& [k, v] : defaults()) values_[k] = v;
}

void ConfigTable::assign(const std::string& key, const std::string& value, int line, const std::string& source) {
  if (!known(key)) throw ConfigError(line, source + ": unknown key '" + key + "'");
  values_[key] = value;
}

void ConfigTable::parse(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(raw.substr(0, raw.find('#')));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(line, source + ": unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(line, source + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) throw ConfigError(line, source + ": empty key");
    assign(section.empty() ? key : section + "." + key, trim(s.substr(eq + 1)), line, source);
  }
}

void ConfigTable::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(0, "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  parse(ss.str(), path);
}

void ConfigTable::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError(0, "--set expects key=value, got '" + assignment + "'");
  assign(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), 0, "--set");
}

const std::string& ConfigTable::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(0, "unknown key '" + key + "'");
  return it->second;
}

std::string ConfigTable::echo() const {
  std::ostringstream os;
  std::string section;
  for (const auto& [k, unused] : defaults()) {
    const auto dot = k.find('.');
    const std::string sec = dot == std::string::npos ? "" : k.substr(0, dot);
    const std::string name = dot == std::string::npos ? k : k.substr(dot + 1);
    if (sec != section) {
      os << "\n[" << sec << "]\n";
      section = sec;
    }
    os << name << " = " << values_.at(k) << "\n";
  }
  return os.str();
}

NoiseSpec RunConfig::noise() const {
  const Truncation t = truncation();
  if (qr.empty()) return default_noise(t, forced, sigma0);
  return make_noise(t, forced, qr, qs);
}

SpectralState RunConfig::initial_state() const {
  const Truncation t = truncation();
  if (!initial_file.empty()) {
    std::ifstream f(initial_file);
    if (!f) throw ConfigError(0, "initial.file: cannot open '" + initial_file + "'");
    SpectralState x = read_state_csv(f, t);
    snap_state(t, x);
    return x;
  }
  if (initial_energy > 0.0) return random_state(t, initial_energy, initial_seed);
  return SpectralState::zero(t);
}

RunConfig build_run_config(const ConfigTable& t) {
  RunConfig c;
  c.echo = t.echo();
  c.N = number<int>(t, "N");
  if (c.N < 1 || c.N > 6) throw ConfigError(0, "N must be between 1 and 6");
  c.sim.nu = positive(t, "nu");
  c.sim.dt = positive(t, "dt");
  c.sim.horizon = number<double>(t, "horizon");
  if (!(c.sim.horizon >= 0.0)) throw ConfigError(0, "horizon must be >= 0");
  c.sim.seed = number<std::uint64_t>(t, "seed");
  c.sim.ensemble = number<std::uint32_t>(t, "ensemble");
  if (c.sim.ensemble < 1) throw ConfigError(0, "ensemble must be >= 1");
  try {
    c.sim.scheme = parse_scheme(t.get("scheme"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(0, std::string("scheme: ") + e.what());
  }
  c.sim.stride = number<int>(t, "stride");
  if (c.sim.stride < 1) throw ConfigError(0, "stride must be >= 1");
  c.threads = number<unsigned>(t, "threads");
  try {
    c.stability_warning = check_stability(c.sim, c.N);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(0, e.what());
  }

  c.forced = triples("forced", t.get("forced"));
  if (c.forced.empty()) throw ConfigError(0, "forced: at least one index is required");
  const Truncation trunc(c.N);
  for (const auto& k : c.forced)
    if (k.is_zero() || !trunc.contains(k))
      throw ConfigError(0, "forced: " + to_string(k) + " is not in K_N for N = " + std::to_string(c.N));
  c.sigma0 = positive(t, "sigma0");
  c.qr = matrices("noise.qr", t.get("noise.qr"));
  c.qs = matrices("noise.qs", t.get("noise.qs"));
  if (c.qr.size() != c.qs.size()) throw ConfigError(0, "noise.qr and noise.qs must list the same number of matrices");
  if (!c.qr.empty() && c.qr.size() != c.forced.size())
    throw ConfigError(0, "noise.qr/noise.qs need one matrix per forced index");
  try {
    validate_noise(trunc, c.noise());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(0, std::string("noise: ") + e.what());
  }

  c.initial_energy = number<double>(t, "initial.energy");
  if (!(c.initial_energy >= 0.0)) throw ConfigError(0, "initial.energy must be >= 0");
  c.initial_seed = number<std::uint64_t>(t, "initial.seed");
  c.initial_file = t.get("initial.file");

  c.closure.growth_tolerance = positive(t, "closure.growth_tolerance");
  c.closure.zero_floor = number<double>(t, "closure.zero_floor");
  if (!t.get("closure.shuffle_seed").empty()) c.closure.shuffle_seed = number<std::uint64_t>(t, "closure.shuffle_seed");
  c.hormander_points = number<int>(t, "hormander.points");
  if (c.hormander_points < 0) throw ConfigError(0, "hormander.points must be >= 0");
  c.simulate_trajectory = number<std::uint32_t>(t, "simulate.trajectory");

  c.mixing_energy_a = number<double>(t, "mixing.energy_a");
  c.mixing_energy_b = number<double>(t, "mixing.energy_b");
  if (!(c.mixing_energy_a >= 0.0 && c.mixing_energy_b >= 0.0)) throw ConfigError(0, "mixing energies must be >= 0");
  c.mixing_seed_a = number<std::uint64_t>(t, "mixing.seed_a");
  c.mixing_seed_b = number<std::uint64_t>(t, "mixing.seed_b");
  c.mixing.quadratic_forms = number<int>(t, "mixing.quadratic_forms");
  if (c.mixing.quadratic_forms < 0) throw ConfigError(0, "mixing.quadratic_forms must be >= 0");
  c.mixing.dictionary_seed = number<std::uint64_t>(t, "mixing.dictionary_seed");
  c.mixing.plateau_factor = number<double>(t, "mixing.plateau_factor");
  if (!(c.mixing.plateau_factor > 1.0)) throw ConfigError(0, "mixing.plateau_factor must exceed 1");
  c.mixing.min_r_squared = number<double>(t, "mixing.min_r_squared");

  c.support.coords = coords("support.coords", t.get("support.coords"));
  if (c.support.coords.size() < 2 || c.support.coords.size() > 4)
    throw ConfigError(0, "support.coords needs 2 to 4 entries");
  for (const auto& [k, comp] : c.support.coords)
    if (!trunc.canonical_id(k))
      throw ConfigError(0, "support.coords: " + to_string(k) + " is not a stored mode (use the canonical half of K_N)");
  c.support.lo = number<double>(t, "support.lo");
  c.support.hi = number<double>(t, "support.hi");
  if (!(c.support.hi > c.support.lo)) throw ConfigError(0, "support.hi must exceed support.lo");
  c.support.bins = number<int>(t, "support.bins");
  if (c.support.bins < 1) throw ConfigError(0, "support.bins must be >= 1");
  c.support.threshold = number<double>(t, "support.threshold");

  c.steer.T = positive(t, "steer.T");
  c.steer.intervals = number<int>(t, "steer.knots");
  if (c.steer.intervals < 1) throw ConfigError(0, "steer.knots must be >= 1");
  c.steer_substeps = number<int>(t, "steer.substeps");
  if (c.steer_substeps < 1) throw ConfigError(0, "steer.substeps must be >= 1");
  c.steer.max_iterations = number<int>(t, "steer.max_iterations");
  c.steer.restarts = number<int>(t, "steer.restarts");
  if (c.steer.max_iterations < 0 || c.steer.restarts < 0) throw ConfigError(0, "steer iteration counts must be >= 0");
  c.steer.lambda0 = positive(t, "steer.lambda0");
  c.steer.relative_tolerance = positive(t, "steer.tolerance");
  c.steer.seed = c.sim.seed;
  c.steer_initial_energy = number<double>(t, "steer.initial_energy");
  c.steer_target_energy = number<double>(t, "steer.target_energy");
  if (!(c.steer_initial_energy >= 0.0 && c.steer_target_energy >= 0.0)) throw ConfigError(0, "steer energies must be >= 0");
  c.steer_initial_seed = number<std::uint64_t>(t, "steer.initial_seed");
  c.steer_target_seed = number<std::uint64_t>(t, "steer.target_seed");

  c.selftest_states = number<int>(t, "selftest.states");
  c.selftest_pairs = number<int>(t, "selftest.pairs");
  if (c.selftest_states < 1 || c.selftest_pairs < 1) throw ConfigError(0, "selftest sizes must be >= 1");
  return c;
}

}  // namespace nsergo
