#include "nsergo/spectral_state.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace nsergo {

Eigen::Vector3d snap_divfree(const ModeIndex& k, const Eigen::Vector3d& v) {
  const Eigen::Vector3d p = project_divfree(k, v);
  const double R = p.cwiseAbs().maxCoeff();
  if (R == 0.0 || !std::isfinite(R)) return p;
  int j = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(k[i]) > std::abs(k[j])) j = i;
  const std::int64_t K = k[j];
  const int kmax = static_cast<int>(std::abs(K));
  // Components become integer multiples of g. Every product k_i x_i and every partial
  // sum of k.x stays below 2^53 g, so the dot product is computed without rounding.
  const int headroom = static_cast<int>(std::ceil(std::log2(6.0 * kmax)));
  const double g = std::ldexp(1.0, std::ilogb(R) + 1 - 53 + headroom);
  std::int64_t m[3] = {0, 0, 0};
  std::int64_t tail = 0;
  for (int i = 0; i < 3; ++i) {
    if (i == j) continue;
    m[i] = std::llround(p(i) / (double(K) * g));
    tail += std::int64_t{k[i]} * m[i];
  }
  Eigen::Vector3d out;
  for (int i = 0; i < 3; ++i) out(i) = i == j ? double(-tail) * g : double(K * m[i]) * g;
  return out;
}

void snap_state(const Truncation& trunc, SpectralState& state) {
  for (Eigen::Index j = 0; j < state.modes(); ++j) {
    const ModeIndex& k = trunc.mode(static_cast<int>(j));
    state.r(j) = snap_divfree(k, state.r(j));
    state.s(j) = snap_divfree(k, state.s(j));
  }
}

double divergence_residual(const Truncation& trunc, const SpectralState& state) {
  double worst = 0.0;
  for (int j = 0; j < trunc.size(); ++j) {
    const Eigen::Vector3d k = trunc.mode(j).vec();
    const double scale = k.norm() * (state.r(j).norm() + state.s(j).norm());
    if (scale == 0.0) continue;
    worst = std::max(worst, (std::abs(k.dot(state.r(j))) + std::abs(k.dot(state.s(j)))) / scale);
  }
  return worst;
}

double divergence_defect(const Truncation& trunc, const SpectralState& state) {
  double worst = 0.0;
  for (int j = 0; j < trunc.size(); ++j) {
    const Eigen::Vector3d k = trunc.mode(j).vec();
    worst = std::max(worst, std::abs(k.dot(state.r(j))) + std::abs(k.dot(state.s(j))));
  }
  return worst;
}

SpectralState random_state(const Truncation& trunc, double energy, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  SpectralState x(trunc.size());
  for (Eigen::Index i = 0; i < x.coeffs.size(); ++i) x.coeffs.data()[i] = normal(rng);
  project_state(trunc, x);
  const double e = x.energy();
  if (energy <= 0.0 || e == 0.0) return SpectralState::zero(trunc);
  x.coeffs *= std::sqrt(energy / e);
  snap_state(trunc, x);
  return x;
}

void write_state_csv(std::ostream& os, const Truncation& trunc, const SpectralState& state) {
  if (state.modes() != trunc.size()) throw std::invalid_argument("write_state_csv: state/truncation mismatch");
  os << "k1,k2,k3,r1,r2,r3,s1,s2,s3\n";
  os << std::setprecision(17);
  for (int j = 0; j < trunc.size(); ++j) {
    const ModeIndex& k = trunc.mode(j);
    os << k[0] << ',' << k[1] << ',' << k[2];
    for (int i = 0; i < 6; ++i) os << ',' << state.coeffs(i, j);
    os << '\n';
  }
}

SpectralState read_state_csv(std::istream& is, const Truncation& trunc) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("k1,k2,k3,r1,r2,r3,s1,s2,s3", 0) != 0)
    throw std::runtime_error("state csv: missing header 'k1,k2,k3,r1,r2,r3,s1,s2,s3'");
  SpectralState x(trunc.size());
  std::vector<bool> seen(static_cast<std::size_t>(trunc.size()), false);
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) throw std::runtime_error("state csv line " + std::to_string(lineno) + ": expected 9 fields");
    const ModeIndex k{std::stoi(cells[0]), std::stoi(cells[1]), std::stoi(cells[2])};
    const auto id = trunc.canonical_id(k);
    if (!id) throw std::runtime_error("state csv line " + std::to_string(lineno) + ": " + to_string(k) +
                                      " is not a canonical mode of this truncation");
    for (int i = 0; i < 6; ++i) x.coeffs(i, *id) = std::stod(cells[static_cast<std::size_t>(3 + i)]);
    seen[static_cast<std::size_t>(*id)] = true;
  }
  for (int j = 0; j < trunc.size(); ++j)
    if (!seen[static_cast<std::size_t>(j)]) throw std::runtime_error("state csv: missing mode " + to_string(trunc.mode(j)));
  return x;
}

std::string state_to_json(const Truncation& trunc, const SpectralState& state) {
  nlohmann::json modes = nlohmann::json::array();
  for (int j = 0; j < trunc.size(); ++j) {
    const ModeIndex& k = trunc.mode(j);
    modes.push_back({{"k", {k[0], k[1], k[2]}},
                     {"r", {state.coeffs(0, j), state.coeffs(1, j), state.coeffs(2, j)}},
                     {"s", {state.coeffs(3, j), state.coeffs(4, j), state.coeffs(5, j)}}});
  }
  nlohmann::json doc = {{"schema_version", 1}, {"N", trunc.cutoff()}, {"modes", modes}};
  return doc.dump();
}

SpectralState state_from_json(const std::string& text, const Truncation& trunc) {
  const auto doc = nlohmann::json::parse(text);
  if (doc.at("N").get<int>() != trunc.cutoff()) throw std::runtime_error("state json: cut-off mismatch");
  SpectralState x(trunc.size());
  for (const auto& m : doc.at("modes")) {
    const auto kk = m.at("k").get<std::array<int, 3>>();
    const auto id = trunc.canonical_id({kk[0], kk[1], kk[2]});
    if (!id) throw std::runtime_error("state json: non-canonical mode");
    const auto r = m.at("r").get<std::array<double, 3>>();
    const auto s = m.at("s").get<std::array<double, 3>>();
    for (int i = 0; i < 3; ++i) {
      x.coeffs(i, *id) = r[static_cast<std::size_t>(i)];
      x.coeffs(3 + i, *id) = s[static_cast<std::size_t>(i)];
    }
  }
  return x;
}

}  // namespace nsergo
