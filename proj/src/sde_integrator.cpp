#include "nsergo/sde_integrator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <Eigen/SVD>
#include <json.hpp>

#include "nsergo/philox.hpp"

namespace nsergo {

double NoiseSpec::sigma_sq() const {
  double s = 0.0;
  for (const auto& m : modes) s += m.qr.squaredNorm() + m.qs.squaredNorm();
  return s;
}

std::vector<ModeIndex> NoiseSpec::forced_indices() const {
  std::vector<ModeIndex> out;
  for (const auto& m : modes) out.push_back(m.k);
  return out;
}

NoiseSpec NoiseSpec::scaled(double factor) const {
  NoiseSpec out = *this;
  for (auto& m : out.modes) {
    m.qr *= factor;
    m.qs *= factor;
  }
  return out;
}

NoiseSpec default_noise(const Truncation& trunc, std::span<const ModeIndex> forced, double sigma0) {
  NoiseSpec spec;
  for (const ModeIndex& k : canonical_forced_set(trunc, forced)) {
    const Eigen::Vector3d kv = k.vec();
    const Eigen::Matrix3d P = Eigen::Matrix3d::Identity() - kv * kv.transpose() / double(k.norm_sq());
    spec.modes.push_back({*trunc.canonical_id(k), k, sigma0 * P, sigma0 * P});
  }
  return spec;
}

NoiseSpec make_noise(const Truncation& trunc, const std::vector<ModeIndex>& forced,
                     const std::vector<Eigen::Matrix3d>& qr, const std::vector<Eigen::Matrix3d>& qs) {
  if (forced.size() != qr.size() || forced.size() != qs.size())
    throw std::invalid_argument("make_noise: need one q^r and one q^s per forced index");
  NoiseSpec spec;
  std::string bad;
  for (std::size_t j = 0; j < forced.size(); ++j) {
    const ModeIndex& k = forced[j];
    if (k.is_zero() || !trunc.contains(k)) {
      bad += " " + to_string(k);
      continue;
    }
    const Canonical c = canonicalize(k);
    spec.modes.push_back({*trunc.canonical_id(c.rep), c.rep, qr[j], qs[j]});
  }
  if (!bad.empty())
    throw std::invalid_argument("forced indices outside K_N for N=" + std::to_string(trunc.cutoff()) + ":" + bad);
  std::stable_sort(spec.modes.begin(), spec.modes.end(),
                   [](const ForcedMode& a, const ForcedMode& b) { return a.id < b.id; });
  return spec;
}

namespace {

int numeric_rank(const Eigen::Matrix3d& q) {
  const Eigen::Vector3d sv = Eigen::JacobiSVD<Eigen::Matrix3d>(q).singularValues();
  if (sv(0) == 0.0) return 0;
  return static_cast<int>((sv.array() > 1e-10 * sv(0)).count());
}

}  // namespace

std::vector<std::string> noise_problems(const Truncation& trunc, const NoiseSpec& spec) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < spec.modes.size(); ++j) {
    const ForcedMode& m = spec.modes[j];
    const std::string where = "forced mode " + to_string(m.k);
    if (m.k.is_zero() || !trunc.contains(m.k) || !in_canonical_half(m.k)) {
      out.push_back(where + ": not a canonical member of K_N for N=" + std::to_string(trunc.cutoff()));
      continue;
    }
    if (trunc.canonical_id(m.k) != m.id) out.push_back(where + ": storage id mismatch");
    if (j > 0 && spec.modes[j - 1].id >= m.id) out.push_back(where + ": duplicate or unsorted entry");
    const Eigen::Vector3d kv = m.k.vec();
    for (const auto& [name, q] : {std::pair{"q^r", &m.qr}, std::pair{"q^s", &m.qs}}) {
      const double scale = std::max(q->norm(), 1e-300) * kv.norm();
      if ((q->transpose() * kv).norm() > 1e-12 * scale)
        out.push_back(where + ": " + name + " has a column component along k (need q^T k = 0)");
      const int rank = numeric_rank(*q);
      if (rank < 2)
        out.push_back(where + ": " + name + " has rank " + std::to_string(rank) + ", need 2");
    }
  }
  return out;
}

void validate_noise(const Truncation& trunc, const NoiseSpec& spec) {
  const auto problems = noise_problems(trunc, spec);
  if (problems.empty()) return;
  std::string msg = "invalid noise spec:";
  for (const auto& p : problems) msg += "\n  " + p;
  throw std::invalid_argument(msg);
}

Scheme parse_scheme(const std::string& name) {
  if (name == "euler_maruyama") return Scheme::euler_maruyama;
  if (name == "exponential_euler") return Scheme::exponential_euler;
  throw std::invalid_argument("unknown scheme '" + name + "' (euler_maruyama | exponential_euler)");
}

std::string to_string(Scheme s) {
  return s == Scheme::euler_maruyama ? "euler_maruyama" : "exponential_euler";
}

std::int64_t SimulationConfig::steps() const {
  if (horizon <= 0.0) return 0;
  return static_cast<std::int64_t>(std::llround(horizon / dt));
}

double stability_number(const SimulationConfig& cfg, int N) { return cfg.dt * cfg.nu * double(N) * double(N); }

std::string check_stability(const SimulationConfig& cfg, int N) {
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(cfg.nu > 0.0)) throw std::invalid_argument("nu must be positive");
  const double g = stability_number(cfg, N);
  std::ostringstream os;
  os << "stability guard dt*nu*N^2 = " << cfg.dt << "*" << cfg.nu << "*" << N << "^2 = " << g;
  if (g > 1.0) throw std::invalid_argument(os.str() + " > 1.0; reduce dt");
  if (g > 0.5) return os.str() + " > 0.5; results may be inaccurate";
  return {};
}

NoiseDraw draw_noise(const NoiseSpec& spec, std::uint64_t seed, std::uint32_t trajectory, std::uint64_t step,
                     double dt) {
  NoiseDraw d;
  d.xi.resize(6, static_cast<Eigen::Index>(spec.modes.size()));
  const double sq = std::sqrt(dt);
  for (std::size_t j = 0; j < spec.modes.size(); ++j) {
    for (std::uint32_t pair = 0; pair < 3; ++pair) {
      const auto g = gaussian_at(seed, trajectory, step, static_cast<std::uint32_t>(3 * j) + pair);
      d.xi(2 * pair, static_cast<Eigen::Index>(j)) = sq * g[0];
      d.xi(2 * pair + 1, static_cast<Eigen::Index>(j)) = sq * g[1];
    }
  }
  return d;
}

BlowUpError::BlowUpError(std::int64_t step, double time)
    : std::runtime_error("non-finite state at step " + std::to_string(step) + " (t = " + std::to_string(time) +
                         "); dt is too large for this state"),
      step_(step),
      time_(time) {}

Stepper::Stepper(Truncation trunc, NoiseSpec spec, SimulationConfig cfg)
    : drift_(std::move(trunc)), spec_(std::move(spec)), cfg_(cfg) {
  validate_noise(drift_.truncation(), spec_);
  check_stability(cfg_, drift_.truncation().cutoff());
  const int D = drift_.truncation().size();
  decay_.resize(D);
  for (int j = 0; j < D; ++j) {
    const double a = cfg_.nu * double(drift_.truncation().mode(j).norm_sq()) * cfg_.dt;
    decay_(j) = cfg_.scheme == Scheme::exponential_euler ? std::exp(-a) : 1.0 - a;
  }
}

template <typename Noise>
void Stepper::advance(SpectralState& x, Noise&& noise, std::int64_t step_index) const {
  thread_local SpectralState quad;
  drift_.quadratic_into(x, quad);
  const double dt = cfg_.dt;
  if (cfg_.scheme == Scheme::exponential_euler) {
    x.coeffs += dt * quad.coeffs;
    noise(x);
    x.coeffs *= decay_.asDiagonal();
  } else {
    // u + (quad - nu|k|^2 u) dt + q xi, with the viscous factor folded into decay_
    x.coeffs = x.coeffs * decay_.asDiagonal();
    x.coeffs += dt * quad.coeffs;
    noise(x);
  }
  snap_state(drift_.truncation(), x);
  if (!x.all_finite()) throw BlowUpError(step_index, double(step_index) * dt);
}

void Stepper::step(SpectralState& x, const NoiseDraw& draw, std::int64_t step_index) const {
  if (x.modes() != drift_.truncation().size()) throw std::invalid_argument("step: state/truncation mismatch");
  if (draw.xi.cols() != static_cast<Eigen::Index>(spec_.modes.size()))
    throw std::invalid_argument("step: noise draw does not match the noise spec");
  advance(
      x,
      [&](SpectralState& y) {
        for (std::size_t j = 0; j < spec_.modes.size(); ++j) {
          const ForcedMode& m = spec_.modes[j];
          const auto col = draw.xi.col(static_cast<Eigen::Index>(j));
          y.r(m.id) += m.qr * col.head<3>();
          y.s(m.id) += m.qs * col.tail<3>();
        }
      },
      step_index);
}

void Stepper::step(SpectralState& x, std::uint32_t trajectory, std::int64_t step_index) const {
  const double sq = std::sqrt(cfg_.dt);
  advance(
      x,
      [&](SpectralState& y) {
        for (std::size_t j = 0; j < spec_.modes.size(); ++j) {
          const ForcedMode& m = spec_.modes[j];
          Eigen::Matrix<double, 6, 1> xi;
          for (std::uint32_t pair = 0; pair < 3; ++pair) {
            const auto g = gaussian_at(cfg_.seed, trajectory, static_cast<std::uint64_t>(step_index),
                                       static_cast<std::uint32_t>(3 * j) + pair);
            xi(2 * pair) = sq * g[0];
            xi(2 * pair + 1) = sq * g[1];
          }
          y.r(m.id) += m.qr * xi.head<3>();
          y.s(m.id) += m.qs * xi.tail<3>();
        }
      },
      step_index);
}

SpectralState step(const GalerkinDrift& drift, const SpectralState& x, const SimulationConfig& cfg,
                   const NoiseSpec& spec, const NoiseDraw& draw) {
  const Stepper stepper(drift.truncation(), spec, cfg);
  SpectralState out = x;
  stepper.step(out, draw);
  return out;
}

Trajectory run_trajectory(const Stepper& stepper, const SpectralState& initial, std::uint32_t trajectory) {
  const SimulationConfig& cfg = stepper.config();
  if (cfg.stride < 1) throw std::invalid_argument("stride must be >= 1");
  Trajectory out;
  SpectralState x = initial;
  out.times.push_back(0.0);
  out.snapshots.push_back(x);
  const std::int64_t n = cfg.steps();
  for (std::int64_t i = 0; i < n; ++i) {
    stepper.step(x, trajectory, i);
    if ((i + 1) % cfg.stride == 0 || i + 1 == n) {
      out.times.push_back(double(i + 1) * cfg.dt);
      out.snapshots.push_back(x);
    }
  }
  return out;
}

void write_trajectory_csv(std::ostream& os, const Truncation& trunc, const Trajectory& traj) {
  os << "t,k1,k2,k3,r1,r2,r3,s1,s2,s3\n" << std::setprecision(17);
  for (std::size_t n = 0; n < traj.times.size(); ++n) {
    const SpectralState& x = traj.snapshots[n];
    for (int j = 0; j < trunc.size(); ++j) {
      const ModeIndex& k = trunc.mode(j);
      os << traj.times[n] << ',' << k[0] << ',' << k[1] << ',' << k[2];
      for (int i = 0; i < 6; ++i) os << ',' << x.coeffs(i, j);
      os << '\n';
    }
  }
}

std::string run_metadata_json(const SimulationConfig& cfg, int N, const NoiseSpec& spec, double wall_seconds,
                              std::int64_t steps, bool blew_up) {
  nlohmann::json forced = nlohmann::json::array();
  for (const auto& m : spec.modes) forced.push_back({m.k[0], m.k[1], m.k[2]});
  return nlohmann::json({{"schema_version", 1},
                         {"N", N},
                         {"nu", cfg.nu},
                         {"dt", cfg.dt},
                         {"scheme", to_string(cfg.scheme)},
                         {"horizon", cfg.horizon},
                         {"seed", cfg.seed},
                         {"ensemble", cfg.ensemble},
                         {"forced", forced},
                         {"sigma_sq", spec.sigma_sq()},
                         {"wall_seconds", wall_seconds},
                         {"steps", steps},
                         {"blew_up", blew_up}})
      .dump(2);
}

}  // namespace nsergo
