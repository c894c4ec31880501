// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Oracles come from tests/support/oracles.hpp and never call the library's drift or bracket code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <algorithm>
#include <array>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Geometry>

#include "nsergo/ensemble.hpp"
#include "nsergo/ergodicity_lab.hpp"
#include "nsergo/hormander.hpp"
#include "nsergo/index_lattice.hpp"
#include "nsergo/lie_brackets.hpp"
#include "nsergo/sde_integrator.hpp"
#include "nsergo/steering.hpp"
#include "oracles.hpp"

using namespace nsergo;

namespace {

// Pinned tolerances.
constexpr double kEnergyTol = 1e-12;
constexpr double kBracketTol = 1e-10;
constexpr double kPolarTol = 1e-12;
constexpr double kSteerTol = 1e-6;

const std::vector<ModeIndex> kUnit{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
const std::vector<ModeIndex> kEven{{2, 0, 0}, {0, 2, 0}, {0, 0, 2}};

struct Outcome {
  bool pass = false;
  std::string detail;
};

SpectralState from_flat(const Truncation& t, const Eigen::VectorXd& v) {
  SpectralState x = SpectralState::zero(t);
  x.flat() = v;
  return x;
}

// [[F0,V],W] from the naive convolution drift: B(V+W) - B(V) - B(W), with nu = 0 so B(0) = 0.
Eigen::VectorXd oracle_bracket(const Truncation& t, const TangentField& V, const TangentField& W) {
  const Eigen::VectorXd v = V.to_dense(t.size()), w = W.to_dense(t.size());
  const auto B = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return oracle::drift(t, from_flat(t, x), 0.0).flat(); };
  return B(v + w) - B(v) - B(w);
}

TangentField random_field(const Truncation& t, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, t.size() - 1);
  std::normal_distribution<double> g;
  return TangentField::from_frame(t, pick(rng), Eigen::Vector4d(g(rng), g(rng), g(rng), g(rng)));
}

Outcome energy_orthogonality() {
  double worst = 0.0;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> e(0.1, 20.0);
  for (int N = 1; N <= 2; ++N) {
    const Truncation t(N);
    for (int i = 0; i < 1000; ++i) {
      const SpectralState x = random_state(t, e(rng), rng());
      const double scale = std::pow(2.0 * x.energy(), 1.5) * N * std::sqrt(3.0);
      const double naive = x.flat().dot(oracle::drift(t, x, 0.0).flat());
      worst = std::max({worst, std::abs(naive) / scale, std::abs(energy_transfer(t, x)) / scale,
                        std::abs(real_energy_transfer(t, x)) / scale});
    }
  }
  std::ostringstream d;
  d << "2000 states, worst relative " << worst << " (tol " << kEnergyTol << ")";
  return {worst <= kEnergyTol, d.str()};
}

Outcome bracket_oracle() {
  const Truncation t(2);
  std::mt19937_64 rng(2);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const TangentField V = random_field(t, rng), W = random_field(t, rng);
    const Eigen::VectorXd closed = double_bracket(t, V, W).to_dense(t.size());
    worst = std::max(worst, (closed - oracle_bracket(t, V, W)).cwiseAbs().maxCoeff());
  }
  std::ostringstream d;
  d << "1000 pairs at N=2, max-norm difference " << worst << " (tol " << kBracketTol << ")";
  return {worst <= kBracketTol, d.str()};
}

// Integer vectors spanning k-perp, so every product in the closed form is an exact integer.
std::array<Eigen::Vector3d, 2> integer_perp(const ModeIndex& k) {
  const Eigen::Vector3d v = k.vec();
  Eigen::Vector3d a = v.cross(Eigen::Vector3d::UnitX());
  if (a.squaredNorm() == 0.0) a = v.cross(Eigen::Vector3d::UnitY());
  return {a, v.cross(a)};
}

Outcome collinear_zero() {
  const Truncation t(2);
  long pairs = 0, nonzero = 0;
  for (int m = 0; m < t.size(); ++m)
    for (int n = 0; n < t.size(); ++n) {
      if (t.mode(m).vec().cross(t.mode(n).vec()).squaredNorm() != 0.0) continue;
      const auto pm = integer_perp(t.mode(m)), pn = integer_perp(t.mode(n));
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          const Eigen::Vector3d z = Eigen::Vector3d::Zero();
          const TangentField V = TangentField::single(m, a < 2 ? pm[a % 2] : z, a < 2 ? z : pm[a % 2]);
          const TangentField W = TangentField::single(n, b < 2 ? pn[b % 2] : z, b < 2 ? z : pn[b % 2]);
          ++pairs;
          if (double_bracket(t, V, W).max_abs() != 0.0) ++nonzero;
        }
    }
  std::ostringstream d;
  d << pairs << " collinear field pairs in K_2, " << nonzero << " with a nonzero entry";
  return {nonzero == 0 && pairs > 0, d.str()};
}

Outcome polarization() {
  const Truncation t(2);
  std::mt19937_64 rng(4);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const TangentField V = random_field(t, rng), W = random_field(t, rng);
    const TangentField S = V + W;
    // Left side from the oracle on composite fields, right side from the closed form.
    const auto self = [&](const TangentField& X) -> Eigen::VectorXd {
      const Eigen::VectorXd x = X.to_dense(t.size());
      return oracle::drift(t, from_flat(t, 2.0 * x), 0.0).flat() - 2.0 * oracle::drift(t, from_flat(t, x), 0.0).flat();
    };
    const Eigen::VectorXd lhs = self(S) - self(V) - self(W);
    const Eigen::VectorXd rhs = 2.0 * double_bracket(t, V, W).to_dense(t.size());
    worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff() / std::max(1.0, rhs.cwiseAbs().maxCoeff()));
  }
  std::ostringstream d;
  d << "200 pairs, worst relative " << worst << " (tol " << kPolarTol << ")";
  return {worst <= kPolarTol, d.str()};
}

Outcome working_example() {
  const int expected[] = {52, 248, 684};
  bool ok = true;
  std::ostringstream d;
  for (int N = 1; N <= 3; ++N) {
    const ClosureResult r = determining_closure(kUnit, N);
    const RankReport h = check_hormander(kUnit, N);
    ok = ok && r.is_determining && r.total_dim() == expected[N - 1] && h.achieved_rank == expected[N - 1] && h.passed;
    d << (N > 1 ? ", " : "") << "N=" << N << " rank " << r.total_dim();
  }
  return {ok, d.str()};
}

Outcome negative_controls() {
  const std::vector<ModeIndex> one{{1, 0, 0}};
  const ClosureResult a = determining_closure(one, 1);
  bool ok = !a.is_determining;
  for (const auto& s : a.subspaces) ok = ok && s.dim() == (s.k == ModeIndex{1, 0, 0} ? 4 : 0);
  const ClosureResult b = determining_closure(kEven, 2);
  ok = ok && !b.is_determining;
  int even_full = 0;
  for (const auto& s : b.subspaces) {
    const bool even = s.k[0] % 2 == 0 && s.k[1] % 2 == 0 && s.k[2] % 2 == 0;
    if (!even) ok = ok && s.dim() == 0;
    if (even && s.dim() == 4) ++even_full;
  }
  ok = ok && even_full == 13;
  std::ostringstream d;
  d << "{(1,0,0)}: rank " << a.total_dim() << "/52; even set: rank " << b.total_dim() << "/248, odd modes all 0, "
    << even_full << " even modes full";
  return {ok, d.str()};
}

Outcome generator_oracle() {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> size(3, 5);
  int agree = 0, generators = 0;
  for (int i = 0; i < 200; ++i) {
    std::vector<ModeIndex> set;
    std::vector<oracle::Index3> raw;
    const int n = size(rng);
    for (int j = 0; j < n; ++j) {
      const ModeIndex k = oracle::random_index(rng, 2);
      set.push_back(k);
      raw.push_back({k[0], k[1], k[2]});
    }
    const bool lib = is_generator_set(set);
    generators += lib;
    agree += lib == oracle::spans_unit_vectors(raw, 10);
  }
  std::ostringstream d;
  d << agree << "/200 agree with the +-10 box enumeration (" << generators << " generator sets)";
  return {agree == 200, d.str()};
}

Outcome lyapunov() {
  const Truncation t(1);
  SimulationConfig cfg;
  cfg.nu = 1.0;
  cfg.dt = 0.01;
  cfg.horizon = 10.0;
  cfg.ensemble = 10000;
  cfg.stride = 10;
  cfg.seed = 8;
  const Stepper stepper(t, default_noise(t, kUnit, 1.0), cfg);
  const LyapunovReport r = lyapunov_check(stepper, random_state(t, 10.0, 8));
  const bool literal = r.long_run_mean <= r.ceiling + 3.0 * r.long_run_stderr;
  std::ostringstream d;
  d << "10^4 trajectories to t=10 from V0=10: envelope " << (r.envelope_ok ? "held" : "VIOLATED")
    << " at all samples, long-run E[V] " << r.long_run_mean << " +- " << r.long_run_stderr << " vs sigma^2/2nu "
    << r.ceiling << ", verdict " << to_string(r.verdict);
  return {r.envelope_ok && literal && r.verdict == Verdict::pass, d.str()};
}

Outcome mixing() {
  const Truncation t(1);
  SimulationConfig cfg;
  cfg.nu = 1.0;
  cfg.dt = 0.01;
  cfg.horizon = 6.0;
  cfg.ensemble = 10000;
  cfg.stride = 10;
  cfg.seed = 9;
  const Stepper stepper(t, default_noise(t, kUnit, 1.0), cfg);
  const MixingEstimate m = mixing_probe(stepper, SpectralState::zero(t), random_state(t, 10.0, 9));
  std::ostringstream d;
  d << "rho = " << m.rho_hat << " +- " << m.rho_stderr << " (lower 95% bound " << m.rho_hat - 1.96 * m.rho_stderr
    << "), R^2 " << m.r_squared << ", held-out " << (m.heldout_ok ? "under" : "ABOVE") << " envelope, window samples ["
    << m.window_begin << ", " << m.window_end << ")";
  if (!m.note.empty()) d << "; " << m.note;
  return {m.hypothesis_ok && m.passed && m.rho_hat - 1.96 * m.rho_stderr > 0.0 && m.heldout_ok, d.str()};
}

Outcome steering() {
  const Truncation t(1);
  const ControlSystem sys(t, default_noise(t, kUnit, 1.0), 1.0);
  SteeringOptions opt;
  opt.T = 1.0;
  opt.relative_tolerance = kSteerTol;
  int converged = 0, restarted = 0;
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const SpectralState a = random_state(t, 1.0, 1000 + 2 * i), b = random_state(t, 1.0, 1001 + 2 * i);
    opt.seed = static_cast<std::uint64_t>(i + 1);
    const SteeringResult r = solve_steering(sys, a, b, opt);
    const bool ok = r.converged && r.terminal_error <= kSteerTol * (1.0 + b.coeffs.norm());
    converged += ok;
    restarted += r.attempts > 1;
    if (ok) worst = std::max(worst, r.terminal_error / (1.0 + b.coeffs.norm()));
  }
  std::ostringstream d;
  d << converged << "/20 converged (" << restarted << " needed restarts), worst relative error " << worst;
  return {converged >= 18, d.str()};
}

Outcome integrator_contracts() {
  bool divfree = true;
  {
    const Truncation t(2);
    for (Scheme scheme : {Scheme::exponential_euler, Scheme::euler_maruyama}) {
      SimulationConfig cfg;
      cfg.dt = 0.01;
      cfg.scheme = scheme;
      const Stepper stepper(t, default_noise(t, kUnit, 1.0), cfg);
      for (std::uint32_t traj = 0; traj < 10; ++traj) {
        SpectralState x = random_state(t, 5.0, traj);
        divfree = divfree && divergence_defect(t, x) == 0.0;
        for (std::int64_t s = 0; s < 200; ++s) {
          stepper.step(x, traj, s);
          divfree = divfree && divergence_defect(t, x) == 0.0;
        }
      }
    }
  }

  bool replay = true;
  {
    const Truncation t(1);
    SimulationConfig cfg;
    cfg.horizon = 2.0;
    cfg.ensemble = 1000;
    cfg.stride = 10;
    const Stepper stepper(t, default_noise(t, kUnit, 1.0), cfg);
    const SpectralState x0 = random_state(t, 3.0, 5);
    const Trajectory a = run_trajectory(stepper, x0, 17), b = run_trajectory(stepper, x0, 17);
    for (std::size_t i = 0; i < a.snapshots.size(); ++i) replay = replay && a.snapshots[i].coeffs == b.snapshots[i].coeffs;
    const LyapunovReport one = lyapunov_check(stepper, x0, 1), many = lyapunov_check(stepper, x0, 3);
    for (std::size_t i = 0; i < one.series.size(); ++i)
      replay = replay && one.series[i].V == many.series[i].V && one.series[i].std_err == many.series[i].std_err;
  }

  // Single forced mode: the quadratic term vanishes identically, so each transverse component is an OU process.
  bool ou = true;
  double worst_z = 0.0;
  {
    const Truncation t(1);
    SimulationConfig cfg;
    cfg.dt = 0.002;
    cfg.horizon = 0.5;
    cfg.seed = 11;
    const std::vector<ModeIndex> forced{{1, 0, 0}};
    const Stepper stepper(t, default_noise(t, forced, 1.0), cfg);
    const int id = *t.canonical_id(ModeIndex{1, 0, 0});
    const std::uint32_t n = 10000;
    struct Acc {
      Eigen::Vector4d s2 = Eigen::Vector4d::Zero();
      void merge(const Acc& o) { s2 += o.s2; }
    };
    const Acc acc = run_chunked(
        n, [] { return Acc{}; },
        [&](std::uint32_t traj, Acc& a) {
          SpectralState x = SpectralState::zero(t);
          for (std::int64_t i = 0; i < cfg.steps(); ++i) stepper.step(x, traj, i);
          a.s2 += Eigen::Vector4d(x.r(id)(1), x.r(id)(2), x.s(id)(1), x.s(id)(2)).cwiseAbs2();
        });
    const double var = (1.0 - std::exp(-2.0 * cfg.horizon)) / 2.0;
    const double se = var * std::sqrt(2.0 / n);
    for (int c = 0; c < 4; ++c) {
      const double z = std::abs(acc.s2(c) / n - var) / se;
      worst_z = std::max(worst_z, z);
      ou = ou && z <= 3.0;
    }
  }
  std::ostringstream d;
  d << "divergence-free " << (divfree ? "exact" : "BROKEN") << ", replay " << (replay ? "bit-identical" : "DIFFERS")
    << ", OU variance worst |z| = " << worst_z;
  return {divfree && replay && ou, d.str()};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "energy orthogonality", 5, energy_orthogonality},
      {2, "bracket closed form vs oracle", 10, bracket_oracle},
      {3, "collinear pairs annihilate", 1, collinear_zero},
      {4, "polarization identity", 2, polarization},
      {5, "working example is determining", 60, working_example},
      {6, "negative controls", 10, negative_controls},
      {7, "generator criterion vs enumeration", 30, generator_oracle},
      {8, "Lyapunov bound", 300, lyapunov},
      {9, "mixing shape", 600, mixing},
      {10, "controllability witness", 600, steering},
      {11, "integrator contracts", 120, integrator_contracts},
  };
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s %2d %s: %s [%.1f s of %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                c.budget_seconds, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
