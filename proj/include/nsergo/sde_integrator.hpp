#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nsergo/galerkin_drift.hpp"
#include "nsergo/index_lattice.hpp"
#include "nsergo/spectral_state.hpp"

namespace nsergo {

/// Noise on one forced mode: dr_k += q^r xi^r, ds_k += q^s xi^s.
struct ForcedMode {
  int id = 0;
  ModeIndex k;
  Eigen::Matrix3d qr = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d qs = Eigen::Matrix3d::Zero();
};

/// Mode-diagonal additive noise; `modes` sorted by storage id.
struct NoiseSpec {
  std::vector<ForcedMode> modes;

  /// Sum over forced modes of |q^r|_F^2 + |q^s|_F^2.
  double sigma_sq() const;
  std::vector<ModeIndex> forced_indices() const;
  NoiseSpec scaled(double factor) const;
};

/// q^r = q^s = sigma0 P_k on every forced mode.
NoiseSpec default_noise(const Truncation& trunc, std::span<const ModeIndex> forced, double sigma0);

/// Explicit matrices; indices are canonicalized (q flips sign with k, which leaves q^T k = 0 intact).
NoiseSpec make_noise(const Truncation& trunc, const std::vector<ModeIndex>& forced,
                     const std::vector<Eigen::Matrix3d>& qr, const std::vector<Eigen::Matrix3d>& qs);

/// Every problem found in a noise spec, empty when valid: membership in K_N, duplicates,
/// columns not orthogonal to k, rank below 2 (zero matrices included).
std::vector<std::string> noise_problems(const Truncation& trunc, const NoiseSpec& spec);
/// Throws std::invalid_argument joining noise_problems.
void validate_noise(const Truncation& trunc, const NoiseSpec& spec);

enum class Scheme { euler_maruyama, exponential_euler };
Scheme parse_scheme(const std::string& name);
std::string to_string(Scheme s);

struct SimulationConfig {
  double nu = 1.0;
  double dt = 1e-2;
  Scheme scheme = Scheme::exponential_euler;
  double horizon = 1.0;
  std::uint64_t seed = 1;
  std::uint32_t ensemble = 1;
  int stride = 1;  // snapshot every `stride` steps

  std::int64_t steps() const;
};

/// dt * nu * N^2; above 0.5 the run is flagged, above 1.0 rejected.
double stability_number(const SimulationConfig& cfg, int N);
/// Throws std::invalid_argument above the rejection threshold; returns a warning (or "") otherwise.
std::string check_stability(const SimulationConfig& cfg, int N);

/// Gaussian increments scaled by sqrt(dt): column j holds (xi^r, xi^s) for spec.modes[j].
struct NoiseDraw {
  Eigen::Matrix<double, 6, Eigen::Dynamic> xi;
};

/// Reproducible from (seed, trajectory, step): the Philox counter is (step, trajectory, 3 * j + pair).
NoiseDraw draw_noise(const NoiseSpec& spec, std::uint64_t seed, std::uint32_t trajectory, std::uint64_t step,
                     double dt);

class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(std::int64_t step, double time);
  std::int64_t step() const { return step_; }
  double time() const { return time_; }

 private:
  std::int64_t step_;
  double time_;
};

/// One-step map for a fixed truncation, noise and config.
///
/// euler_maruyama:    u' = u + F(u) dt + q xi
/// exponential_euler: u'_k = exp(-nu|k|^2 dt) (u_k + E_k(u) dt + q_k xi_k)
/// Each mode is snapped to exact k-orthogonality afterwards.
class Stepper {
 public:
  Stepper(Truncation trunc, NoiseSpec spec, SimulationConfig cfg);

  const Truncation& truncation() const { return drift_.truncation(); }
  const GalerkinDrift& drift() const { return drift_; }
  const NoiseSpec& noise() const { return spec_; }
  const SimulationConfig& config() const { return cfg_; }

  /// Advances x in place; throws BlowUpError on a non-finite result.
  void step(SpectralState& x, const NoiseDraw& draw, std::int64_t step_index = 0) const;
  void step(SpectralState& x, std::uint32_t trajectory, std::int64_t step_index) const;

 private:
  GalerkinDrift drift_;
  NoiseSpec spec_;
  SimulationConfig cfg_;
  Eigen::VectorXd decay_;  // per mode: exp(-nu|k|^2 dt) or 1 - nu|k|^2 dt

  template <typename Noise>
  void advance(SpectralState& x, Noise&& noise, std::int64_t step_index) const;
};

/// Functional form of Stepper::step.
SpectralState step(const GalerkinDrift& drift, const SpectralState& x, const SimulationConfig& cfg,
                   const NoiseSpec& spec, const NoiseDraw& draw);

struct Trajectory {
  std::vector<double> times;
  std::vector<SpectralState> snapshots;
};

/// Snapshots at t = 0 and every `stride` steps up to the horizon.
Trajectory run_trajectory(const Stepper& stepper, const SpectralState& initial, std::uint32_t trajectory = 0);

void write_trajectory_csv(std::ostream& os, const Truncation& trunc, const Trajectory& traj);

/// Run metadata: config echo, seed, wall time, step count, blow-up flag.
std::string run_metadata_json(const SimulationConfig& cfg, int N, const NoiseSpec& spec, double wall_seconds,
                              std::int64_t steps, bool blew_up);

}  // namespace nsergo
