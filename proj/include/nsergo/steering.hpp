#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nsergo/galerkin_drift.hpp"
#include "nsergo/sde_integrator.hpp"

namespace nsergo {

/// Piecewise-constant controls on a uniform grid 0 = t_0 < ... < t_K = T.
/// values.col(i) holds the control on [t_i, t_{i+1}): for each forced mode j (in NoiseSpec order)
/// rows 6j..6j+2 are v^r and rows 6j+3..6j+5 are v^s.
struct ControlSignal {
  std::vector<double> grid;
  Eigen::MatrixXd values;

  static ControlSignal zero(double T, int intervals, int forced_modes);
  int intervals() const { return static_cast<int>(values.cols()); }
  /// Knots strictly increasing from 0, one column per interval.
  void validate() const;
  Eigen::VectorXd stacked() const { return values.reshaped(); }
  void set_stacked(const Eigen::VectorXd& p) { values.reshaped() = p; }
};

/// dx/dt = F(x) + B v: F the Galerkin drift, B injecting q^r v^r into r_k and q^s v^s into s_k.
struct ControlSystem {
  Truncation trunc;
  NoiseSpec noise;  // q matrices; the amplitudes play no stochastic role here
  double nu = 1.0;
  int substeps = 32;           // RK4 steps per control interval
  bool linear_only = false;    // test hook: drop the quadratic term

  ControlSystem(Truncation t, NoiseSpec q, double viscosity);
  int controls_per_interval() const { return 6 * static_cast<int>(noise.modes.size()); }
};

/// RK4 with dt = interval / substeps; every step is snapped to exact k-orthogonality.
/// Throws BlowUpError on a non-finite state.
SpectralState integrate_controlled(const ControlSystem& sys, const SpectralState& initial, const ControlSignal& control);

/// Terminal state and its derivative with respect to control.stacked(), differentiated through the
/// RK4 stages (exact for the discrete map, up to the snapping).
struct Sensitivity {
  SpectralState terminal;
  Eigen::MatrixXd jacobian;  // 6D x (6 |forced| K)
};
Sensitivity controlled_sensitivity(const ControlSystem& sys, const SpectralState& initial, const ControlSignal& control);

struct SteeringOptions {
  double T = 1.0;
  int intervals = 8;
  int max_iterations = 200;
  double lambda0 = 1e-3;
  double relative_tolerance = 1e-6;  // converged when |x(T) - target| <= tol (1 + |target|)
  int restarts = 8;                  // seeded random starts after the zero-control start fails
  double restart_scale = 1.0;
  std::uint64_t seed = 1;
};

struct SteeringResult {
  ControlSignal control;
  SpectralState terminal;
  double terminal_error = 0.0;
  double tolerance = 0.0;
  int iterations = 0;  // in the attempt that produced `control`
  int attempts = 0;
  bool converged = false;
  bool hypothesis_ok = true;  // forced set passes the rank check
  std::vector<double> mode_error;  // |x(T) - target| per storage mode
};

/// Levenberg-Marquardt single shooting. The step solves (J J^T + lambda I) y = -r, delta = J^T y;
/// lambda halves on an accepted step and doubles on a rejected one. Attempts run in order
/// (zero control, then seeded random controls) and stop at the first convergence; otherwise the
/// best iterate over all attempts is returned with converged = false.
/// Throws std::invalid_argument when intervals * controls_per_interval < 4 D.
SteeringResult solve_steering(const ControlSystem& sys, const SpectralState& initial, const SpectralState& target,
                              const SteeringOptions& options = {});

std::string steering_json(const ControlSystem& sys, const SpectralState& initial, const SpectralState& target,
                          const SteeringOptions& options, const SteeringResult& result);
ControlSignal control_from_json(const std::string& json);

struct ReplayCheck {
  double recorded_error = 0.0;
  double replayed_error = 0.0;
  bool identical = false;
};
/// Re-integrates the control stored in a steering_json document and compares terminal errors.
ReplayCheck replay_steering(const ControlSystem& sys, const std::string& json);

}  // namespace nsergo
