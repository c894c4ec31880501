#include "nsergo/steering.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <json.hpp>

#include "nsergo/hormander.hpp"
#include "nsergo/lie_brackets.hpp"
#include "nsergo/philox.hpp"

namespace nsergo {

using json = nlohmann::json;

ControlSignal ControlSignal::zero(double T, int intervals, int forced_modes) {
  if (!(T > 0.0) || intervals < 1) throw std::invalid_argument("control signal needs T > 0 and at least one interval");
  ControlSignal c;
  c.grid.resize(static_cast<std::size_t>(intervals) + 1);
  for (int i = 0; i <= intervals; ++i) c.grid[static_cast<std::size_t>(i)] = T * double(i) / double(intervals);
  c.values = Eigen::MatrixXd::Zero(6 * forced_modes, intervals);
  return c;
}

void ControlSignal::validate() const {
  if (grid.size() < 2 || grid.front() != 0.0) throw std::invalid_argument("control grid must start at 0 with two knots or more");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("control grid must be strictly increasing");
  if (values.cols() != static_cast<Eigen::Index>(grid.size()) - 1)
    throw std::invalid_argument("control values need one column per interval");
  if (!values.allFinite()) throw std::invalid_argument("control values must be finite");
}

ControlSystem::ControlSystem(Truncation t, NoiseSpec q, double viscosity)
    : trunc(std::move(t)), noise(std::move(q)), nu(viscosity) {
  validate_noise(trunc, noise);
  if (!(nu > 0.0)) throw std::invalid_argument("viscosity must be positive");
}

namespace {

class Dynamics {
 public:
  explicit Dynamics(const ControlSystem& sys) : sys_(sys), drift_(sys.trunc) {
    const int D = sys.trunc.size();
    const int m = sys.controls_per_interval();
    B_ = Eigen::MatrixXd::Zero(6 * D, m);
    for (std::size_t j = 0; j < sys.noise.modes.size(); ++j) {
      const ForcedMode& f = sys.noise.modes[j];
      const int c = 6 * static_cast<int>(j);
      B_.block<3, 3>(6 * f.id, c) = f.qr;
      B_.block<3, 3>(6 * f.id + 3, c + 3) = f.qs;
    }
    damping_.resize(6 * D);
    for (int j = 0; j < D; ++j) damping_.segment<6>(6 * j).setConstant(-sys.nu * double(sys.trunc.mode(j).norm_sq()));
  }

  const Eigen::MatrixXd& B() const { return B_; }

  // f(x) + B v
  void rhs(const SpectralState& x, const Eigen::VectorXd& Bv, SpectralState& out) const {
    if (sys_.linear_only) {
      out.coeffs.resize(6, x.modes());
      out.flat() = damping_.cwiseProduct(x.flat());
    } else {
      drift_.drift_into(x, sys_.nu, out);
    }
    out.flat() += Bv;
  }

  Eigen::MatrixXd jacobian(const SpectralState& x) const {
    if (sys_.linear_only) return damping_.asDiagonal();
    return drift_jacobian(sys_.trunc, x, sys_.nu);
  }

 private:
  const ControlSystem& sys_;
  GalerkinDrift drift_;
  Eigen::MatrixXd B_;
  Eigen::VectorXd damping_;
};

template <typename OnStep>
SpectralState integrate(const ControlSystem& sys, const Dynamics& dyn, const SpectralState& initial,
                        const ControlSignal& control, OnStep&& on_step) {
  control.validate();
  if (control.values.rows() != sys.controls_per_interval())
    throw std::invalid_argument("control signal has the wrong number of rows for this noise spec");
  if (sys.substeps < 1) throw std::invalid_argument("substeps must be >= 1");
  SpectralState x = initial;
  SpectralState k1, k2, k3, k4, tmp;
  std::int64_t step = 0;
  for (int iv = 0; iv < control.intervals(); ++iv) {
    const double h = (control.grid[static_cast<std::size_t>(iv) + 1] - control.grid[static_cast<std::size_t>(iv)]) / sys.substeps;
    const Eigen::VectorXd Bv = dyn.B() * control.values.col(iv);
    for (int s = 0; s < sys.substeps; ++s, ++step) {
      tmp = x;
      dyn.rhs(x, Bv, k1);
      tmp.coeffs = x.coeffs + 0.5 * h * k1.coeffs;
      const SpectralState x2 = tmp;
      dyn.rhs(x2, Bv, k2);
      tmp.coeffs = x.coeffs + 0.5 * h * k2.coeffs;
      const SpectralState x3 = tmp;
      dyn.rhs(x3, Bv, k3);
      tmp.coeffs = x.coeffs + h * k3.coeffs;
      const SpectralState x4 = tmp;
      dyn.rhs(x4, Bv, k4);
      on_step(iv, h, x, x2, x3, x4);
      x.coeffs += (h / 6.0) * (k1.coeffs + 2.0 * k2.coeffs + 2.0 * k3.coeffs + k4.coeffs);
      snap_state(sys.trunc, x);
      if (!x.all_finite()) throw BlowUpError(step + 1, control.grid[static_cast<std::size_t>(iv)] + (s + 1) * h);
    }
  }
  return x;
}

double norm_of(const SpectralState& x) { return x.coeffs.norm(); }

}  // namespace

SpectralState integrate_controlled(const ControlSystem& sys, const SpectralState& initial, const ControlSignal& control) {
  const Dynamics dyn(sys);
  return integrate(sys, dyn, initial, control, [](auto&&...) {});
}

Sensitivity controlled_sensitivity(const ControlSystem& sys, const SpectralState& initial, const ControlSignal& control) {
  const Dynamics dyn(sys);
  const Eigen::Index n = 6 * sys.trunc.size();
  const Eigen::Index m = sys.controls_per_interval();
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, m * control.intervals());
  Eigen::MatrixXd d1, d2, d3, d4;
  Sensitivity out;
  out.terminal = integrate(sys, dyn, initial, control,
                           [&](int iv, double h, const SpectralState& x1, const SpectralState& x2,
                               const SpectralState& x3, const SpectralState& x4) {
                             // Columns of later intervals are still zero; only the first (iv + 1) m are live.
                             const Eigen::Index live = m * (iv + 1);
                             const auto Sl = S.leftCols(live);
                             const auto add_B = [&](Eigen::MatrixXd& d) { d.rightCols(m) += dyn.B(); };
                             d1 = dyn.jacobian(x1) * Sl;
                             add_B(d1);
                             d2 = dyn.jacobian(x2) * (Sl + 0.5 * h * d1);
                             add_B(d2);
                             d3 = dyn.jacobian(x3) * (Sl + 0.5 * h * d2);
                             add_B(d3);
                             d4 = dyn.jacobian(x4) * (Sl + h * d3);
                             add_B(d4);
                             S.leftCols(live) += (h / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
                           });
  out.jacobian = std::move(S);
  return out;
}

namespace {

struct Attempt {
  ControlSignal control;
  SpectralState terminal;
  double error = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

Attempt levenberg_marquardt(const ControlSystem& sys, const SpectralState& initial, const SpectralState& target,
                            ControlSignal control, const SteeringOptions& opt, double tol) {
  Attempt a;
  a.control = control;
  Sensitivity sens;
  try {
    sens = controlled_sensitivity(sys, initial, control);
  } catch (const BlowUpError&) {
    return a;
  }
  Eigen::VectorXd r = sens.terminal.flat() - target.flat();
  a.terminal = sens.terminal;
  a.error = r.norm();
  double lambda = opt.lambda0;
  const Eigen::Index n = r.size();
  while (a.error > tol && a.iterations < opt.max_iterations) {
    ++a.iterations;
    const Eigen::MatrixXd& J = sens.jacobian;
    Eigen::MatrixXd A = J * J.transpose();
    A.diagonal().array() += lambda;
    const Eigen::VectorXd y = A.ldlt().solve(-r);
    ControlSignal trial = a.control;
    trial.set_stacked(a.control.stacked() + J.transpose() * y);
    bool accepted = false;
    try {
      SpectralState x = integrate_controlled(sys, initial, trial);
      const double e = (x.flat() - target.flat()).norm();
      if (e < a.error) {
        accepted = true;
        a.control = trial;
        sens = controlled_sensitivity(sys, initial, trial);
        r = sens.terminal.flat() - target.flat();
        a.terminal = sens.terminal;
        a.error = r.norm();
      }
    } catch (const BlowUpError&) {
    }
    lambda = accepted ? 0.5 * lambda : 2.0 * lambda;
    if (lambda > 1e300 || n == 0) break;
  }
  return a;
}

}  // namespace

SteeringResult solve_steering(const ControlSystem& sys, const SpectralState& initial, const SpectralState& target,
                              const SteeringOptions& opt) {
  const int D = sys.trunc.size();
  const int m = sys.controls_per_interval();
  if (opt.intervals < 1 || opt.intervals * m < 4 * D)
    throw std::invalid_argument("steering: intervals * controls per interval (" + std::to_string(opt.intervals) + " * " +
                                std::to_string(m) + ") must be at least 4 D = " + std::to_string(4 * D));
  if (initial.modes() != D || target.modes() != D) throw std::invalid_argument("steering: state size does not match N");

  SteeringResult res;
  try {
    res.hypothesis_ok = check_hormander(sys.trunc, sys.noise).passed;
  } catch (const std::invalid_argument&) {
    res.hypothesis_ok = false;
  }
  res.tolerance = opt.relative_tolerance * (1.0 + norm_of(target));

  Attempt best;
  for (int attempt = 0; attempt <= opt.restarts; ++attempt) {
    ControlSignal start = ControlSignal::zero(opt.T, opt.intervals, static_cast<int>(sys.noise.modes.size()));
    if (attempt > 0) {
      Eigen::VectorXd p(start.values.size());
      for (Eigen::Index i = 0; i < p.size(); ++i)
        p(i) = opt.restart_scale *
               gaussian_at(opt.seed, static_cast<std::uint32_t>(attempt), static_cast<std::uint64_t>(i / 2), 0)[i % 2];
      start.set_stacked(p);
    }
    Attempt a = levenberg_marquardt(sys, initial, target, start, opt, res.tolerance);
    res.attempts = attempt + 1;
    const bool done = a.error <= res.tolerance;
    if (a.error < best.error || attempt == 0) best = std::move(a);
    if (done) break;
  }

  res.control = best.control;
  res.terminal = best.terminal.modes() == D ? best.terminal : SpectralState::zero(sys.trunc);
  res.terminal_error = best.error;
  res.iterations = best.iterations;
  res.converged = best.error <= res.tolerance;
  res.mode_error.resize(static_cast<std::size_t>(D));
  for (int j = 0; j < D; ++j)
    res.mode_error[static_cast<std::size_t>(j)] = (res.terminal.coeffs.col(j) - target.coeffs.col(j)).norm();
  return res;
}

std::string steering_json(const ControlSystem& sys, const SpectralState& initial, const SpectralState& target,
                          const SteeringOptions& options, const SteeringResult& r) {
  json j;
  j["schema_version"] = 1;
  j["N"] = sys.trunc.cutoff();
  j["nu"] = sys.nu;
  j["T"] = options.T;
  j["intervals"] = options.intervals;
  j["substeps"] = sys.substeps;
  j["lambda0"] = options.lambda0;
  j["max_iterations"] = options.max_iterations;
  j["restarts"] = options.restarts;
  j["seed"] = options.seed;
  j["converged"] = r.converged;
  j["hypothesis_ok"] = r.hypothesis_ok;
  j["terminal_error"] = r.terminal_error;
  j["tolerance"] = r.tolerance;
  j["iterations"] = r.iterations;
  j["attempts"] = r.attempts;
  json modes = json::array();
  for (const auto& f : sys.noise.modes) modes.push_back({f.k[0], f.k[1], f.k[2]});
  j["forced"] = modes;
  j["grid"] = r.control.grid;
  json vals = json::array();
  for (Eigen::Index c = 0; c < r.control.values.cols(); ++c) {
    std::vector<double> col(r.control.values.col(c).begin(), r.control.values.col(c).end());
    vals.push_back(col);
  }
  j["controls"] = vals;
  j["mode_error"] = r.mode_error;
  j["initial"] = json::parse(state_to_json(sys.trunc, initial));
  j["target"] = json::parse(state_to_json(sys.trunc, target));
  j["terminal"] = json::parse(state_to_json(sys.trunc, r.terminal));
  return j.dump(2);
}

ControlSignal control_from_json(const std::string& text) {
  const json j = json::parse(text);
  ControlSignal c;
  c.grid = j.at("grid").get<std::vector<double>>();
  const auto& vals = j.at("controls");
  const Eigen::Index rows = vals.empty() ? 0 : static_cast<Eigen::Index>(vals.at(0).size());
  c.values.resize(rows, static_cast<Eigen::Index>(vals.size()));
  for (std::size_t col = 0; col < vals.size(); ++col) {
    const auto v = vals[col].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(v.size()) != rows) throw std::invalid_argument("ragged control columns");
    for (Eigen::Index i = 0; i < rows; ++i) c.values(i, static_cast<Eigen::Index>(col)) = v[static_cast<std::size_t>(i)];
  }
  c.validate();
  return c;
}

ReplayCheck replay_steering(const ControlSystem& sys, const std::string& text) {
  const json j = json::parse(text);
  const SpectralState initial = state_from_json(j.at("initial").dump(), sys.trunc);
  const SpectralState target = state_from_json(j.at("target").dump(), sys.trunc);
  ControlSystem s = sys;
  s.substeps = j.value("substeps", sys.substeps);
  const SpectralState x = integrate_controlled(s, initial, control_from_json(text));
  ReplayCheck out;
  out.recorded_error = j.at("terminal_error").get<double>();
  out.replayed_error = (x.flat() - target.flat()).norm();
  out.identical = out.recorded_error == out.replayed_error;
  return out;
}

}  // namespace nsergo
