#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "nsergo/index_lattice.hpp"

namespace nsergo {

/// Velocity coefficients u_k = r_k + i s_k on the canonical half.
///
/// Column j of `coeffs` holds (r_k, s_k) for mode id j; modes at -k are implied
/// by u_{-k} = conj(u_k). The flat view orders r^i_k at 6j+i and s^i_k at 6j+3+i.
template <typename Scalar>
struct SpectralStateT {
  using Coeffs = Eigen::Matrix<Scalar, 6, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Complex3 = Eigen::Matrix<std::complex<Scalar>, 3, 1>;

  Coeffs coeffs;

  SpectralStateT() : coeffs(6, 0) {}
  explicit SpectralStateT(Eigen::Index modes) : coeffs(Coeffs::Zero(6, modes)) {}

  static SpectralStateT zero(const Truncation& trunc) { return SpectralStateT(trunc.size()); }

  static SpectralStateT from_flat(const Eigen::Ref<const Vector>& x) {
    SpectralStateT out(x.size() / 6);
    Eigen::Map<Vector>(out.coeffs.data(), out.coeffs.size()) = x;
    return out;
  }

  Eigen::Index modes() const { return coeffs.cols(); }

  auto r(Eigen::Index j) { return coeffs.col(j).template head<3>(); }
  auto r(Eigen::Index j) const { return coeffs.col(j).template head<3>(); }
  auto s(Eigen::Index j) { return coeffs.col(j).template tail<3>(); }
  auto s(Eigen::Index j) const { return coeffs.col(j).template tail<3>(); }

  Complex3 u(Eigen::Index j) const {
    Complex3 out;
    for (int i = 0; i < 3; ++i) out(i) = {coeffs(i, j), coeffs(3 + i, j)};
    return out;
  }
  void set_u(Eigen::Index j, const Complex3& value) {
    coeffs.col(j).template head<3>() = value.real();
    coeffs.col(j).template tail<3>() = value.imag();
  }

  Eigen::Map<Vector> flat() { return {coeffs.data(), coeffs.size()}; }
  Eigen::Map<const Vector> flat() const { return {coeffs.data(), coeffs.size()}; }

  /// Kinetic energy V = sum over the canonical half of |r_k|^2 + |s_k|^2.
  Scalar energy() const { return coeffs.squaredNorm(); }

  bool all_finite() const { return coeffs.allFinite(); }
};

using SpectralState = SpectralStateT<double>;

/// Projection of v onto the plane orthogonal to k; works for real and complex vectors.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 1> project_divfree(const ModeIndex& k,
                                                              const Eigen::MatrixBase<Derived>& v) {
  using S = typename Derived::Scalar;
  using Real = typename Eigen::NumTraits<S>::Real;
  if (k.is_zero()) throw std::invalid_argument("project_divfree: k = 0");
  const Real k0 = Real(k[0]), k1 = Real(k[1]), k2 = Real(k[2]);
  const S along = (v(0) * k0 + v(1) * k1 + v(2) * k2) / Real(k.norm_sq());
  Eigen::Matrix<S, 3, 1> out = v;
  out(0) -= along * k0;
  out(1) -= along * k1;
  out(2) -= along * k2;
  return out;
}

/// Applies project_divfree to every r_k and s_k.
template <typename Scalar>
void project_state(const Truncation& trunc, SpectralStateT<Scalar>& state) {
  for (Eigen::Index j = 0; j < state.modes(); ++j) {
    const ModeIndex& k = trunc.mode(static_cast<int>(j));
    state.r(j) = project_divfree(k, state.r(j));
    state.s(j) = project_divfree(k, state.s(j));
  }
}

/// Projects v onto k-perp and rounds it to a grid on which k.v = 0 holds exactly,
/// in real arithmetic and in every evaluation order of the double-precision dot product.
/// The rounding moves v by at most ~1e-14 relative.
Eigen::Vector3d snap_divfree(const ModeIndex& k, const Eigen::Vector3d& v);

/// snap_divfree on every r_k and s_k.
void snap_state(const Truncation& trunc, SpectralState& state);

/// max_k (|k.r_k| + |k.s_k|) / (|k| (|r_k| + |s_k|)), zero modes skipped.
double divergence_residual(const Truncation& trunc, const SpectralState& state);

/// max_k |k.r_k| + |k.s_k| (unnormalized).
double divergence_defect(const Truncation& trunc, const SpectralState& state);

/// Gaussian coefficients, projected, rescaled to the requested energy.
SpectralState random_state(const Truncation& trunc, double energy, std::uint64_t seed);

void write_state_csv(std::ostream& os, const Truncation& trunc, const SpectralState& state);
SpectralState read_state_csv(std::istream& is, const Truncation& trunc);

std::string state_to_json(const Truncation& trunc, const SpectralState& state);
SpectralState state_from_json(const std::string& text, const Truncation& trunc);

}  // namespace nsergo
