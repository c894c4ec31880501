#pragma once

#include <map>
#include <string>

#include <Eigen/Core>

#include "nsergo/galerkin_drift.hpp"
#include "nsergo/index_lattice.hpp"
#include "nsergo/spectral_state.hpp"

namespace nsergo {

using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Constant vector field: mode id -> (coefficients of d/dr_k, coefficients of d/ds_k).
struct TangentField {
  std::map<int, Vector6d> terms;

  static TangentField single(int id, const Eigen::Vector3d& vr, const Eigen::Vector3d& vs);
  /// Field at one mode from (r.e1, r.e2, s.e1, s.e2) coordinates of its transverse frame.
  static TangentField from_frame(const Truncation& trunc, int id, const Eigen::Vector4d& coords);
  static TangentField from_dense(const Eigen::Ref<const Eigen::VectorXd>& x);

  std::size_t support_size() const { return terms.size(); }
  void add(int id, const Vector6d& v);
  Eigen::VectorXd to_dense(int modes) const;
  double max_abs() const;

  TangentField& operator+=(const TangentField& other);
  friend TangentField operator+(TangentField a, const TangentField& b) { return a += b; }
  friend TangentField operator*(double a, TangentField f) {
    for (auto& [id, v] : f.terms) v *= a;
    return f;
  }
};

double max_abs_difference(const TangentField& a, const TangentField& b);

/// max_k (|k.v^r_k| + |k.v^s_k|) over the support.
double divergence_defect(const Truncation& trunc, const TangentField& field);

/// Frame coordinates of a single-mode coefficient pair.
Eigen::Vector4d frame_coords(const Truncation& trunc, int id, const Vector6d& v);

/// Closed form of [[F0, V], W] for V, W supported on single canonical modes m, n.
///
/// Targets are m + n, n - m and m - n; only those inside the canonical half
/// contribute. Throws std::invalid_argument for composite inputs.
TangentField double_bracket(const Truncation& trunc, const TangentField& V, const TangentField& W);

/// Bilinear extension of double_bracket over composite supports.
TangentField double_bracket_bilinear(const Truncation& trunc, const TangentField& V, const TangentField& W);

/// [[F0, V], W] as the exact second difference F(x+V+W) - F(x+V) - F(x+W) + F(x)
/// of the drift; exact up to roundoff because the drift is quadratic.
TangentField double_bracket_oracle(const GalerkinDrift& drift, const TangentField& V, const TangentField& W,
                                   const SpectralState& base, double nu);
TangentField double_bracket_oracle(const GalerkinDrift& drift, const TangentField& V, const TangentField& W);

/// Span of double brackets over the tensor basis of two source subspaces, per target mode.
std::map<int, ModeSubspace> bracket_span(const Truncation& trunc, int m, int n, const ModeSubspace& source_m,
                                         const ModeSubspace& source_n, double rel_tol = 1e-9,
                                         double abs_floor = 1e-10);

/// Dense Jacobian DF(x) of the real drift, rows/columns in the flat state layout.
Eigen::MatrixXd drift_jacobian(const Truncation& trunc, const SpectralState& x, double nu);

/// Single bracket [F0, V] evaluated at x; equals DF(x) V for constant V.
TangentField single_bracket(const Truncation& trunc, const SpectralState& x, double nu, const TangentField& V);

std::string tangent_to_json(const Truncation& trunc, const TangentField& field);

}  // namespace nsergo
