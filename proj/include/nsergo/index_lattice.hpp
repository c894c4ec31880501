#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace nsergo {

/// Integer wavenumber on the lattice Z^3.
struct ModeIndex {
  std::array<int, 3> k{};

  constexpr ModeIndex() = default;
  constexpr ModeIndex(int k1, int k2, int k3) : k{k1, k2, k3} {}

  constexpr int operator[](int i) const { return k[static_cast<std::size_t>(i)]; }

  constexpr bool is_zero() const { return k[0] == 0 && k[1] == 0 && k[2] == 0; }
  constexpr int norm_sq() const { return k[0] * k[0] + k[1] * k[1] + k[2] * k[2]; }
  constexpr int sup_norm() const {
    int m = 0;
    for (int c : k) m = std::max(m, c < 0 ? -c : c);
    return m;
  }
  Eigen::Vector3d vec() const { return {double(k[0]), double(k[1]), double(k[2])}; }

  friend constexpr ModeIndex operator+(const ModeIndex& a, const ModeIndex& b) {
    return {a.k[0] + b.k[0], a.k[1] + b.k[1], a.k[2] + b.k[2]};
  }
  friend constexpr ModeIndex operator-(const ModeIndex& a, const ModeIndex& b) {
    return {a.k[0] - b.k[0], a.k[1] - b.k[1], a.k[2] - b.k[2]};
  }
  friend constexpr ModeIndex operator-(const ModeIndex& a) { return {-a.k[0], -a.k[1], -a.k[2]}; }
  friend constexpr auto operator<=>(const ModeIndex&, const ModeIndex&) = default;
};

std::ostream& operator<<(std::ostream& os, const ModeIndex& k);
std::string to_string(const ModeIndex& k);

/// Integer dot product.
constexpr int dot(const ModeIndex& a, const ModeIndex& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

/// True when the two indices are parallel (integer cross product vanishes).
constexpr bool collinear(const ModeIndex& a, const ModeIndex& b) {
  return a[1] * b[2] - a[2] * b[1] == 0 && a[2] * b[0] - a[0] * b[2] == 0 &&
         a[0] * b[1] - a[1] * b[0] == 0;
}

/// Sign rule of the canonical half: k3 > 0, or k3 = 0 and k2 > 0, or k3 = k2 = 0 and k1 > 0.
constexpr bool in_canonical_half(const ModeIndex& k) {
  if (k[2] != 0) return k[2] > 0;
  if (k[1] != 0) return k[1] > 0;
  return k[0] > 0;
}

struct Canonical {
  ModeIndex rep;
  bool flipped = false;  // rep == -k
};

/// Representative of {k, -k} in the canonical half. Throws std::invalid_argument for k = 0.
Canonical canonicalize(const ModeIndex& k);

/// Position of a lattice index relative to the canonical storage: u_k = u[id] or conj(u[id]).
struct Slot {
  int id = -1;
  bool conjugate = false;
};

/// Orthonormal basis (columns) of the plane orthogonal to k.
///
/// Gram-Schmidt is applied to the standard basis vector with the smallest |k_j|
/// (lowest j on ties); the second vector completes a right-handed frame with k/|k|.
Eigen::Matrix<double, 3, 2> transverse_frame(const ModeIndex& k);

/// The sup-norm cut-off K_N together with its canonical half, in lexicographic order.
class Truncation {
 public:
  explicit Truncation(int cutoff);

  int cutoff() const { return cutoff_; }
  /// D = ((2N+1)^3 - 1) / 2.
  int size() const { return static_cast<int>(modes_.size()); }
  int full_size() const { return 2 * size(); }

  const std::vector<ModeIndex>& modes() const { return modes_; }
  const ModeIndex& mode(int id) const { return modes_[static_cast<std::size_t>(id)]; }
  const Eigen::Matrix<double, 3, 2>& frame(int id) const { return frames_[static_cast<std::size_t>(id)]; }

  /// Every member of K_N, lexicographically sorted.
  std::vector<ModeIndex> full_members() const;

  bool contains(const ModeIndex& k) const { return locate(k).has_value(); }
  std::optional<Slot> locate(const ModeIndex& k) const;
  /// Id of k when k itself lies in the canonical half (never for -k).
  std::optional<int> canonical_id(const ModeIndex& k) const;

 private:
  int table_offset(const ModeIndex& k) const;

  int cutoff_;
  std::vector<ModeIndex> modes_;
  std::vector<Eigen::Matrix<double, 3, 2>> frames_;
  std::vector<int> table_;  // 0: absent, +(id+1): canonical, -(id+1): conjugate of id
};

/// Throws std::invalid_argument for N < 1.
Truncation build_truncation(int N);

/// Subspace of the constant fields at one mode, in the coordinates
/// (r.e1, r.e2, s.e1, s.e2) of the mode's transverse frame.
struct ModeSubspace {
  ModeIndex k;
  Eigen::Matrix<double, 4, Eigen::Dynamic> basis = Eigen::Matrix<double, 4, Eigen::Dynamic>(4, 0);

  int dim() const { return static_cast<int>(basis.cols()); }
};

/// Adds `candidate` to an orthonormal basis if its residual exceeds
/// rel_tol * |candidate|. Candidates with norm <= abs_floor count as zero.
bool absorb(Eigen::Matrix<double, 4, Eigen::Dynamic>& basis, const Eigen::Vector4d& candidate,
            double rel_tol = 1e-9, double abs_floor = 1e-10);

/// gcd of all 3x3 minors of the (#indices x 3) coordinate matrix; 0 when all vanish.
std::int64_t minor_gcd(std::span<const ModeIndex> indices);

/// True iff the indices generate (Z^3, +).
bool is_generator_set(std::span<const ModeIndex> indices);

struct ClosureOptions {
  double growth_tolerance = 1e-9;
  double zero_floor = 1e-10;
  /// Shuffles the pair and candidate order of every sweep; the fixpoint must not depend on it.
  std::optional<std::uint64_t> shuffle_seed;
};

struct ClosureResult {
  int cutoff = 0;
  std::vector<ModeSubspace> subspaces;  // one per canonical mode, storage order
  bool is_determining = false;
  int generations = 0;

  std::vector<int> dims() const;
  int total_dim() const;
};

/// Canonicalizes a forced list and checks membership in K_N.
/// Throws std::invalid_argument naming every offending index.
std::vector<ModeIndex> canonical_forced_set(const Truncation& trunc, std::span<const ModeIndex> forced);

/// Fixpoint of double-bracket propagation starting from full subspaces on the forced modes.
ClosureResult determining_closure(std::span<const ModeIndex> forced, int N, const ClosureOptions& options = {});
ClosureResult determining_closure(const Truncation& trunc, std::span<const ModeIndex> forced,
                                  const ClosureOptions& options = {});

/// Per-mode {index, dim, basis} plus {is_determining, generations, rank}.
std::string closure_to_json(const ClosureResult& result);

}  // namespace nsergo
