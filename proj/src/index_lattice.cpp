#include "nsergo/index_lattice.hpp"

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/Geometry>

namespace nsergo {

std::ostream& operator<<(std::ostream& os, const ModeIndex& k) {
  return os << '(' << k[0] << ',' << k[1] << ',' << k[2] << ')';
}

std::string to_string(const ModeIndex& k) {
  std::ostringstream os;
  os << k;
  return os.str();
}

Canonical canonicalize(const ModeIndex& k) {
  if (k.is_zero()) throw std::invalid_argument("canonicalize: the zero index has no representative");
  if (in_canonical_half(k)) return {k, false};
  return {-k, true};
}

Eigen::Matrix<double, 3, 2> transverse_frame(const ModeIndex& k) {
  if (k.is_zero()) throw std::invalid_argument("transverse_frame: k = 0");
  int pivot = 0;
  for (int j = 1; j < 3; ++j) {
    if (std::abs(k[j]) < std::abs(k[pivot])) pivot = j;
  }
  const Eigen::Vector3d kv = k.vec();
  const Eigen::Vector3d khat = kv.normalized();
  Eigen::Vector3d e1 = Eigen::Vector3d::Unit(pivot);
  e1 -= khat.dot(e1) * khat;
  e1.normalize();
  Eigen::Matrix<double, 3, 2> frame;
  frame.col(0) = e1;
  frame.col(1) = khat.cross(e1);
  return frame;
}

Truncation::Truncation(int cutoff) : cutoff_(cutoff) {
  if (cutoff < 1) throw std::invalid_argument("truncation cut-off N must be >= 1, got " + std::to_string(cutoff));
  const int side = 2 * cutoff + 1;
  table_.assign(static_cast<std::size_t>(side) * side * side, 0);
  // Lexicographic order on (k1, k2, k3) falls out of the loop nesting.
  for (int a = -cutoff; a <= cutoff; ++a)
    for (int b = -cutoff; b <= cutoff; ++b)
      for (int c = -cutoff; c <= cutoff; ++c) {
        const ModeIndex k{a, b, c};
        if (!k.is_zero() && in_canonical_half(k)) modes_.push_back(k);
      }
  frames_.reserve(modes_.size());
  for (std::size_t id = 0; id < modes_.size(); ++id) {
    const ModeIndex& k = modes_[id];
    table_[static_cast<std::size_t>(table_offset(k))] = static_cast<int>(id) + 1;
    table_[static_cast<std::size_t>(table_offset(-k))] = -(static_cast<int>(id) + 1);
    frames_.push_back(transverse_frame(k));
  }
}

int Truncation::table_offset(const ModeIndex& k) const {
  const int side = 2 * cutoff_ + 1;
  return ((k[0] + cutoff_) * side + (k[1] + cutoff_)) * side + (k[2] + cutoff_);
}

std::optional<Slot> Truncation::locate(const ModeIndex& k) const {
  if (k.sup_norm() > cutoff_ || k.is_zero()) return std::nullopt;
  const int code = table_[static_cast<std::size_t>(table_offset(k))];
  if (code > 0) return Slot{code - 1, false};
  return Slot{-code - 1, true};
}

std::optional<int> Truncation::canonical_id(const ModeIndex& k) const {
  auto slot = locate(k);
  if (!slot || slot->conjugate) return std::nullopt;
  return slot->id;
}

std::vector<ModeIndex> Truncation::full_members() const {
  std::vector<ModeIndex> all;
  all.reserve(modes_.size() * 2);
  for (const auto& k : modes_) {
    all.push_back(k);
    all.push_back(-k);
  }
  std::sort(all.begin(), all.end());
  return all;
}

Truncation build_truncation(int N) { return Truncation(N); }

bool absorb(Eigen::Matrix<double, 4, Eigen::Dynamic>& basis, const Eigen::Vector4d& candidate, double rel_tol,
            double abs_floor) {
  const double norm = candidate.norm();
  if (!(norm > abs_floor) || basis.cols() >= 4) return false;
  // Two passes of modified Gram-Schmidt keep the basis orthonormal to roundoff.
  Eigen::Vector4d residual = candidate;
  for (int pass = 0; pass < 2; ++pass)
    for (Eigen::Index j = 0; j < basis.cols(); ++j) residual -= basis.col(j).dot(residual) * basis.col(j);
  const double rnorm = residual.norm();
  if (rnorm <= rel_tol * norm) return false;
  basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
  basis.col(basis.cols() - 1) = residual / rnorm;
  return true;
}

namespace {

std::int64_t det3(const ModeIndex& a, const ModeIndex& b, const ModeIndex& c) {
  const std::int64_t a0 = a[0], a1 = a[1], a2 = a[2];
  return a0 * (std::int64_t{b[1]} * c[2] - std::int64_t{b[2]} * c[1]) -
         a1 * (std::int64_t{b[0]} * c[2] - std::int64_t{b[2]} * c[0]) +
         a2 * (std::int64_t{b[0]} * c[1] - std::int64_t{b[1]} * c[0]);
}

}  // namespace

std::int64_t minor_gcd(std::span<const ModeIndex> indices) {
  std::int64_t g = 0;
  const std::size_t n = indices.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t l = j + 1; l < n; ++l) {
        g = std::gcd(g, det3(indices[i], indices[j], indices[l]));
        if (g == 1) return 1;
      }
  return g;
}

bool is_generator_set(std::span<const ModeIndex> indices) {
  if (indices.empty()) throw std::invalid_argument("is_generator_set: empty index set");
  return minor_gcd(indices) == 1;
}

std::vector<int> ClosureResult::dims() const {
  std::vector<int> out;
  out.reserve(subspaces.size());
  for (const auto& s : subspaces) out.push_back(s.dim());
  return out;
}

int ClosureResult::total_dim() const {
  int total = 0;
  for (const auto& s : subspaces) total += s.dim();
  return total;
}

std::vector<ModeIndex> canonical_forced_set(const Truncation& trunc, std::span<const ModeIndex> forced) {
  std::vector<ModeIndex> out;
  std::string bad;
  for (const auto& k : forced) {
    if (k.is_zero() || !trunc.contains(k)) {
      bad += (bad.empty() ? "" : " ") + to_string(k);
      continue;
    }
    out.push_back(canonicalize(k).rep);
  }
  if (!bad.empty())
    throw std::invalid_argument("forced indices outside K_N for N=" + std::to_string(trunc.cutoff()) + ": " + bad);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace nsergo
