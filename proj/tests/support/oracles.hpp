#pragma once

// Independent reference computations for the tests. Nothing here calls into the
// library's drift or bracket code; only storage order (Truncation::mode) is shared.

#include <array>
#include <complex>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <vector>

#include <Eigen/Core>

#include "nsergo/index_lattice.hpp"
#include "nsergo/spectral_state.hpp"

namespace oracle {

using Index3 = std::array<int, 3>;
using CVec = std::array<std::complex<double>, 3>;
using Field = std::map<Index3, CVec>;

inline std::vector<Index3> lattice(int N) {
  std::vector<Index3> out;
  for (int a = -N; a <= N; ++a)
    for (int b = -N; b <= N; ++b)
      for (int c = -N; c <= N; ++c)
        if (a || b || c) out.push_back({a, b, c});
  return out;
}

inline bool upper_half(const Index3& k) {
  if (k[2] != 0) return k[2] > 0;
  if (k[1] != 0) return k[1] > 0;
  return k[0] > 0;
}

/// Full field on K_N, filling -k by conjugation.
inline Field expand(const nsergo::Truncation& trunc, const nsergo::SpectralState& x) {
  Field f;
  for (int j = 0; j < trunc.size(); ++j) {
    const auto& k = trunc.mode(j);
    CVec u, uc;
    for (int i = 0; i < 3; ++i) {
      u[i] = {x.coeffs(i, j), x.coeffs(3 + i, j)};
      uc[i] = std::conj(u[i]);
    }
    f[{k[0], k[1], k[2]}] = u;
    f[{-k[0], -k[1], -k[2]}] = uc;
  }
  return f;
}

inline CVec leray(const Index3& k, const CVec& v) {
  const double kk = double(k[0]) * k[0] + double(k[1]) * k[1] + double(k[2]) * k[2];
  std::complex<double> along = 0;
  for (int i = 0; i < 3; ++i) along += double(k[i]) * v[i];
  CVec out;
  for (int i = 0; i < 3; ++i) out[i] = v[i] - along * double(k[i]) / kk;
  return out;
}

/// E_k = sum over h, l in K_N with h + l = k of (k . u_h) P_k u_l, for every k in K_N.
inline Field convolution(int N, const Field& u) {
  Field out;
  const auto members = lattice(N);
  for (const auto& k : members) {
    CVec acc{};
    for (const auto& h : members) {
      const Index3 l{k[0] - h[0], k[1] - h[1], k[2] - h[2]};
      auto it = u.find(l);
      if (it == u.end()) continue;
      const CVec& uh = u.at(h);
      std::complex<double> kd = 0;
      for (int i = 0; i < 3; ++i) kd += double(k[i]) * uh[i];
      const CVec pl = leray(k, it->second);
      for (int i = 0; i < 3; ++i) acc[i] += kd * pl[i];
    }
    out[k] = acc;
  }
  return out;
}

/// Real drift (F_r, F_s) from the naive complex convolution: F = -nu|k|^2 u - i E.
inline nsergo::SpectralState drift(const nsergo::Truncation& trunc, const nsergo::SpectralState& x, double nu) {
  const Field e = convolution(trunc.cutoff(), expand(trunc, x));
  nsergo::SpectralState out = nsergo::SpectralState::zero(trunc);
  for (int j = 0; j < trunc.size(); ++j) {
    const auto& k = trunc.mode(j);
    const CVec& ek = e.at({k[0], k[1], k[2]});
    const double kk = double(k.norm_sq());
    for (int i = 0; i < 3; ++i) {
      const std::complex<double> f = -nu * kk * std::complex<double>(x.coeffs(i, j), x.coeffs(3 + i, j)) -
                                     std::complex<double>(0, 1) * ek[i];
      out.coeffs(i, j) = f.real();
      out.coeffs(3 + i, j) = f.imag();
    }
  }
  return out;
}

/// Central-difference Jacobian of a map on flat vectors.
template <typename F>
Eigen::MatrixXd fd_jacobian(F&& f, const Eigen::VectorXd& x, double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    Eigen::VectorXd xp = x, xm = x;
    xp(c) += h;
    xm(c) -= h;
    J.col(c) = (f(xp) - f(xm)) / (2 * h);
  }
  return J;
}

/// Does the integer span of `v` contain e1, e2, e3 with every coefficient in [-box, box]?
/// Meet in the middle: sums over the first half go in a set, the second half looks up the rest.
inline bool spans_unit_vectors(const std::vector<Index3>& v, int box = 10) {
  const std::size_t n = v.size();
  const std::size_t half = n / 2;
  const auto sums = [&](std::size_t lo, std::size_t hi) {
    std::set<Index3> out{{0, 0, 0}};
    for (std::size_t j = lo; j < hi; ++j) {
      std::set<Index3> next;
      for (const auto& s : out)
        for (int c = -box; c <= box; ++c) next.insert({s[0] + c * v[j][0], s[1] + c * v[j][1], s[2] + c * v[j][2]});
      out.swap(next);
    }
    return out;
  };
  const auto left = sums(0, half);
  const auto right = sums(half, n);
  for (int axis = 0; axis < 3; ++axis) {
    Index3 e{0, 0, 0};
    e[axis] = 1;
    bool found = false;
    for (const auto& r : right) {
      if (left.count({e[0] - r[0], e[1] - r[1], e[2] - r[2]})) {
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  return true;
}

inline nsergo::ModeIndex random_index(std::mt19937_64& rng, int N) {
  std::uniform_int_distribution<int> d(-N, N);
  for (;;) {
    nsergo::ModeIndex k{d(rng), d(rng), d(rng)};
    if (!k.is_zero()) return k;
  }
}

inline Eigen::Vector3d gaussian3(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  return {g(rng), g(rng), g(rng)};
}

}  // namespace oracle
