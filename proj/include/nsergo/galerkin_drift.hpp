#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "nsergo/index_lattice.hpp"
#include "nsergo/spectral_state.hpp"

namespace nsergo {

template <typename Scalar>
using ComplexField = Eigen::Matrix<std::complex<Scalar>, 3, Eigen::Dynamic>;

/// Truncated drift with its two parts kept apart: the viscous term -nu|k|^2 u_k and
/// the convolution E_k = sum_{h+l=k} (k.u_h) P_k u_l. The full drift is linear - i E.
template <typename Scalar>
struct DriftEvaluation {
  ComplexField<Scalar> linear;
  ComplexField<Scalar> convolution;

  ComplexField<Scalar> quadratic() const { return std::complex<Scalar>(0, -1) * convolution; }
  ComplexField<Scalar> total() const { return linear + quadratic(); }

  /// Real form (F_r, F_s) in the state layout.
  SpectralStateT<Scalar> as_real() const {
    const ComplexField<Scalar> t = total();
    SpectralStateT<Scalar> out(t.cols());
    out.coeffs.template topRows<3>() = t.real();
    out.coeffs.template bottomRows<3>() = t.imag();
    return out;
  }
};

/// A pair (h, l) of members of K_N with h + l = k, resolved to storage slots.
struct Triad {
  Slot h;
  Slot l;
};

/// Drift evaluator for one truncation.
///
/// The triad table caches, for each canonical k, every pair h, l in K_N with h + l = k.
class GalerkinDrift {
 public:
  explicit GalerkinDrift(Truncation trunc);

  const Truncation& truncation() const { return trunc_; }
  std::span<const Triad> triads(int k_id) const {
    const auto b = static_cast<std::size_t>(offsets_[static_cast<std::size_t>(k_id)]);
    const auto e = static_cast<std::size_t>(offsets_[static_cast<std::size_t>(k_id) + 1]);
    return {triads_.data() + b, e - b};
  }

  /// Convolution over K_N via the triad table, returned as (P_k Re, P_k Im) accumulators.
  template <typename Scalar>
  void convolution_parts(const SpectralStateT<Scalar>& x, Eigen::Matrix<Scalar, 3, Eigen::Dynamic>& re,
                         Eigen::Matrix<Scalar, 3, Eigen::Dynamic>& im) const;

  template <typename Scalar>
  ComplexField<Scalar> convolution(const SpectralStateT<Scalar>& x) const;

  template <typename Scalar>
  DriftEvaluation<Scalar> evaluate(const SpectralStateT<Scalar>& x, Scalar nu) const;

  /// Real quadratic drift (E_r, E_s) in the state layout.
  template <typename Scalar>
  void quadratic_into(const SpectralStateT<Scalar>& x, SpectralStateT<Scalar>& out) const;

  /// Full real drift F(x) = -nu|k|^2 x + quadratic(x).
  template <typename Scalar>
  void drift_into(const SpectralStateT<Scalar>& x, Scalar nu, SpectralStateT<Scalar>& out) const;

 private:
  Truncation trunc_;
  std::vector<Triad> triads_;
  std::vector<int> offsets_;
};

/// Convolution E_k for any k in K_N, summed directly over h in K_N with k - h in K_N.
template <typename Scalar>
Eigen::Matrix<std::complex<Scalar>, 3, 1> convolution_at(const Truncation& trunc, const SpectralStateT<Scalar>& x,
                                                         const ModeIndex& k);

/// Complex form of the drift.
template <typename Scalar>
DriftEvaluation<Scalar> eval_drift(const Truncation& trunc, const SpectralStateT<Scalar>& x, Scalar nu) {
  return GalerkinDrift(trunc).evaluate(x, nu);
}

/// Real form (F_r, F_s) assembled from the three restricted sums over the canonical half:
/// h + l = k, h - l = k and l - h = k.
template <typename Scalar>
SpectralStateT<Scalar> eval_drift_real(const Truncation& trunc, const SpectralStateT<Scalar>& x, Scalar nu);

/// sum over every k in K_N of conj(u_k) . E_k, each E_k summed directly.
std::complex<double> energy_transfer(const Truncation& trunc, const SpectralState& x);

/// sum over the canonical half of r_k . E_{r_k} + s_k . E_{s_k} using the real quadratic drift.
double real_energy_transfer(const Truncation& trunc, const SpectralState& x);

// ---------------------------------------------------------------------------
// Implementation

namespace detail {

template <typename Scalar>
inline void load_slot(const SpectralStateT<Scalar>& x, const Slot& slot, Eigen::Matrix<Scalar, 3, 1>& re,
                      Eigen::Matrix<Scalar, 3, 1>& im) {
  re = x.r(slot.id);
  im = x.s(slot.id);
  if (slot.conjugate) im = -im;
}

}  // namespace detail

template <typename Scalar>
void GalerkinDrift::convolution_parts(const SpectralStateT<Scalar>& x, Eigen::Matrix<Scalar, 3, Eigen::Dynamic>& re,
                                      Eigen::Matrix<Scalar, 3, Eigen::Dynamic>& im) const {
  const int D = trunc_.size();
  re.resize(3, D);
  im.resize(3, D);
  Eigen::Matrix<Scalar, 3, 1> hr, hi, lr, li;
  for (int kid = 0; kid < D; ++kid) {
    const ModeIndex& k = trunc_.mode(kid);
    const Scalar k0 = Scalar(k[0]), k1 = Scalar(k[1]), k2 = Scalar(k[2]);
    Eigen::Matrix<Scalar, 3, 1> acc_re = Eigen::Matrix<Scalar, 3, 1>::Zero();
    Eigen::Matrix<Scalar, 3, 1> acc_im = Eigen::Matrix<Scalar, 3, 1>::Zero();
    for (const Triad& t : triads(kid)) {
      detail::load_slot(x, t.h, hr, hi);
      detail::load_slot(x, t.l, lr, li);
      // (a + ib) = k . u_h
      const Scalar a = k0 * hr(0) + k1 * hr(1) + k2 * hr(2);
      const Scalar b = k0 * hi(0) + k1 * hi(1) + k2 * hi(2);
      acc_re += a * lr - b * li;
      acc_im += b * lr + a * li;
    }
    re.col(kid) = project_divfree(k, acc_re);
    im.col(kid) = project_divfree(k, acc_im);
  }
}

template <typename Scalar>
ComplexField<Scalar> GalerkinDrift::convolution(const SpectralStateT<Scalar>& x) const {
  Eigen::Matrix<Scalar, 3, Eigen::Dynamic> re, im;
  convolution_parts(x, re, im);
  ComplexField<Scalar> out(3, re.cols());
  out.real() = re;
  out.imag() = im;
  return out;
}

template <typename Scalar>
DriftEvaluation<Scalar> GalerkinDrift::evaluate(const SpectralStateT<Scalar>& x, Scalar nu) const {
  DriftEvaluation<Scalar> out;
  const int D = trunc_.size();
  out.linear.resize(3, D);
  for (int j = 0; j < D; ++j) out.linear.col(j) = -nu * Scalar(trunc_.mode(j).norm_sq()) * x.u(j);
  out.convolution = convolution(x);
  return out;
}

template <typename Scalar>
void GalerkinDrift::quadratic_into(const SpectralStateT<Scalar>& x, SpectralStateT<Scalar>& out) const {
  Eigen::Matrix<Scalar, 3, Eigen::Dynamic> re, im;
  convolution_parts(x, re, im);
  out.coeffs.resize(6, re.cols());
  // -i (re + i im) = im - i re
  out.coeffs.template topRows<3>() = im;
  out.coeffs.template bottomRows<3>() = -re;
}

template <typename Scalar>
void GalerkinDrift::drift_into(const SpectralStateT<Scalar>& x, Scalar nu, SpectralStateT<Scalar>& out) const {
  quadratic_into(x, out);
  for (int j = 0; j < trunc_.size(); ++j)
    out.coeffs.col(j) -= nu * Scalar(trunc_.mode(j).norm_sq()) * x.coeffs.col(j);
}

template <typename Scalar>
Eigen::Matrix<std::complex<Scalar>, 3, 1> convolution_at(const Truncation& trunc, const SpectralStateT<Scalar>& x,
                                                         const ModeIndex& k) {
  using C = std::complex<Scalar>;
  const auto u_at = [&](const Slot& s) {
    Eigen::Matrix<C, 3, 1> u = x.u(s.id);
    return s.conjugate ? Eigen::Matrix<C, 3, 1>(u.conjugate()) : u;
  };
  const Eigen::Matrix<C, 3, 1> kc = k.vec().cast<Scalar>().template cast<C>();
  Eigen::Matrix<C, 3, 1> acc = Eigen::Matrix<C, 3, 1>::Zero();
  for (const ModeIndex& h : trunc.full_members()) {
    const auto hs = trunc.locate(h);
    const auto ls = trunc.locate(k - h);
    if (!ls) continue;
    const Eigen::Matrix<C, 3, 1> uh = u_at(*hs);
    const Eigen::Matrix<C, 3, 1> ul = u_at(*ls);
    const C kdotuh = kc(0) * uh(0) + kc(1) * uh(1) + kc(2) * uh(2);
    acc += kdotuh * project_divfree(k, ul);
  }
  return acc;
}

template <typename Scalar>
SpectralStateT<Scalar> eval_drift_real(const Truncation& trunc, const SpectralStateT<Scalar>& x, Scalar nu) {
  using V3 = Eigen::Matrix<Scalar, 3, 1>;
  const int D = trunc.size();
  SpectralStateT<Scalar> out(D);
  for (int kid = 0; kid < D; ++kid) {
    const ModeIndex& k = trunc.mode(kid);
    const V3 kv = k.vec().cast<Scalar>();
    V3 fr = V3::Zero(), fs = V3::Zero();
    for (int hid = 0; hid < D; ++hid) {
      const ModeIndex& h = trunc.mode(hid);
      const Scalar kr = kv.dot(x.r(hid));
      const Scalar ks = kv.dot(x.s(hid));
      if (auto l = trunc.canonical_id(k - h)) {  // h + l = k
        fr += kr * x.s(*l) + ks * x.r(*l);
        fs -= kr * x.r(*l) - ks * x.s(*l);
      }
      if (auto l = trunc.canonical_id(h - k)) {  // h - l = k
        fr -= kr * x.s(*l) - ks * x.r(*l);
        fs -= kr * x.r(*l) + ks * x.s(*l);
      }
      if (auto l = trunc.canonical_id(k + h)) {  // l - h = k
        fr += kr * x.s(*l) - ks * x.r(*l);
        fs -= kr * x.r(*l) + ks * x.s(*l);
      }
    }
    const Scalar visc = nu * Scalar(k.norm_sq());
    out.r(kid) = project_divfree(k, fr) - visc * x.r(kid);
    out.s(kid) = project_divfree(k, fs) - visc * x.s(kid);
  }
  return out;
}

}  // namespace nsergo
