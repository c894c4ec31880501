#include "nsergo/galerkin_drift.hpp"

namespace nsergo {

GalerkinDrift::GalerkinDrift(Truncation trunc) : trunc_(std::move(trunc)) {
  const auto members = trunc_.full_members();
  offsets_.reserve(static_cast<std::size_t>(trunc_.size()) + 1);
  offsets_.push_back(0);
  for (int kid = 0; kid < trunc_.size(); ++kid) {
    const ModeIndex& k = trunc_.mode(kid);
    for (const ModeIndex& h : members) {
      const auto l = trunc_.locate(k - h);
      if (!l) continue;
      triads_.push_back({*trunc_.locate(h), *l});
    }
    offsets_.push_back(static_cast<int>(triads_.size()));
  }
}

std::complex<double> energy_transfer(const Truncation& trunc, const SpectralState& x) {
  std::complex<double> total = 0.0;
  for (const ModeIndex& k : trunc.full_members()) {
    const Slot slot = *trunc.locate(k);
    Eigen::Vector3cd u = x.u(slot.id);
    if (slot.conjugate) u = u.conjugate();
    const Eigen::Vector3cd e = convolution_at(trunc, x, k);
    total += (u.conjugate().array() * e.array()).sum();
  }
  return total;
}

double real_energy_transfer(const Truncation& trunc, const SpectralState& x) {
  const SpectralState q = eval_drift_real(trunc, x, 0.0);
  return x.flat().dot(q.flat());
}

}  // namespace nsergo
