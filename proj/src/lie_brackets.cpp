#include "nsergo/lie_brackets.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace nsergo {

TangentField TangentField::single(int id, const Eigen::Vector3d& vr, const Eigen::Vector3d& vs) {
  TangentField f;
  Vector6d v;
  v << vr, vs;
  f.terms.emplace(id, v);
  return f;
}

TangentField TangentField::from_frame(const Truncation& trunc, int id, const Eigen::Vector4d& coords) {
  const auto& e = trunc.frame(id);
  return single(id, e * coords.head<2>(), e * coords.tail<2>());
}

TangentField TangentField::from_dense(const Eigen::Ref<const Eigen::VectorXd>& x) {
  TangentField f;
  for (Eigen::Index j = 0; j < x.size() / 6; ++j) {
    const Vector6d v = x.segment<6>(6 * j);
    if (!v.isZero(0.0)) f.terms.emplace(static_cast<int>(j), v);
  }
  return f;
}

void TangentField::add(int id, const Vector6d& v) {
  auto [it, inserted] = terms.emplace(id, v);
  if (!inserted) it->second += v;
}

Eigen::VectorXd TangentField::to_dense(int modes) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(6 * modes);
  for (const auto& [id, v] : terms) x.segment<6>(6 * id) = v;
  return x;
}

double TangentField::max_abs() const {
  double m = 0.0;
  for (const auto& [id, v] : terms) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

TangentField& TangentField::operator+=(const TangentField& other) {
  for (const auto& [id, v] : other.terms) add(id, v);
  return *this;
}

double max_abs_difference(const TangentField& a, const TangentField& b) {
  double m = 0.0;
  for (const auto& [id, v] : a.terms) {
    auto it = b.terms.find(id);
    const Vector6d d = it == b.terms.end() ? v : Vector6d(v - it->second);
    m = std::max(m, d.cwiseAbs().maxCoeff());
  }
  for (const auto& [id, v] : b.terms)
    if (!a.terms.count(id)) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

double divergence_defect(const Truncation& trunc, const TangentField& field) {
  double worst = 0.0;
  for (const auto& [id, v] : field.terms) {
    const Eigen::Vector3d k = trunc.mode(id).vec();
    worst = std::max(worst, std::abs(k.dot(v.head<3>())) + std::abs(k.dot(v.tail<3>())));
  }
  return worst;
}

Eigen::Vector4d frame_coords(const Truncation& trunc, int id, const Vector6d& v) {
  const auto& e = trunc.frame(id);
  Eigen::Vector4d c;
  c << e.transpose() * v.head<3>(), e.transpose() * v.tail<3>();
  return c;
}

namespace {

// (a.t) P_t(b) + (b.t) P_t(a)
Eigen::Vector3d sym(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const ModeIndex& t) {
  const Eigen::Vector3d tv = t.vec();
  return a.dot(tv) * project_divfree(t, b) + b.dot(tv) * project_divfree(t, a);
}

const std::pair<const int, Vector6d>& sole_term(const TangentField& f, const char* name) {
  if (f.terms.size() != 1)
    throw std::invalid_argument(std::string("double_bracket: ") + name +
                                " must be supported on exactly one mode; expand composites bilinearly");
  return *f.terms.begin();
}

}  // namespace

TangentField double_bracket(const Truncation& trunc, const TangentField& V, const TangentField& W) {
  const auto& [m_id, v] = sole_term(V, "V");
  const auto& [n_id, w] = sole_term(W, "W");
  const ModeIndex& m = trunc.mode(m_id);
  const ModeIndex& n = trunc.mode(n_id);
  const Eigen::Vector3d vr = v.head<3>(), vs = v.tail<3>();
  const Eigen::Vector3d wr = w.head<3>(), ws = w.tail<3>();

  TangentField out;
  Vector6d row;
  const ModeIndex k = m + n;
  if (auto id = trunc.canonical_id(k)) {
    row << sym(vr, ws, k) + sym(vs, wr, k), sym(vs, ws, k) - sym(vr, wr, k);
    out.add(*id, row);
  }
  const ModeIndex h = n - m;
  if (auto id = trunc.canonical_id(h)) {
    row << sym(vr, ws, h) - sym(vs, wr, h), -(sym(vr, wr, h) + sym(vs, ws, h));
    out.add(*id, row);
  }
  const ModeIndex g = m - n;
  if (auto id = trunc.canonical_id(g)) {
    row << sym(vs, wr, g) - sym(vr, ws, g), -(sym(vr, wr, g) + sym(vs, ws, g));
    out.add(*id, row);
  }
  return out;
}

TangentField double_bracket_bilinear(const Truncation& trunc, const TangentField& V, const TangentField& W) {
  TangentField out;
  for (const auto& [m, v] : V.terms)
    for (const auto& [n, w] : W.terms) {
      TangentField a;
      a.terms.emplace(m, v);
      TangentField b;
      b.terms.emplace(n, w);
      out += double_bracket(trunc, a, b);
    }
  return out;
}

TangentField double_bracket_oracle(const GalerkinDrift& drift, const TangentField& V, const TangentField& W,
                                   const SpectralState& base, double nu) {
  const int D = drift.truncation().size();
  const Eigen::VectorXd v = V.to_dense(D);
  const Eigen::VectorXd w = W.to_dense(D);
  const auto F = [&](const Eigen::VectorXd& x) {
    SpectralState out;
    drift.drift_into(SpectralState::from_flat(x), nu, out);
    return Eigen::VectorXd(out.flat());
  };
  const Eigen::VectorXd x = base.flat();
  const Eigen::VectorXd second = (F(x + v + w) - F(x + v)) - (F(x + w) - F(x));
  return TangentField::from_dense(second);
}

TangentField double_bracket_oracle(const GalerkinDrift& drift, const TangentField& V, const TangentField& W) {
  return double_bracket_oracle(drift, V, W, SpectralState::zero(drift.truncation()), 0.0);
}

std::map<int, ModeSubspace> bracket_span(const Truncation& trunc, int m, int n, const ModeSubspace& source_m,
                                         const ModeSubspace& source_n, double rel_tol, double abs_floor) {
  std::map<int, ModeSubspace> out;
  for (int a = 0; a < source_m.dim(); ++a) {
    const TangentField V = TangentField::from_frame(trunc, m, source_m.basis.col(a));
    for (int b = 0; b < source_n.dim(); ++b) {
      const TangentField W = TangentField::from_frame(trunc, n, source_n.basis.col(b));
      for (const auto& [id, v] : double_bracket(trunc, V, W).terms) {
        auto [it, inserted] = out.try_emplace(id);
        if (inserted) it->second.k = trunc.mode(id);
        absorb(it->second.basis, frame_coords(trunc, id, v), rel_tol, abs_floor);
      }
    }
  }
  return out;
}

Eigen::MatrixXd drift_jacobian(const Truncation& trunc, const SpectralState& x, double nu) {
  const int D = trunc.size();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(6 * D, 6 * D);
  const auto r_at = [&](const ModeIndex& q) -> Eigen::Vector3d {
    auto id = trunc.canonical_id(q);
    return id ? Eigen::Vector3d(x.r(*id)) : Eigen::Vector3d::Zero();
  };
  const auto s_at = [&](const ModeIndex& q) -> Eigen::Vector3d {
    auto id = trunc.canonical_id(q);
    return id ? Eigen::Vector3d(x.s(*id)) : Eigen::Vector3d::Zero();
  };
  for (int kid = 0; kid < D; ++kid) {
    const ModeIndex& k = trunc.mode(kid);
    const Eigen::Vector3d kv = k.vec();
    // delta_ij - 2 k_i k_j / |k|^2
    const Eigen::Matrix3d reflect = Eigen::Matrix3d::Identity() - 2.0 * kv * kv.transpose() / double(k.norm_sq());
    const auto block = [&](const Eigen::Vector3d& c) -> Eigen::Matrix3d {
      return c * kv.transpose() + kv.dot(c) * reflect;
    };
    for (int mid = 0; mid < D; ++mid) {
      const ModeIndex& m = trunc.mode(mid);
      const ModeIndex a = k - m, b = m - k, c = m + k;
      const Eigen::Vector3d ra = r_at(a), rb = r_at(b), rc = r_at(c);
      const Eigen::Vector3d sa = s_at(a), sb = s_at(b), sc = s_at(c);
      Eigen::Matrix3d rr = block(sa - sb + sc);
      Eigen::Matrix3d rs = block(ra + rb - rc);
      Eigen::Matrix3d sr = -block(ra + rb + rc);
      Eigen::Matrix3d ss = block(sa - sb - sc);
      if (kid == mid) {
        const double visc = nu * double(k.norm_sq());
        rr.diagonal().array() -= visc;
        ss.diagonal().array() -= visc;
      }
      J.block<3, 3>(6 * kid, 6 * mid) = rr;
      J.block<3, 3>(6 * kid, 6 * mid + 3) = rs;
      J.block<3, 3>(6 * kid + 3, 6 * mid) = sr;
      J.block<3, 3>(6 * kid + 3, 6 * mid + 3) = ss;
    }
  }
  return J;
}

TangentField single_bracket(const Truncation& trunc, const SpectralState& x, double nu, const TangentField& V) {
  const Eigen::VectorXd jv = drift_jacobian(trunc, x, nu) * V.to_dense(trunc.size());
  return TangentField::from_dense(jv);
}

std::string tangent_to_json(const Truncation& trunc, const TangentField& field) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [id, v] : field.terms) {
    const ModeIndex& k = trunc.mode(id);
    terms.push_back({{"k", {k[0], k[1], k[2]}},
                     {"dr", {v(0), v(1), v(2)}},
                     {"ds", {v(3), v(4), v(5)}}});
  }
  return nlohmann::json({{"schema_version", 1}, {"terms", terms}}).dump();
}

}  // namespace nsergo
