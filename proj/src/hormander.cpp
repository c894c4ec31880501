#include "nsergo/hormander.hpp"

#include <random>
#include <stdexcept>

#include <Eigen/SVD>
#include <json.hpp>

namespace nsergo {

namespace {

RankReport from_closure(const ClosureResult& closure) {
  RankReport r;
  r.cutoff = closure.cutoff;
  r.dim_U = 4 * static_cast<int>(closure.subspaces.size());
  for (const auto& s : closure.subspaces) {
    r.modes.push_back(s.k);
    r.per_mode_dims.push_back(s.dim());
  }
  r.achieved_rank = closure.total_dim();
  r.passed = r.achieved_rank == r.dim_U;
  r.generations = closure.generations;
  return r;
}

}  // namespace

RankReport check_hormander(std::span<const ModeIndex> forced, int N, const ClosureOptions& options) {
  return from_closure(determining_closure(forced, N, options));
}

RankReport check_hormander(const Truncation& trunc, const NoiseSpec& spec, const ClosureOptions& options) {
  noise_field_basis(trunc, spec);
  const auto forced = spec.forced_indices();
  return from_closure(determining_closure(trunc, forced, options));
}

std::vector<TangentField> noise_field_basis(const Truncation& trunc, const NoiseSpec& spec) {
  validate_noise(trunc, spec);
  std::vector<TangentField> out;
  const Eigen::Vector3d zero = Eigen::Vector3d::Zero();
  for (const ForcedMode& m : spec.modes) {
    Eigen::Matrix<double, 4, Eigen::Dynamic> basis(4, 0);
    for (int i = 0; i < 3; ++i) {
      for (const auto& f : {TangentField::single(m.id, m.qr.col(i), zero), TangentField::single(m.id, zero, m.qs.col(i))}) {
        absorb(basis, frame_coords(trunc, m.id, f.terms.begin()->second));
        out.push_back(f);
      }
    }
    if (basis.cols() != 4)
      throw std::invalid_argument("noise fields at " + to_string(m.k) + " span dimension " +
                                  std::to_string(basis.cols()) + ", need 4");
  }
  return out;
}

void numeric_rank_check(const Truncation& trunc, const NoiseSpec& spec, RankReport& report, int points,
                        std::uint64_t seed) {
  const GalerkinDrift drift(trunc);
  const int dim = 6 * trunc.size();
  const auto F = [&](const Eigen::VectorXd& x) {
    SpectralState out;
    drift.quadratic_into(SpectralState::from_flat(x), out);
    return Eigen::VectorXd(out.flat());
  };
  const auto span_of = [](const Eigen::MatrixXd& cols) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cols, Eigen::ComputeThinU);
    const auto sv = svd.singularValues();
    Eigen::Index r = 0;
    while (r < sv.size() && sv(r) > 1e-8 * sv(0)) ++r;
    return Eigen::MatrixXd(svd.matrixU().leftCols(r));
  };

  Eigen::MatrixXd seed_cols(dim, 0);
  for (const auto& f : noise_field_basis(trunc, spec)) {
    seed_cols.conservativeResize(Eigen::NoChange, seed_cols.cols() + 1);
    seed_cols.col(seed_cols.cols() - 1) = f.to_dense(trunc.size());
  }

  for (int p = 0; p < points; ++p) {
    const Eigen::VectorXd x = random_state(trunc, 1.0, seed + static_cast<std::uint64_t>(p)).flat();
    const Eigen::VectorXd fx = F(x);
    Eigen::MatrixXd basis = span_of(seed_cols);
    Eigen::Index fresh_begin = 0;
    while (fresh_begin < basis.cols() && basis.cols() < dim) {
      std::vector<Eigen::VectorXd> found;
      for (Eigen::Index a = fresh_begin; a < basis.cols(); ++a) {
        const Eigen::VectorXd fa = F(x + basis.col(a));
        for (Eigen::Index b = 0; b < basis.cols(); ++b) {
          const Eigen::VectorXd v = F(x + basis.col(a) + basis.col(b)) - fa - F(x + basis.col(b)) + fx;
          if (v.norm() > 1e-10) found.push_back(v);
        }
      }
      // Append only the part of the new vectors outside the current span, so the
      // next round can restrict one argument to those fresh directions.
      Eigen::MatrixXd residual(dim, static_cast<Eigen::Index>(found.size()));
      for (std::size_t j = 0; j < found.size(); ++j) {
        Eigen::VectorXd v = found[j].normalized();
        for (int pass = 0; pass < 2; ++pass) v -= basis * (basis.transpose() * v);
        residual.col(static_cast<Eigen::Index>(j)) = v;
      }
      fresh_begin = basis.cols();
      if (residual.cols() == 0 || residual.norm() < 1e-8) break;
      const Eigen::MatrixXd extra = span_of(residual);
      Eigen::MatrixXd grown(dim, basis.cols() + extra.cols());
      grown << basis, extra;
      basis = grown;
    }
    report.sampled_ranks.push_back(static_cast<int>(basis.cols()));
  }
}

std::string rank_report_json(const RankReport& r) {
  nlohmann::json modes = nlohmann::json::array();
  for (std::size_t j = 0; j < r.modes.size(); ++j)
    modes.push_back({{"index", {r.modes[j][0], r.modes[j][1], r.modes[j][2]}}, {"dim", r.per_mode_dims[j]}});
  nlohmann::json out = {{"schema_version", 1},
                        {"N", r.cutoff},
                        {"dim_U", r.dim_U},
                        {"achieved_rank", r.achieved_rank},
                        {"passed", r.passed},
                        {"generations", r.generations},
                        {"point_independent", r.point_independent},
                        {"per_mode_dims", modes}};
  if (!r.sampled_ranks.empty()) out["sampled_ranks"] = r.sampled_ranks;
  return out.dump(2);
}

}  // namespace nsergo
