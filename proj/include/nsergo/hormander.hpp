#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nsergo/index_lattice.hpp"
#include "nsergo/lie_brackets.hpp"
#include "nsergo/sde_integrator.hpp"

namespace nsergo {

struct RankReport {
  int cutoff = 0;
  int dim_U = 0;
  int achieved_rank = 0;
  std::vector<ModeIndex> modes;
  std::vector<int> per_mode_dims;
  bool passed = false;
  int generations = 0;
  /// The spanning fields are constant, so the rank holds at every point.
  bool point_independent = true;
  /// Filled by numeric_rank_check: rank at each sampled point.
  std::vector<int> sampled_ranks;
};

/// Rank of the bracket algebra generated by full forcing on `forced`, from the determining closure.
RankReport check_hormander(std::span<const ModeIndex> forced, int N, const ClosureOptions& options = {});

/// Same, for the modes of a validated noise spec.
RankReport check_hormander(const Truncation& trunc, const NoiseSpec& spec, const ClosureOptions& options = {});

/// Constant fields X^r_{k,i} = sum_j q^r_{k,ji} d/dr^j_k and X^s_{k,i}, i = 1..3, per forced mode.
/// Throws std::invalid_argument when a forced mode's fields do not span its 4-dimensional subspace.
std::vector<TangentField> noise_field_basis(const Truncation& trunc, const NoiseSpec& spec);

/// Independent numeric check: starting from the noise fields, repeatedly adds second differences
/// F(x+V+W) - F(x+V) - F(x+W) + F(x) at a random base point x until the span stops growing;
/// the rank is read off singular values (threshold 1e-8 relative to the largest).
/// Appends one rank per point to report.sampled_ranks.
void numeric_rank_check(const Truncation& trunc, const NoiseSpec& spec, RankReport& report, int points = 10,
                        std::uint64_t seed = 1);

std::string rank_report_json(const RankReport& report);

}  // namespace nsergo
