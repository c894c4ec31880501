#include <algorithm>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

#include "nsergo/index_lattice.hpp"
#include "nsergo/lie_brackets.hpp"

#include <json.hpp>

namespace nsergo {

ClosureResult determining_closure(std::span<const ModeIndex> forced, int N, const ClosureOptions& options) {
  return determining_closure(Truncation(N), forced, options);
}

ClosureResult determining_closure(const Truncation& trunc, std::span<const ModeIndex> forced,
                                  const ClosureOptions& options) {
  const int D = trunc.size();
  ClosureResult out;
  out.cutoff = trunc.cutoff();
  out.subspaces.resize(static_cast<std::size_t>(D));
  for (int j = 0; j < D; ++j) out.subspaces[static_cast<std::size_t>(j)].k = trunc.mode(j);

  std::vector<char> changed(static_cast<std::size_t>(D), 0);
  for (const ModeIndex& k : canonical_forced_set(trunc, forced)) {
    const int id = *trunc.canonical_id(k);
    out.subspaces[static_cast<std::size_t>(id)].basis = Eigen::Matrix4d::Identity();
    changed[static_cast<std::size_t>(id)] = 1;
  }

  std::mt19937_64 rng(options.shuffle_seed.value_or(0));
  std::vector<std::pair<int, int>> pairs;
  std::vector<std::pair<int, Eigen::Vector4d>> candidates;
  // Every sweep but the last grows the total dimension, which is at most 4D.
  const int max_sweeps = 4 * D + 1;
  bool grew = true;
  while (grew) {
    if (++out.generations > max_sweeps)
      throw std::runtime_error("determining_closure: no fixpoint after " + std::to_string(max_sweeps) +
                               " sweeps at N=" + std::to_string(trunc.cutoff()));
    // The double bracket is symmetric in (V, W), so unordered pairs cover every ordered one.
    // A pair can only contribute something new if one of its sources grew last sweep.
    pairs.clear();
    for (int m = 0; m < D; ++m) {
      if (out.subspaces[static_cast<std::size_t>(m)].dim() == 0) continue;
      for (int n = m; n < D; ++n) {
        if (out.subspaces[static_cast<std::size_t>(n)].dim() == 0) continue;
        if (changed[static_cast<std::size_t>(m)] || changed[static_cast<std::size_t>(n)]) pairs.emplace_back(m, n);
      }
    }
    if (options.shuffle_seed) std::shuffle(pairs.begin(), pairs.end(), rng);

    candidates.clear();
    for (const auto& [m, n] : pairs) {
      const auto span = bracket_span(trunc, m, n, out.subspaces[static_cast<std::size_t>(m)],
                                     out.subspaces[static_cast<std::size_t>(n)], options.growth_tolerance,
                                     options.zero_floor);
      for (const auto& [t, sub] : span)
        for (int c = 0; c < sub.dim(); ++c) candidates.emplace_back(t, sub.basis.col(c));
    }
    if (options.shuffle_seed) std::shuffle(candidates.begin(), candidates.end(), rng);

    // Merge at sweep end so the sweep reads a consistent snapshot.
    std::fill(changed.begin(), changed.end(), 0);
    grew = false;
    for (const auto& [t, v] : candidates) {
      if (absorb(out.subspaces[static_cast<std::size_t>(t)].basis, v, options.growth_tolerance, options.zero_floor)) {
        changed[static_cast<std::size_t>(t)] = 1;
        grew = true;
      }
    }
  }

  out.is_determining = std::all_of(out.subspaces.begin(), out.subspaces.end(),
                                   [](const ModeSubspace& s) { return s.dim() == 4; });
  return out;
}

std::string closure_to_json(const ClosureResult& result) {
  nlohmann::json modes = nlohmann::json::array();
  for (const auto& sub : result.subspaces) {
    nlohmann::json basis = nlohmann::json::array();
    for (int c = 0; c < sub.dim(); ++c)
      basis.push_back({sub.basis(0, c), sub.basis(1, c), sub.basis(2, c), sub.basis(3, c)});
    modes.push_back({{"index", {sub.k[0], sub.k[1], sub.k[2]}}, {"dim", sub.dim()}, {"basis", basis}});
  }
  return nlohmann::json({{"schema_version", 1},
                         {"N", result.cutoff},
                         {"is_determining", result.is_determining},
                         {"generations", result.generations},
                         {"rank", result.total_dim()},
                         {"modes", modes}})
      .dump(2);
}

}  // namespace nsergo
