#include <doctest.h>

#include <random>

#include "nsergo/index_lattice.hpp"
#include "oracles.hpp"

using nsergo::ModeIndex;
using nsergo::Truncation;

namespace {

const std::vector<ModeIndex> kUnit{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
const std::vector<ModeIndex> kEven{{2, 0, 0}, {0, 2, 0}, {0, 0, 2}};

bool all_even(const ModeIndex& k) { return k[0] % 2 == 0 && k[1] % 2 == 0 && k[2] % 2 == 0; }

// Orthogonal projector onto the span of a basis, for basis-free comparison of subspaces.
Eigen::Matrix4d projector(const nsergo::ModeSubspace& s) { return s.basis * s.basis.transpose(); }

}  // namespace

TEST_CASE("working example is determining") {
  for (int N = 1; N <= 2; ++N) {
    const auto r = nsergo::determining_closure(kUnit, N);
    CHECK(r.is_determining);
    CHECK(r.total_dim() == 4 * Truncation(N).size());
  }
}

TEST_CASE("single forced mode stays put") {
  const Truncation t(1);
  const std::vector<ModeIndex> forced{{1, 0, 0}};
  const auto r = nsergo::determining_closure(t, forced);
  CHECK_FALSE(r.is_determining);
  for (const auto& s : r.subspaces) CHECK(s.dim() == (s.k == ModeIndex{1, 0, 0} ? 4 : 0));
  CHECK(r.generations == 1);
}

TEST_CASE("even forcing is confined to the even sublattice") {
  const auto r = nsergo::determining_closure(kEven, 2);
  CHECK_FALSE(r.is_determining);
  int even_full = 0;
  for (const auto& s : r.subspaces) {
    if (!all_even(s.k)) CHECK(s.dim() == 0);
    if (all_even(s.k) && s.dim() == 4) ++even_full;
  }
  CHECK(even_full == 13);
}

TEST_CASE("out-of-range forcing is reported") {
  const std::vector<ModeIndex> forced{{5, 0, 0}};
  CHECK_THROWS_AS(nsergo::determining_closure(forced, 1), std::invalid_argument);
}

TEST_CASE("fixpoint does not depend on iteration order") {
  const Truncation t(2);
  const std::vector<ModeIndex> forced{{1, 1, 0}, {0, 1, 1}, {1, 0, 1}};
  const auto ref = nsergo::determining_closure(t, forced);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    nsergo::ClosureOptions opts;
    opts.shuffle_seed = seed;
    const auto r = nsergo::determining_closure(t, forced, opts);
    CHECK(r.dims() == ref.dims());
    for (std::size_t j = 0; j < r.subspaces.size(); ++j)
      CHECK((projector(r.subspaces[j]) - projector(ref.subspaces[j])).norm() < 1e-8);
  }
}

TEST_CASE("monotone in the forced set and determining implies generating") {
  std::mt19937_64 rng(314);
  std::uniform_int_distribution<int> size(1, 4);
  const Truncation t(2);
  int determining = 0;
  for (int trial = 0; trial < 12; ++trial) {
    std::vector<ModeIndex> small;
    const int n = size(rng);
    for (int j = 0; j < n; ++j) small.push_back(oracle::random_index(rng, 1));
    std::vector<ModeIndex> big = small;
    big.push_back(oracle::random_index(rng, 2));

    const auto a = nsergo::determining_closure(t, small);
    const auto b = nsergo::determining_closure(t, big);
    const auto da = a.dims(), db = b.dims();
    for (std::size_t j = 0; j < da.size(); ++j) CHECK(da[j] <= db[j]);
    for (const auto* r : {&a, &b}) {
      const auto& forced = r == &a ? small : big;
      if (r->is_determining) {
        ++determining;
        CHECK(nsergo::is_generator_set(forced));
      }
    }
  }
  CHECK(determining > 0);
}

TEST_CASE("determining at N stays determining at larger cut-offs") {
  for (int N = 1; N <= 3; ++N) CHECK(nsergo::determining_closure(kUnit, N).is_determining);
}

TEST_CASE("closure JSON") {
  const auto r = nsergo::determining_closure(kUnit, 1);
  const std::string js = nsergo::closure_to_json(r);
  CHECK(js.find("\"is_determining\": true") != std::string::npos);
  CHECK(js.find("\"rank\": 52") != std::string::npos);
}
