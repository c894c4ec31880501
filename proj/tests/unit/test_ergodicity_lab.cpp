#include <doctest.h>

#include <cmath>
#include <sstream>

#include "nsergo/ergodicity_lab.hpp"

using namespace nsergo;

namespace {

const std::vector<ModeIndex> kUnit{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
const std::vector<ModeIndex> kEven{{2, 0, 0}, {0, 2, 0}, {0, 0, 2}};

SimulationConfig config(double horizon, std::uint32_t ensemble, int stride, double dt = 0.01) {
  SimulationConfig cfg;
  cfg.dt = dt;
  cfg.horizon = horizon;
  cfg.ensemble = ensemble;
  cfg.stride = stride;
  cfg.seed = 31;
  return cfg;
}

}  // namespace

TEST_CASE("Lyapunov: noise-free ensemble decays under the envelope") {
  const Truncation t(1);
  const Stepper stepper(t, NoiseSpec{}, config(2.0, 1000, 10));
  const LyapunovReport r = lyapunov_check(stepper, random_state(t, 3.0, 4));
  CHECK(r.ceiling == 0.0);
  CHECK(r.envelope_ok);
  CHECK(r.verdict == Verdict::pass);
  for (std::size_t i = 1; i < r.series.size(); ++i) CHECK(r.series[i].V < r.series[i - 1].V);
  CHECK(r.series.back().V <= std::exp(-2.0 * 2.0) * 3.0 * (1 + 1e-12));
}

TEST_CASE("Lyapunov: stationary level from rest and noise scaling") {
  const Truncation t(1);
  const NoiseSpec spec = default_noise(t, kUnit, 0.5);
  const LyapunovReport a = lyapunov_check(Stepper(t, spec, config(4.0, 1000, 20)), SpectralState::zero(t));
  const LyapunovReport b = lyapunov_check(Stepper(t, spec.scaled(2.0), config(4.0, 1000, 20)), SpectralState::zero(t));
  CHECK(a.verdict == Verdict::pass);
  CHECK(b.verdict == Verdict::pass);
  CHECK(b.ceiling == doctest::Approx(4.0 * a.ceiling));
  CHECK(a.long_run_mean < a.ceiling);
  CHECK(a.long_run_mean > 0.5 * a.ceiling);
  CHECK_THROWS_AS(lyapunov_check(Stepper(t, spec, config(1.0, 999, 1)), SpectralState::zero(t)), std::invalid_argument);
}

TEST_CASE("Lyapunov report is independent of thread count") {
  const Truncation t(1);
  const Stepper stepper(t, default_noise(t, kUnit, 0.5), config(1.0, 1000, 10));
  const SpectralState x0 = random_state(t, 2.0, 3);
  const LyapunovReport one = lyapunov_check(stepper, x0, 1);
  const LyapunovReport many = lyapunov_check(stepper, x0, 4);
  REQUIRE(one.series.size() == many.series.size());
  for (std::size_t i = 0; i < one.series.size(); ++i) {
    CHECK(one.series[i].V == many.series[i].V);
    CHECK(one.series[i].std_err == many.series[i].std_err);
  }
  CHECK(to_string(one.verdict) == to_string(many.verdict));
}

TEST_CASE("mixing: identical initial states give d = 0") {
  const Truncation t(1);
  const Stepper stepper(t, default_noise(t, kUnit, 0.5), config(1.0, 200, 10));
  const SpectralState x0 = random_state(t, 2.0, 12);
  const MixingEstimate m = mixing_probe(stepper, x0, x0);
  CHECK(m.hypothesis_ok);
  for (std::size_t i = 0; i < m.d.size(); ++i) CHECK(m.d[i] <= 3.0 * m.d_stderr[i]);
}

TEST_CASE("mixing: d is symmetric in the two initial states") {
  const Truncation t(1);
  const Stepper stepper(t, default_noise(t, kUnit, 0.5), config(1.0, 200, 10));
  const SpectralState a = random_state(t, 2.0, 12), b = random_state(t, 6.0, 13);
  const MixingEstimate ab = mixing_probe(stepper, a, b);
  const MixingEstimate ba = mixing_probe(stepper, b, a);
  REQUIRE(ab.d.size() == ba.d.size());
  for (std::size_t i = 0; i < ab.d.size(); ++i) CHECK(ab.d[i] == doctest::Approx(ba.d[i]).epsilon(1e-12));
}

TEST_CASE("mixing: contraction is detected for the unit forcing") {
  const Truncation t(1);
  const Stepper stepper(t, default_noise(t, kUnit, 0.5), config(6.0, 2000, 10));
  const MixingEstimate m = mixing_probe(stepper, SpectralState::zero(t), random_state(t, 10.0, 2));
  MESSAGE("rho " << m.rho_hat << " +- " << m.rho_stderr << ", R^2 " << m.r_squared << ", window [" << m.window_begin
                 << ", " << m.window_end << "), " << m.note);
  CHECK(m.hypothesis_ok);
  CHECK(m.d.front() > m.d.back());
  CHECK(m.passed);
}

TEST_CASE("mixing: a non-determining forcing is a hypothesis violation") {
  const Truncation t(2);
  const Stepper stepper(t, default_noise(t, kEven, 0.5), config(1.0, 100, 10));
  const MixingEstimate m = mixing_probe(stepper, SpectralState::zero(t), random_state(t, 1.0, 1));
  CHECK_FALSE(m.hypothesis_ok);
  CHECK_FALSE(m.passed);
  CHECK(m.note.find("hypothesis") != std::string::npos);
  CHECK(m.d.empty());
  CHECK(mixing_json(m).find("\"hypothesis_ok\": false") != std::string::npos);
}

TEST_CASE("support: one box at t = 0, monotone afterwards") {
  const Truncation t(1);
  const Stepper stepper(t, default_noise(t, kUnit, 1.0), config(3.0, 300, 10));
  const int id = *t.canonical_id(ModeIndex{1, 1, 0});
  const SupportWindow w{{6 * id + 2, 6 * id + 5}, -0.5, 0.5, 4};
  const SupportSeries s = support_probe(stepper, SpectralState::zero(t), w);
  CHECK(s.boxes == 16);
  CHECK(s.visited_fraction.front() == doctest::Approx(1.0 / 16));
  for (std::size_t i = 1; i < s.visited_fraction.size(); ++i) CHECK(s.visited_fraction[i] >= s.visited_fraction[i - 1]);
  CHECK(s.visited_fraction.back() > 0.5);
}

TEST_CASE("support: odd modes stay dark under even forcing") {
  const Truncation t(2);
  const Stepper stepper(t, default_noise(t, kEven, 1.0), config(1.0, 100, 10));
  const int odd = *t.canonical_id(ModeIndex{1, 1, 0});
  const int even = *t.canonical_id(ModeIndex{2, 2, 0});
  const SupportSeries dark = support_probe(stepper, SpectralState::zero(t), SupportWindow{{6 * odd + 2, 6 * odd + 5}, -0.5, 0.5, 4});
  CHECK(dark.visited_fraction.back() == doctest::Approx(1.0 / 16));
  const SupportSeries lit = support_probe(stepper, SpectralState::zero(t), SupportWindow{{6 * even + 2, 6 * even + 5}, -0.05, 0.05, 4});
  CHECK(lit.visited_fraction.back() > 1.0 / 16);
}

TEST_CASE("support window validation and output") {
  const Truncation t(1);
  const Stepper stepper(t, default_noise(t, kUnit, 1.0), config(0.1, 10, 1));
  CHECK_THROWS_AS(support_probe(stepper, SpectralState::zero(t), SupportWindow{{0}, -1, 1, 4}), std::invalid_argument);
  CHECK_THROWS_AS(support_probe(stepper, SpectralState::zero(t), SupportWindow{{0, 999}, -1, 1, 4}), std::invalid_argument);
  const SupportWindow w{{1, 2}, -1, 1, 2};
  const SupportSeries s = support_probe(stepper, SpectralState::zero(t), w);
  std::ostringstream csv;
  write_support_csv(csv, s);
  CHECK(csv.str().rfind("t,", 0) == 0);
  CHECK(support_json(s, w).find("\"boxes\": 4") != std::string::npos);
}
