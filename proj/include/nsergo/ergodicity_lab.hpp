#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nsergo/sde_integrator.hpp"

namespace nsergo {

struct LyapunovSample {
  double t = 0.0;
  double V = 0.0;       // ensemble mean of the kinetic energy
  double std_err = 0.0;  // standard error of V
  double envelope = 0.0;
  double generator_estimate = 0.0;  // forward difference of E[V]
};

enum class Verdict { pass, fail, inconclusive };
std::string to_string(Verdict v);

struct LyapunovReport {
  std::vector<LyapunovSample> series;
  double V0 = 0.0;
  double sigma_sq = 0.0;
  double ceiling = 0.0;  // sigma^2 / (2 nu)
  double long_run_mean = 0.0;
  double long_run_stderr = 0.0;
  double long_run_bound = 0.0;  // envelope averaged over t >= horizon/2
  bool envelope_ok = false;
  bool long_run_ok = false;
  double worst_excess = 0.0;  // max over t of (V - envelope) / stderr, -inf when all below
  Verdict verdict = Verdict::fail;
};

/// Ensemble check of E[V(t)] <= exp(-2 nu t) V0 + (sigma^2 / 2 nu)(1 - exp(-2 nu t)) + 3 stderr at every
/// sample, and of the long-run mean (per-trajectory averages over t >= horizon/2) against the envelope averaged
/// over the same samples, which tends to sigma^2 / 2 nu.
/// Inconclusive when the long-run stderr exceeds 20% of the gap to the ceiling.
LyapunovReport lyapunov_check(const Stepper& stepper, const SpectralState& initial, unsigned threads = 0);

struct MixingOptions {
  int quadratic_forms = 10;
  std::uint64_t dictionary_seed = 7;
  double plateau_factor = 1.5;
  double min_r_squared = 0.5;
};

struct MixingEstimate {
  std::vector<std::string> dictionary;  // observable names, index-aligned with argmax
  std::vector<double> t;
  std::vector<double> d;
  std::vector<double> d_stderr;
  std::vector<int> argmax;
  std::vector<double> mean_V_a;
  std::vector<double> mean_V_b;

  bool hypothesis_ok = true;
  std::string note;
  int window_begin = -1;  // sample indices [begin, end)
  int window_end = -1;
  double rho_hat = 0.0;
  double rho_stderr = 0.0;
  double C_hat = 0.0;
  double weight = 0.0;  // 1 + max(V(a0), V(b0)) + sigma^2 / 2 nu
  double r_squared = 0.0;
  bool fit_accepted = false;
  bool heldout_ok = false;
  bool passed = false;
};

/// Two ensembles from a0 and b0 driven by common random numbers (same trajectory ids and seed).
/// d(t) = max over the dictionary of |mean_a g - mean_b g|; standard errors from paired differences.
/// The dictionary (coordinates, seeded random quadratic forms scaled to |g| <= V, min(V, 10 sigma^2 / 2 nu))
/// lower-bounds the weighted distance. log d is fitted by least squares on the even samples of the
/// post-transient window; the odd samples are held out against C_hat exp(-rho t) weight + 3 stderr.
/// A noise spec failing the rank condition returns hypothesis_ok = false without simulating.
MixingEstimate mixing_probe(const Stepper& stepper, const SpectralState& a0, const SpectralState& b0,
                            const MixingOptions& options = {}, unsigned threads = 0);

struct SupportWindow {
  std::vector<int> coords;  // flat state indices, 2 to 4 of them
  double lo = -1.0;
  double hi = 1.0;
  int bins = 4;  // per coordinate
};

struct SupportSeries {
  std::vector<double> t;
  std::vector<double> visited_fraction;
  int boxes = 0;
};

/// Fraction of the window's boxes visited by the ensemble up to each sample time.
SupportSeries support_probe(const Stepper& stepper, const SpectralState& initial, const SupportWindow& window,
                            unsigned threads = 0);

std::string lyapunov_json(const LyapunovReport& r);
std::string mixing_json(const MixingEstimate& m);
std::string support_json(const SupportSeries& s, const SupportWindow& w);
void write_lyapunov_csv(std::ostream& os, const LyapunovReport& r);
void write_mixing_csv(std::ostream& os, const MixingEstimate& m);
void write_support_csv(std::ostream& os, const SupportSeries& s);

}  // namespace nsergo
