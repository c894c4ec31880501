#include "nsergo/ergodicity_lab.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "nsergo/ensemble.hpp"
#include "nsergo/hormander.hpp"

namespace nsergo {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    default: return "inconclusive";
  }
}

namespace {

// Steps at which the ensemble is sampled: 0, stride, 2 stride, ..., and the last step.
std::vector<std::int64_t> sample_steps(const SimulationConfig& cfg) {
  if (cfg.stride < 1) throw std::invalid_argument("stride must be >= 1");
  std::vector<std::int64_t> out{0};
  const std::int64_t n = cfg.steps();
  for (std::int64_t s = cfg.stride; s < n; s += cfg.stride) out.push_back(s);
  if (n > 0) out.push_back(n);
  return out;
}

// Runs one trajectory, calling visit(sample_index, state) at every sample step.
template <typename Visit>
void walk(const Stepper& stepper, SpectralState x, std::uint32_t traj, const std::vector<std::int64_t>& samples,
          Visit&& visit) {
  std::size_t next = 0;
  for (std::int64_t i = 0;; ++i) {
    if (next < samples.size() && samples[next] == i) visit(next++, x);
    if (next == samples.size()) return;
    stepper.step(x, traj, i);
  }
}

struct Moments {
  std::vector<double> s1, s2;
  explicit Moments(std::size_t n = 0) : s1(n, 0.0), s2(n, 0.0) {}
  void add(std::size_t i, double v) {
    s1[i] += v;
    s2[i] += v * v;
  }
  void merge(const Moments& o) {
    for (std::size_t i = 0; i < s1.size(); ++i) {
      s1[i] += o.s1[i];
      s2[i] += o.s2[i];
    }
  }
  double mean(std::size_t i, double n) const { return s1[i] / n; }
  double sem(std::size_t i, double n) const {
    if (n < 2) return 0.0;
    const double m = s1[i] / n;
    const double var = std::max(0.0, (s2[i] - n * m * m) / (n - 1));
    return std::sqrt(var / n);
  }
};

}  // namespace

LyapunovReport lyapunov_check(const Stepper& stepper, const SpectralState& initial, unsigned threads) {
  const SimulationConfig& cfg = stepper.config();
  if (cfg.ensemble < 1000) throw std::invalid_argument("lyapunov_check: ensemble must be >= 1000");
  const auto samples = sample_steps(cfg);
  const std::size_t S = samples.size();
  const double half = 0.5 * cfg.horizon;

  struct Acc {
    Moments v;
    Moments avg{1};
    void merge(const Acc& o) {
      v.merge(o.v);
      avg.merge(o.avg);
    }
  };
  const Acc acc = run_chunked(
      cfg.ensemble, [&] { return Acc{Moments(S)}; },
      [&](std::uint32_t traj, Acc& a) {
        double tail_sum = 0.0;
        int tail_n = 0;
        walk(stepper, initial, traj, samples, [&](std::size_t s, const SpectralState& x) {
          const double V = x.energy();
          a.v.add(s, V);
          if (double(samples[s]) * cfg.dt >= half) {
            tail_sum += V;
            ++tail_n;
          }
        });
        a.avg.add(0, tail_n ? tail_sum / tail_n : 0.0);
      },
      threads);

  LyapunovReport r;
  const double n = cfg.ensemble;
  r.V0 = initial.energy();
  r.sigma_sq = stepper.noise().sigma_sq();
  r.ceiling = r.sigma_sq / (2.0 * cfg.nu);
  r.envelope_ok = true;
  r.worst_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < S; ++s) {
    LyapunovSample p;
    p.t = double(samples[s]) * cfg.dt;
    p.V = acc.v.mean(s, n);
    p.std_err = acc.v.sem(s, n);
    const double decay = std::exp(-2.0 * cfg.nu * p.t);
    p.envelope = decay * r.V0 + r.ceiling * (1.0 - decay);
    if (p.V > p.envelope + 3.0 * p.std_err) r.envelope_ok = false;
    if (p.std_err > 0.0) r.worst_excess = std::max(r.worst_excess, (p.V - p.envelope) / p.std_err);
    r.series.push_back(p);
  }
  for (std::size_t s = 0; s + 1 < S; ++s)
    r.series[s].generator_estimate = (r.series[s + 1].V - r.series[s].V) / (r.series[s + 1].t - r.series[s].t);
  if (S > 1) r.series[S - 1].generator_estimate = r.series[S - 2].generator_estimate;

  r.long_run_mean = acc.avg.mean(0, n);
  r.long_run_stderr = acc.avg.sem(0, n);
  // The tail average is held against the envelope averaged over the same samples, which tends to the ceiling.
  double tail_env = 0.0;
  int tail_n = 0;
  for (const auto& p : r.series)
    if (p.t >= half) {
      tail_env += p.envelope;
      ++tail_n;
    }
  r.long_run_bound = tail_n ? tail_env / tail_n : r.ceiling;
  r.long_run_ok = r.long_run_mean <= r.long_run_bound + 3.0 * r.long_run_stderr;
  const double gap = r.long_run_bound - r.long_run_mean;
  if (!r.envelope_ok || !r.long_run_ok)
    r.verdict = Verdict::fail;
  else if (r.sigma_sq > 0.0 && r.long_run_stderr > 0.2 * gap)
    r.verdict = Verdict::inconclusive;
  else
    r.verdict = Verdict::pass;
  return r;
}

namespace {

struct Dictionary {
  std::vector<std::string> names;
  std::vector<Eigen::MatrixXd> forms;
  double clip = 0.0;
  int coords = 0;

  Dictionary(const Truncation& trunc, int quadratic_forms, std::uint64_t seed, double clip_level) : clip(clip_level) {
    coords = 6 * trunc.size();
    static const char* comp[] = {"r1", "r2", "r3", "s1", "s2", "s3"};
    for (int j = 0; j < trunc.size(); ++j)
      for (int i = 0; i < 6; ++i) names.push_back("coord " + to_string(trunc.mode(j)) + " " + comp[i]);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    for (int q = 0; q < quadratic_forms; ++q) {
      Eigen::MatrixXd A(coords, coords);
      for (Eigen::Index c = 0; c < A.size(); ++c) A.data()[c] = g(rng);
      A = 0.5 * (A + A.transpose()).eval();
      const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A, Eigen::EigenvaluesOnly).eigenvalues();
      A /= ev.cwiseAbs().maxCoeff();
      forms.push_back(A);
      names.push_back("quadratic form " + std::to_string(q));
    }
    names.push_back("min(V, 10 sigma^2 / 2 nu)");
  }

  std::size_t size() const { return names.size(); }

  void eval(const SpectralState& x, Eigen::VectorXd& out) const {
    out.resize(static_cast<Eigen::Index>(size()));
    const auto v = x.flat();
    out.head(coords) = v;
    for (std::size_t q = 0; q < forms.size(); ++q)
      out(coords + static_cast<Eigen::Index>(q)) = v.dot(forms[q] * v);
    out(out.size() - 1) = std::min(x.energy(), clip);
  }
};

struct Fit {
  double slope = 0.0, intercept = 0.0, slope_se = 0.0, r2 = 0.0;
};

Fit ols(const std::vector<double>& x, const std::vector<double>& y) {
  Fit f;
  const double n = double(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  const double sse = std::max(0.0, syy - f.slope * sxy);
  f.r2 = syy > 0 ? 1.0 - sse / syy : 0.0;
  f.slope_se = n > 2 ? std::sqrt(sse / (n - 2) / sxx) : std::numeric_limits<double>::infinity();
  return f;
}

}  // namespace

MixingEstimate mixing_probe(const Stepper& stepper, const SpectralState& a0, const SpectralState& b0,
                            const MixingOptions& options, unsigned threads) {
  const Truncation& trunc = stepper.truncation();
  const SimulationConfig& cfg = stepper.config();
  MixingEstimate m;

  const RankReport rank = check_hormander(trunc, stepper.noise());
  if (!rank.passed) {
    m.hypothesis_ok = false;
    m.note = "hypothesis violated: noise fails the rank condition (rank " + std::to_string(rank.achieved_rank) +
             " of " + std::to_string(rank.dim_U) + "); exponential mixing is not asserted";
    return m;
  }

  const double sigma_sq = stepper.noise().sigma_sq();
  const Dictionary dict(trunc, options.quadratic_forms, options.dictionary_seed, 10.0 * sigma_sq / (2.0 * cfg.nu));
  m.dictionary = dict.names;
  const auto samples = sample_steps(cfg);
  const std::size_t S = samples.size();
  const std::size_t G = dict.size();

  struct Acc {
    Moments diff;
    Moments va, vb;
    void merge(const Acc& o) {
      diff.merge(o.diff);
      va.merge(o.va);
      vb.merge(o.vb);
    }
  };
  const Acc acc = run_chunked(
      cfg.ensemble, [&] { return Acc{Moments(S * G), Moments(S), Moments(S)}; },
      [&](std::uint32_t traj, Acc& a) {
        // Same trajectory id on both sides: the two ensembles share their noise paths.
        std::vector<Eigen::VectorXd> ga(S);
        walk(stepper, a0, traj, samples, [&](std::size_t s, const SpectralState& x) {
          dict.eval(x, ga[s]);
          a.va.add(s, x.energy());
        });
        Eigen::VectorXd gb;
        walk(stepper, b0, traj, samples, [&](std::size_t s, const SpectralState& x) {
          dict.eval(x, gb);
          a.vb.add(s, x.energy());
          for (std::size_t o = 0; o < G; ++o) a.diff.add(s * G + o, ga[s](static_cast<Eigen::Index>(o)) - gb(static_cast<Eigen::Index>(o)));
        });
      },
      threads);

  const double n = cfg.ensemble;
  for (std::size_t s = 0; s < S; ++s) {
    m.t.push_back(double(samples[s]) * cfg.dt);
    m.mean_V_a.push_back(acc.va.mean(s, n));
    m.mean_V_b.push_back(acc.vb.mean(s, n));
    double best = -1.0, best_se = 0.0;
    int arg = 0;
    for (std::size_t o = 0; o < G; ++o) {
      const double v = std::abs(acc.diff.mean(s * G + o, n));
      if (v > best) {
        best = v;
        best_se = acc.diff.sem(s * G + o, n);
        arg = static_cast<int>(o);
      }
    }
    m.d.push_back(best);
    m.d_stderr.push_back(best_se);
    m.argmax.push_back(arg);
  }

  m.weight = 1.0 + std::max(a0.energy(), b0.energy()) + sigma_sq / (2.0 * cfg.nu);

  // Plateau from the second half; the window opens once both ensembles are within the plateau band
  // and closes when d sinks into its own sampling noise.
  double plateau = 0.0;
  int tail = 0;
  for (std::size_t s = 0; s < S; ++s)
    if (m.t[s] >= 0.5 * cfg.horizon) {
      plateau += 0.5 * (m.mean_V_a[s] + m.mean_V_b[s]);
      ++tail;
    }
  plateau /= std::max(tail, 1);
  const double f = options.plateau_factor;
  const auto in_band = [&](double v) { return v >= plateau / f && v <= plateau * f; };
  for (std::size_t s = 0; s < S; ++s)
    if (in_band(m.mean_V_a[s]) && in_band(m.mean_V_b[s])) {
      m.window_begin = static_cast<int>(s);
      break;
    }
  if (m.window_begin < 0) {
    m.note = "ensembles never reached the plateau band; no fit";
    return m;
  }
  m.window_end = static_cast<int>(S);
  for (std::size_t s = static_cast<std::size_t>(m.window_begin); s < S; ++s)
    if (!(m.d[s] > 3.0 * m.d_stderr[s])) {
      m.window_end = static_cast<int>(s);
      break;
    }

  std::vector<double> tx, ty;
  std::vector<std::size_t> held;
  for (int s = m.window_begin; s < m.window_end; ++s) {
    if ((s - m.window_begin) % 2 == 0) {
      tx.push_back(m.t[static_cast<std::size_t>(s)]);
      ty.push_back(std::log(m.d[static_cast<std::size_t>(s)]));
    } else {
      held.push_back(static_cast<std::size_t>(s));
    }
  }
  if (tx.size() < 3 || held.empty()) {
    m.note = "fit window too short (" + std::to_string(m.window_end - m.window_begin) + " samples)";
    return m;
  }
  const Fit fit = ols(tx, ty);
  m.rho_hat = -fit.slope;
  m.rho_stderr = fit.slope_se;
  m.r_squared = fit.r2;
  m.fit_accepted = fit.r2 >= options.min_r_squared;
  for (std::size_t i = 0; i < tx.size(); ++i)
    m.C_hat = std::max(m.C_hat, std::exp(ty[i] + m.rho_hat * tx[i]) / m.weight);
  m.heldout_ok = true;
  for (std::size_t s : held)
    if (m.d[s] > m.C_hat * std::exp(-m.rho_hat * m.t[s]) * m.weight + 3.0 * m.d_stderr[s]) m.heldout_ok = false;
  const bool positive = m.rho_hat - 1.96 * m.rho_stderr > 0.0;
  m.passed = m.fit_accepted && positive && m.heldout_ok;
  if (!m.fit_accepted) m.note = "fit rejected: R^2 below " + std::to_string(options.min_r_squared);
  return m;
}

SupportSeries support_probe(const Stepper& stepper, const SpectralState& initial, const SupportWindow& w,
                            unsigned threads) {
  const SimulationConfig& cfg = stepper.config();
  const int dims = static_cast<int>(w.coords.size());
  if (dims < 2 || dims > 4) throw std::invalid_argument("support window needs 2 to 4 coordinates");
  if (w.bins < 1 || !(w.hi > w.lo)) throw std::invalid_argument("support window needs bins >= 1 and hi > lo");
  for (int c : w.coords)
    if (c < 0 || c >= 6 * stepper.truncation().size())
      throw std::invalid_argument("support coordinate " + std::to_string(c) + " out of range");
  int boxes = 1;
  for (int d = 0; d < dims; ++d) boxes *= w.bins;
  const auto samples = sample_steps(cfg);

  struct Acc {
    std::vector<int> first;
    void merge(const Acc& o) {
      for (std::size_t b = 0; b < first.size(); ++b) first[b] = std::min(first[b], o.first[b]);
    }
  };
  const Acc acc = run_chunked(
      cfg.ensemble, [&] { return Acc{std::vector<int>(static_cast<std::size_t>(boxes), INT_MAX)}; },
      [&](std::uint32_t traj, Acc& a) {
        walk(stepper, initial, traj, samples, [&](std::size_t s, const SpectralState& x) {
          int box = 0;
          for (int c : w.coords) {
            const double v = x.flat()(c);
            if (!(v >= w.lo && v < w.hi)) return;
            const int bin = std::min(w.bins - 1, static_cast<int>((v - w.lo) / (w.hi - w.lo) * w.bins));
            box = box * w.bins + bin;
          }
          int& f = a.first[static_cast<std::size_t>(box)];
          f = std::min(f, static_cast<int>(s));
        });
      },
      threads);

  SupportSeries out;
  out.boxes = boxes;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    out.t.push_back(double(samples[s]) * cfg.dt);
    const auto seen = std::count_if(acc.first.begin(), acc.first.end(), [&](int f) { return f <= int(s); });
    out.visited_fraction.push_back(double(seen) / boxes);
  }
  return out;
}

std::string lyapunov_json(const LyapunovReport& r) {
  return nlohmann::json({{"schema_version", 1},
                         {"verdict", to_string(r.verdict)},
                         {"V0", r.V0},
                         {"sigma_sq", r.sigma_sq},
                         {"ceiling", r.ceiling},
                         {"long_run_mean", r.long_run_mean},
                         {"long_run_stderr", r.long_run_stderr},
                         {"long_run_bound", r.long_run_bound},
                         {"envelope_ok", r.envelope_ok},
                         {"long_run_ok", r.long_run_ok},
                         {"worst_excess_in_stderr", std::isfinite(r.worst_excess) ? nlohmann::json(r.worst_excess)
                                                                                  : nlohmann::json(nullptr)},
                         {"samples", r.series.size()}})
      .dump(2);
}

std::string mixing_json(const MixingEstimate& m) {
  return nlohmann::json({{"schema_version", 1},
                         {"hypothesis_ok", m.hypothesis_ok},
                         {"passed", m.passed},
                         {"note", m.note},
                         {"distance", "lower bound over a fixed observable dictionary"},
                         {"dictionary_size", m.dictionary.size()},
                         {"rho_hat", m.rho_hat},
                         {"rho_stderr", m.rho_stderr},
                         {"rho_ci95", {m.rho_hat - 1.96 * m.rho_stderr, m.rho_hat + 1.96 * m.rho_stderr}},
                         {"C_hat", m.C_hat},
                         {"weight", m.weight},
                         {"r_squared", m.r_squared},
                         {"fit_accepted", m.fit_accepted},
                         {"heldout_ok", m.heldout_ok},
                         {"window", {m.window_begin, m.window_end}}})
      .dump(2);
}

std::string support_json(const SupportSeries& s, const SupportWindow& w) {
  return nlohmann::json({{"schema_version", 1},
                         {"coords", w.coords},
                         {"lo", w.lo},
                         {"hi", w.hi},
                         {"bins", w.bins},
                         {"boxes", s.boxes},
                         {"final_fraction", s.visited_fraction.empty() ? 0.0 : s.visited_fraction.back()}})
      .dump(2);
}

void write_lyapunov_csv(std::ostream& os, const LyapunovReport& r) {
  os << "t,V,stderr,envelope,generator_estimate\n" << std::setprecision(12);
  for (const auto& p : r.series)
    os << p.t << ',' << p.V << ',' << p.std_err << ',' << p.envelope << ',' << p.generator_estimate << '\n';
}

void write_mixing_csv(std::ostream& os, const MixingEstimate& m) {
  os << "t,d,d_stderr,argmax,mean_V_a,mean_V_b\n" << std::setprecision(12);
  for (std::size_t s = 0; s < m.t.size(); ++s)
    os << m.t[s] << ',' << m.d[s] << ',' << m.d_stderr[s] << ',' << m.argmax[s] << ',' << m.mean_V_a[s] << ','
       << m.mean_V_b[s] << '\n';
}

void write_support_csv(std::ostream& os, const SupportSeries& s) {
  os << "t,visited_fraction\n" << std::setprecision(12);
  for (std::size_t i = 0; i < s.t.size(); ++i) os << s.t[i] << ',' << s.visited_fraction[i] << '\n';
}

}  // namespace nsergo
