#pragma once

// Lyapunov functions for the three-site chain:
//   U0 = H0(pb0, qb0) + H0(pb2, qb2) + g (pb0 qb0 + pb2 qb2),  H0 = p^2/2 + V(q) + q^2/2 + 1,
//   U1 = H^n + (n/2)(gamma0 + gamma2) H^{n-1} Psi                      (3/2 < k < 2)
//   U1 = H^n - Xi + n H^{n-1} sum_i gamma_i (Psi - 2 pb_i Phi2)         (k >= 2)
//   V  = U1 + U0^{N_pow}
// with g = min(1, gamma0, gamma2)/2 and Xi = n H^{n-1} [H0(pb0, qb0) + H0(pb2, qb2)].
// U0 always uses the first-order change of variables (cutoff form for k < 2, rigid for
// k >= 2): its remainders grow slower than the boundary energies. Xi and pb_i inside U1
// use the second-order change when k >= 2. Generators are applied by finite differences.

#include <chainlab/chain_model.hpp>
#include <chainlab/correctors.hpp>
#include <chainlab/effective_dynamics.hpp>
#include <chainlab/fit.hpp>
#include <chainlab/random.hpp>
#include <chainlab/sde_integrator.hpp>
#include <chainlab/spectral_probe.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace chainlab {

enum class LyapunovRegime { k_low, k_high };

inline std::string to_string(LyapunovRegime r) { return r == LyapunovRegime::k_low ? "k_low" : "k_high"; }

inline LyapunovRegime regime_for(double k) {
  if (!(k > 1.5)) throw std::domain_error("corrector unbounded in this regime");
  return k < 2.0 ? LyapunovRegime::k_low : LyapunovRegime::k_high;
}

struct LyapunovConfig {
  int n = 2;
  int N_pow = 1;
  double gamma_mix = 0.5;
  LyapunovRegime regime = LyapunovRegime::k_high;

  static LyapunovConfig for_params(const ChainParams& prm, int n = 2, int n_pow = 1) {
    LyapunovConfig c;
    c.n = n;
    c.N_pow = n_pow;
    c.gamma_mix = 0.5 * std::min({1.0, prm.gamma0, prm.gammaN});
    c.regime = regime_for(prm.k);
    return c;
  }
};

/// H0(p, q) = p^2/2 + V(q) + q^2/2 + 1.
inline double effective_h0(double p, double q, double k) { return hf_energy(p, q, k) + 0.5 * q * q + 1.0; }

/// Value, generator image and momentum derivatives at the two bath sites. Products and
/// powers follow the Ito rules L(AB) = A LB + B LA + sum sigma_i^2 dA_i dB_i.
struct GeneratorJet {
  double value = 0.0, L = 0.0;
  std::array<double, 2> dp{};

  static GeneratorJet constant(double c) { return {c, 0.0, {0.0, 0.0}}; }
};

class LyapunovFunctions {
 public:
  LyapunovFunctions(const ChainParams& prm, const Correctors& c, const LyapunovConfig& cfg)
      : prm_(prm), cfg_(cfg), ed0_(prm, c, EffectiveVariant::thm_4_1),
        ed_(prm, c, cfg.regime == LyapunovRegime::k_low ? EffectiveVariant::thm_4_1 : EffectiveVariant::thm_4_3) {
    if (prm_.n_sites != 3) throw std::invalid_argument("Lyapunov functions are defined for 3-site chains");
    if (cfg_.n < 2) throw std::invalid_argument("n must be >= 2");
    if (cfg_.regime != regime_for(prm_.k)) throw std::domain_error("regime mismatch");
    c.require_psi();
  }

  const ChainParams& params() const { return prm_; }
  const LyapunovConfig& config() const { return cfg_; }
  const EffectiveDynamics& effective() const { return ed_; }
  const EffectiveDynamics& boundary_effective() const { return ed0_; }
  void set_n_pow(int n) { cfg_.N_pow = n; }

  double u0(const ChainState& x) const {
    const auto b = ed0_.to_bar(x);
    const double k = prm_.k;
    return effective_h0(b.pb[0], b.qb[0], k) + effective_h0(b.pb[1], b.qb[1], k) +
           cfg_.gamma_mix * (b.pb[0] * b.qb[0] + b.pb[1] * b.qb[1]);
  }

  double xi(const ChainState& x) const {
    const auto b = ed_.to_bar(x);
    const double h = hamiltonian(x, prm_);
    return cfg_.n * std::pow(h, cfg_.n - 1) * (effective_h0(b.pb[0], b.qb[0], prm_.k) + effective_h0(b.pb[1], b.qb[1], prm_.k));
  }

  double u1(const ChainState& x) const {
    const double hn1 = std::pow(hamiltonian(x, prm_), cfg_.n - 1);
    return hn1 * hamiltonian(x, prm_) + hn1 * w(x);
  }

  double v(const ChainState& x) const { return u1(x) + std::pow(u0(x), cfg_.N_pow); }

  template <class F>
  GeneratorJet jet(F&& f, const ChainState& x) const {
    GeneratorJet j;
    j.value = detail::checked(f(x));
    j.L = apply_generator(f, x, prm_);
    for (int b = 0; b < 2; ++b) j.dp[b] = detail::momentum_derivative(f, x, EffectiveDynamics::site(b), kFirstDerivativeStep);
    return j;
  }

  /// Exact jet of H: L H = sum gamma_i (T_i - p_i^2), dH/dp_i = p_i.
  GeneratorJet energy_jet(const ChainState& x) const {
    GeneratorJet j;
    j.value = hamiltonian(x, prm_);
    for (int b = 0; b < 2; ++b) {
      const int i = EffectiveDynamics::site(b);
      j.L += prm_.gamma(i) * (prm_.temperature(i) - x.p[i] * x.p[i]);
      j.dp[b] = x.p[i];
    }
    return j;
  }

  double sigma2(int b) const {
    const int i = EffectiveDynamics::site(b);
    return 2.0 * prm_.gamma(i) * prm_.temperature(i);
  }

  GeneratorJet product(const GeneratorJet& a, const GeneratorJet& b) const {
    GeneratorJet r;
    r.value = a.value * b.value;
    r.L = a.value * b.L + b.value * a.L;
    for (int s = 0; s < 2; ++s) {
      r.L += sigma2(s) * a.dp[s] * b.dp[s];
      r.dp[s] = a.value * b.dp[s] + b.value * a.dp[s];
    }
    return r;
  }

  GeneratorJet power(const GeneratorJet& a, int m) const {
    GeneratorJet r;
    if (m == 0) return GeneratorJet::constant(1.0);
    const double am1 = std::pow(a.value, m - 1);
    r.value = am1 * a.value;
    r.L = m * am1 * a.L;
    if (m >= 2) {
      const double am2 = std::pow(a.value, m - 2);
      for (int s = 0; s < 2; ++s) r.L += 0.5 * m * (m - 1) * am2 * sigma2(s) * a.dp[s] * a.dp[s];
    }
    for (int s = 0; s < 2; ++s) r.dp[s] = m * am1 * a.dp[s];
    return r;
  }

  GeneratorJet u0_jet(const ChainState& x) const {
    return jet([this](const ChainState& y) { return u0(y); }, x);
  }

  /// U1 = H^n + H^{n-1} W with W collecting the corrector terms.
  double w(const ChainState& x) const {
    const auto& c = ed_.correctors();
    const int n = cfg_.n;
    const double psi = c.psi(x.p[1], x.q[1]);
    if (cfg_.regime == LyapunovRegime::k_low) return 0.5 * n * (prm_.gamma0 + prm_.gammaN) * psi;
    const auto b = ed_.to_bar(x);
    const double f2 = c.phi2(x.p[1], x.q[1]);
    double s = 0.0;
    for (int j = 0; j < 2; ++j) s += prm_.gamma(EffectiveDynamics::site(j)) * (psi - 2.0 * b.pb[j] * f2);
    return n * (s - effective_h0(b.pb[0], b.qb[0], prm_.k) - effective_h0(b.pb[1], b.qb[1], prm_.k));
  }

  GeneratorJet u1_jet(const ChainState& x) const {
    const auto h = energy_jet(x);
    const auto wj = jet([this](const ChainState& y) { return w(y); }, x);
    auto r = power(h, cfg_.n);
    const auto t = product(power(h, cfg_.n - 1), wj);
    r.value += t.value;
    r.L += t.L;
    for (int s = 0; s < 2; ++s) r.dp[s] += t.dp[s];
    return r;
  }

  /// L exp(theta U0) / exp(theta U0) = theta (L U0 + theta/2 sum sigma_i^2 (dU0/dp_i)^2).
  double exp_moment_rate(const ChainState& x, double theta) const {
    const auto j = u0_jet(x);
    double r = j.L;
    for (int s = 0; s < 2; ++s) r += 0.5 * theta * sigma2(s) * j.dp[s] * j.dp[s];
    return theta * r;
  }

  double generator_u0(const ChainState& x) const { return u0_jet(x).L; }
  double generator_u0_power(const ChainState& x, int m) const { return power(u0_jet(x), m).L; }
  double generator_u1(const ChainState& x) const { return u1_jet(x).L; }
  double generator_v(const ChainState& x) const { return generator_u1(x) + generator_u0_power(x, cfg_.N_pow); }

  /// Same quantity by brute-force finite differences on V itself; loses accuracy once H^n is large.
  double generator_v_direct(const ChainState& x) const {
    return apply_generator([this](const ChainState& y) { return v(y); }, x, prm_);
  }

  /// -n kappa (gamma0 + gamma2) H^{n-1} E1^{2/k-1}, E1 = 1 + H_f(p1, q1).
  double dominant_term(const ChainState& x) const {
    const double e1 = 1.0 + hf_energy(x.p[1], x.q[1], prm_.k);
    return -cfg_.n * ed_.correctors().kappa * (prm_.gamma0 + prm_.gammaN) * std::pow(hamiltonian(x, prm_), cfg_.n - 1) *
           std::pow(e1, 2.0 / prm_.k - 1.0);
  }

  double envelope_exponent() const { return cfg_.n + 2.0 / prm_.k - 2.0; }

 private:
  ChainParams prm_;
  LyapunovConfig cfg_;
  EffectiveDynamics ed0_;
  EffectiveDynamics ed_;
};

// ---------------------------------------------------------------------------
// Sampling and verification.

enum class SampleFamily { breather, boundary_loaded, equipartition };

inline std::string to_string(SampleFamily f) {
  switch (f) {
    case SampleFamily::breather: return "breather";
    case SampleFamily::boundary_loaded: return "boundary_loaded";
    case SampleFamily::equipartition: return "equipartition";
  }
  return "";
}

struct LabeledState {
  SampleFamily family;
  ChainState state;
};

namespace detail {

inline void shell_point(double k, double energy, SequentialRng& rng, double& p, double& q) {
  const FreeOscillator osc(k);
  const auto pt = osc.from_shell(2.0 * std::numbers::pi * rng.uniform(), energy);
  p = pt.p;
  q = pt.q;
}

}  // namespace detail

/// Mixture sampler. Breather: E1 log-uniform in [e_lo, e_hi] at a uniform angle, boundary sites
/// thermal at T = 1 in the barred variables of U0. Boundary-loaded: one or both bath sites log-uniform in energy, the rest thermal.
/// Equipartition: every site thermal at a log-uniform temperature in [1, e_hi / 3].
inline std::vector<LabeledState> lyapunov_sampler(const LyapunovFunctions& lf, int per_family, std::uint64_t seed,
                                                  double e_lo = 10.0, double e_hi = 1e6) {
  const ChainParams& prm = lf.params();
  const double k = prm.k;
  std::vector<LabeledState> out;
  PinnedSampler thermal(k, 0.5, 1.0);  // density exp(-(V + q^2/2)), T = 1
  for (int fam = 0; fam < 3; ++fam) {
    SequentialRng rng(seed, static_cast<std::uint32_t>(fam));
    for (int j = 0; j < per_family; ++j) {
      ChainState x = ChainState::zeros(3);
      auto thermal_site = [&](int i) {
        x.p[i] = rng.normal();
        x.q[i] = thermal.sample(rng);
      };
      const double u = rng.uniform();
      const double e = e_lo * std::pow(e_hi / e_lo, u);
      if (fam == 0) {
        detail::shell_point(k, e, rng, x.p[1], x.q[1]);
        thermal_site(0);
        thermal_site(2);
        BarState bar;
        bar.pb = {x.p[0], x.p[2]};
        bar.qb = {x.q[0], x.q[2]};
        x = lf.boundary_effective().from_bar(bar, x.p[1], x.q[1]);
        out.push_back({SampleFamily::breather, x});
      } else if (fam == 1) {
        const double which = rng.uniform();
        thermal_site(1);
        if (which < 1.0 / 3.0) {
          detail::shell_point(k, e, rng, x.p[0], x.q[0]);
          thermal_site(2);
        } else if (which < 2.0 / 3.0) {
          detail::shell_point(k, e, rng, x.p[2], x.q[2]);
          thermal_site(0);
        } else {
          detail::shell_point(k, 0.5 * e, rng, x.p[0], x.q[0]);
          detail::shell_point(k, 0.5 * e, rng, x.p[2], x.q[2]);
        }
        out.push_back({SampleFamily::boundary_loaded, x});
      } else {
        const double t = std::pow(e_hi / 3.0, rng.uniform());
        PinnedSampler hot(k, 0.5 / t, 1.0);
        for (int i = 0; i < 3; ++i) {
          x.p[i] = std::sqrt(t) * rng.normal();
          x.q[i] = hot.sample(rng);
        }
        out.push_back({SampleFamily::equipartition, x});
      }
    }
  }
  return out;
}

struct DissipationPoint {
  SampleFamily family;
  double H = 0.0, E1 = 0.0;
  double U0 = 0.0, LU0 = 0.0, LU1 = 0.0, LV = 0.0, dominant = 0.0;
};

struct DissipationReport {
  LyapunovConfig config;
  std::vector<DissipationPoint> points;
  std::vector<std::size_t> skipped;        // indices where the generator could not be evaluated
  std::vector<double> threshold_by_npow;   // index N-1
  double threshold = 0.0;                  // max H with LV >= 0 at the chosen N_pow
  bool threshold_ok = false;
  LineFit envelope;                        // log(-LV) vs log H, breather states with H >= envelope_min_h
  double envelope_predicted = 0.0;
  bool envelope_ok = false;
  double u0_bound_low = 0.0, u0_bound_high = 0.0;  // sup of LU0 + g U0 below / inside the top decade
  bool u0_bound_ok = false;
  double coercive_c = 0.0;                 // min V / H over H >= 100
  bool pass() const { return threshold_ok && envelope_ok && u0_bound_ok && coercive_c > 0.0; }
};

inline constexpr double kThresholdGate = 1e4;  // two decades below the sample's top energy
inline constexpr double kEnvelopeTolerance = 0.1;
inline constexpr int kMaxNPow = 16;

/// Evaluates L V and L U0 on the sample, picks the smallest N_pow (up to 16) for which
/// L V < 0 at every sampled state with H above kThresholdGate, fits the breather envelope
/// over the same range and checks that sup(L U0 + g U0) does not grow into the top decade.
inline DissipationReport verify_dissipation(const ChainParams& prm, const Correctors& c, LyapunovConfig cfg,
                                            const std::vector<LabeledState>& sample, double envelope_min_h = kThresholdGate) {
  LyapunovFunctions lf(prm, c, cfg);
  DissipationReport rep;
  std::vector<std::vector<double>> lu0n;  // per point, L U0^N for N = 1..kMaxNPow
  for (std::size_t j = 0; j < sample.size(); ++j) {
    const auto& x = sample[j].state;
    DissipationPoint pt;
    pt.family = sample[j].family;
    pt.H = hamiltonian(x, prm);
    pt.E1 = 1.0 + hf_energy(x.p[1], x.q[1], prm.k);
    std::vector<double> powers(kMaxNPow);
    try {
      const auto j0 = lf.u0_jet(x);
      pt.U0 = j0.value;
      pt.LU0 = j0.L;
      pt.LU1 = lf.generator_u1(x);
      for (int m = 1; m <= kMaxNPow; ++m) powers[m - 1] = lf.power(j0, m).L;
    } catch (const std::domain_error&) {
      rep.skipped.push_back(j);
      continue;
    }
    pt.dominant = lf.dominant_term(x);
    rep.points.push_back(pt);
    lu0n.push_back(std::move(powers));
  }

  rep.threshold_by_npow.assign(kMaxNPow, std::numeric_limits<double>::infinity());
  int chosen = 0;
  for (int m = 1; m <= kMaxNPow; ++m) {
    double thr = 0.0;
    for (std::size_t j = 0; j < rep.points.size(); ++j)
      if (rep.points[j].LU1 + lu0n[j][m - 1] >= 0.0) thr = std::max(thr, rep.points[j].H);
    rep.threshold_by_npow[m - 1] = thr;
    if (!chosen && thr <= kThresholdGate) chosen = m;
  }
  if (!chosen) {
    chosen = static_cast<int>(std::min_element(rep.threshold_by_npow.begin(), rep.threshold_by_npow.end()) -
                              rep.threshold_by_npow.begin()) + 1;
  }
  cfg.N_pow = chosen;
  rep.config = cfg;
  lf.set_n_pow(chosen);
  rep.threshold = rep.threshold_by_npow[chosen - 1];
  rep.threshold_ok = rep.threshold <= kThresholdGate;

  std::vector<double> lx, ly;
  bool all_negative = true;
  for (std::size_t j = 0; j < rep.points.size(); ++j) {
    auto& pt = rep.points[j];
    pt.LV = pt.LU1 + lu0n[j][chosen - 1];
    if (pt.family == SampleFamily::breather && pt.H >= envelope_min_h) {
      if (pt.LV >= 0.0) {
        all_negative = false;
        continue;
      }
      lx.push_back(std::log(pt.H));
      ly.push_back(std::log(-pt.LV));
    }
  }
  rep.envelope_predicted = lf.envelope_exponent();
  if (lx.size() >= 3) {
    rep.envelope = fit_line(lx, ly);
    rep.envelope_ok = all_negative && std::abs(rep.envelope.slope - rep.envelope_predicted) <= kEnvelopeTolerance;
  }

  rep.u0_bound_low = -std::numeric_limits<double>::infinity();
  rep.u0_bound_high = -std::numeric_limits<double>::infinity();
  double h_max = 0.0;
  for (const auto& pt : rep.points) h_max = std::max(h_max, pt.H);
  for (const auto& pt : rep.points) {
    const double b = pt.LU0 + cfg.gamma_mix * pt.U0;
    if (pt.H < 0.1 * h_max) rep.u0_bound_low = std::max(rep.u0_bound_low, b);
    else rep.u0_bound_high = std::max(rep.u0_bound_high, b);
  }
  // V >= c H over H >= 100: recompute V on the kept states.
  rep.coercive_c = std::numeric_limits<double>::infinity();
  {
    std::size_t kept = 0;
    for (std::size_t j = 0; j < sample.size(); ++j) {
      if (std::find(rep.skipped.begin(), rep.skipped.end(), j) != rep.skipped.end()) continue;
      const auto& pt = rep.points[kept++];
      if (pt.H >= 100.0) rep.coercive_c = std::min(rep.coercive_c, lf.v(sample[j].state) / pt.H);
    }
  }
  rep.u0_bound_ok = rep.u0_bound_high <= kNoGrowthFactor * std::max(1.0, rep.u0_bound_low);
  return rep;
}

struct StationaryCheck {
  double mean = 0.0, stderr_ = 0.0;
  std::size_t n_samples = 0;
  int n_batches = 0;
  double z() const { return stderr_ > 0.0 ? mean / stderr_ : 0.0; }
  bool consistent(double n_sigma = 3.0) const { return std::abs(mean) <= n_sigma * stderr_; }
};

/// Time average of L V along one stationary run (requires T0 = T2), batch-means standard error.
inline StationaryCheck stationary_generator_average(const LyapunovFunctions& lf, double t_total, double h,
                                                    std::uint64_t seed, double burn_in = 100.0,
                                                    double sample_every = 0.5, int n_batches = 20) {
  const auto& prm = lf.params();
  if (prm.T0 != prm.TN) throw std::invalid_argument("stationary check needs equal temperatures");
  Integrator in(prm, h);
  CounterStream rng(seed, 0);
  ChainState x = ChainState::zeros(3);
  const long n = static_cast<long>(std::llround(t_total / h));
  const long stride = std::max(1L, static_cast<long>(std::llround(sample_every / h)));
  const long skip = static_cast<long>(std::llround(burn_in / h));
  std::vector<double> vals;
  for (long i = 0; i < n; ++i) {
    in.step(x, rng, static_cast<std::uint64_t>(i));
    if (i >= skip && (i - skip) % stride == 0) vals.push_back(lf.generator_v(x));
  }
  StationaryCheck out;
  out.n_batches = n_batches;
  const std::size_t bs = vals.size() / static_cast<std::size_t>(n_batches);
  if (bs < 2) throw std::invalid_argument("run too short for batch means");
  std::vector<double> means(n_batches, 0.0);
  for (int b = 0; b < n_batches; ++b) {
    for (std::size_t j = b * bs; j < (b + 1) * bs; ++j) means[b] += vals[j];
    means[b] /= static_cast<double>(bs);
    out.mean += means[b];
  }
  out.mean /= n_batches;
  double var = 0.0;
  for (double m : means) var += (m - out.mean) * (m - out.mean);
  out.stderr_ = std::sqrt(var / (n_batches - 1) / n_batches);
  out.n_samples = bs * n_batches;
  return out;
}

}  // namespace chainlab
