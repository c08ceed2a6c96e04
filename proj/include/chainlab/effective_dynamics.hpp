#pragma once

// Change of variables for the boundary oscillators of a three-site chain,
//   pb_i = p_i + Phi_p^i(p1, q1),  qb_i = q_i + Phi_q^i,
// which removes the fast forcing by a high-energy middle oscillator, and the
// remainder terms of the resulting effective equations
//   dqb = pb dt + R_q dt + Sigma_q dW,
//   dpb = (-V'(qb) - qb - gamma pb + R_p) dt + Sigma_p dW.
//
// Variants:
//   thm_4_1, k >= 2      : Phi_p = Phi, Phi_q = 0
//   thm_4_1, 3/2 < k < 2 : Phi_p = Phi - gamma_i Phi2, Phi_q = rising(E1 / E_i^{3/2}) Phi2
//   thm_4_3, k >= 2      : Phi_p = Phi - gamma_i Phi2, Phi_q = Phi2
// with E_j = 1 + H_f(p_j, q_j) in the original coordinates.

#include <chainlab/chain_model.hpp>
#include <chainlab/correctors.hpp>
#include <chainlab/cutoffs.hpp>
#include <chainlab/random.hpp>
#include <chainlab/sde_integrator.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace chainlab {

enum class EffectiveVariant { thm_4_1, thm_4_3 };

inline std::string to_string(EffectiveVariant v) { return v == EffectiveVariant::thm_4_1 ? "thm_4_1" : "thm_4_3"; }

inline constexpr double kCutoffExponent = 1.5;  // alpha in rising(E1 / E_i^alpha)
inline constexpr double kDefaultDelta = 1.0 / 12.0;

/// Barred boundary coordinates; index 0 is site 0 and index 1 is site 2.
struct BarState {
  std::array<double, 2> pb{}, qb{};
  std::array<double, 2> energy{};  // 1 + H_f(pb, qb)
  EffectiveVariant variant = EffectiveVariant::thm_4_1;
};

struct RemainderSample {
  std::array<double, 2> Rp{}, Rq{}, Sp{}, Sq{};
};

class EffectiveDynamics {
 public:
  EffectiveDynamics(ChainParams prm, Correctors c, EffectiveVariant v) : prm_(prm), c_(std::move(c)), v_(v) {
    if (prm_.n_sites != 3) throw std::invalid_argument("effective dynamics needs a 3-site chain");
    if (std::abs(prm_.k - c_.k) > 1e-14) throw std::invalid_argument("corrector table built for a different k");
    if (v_ == EffectiveVariant::thm_4_1 && !(prm_.k > 1.5)) throw std::domain_error("variant thm_4_1 requires k > 3/2");
    if (v_ == EffectiveVariant::thm_4_3 && !(prm_.k >= 2.0)) throw std::domain_error("variant thm_4_3 requires k >= 2");
  }

  const ChainParams& params() const { return prm_; }
  const Correctors& correctors() const { return c_; }
  EffectiveVariant variant() const { return v_; }

  /// Rigid form: no second corrector.
  bool rigid() const { return v_ == EffectiveVariant::thm_4_1 && prm_.k >= 2.0; }
  bool uses_cutoff() const { return v_ == EffectiveVariant::thm_4_1 && prm_.k < 2.0; }

  static int site(int b) { return b == 0 ? 0 : 2; }

  double shift_p(const ChainState& x, int b) const {
    const double f = c_.phi(x.p[1], x.q[1]);
    if (rigid()) return f;
    return f - prm_.gamma(site(b)) * c_.phi2(x.p[1], x.q[1]);
  }

  double cutoff_weight(double e1, double ei) const { return cutoff::rising(e1 / std::pow(ei, kCutoffExponent)); }

  double shift_q(const ChainState& x, int b) const {
    if (rigid()) return 0.0;
    const double f2 = c_.phi2(x.p[1], x.q[1]);
    if (!uses_cutoff()) return f2;
    const int i = site(b);
    const double e1 = 1.0 + hf_energy(x.p[1], x.q[1], prm_.k);
    const double ei = 1.0 + hf_energy(x.p[i], x.q[i], prm_.k);
    return cutoff_weight(e1, ei) * f2;
  }

  BarState to_bar(const ChainState& x) const {
    BarState s;
    s.variant = v_;
    for (int b = 0; b < 2; ++b) {
      const int i = site(b);
      s.pb[b] = x.p[i] + shift_p(x, b);
      s.qb[b] = x.q[i] + shift_q(x, b);
      s.energy[b] = 1.0 + hf_energy(s.pb[b], s.qb[b], prm_.k);
    }
    return s;
  }

  /// Inverse map given the barred boundary coordinates and the middle site.
  ChainState from_bar(const BarState& s, double p1, double q1) const {
    ChainState x = ChainState::zeros(3);
    x.p[1] = p1;
    x.q[1] = q1;
    const double f = c_.phi(p1, q1);
    const double f2 = rigid() ? 0.0 : c_.phi2(p1, q1);
    const double e1 = 1.0 + hf_energy(p1, q1, prm_.k);
    for (int b = 0; b < 2; ++b) {
      const int i = site(b);
      x.p[i] = s.pb[b] - (rigid() ? f : f - prm_.gamma(i) * f2);
      if (rigid()) {
        x.q[i] = s.qb[b];
      } else if (!uses_cutoff()) {
        x.q[i] = s.qb[b] - f2;
      } else {
        // Solve q + rising(E1 / E_i(q)^{3/2}) Phi2 = qb; the root lies within |Phi2| of qb.
        const double pi = x.p[i];
        auto F = [&](double q) { return q + cutoff_weight(e1, 1.0 + hf_energy(pi, q, prm_.k)) * f2 - s.qb[b]; };
        double lo = s.qb[b] - std::abs(f2), hi = s.qb[b] + std::abs(f2);
        double flo = F(lo);
        if (flo == 0.0 || lo == hi) {
          x.q[i] = lo;
          continue;
        }
        for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
          const double mid = 0.5 * (lo + hi);
          const double fm = F(mid);
          if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
          } else {
            hi = mid;
          }
        }
        x.q[i] = 0.5 * (lo + hi);
      }
    }
    return x;
  }

  RemainderSample remainders(const ChainState& x) const {
    const double k = prm_.k;
    const double p1 = x.p[1], q1 = x.q[1];
    const double lap = x.q[0] + x.q[2] - 2.0 * q1;
    const double e1f = hf_energy(p1, q1, k);
    const double f = c_.phi(p1, q1);
    const double dpf = c_.phi.partials(p1, q1).p;
    // L Phi = R(p1, q1) - q1 + lap dP Phi, with R(P, Q) = Q psi(H_f).
    const double l_phi = q1 * cutoff::plateau(e1f) - q1 + lap * dpf;
    double f2 = 0.0, l_phi2 = 0.0;
    if (!rigid()) {
      f2 = c_.phi2(p1, q1);
      l_phi2 = f + lap * c_.phi2.partials(p1, q1).p;  // L Phi2 = Phi + lap dP Phi2
    }
    RemainderSample r;
    for (int b = 0; b < 2; ++b) {
      const int i = site(b);
      const double g = prm_.gamma(i), sig = prm_.sigma(i);
      const double pi = x.p[i], qi = x.q[i];
      double phip, l_phip;
      if (rigid()) {
        phip = f;
        l_phip = l_phi;
      } else {
        phip = f - g * f2;
        l_phip = l_phi - g * l_phi2;
      }
      double phiq = 0.0, l_phiq = 0.0, dphiq_dp = 0.0;
      if (!rigid() && !uses_cutoff()) {
        phiq = f2;
        l_phiq = l_phi2;
      } else if (uses_cutoff()) {
        const double a = kCutoffExponent;
        const double e1 = 1.0 + e1f;
        const double ei = 1.0 + hf_energy(pi, qi, k);
        const double u = e1 / std::pow(ei, a);
        const double c = cutoff::rising(u), dc = cutoff::rising_d1(u), ddc = cutoff::rising_d2(u);
        const double l_e1 = p1 * lap;
        const double l_ei = pi * (q1 - qi) - g * pi * pi + g * prm_.temperature(i);
        const double l_u = std::pow(ei, -a) * l_e1 - a * e1 * std::pow(ei, -a - 1.0) * l_ei +
                           0.5 * sig * sig * a * (a + 1.0) * e1 * std::pow(ei, -a - 2.0) * pi * pi;
        const double du_dp = -a * e1 * std::pow(ei, -a - 1.0) * pi;
        const double l_c = dc * l_u + 0.5 * sig * sig * ddc * du_dp * du_dp;
        phiq = c * f2;
        l_phiq = c * l_phi2 + f2 * l_c;
        dphiq_dp = dc * du_dp * f2;
      }
      r.Rp[b] = signed_power(qi + phiq, k) - signed_power(qi, k) + phiq + g * phip + l_phip + q1;
      r.Rq[b] = l_phiq - phip;
      r.Sp[b] = sig;
      r.Sq[b] = sig * dphiq_dp;
    }
    return r;
  }

 private:
  ChainParams prm_;
  Correctors c_;
  EffectiveVariant v_;
};

// ---------------------------------------------------------------------------
// Bound verification along trajectories.

/// x^{-a} <= (x+y)^{-a} max(2^a, y^a). Fails for x <= y < x + y when a > 0 (x = 1, y = 3);
/// kept to report where it breaks.
inline bool lemma_power_bound_holds(double x, double y, double a) {
  return std::pow(x, -a) <= std::pow(x + y, -a) * std::max(std::pow(2.0, a), std::pow(y, a)) * (1.0 + 1e-12);
}

/// x^{-a} <= (x+y)^{-a} (2y)^a for x, y >= 1, a > 0, using x + y <= 2 max(x, y).
inline bool power_bound_holds(double x, double y, double a) {
  return std::pow(x, -a) <= std::pow(x + y, -a) * std::pow(2.0 * y, a) * (1.0 + 1e-12);
}

struct RatioRow {
  double e1 = 0.0;
  std::vector<double> values;
};

/// Names of the normalized remainder ratios, in the order produced by remainder_ratios().
inline std::vector<std::string> remainder_ratio_names(EffectiveVariant v) {
  if (v == EffectiveVariant::thm_4_1)
    return {"Rp0", "Rp2", "Rq0", "Rq2", "Sp0", "Sp2", "Sq0", "Sq2"};
  return {"Rp0", "Rp2", "Rq0", "Rq2"};
}

inline std::vector<double> remainder_ratios(const EffectiveDynamics& ed, const ChainState& x, double delta) {
  const auto& prm = ed.params();
  const double k = prm.k;
  const auto r = ed.remainders(x);
  const auto bar = ed.to_bar(x);
  std::vector<double> out;
  if (ed.variant() == EffectiveVariant::thm_4_1) {
    const double eb0 = bar.energy[0], eb2 = bar.energy[1];
    for (int b = 0; b < 2; ++b) out.push_back(std::abs(r.Rp[b]) / std::pow(eb0 + eb2, 0.5 - delta));
    for (int b = 0; b < 2; ++b) {
      const double ei = bar.energy[b], eo = bar.energy[1 - b];
      out.push_back(std::abs(r.Rq[b]) / (std::pow(ei, 0.5 / k - delta) + std::pow(eo, 0.5 / k) / std::pow(ei, delta)));
    }
    for (int b = 0; b < 2; ++b) out.push_back(std::abs(r.Sp[b]));
    for (int b = 0; b < 2; ++b) out.push_back(std::abs(r.Sq[b]) * std::sqrt(bar.energy[b]));
  } else {
    const double s = bar.energy[0] + bar.energy[1];
    const double hp = std::pow(hamiltonian(x, prm), 1.5 / k - 1.0);
    for (int b = 0; b < 2; ++b) out.push_back(std::abs(r.Rp[b]) / (s * s * hp));
    for (int b = 0; b < 2; ++b) out.push_back(std::abs(r.Rq[b]) / (s * hp));
  }
  return out;
}

struct BoundReport {
  EffectiveVariant variant = EffectiveVariant::thm_4_1;
  double delta = kDefaultDelta;
  std::vector<std::string> names;
  std::vector<double> sup_first, sup_last, sup_all;
  double e1_min = 0.0, e1_max = 0.0;
  std::vector<RatioRow> rows;
  bool pass = false;
  std::vector<bool> pass_each;
};

inline constexpr double kNoGrowthFactor = 1.2;

/// Sup of each normalized ratio over the first and last decade of E1 = 1 + H_f(p1, q1);
/// a ratio passes if sup(last) <= 1.2 sup(first).
inline BoundReport verify_error_bounds(const std::vector<ChainState>& traj, const EffectiveDynamics& ed,
                                       double delta = kDefaultDelta, bool keep_rows = false) {
  BoundReport rep;
  rep.variant = ed.variant();
  rep.delta = delta;
  rep.names = remainder_ratio_names(ed.variant());
  const std::size_t m = rep.names.size();
  std::vector<RatioRow> rows;
  rows.reserve(traj.size());
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& x : traj) {
    RatioRow r;
    r.e1 = 1.0 + hf_energy(x.p[1], x.q[1], ed.params().k);
    r.values = remainder_ratios(ed, x, delta);
    lo = std::min(lo, r.e1);
    hi = std::max(hi, r.e1);
    rows.push_back(std::move(r));
  }
  if (rows.empty() || !(hi >= 10.0 * lo)) throw std::invalid_argument("trajectory must span at least one decade of E1");
  rep.e1_min = lo;
  rep.e1_max = hi;
  rep.sup_first.assign(m, 0.0);
  rep.sup_last.assign(m, 0.0);
  rep.sup_all.assign(m, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < m; ++j) {
      rep.sup_all[j] = std::max(rep.sup_all[j], r.values[j]);
      if (r.e1 < 10.0 * lo) rep.sup_first[j] = std::max(rep.sup_first[j], r.values[j]);
      if (r.e1 > hi / 10.0) rep.sup_last[j] = std::max(rep.sup_last[j], r.values[j]);
    }
  rep.pass = true;
  for (std::size_t j = 0; j < m; ++j) {
    const bool ok = std::isfinite(rep.sup_all[j]) && rep.sup_last[j] <= kNoGrowthFactor * rep.sup_first[j];
    rep.pass_each.push_back(ok);
    rep.pass = rep.pass && ok;
  }
  if (keep_rows) rep.rows = std::move(rows);
  return rep;
}

/// Concatenated breather segments with middle energies log-spaced over [e_lo, e_hi].
/// Each segment starts from breather_init-type data, runs for t_segment with
/// h = min(1e-3, 0.02 E^{-alpha}) and records every `stride` steps.
inline std::vector<ChainState> breather_trajectory(const ChainParams& prm, double e_lo, double e_hi,
                                                   int segments_per_decade, double t_segment, std::uint64_t seed,
                                                   int samples_per_segment = 2000) {
  const double alpha = 0.5 - 0.5 / prm.k;
  const int n_dec = static_cast<int>(std::ceil(std::log10(e_hi / e_lo) * segments_per_decade - 1e-9));
  std::vector<ChainState> out;
  for (int s = 0; s <= n_dec; ++s) {
    const double e = e_lo * std::pow(10.0, static_cast<double>(s) / segments_per_decade);
    if (e > e_hi * (1.0 + 1e-12)) break;
    IntegratorConfig cfg;
    cfg.h = std::min(1e-3, 0.02 * std::pow(e, -alpha));
    cfg.T_final = t_segment;
    cfg.seed = seed;
    const auto n = cfg.n_steps();
    cfg.record_stride = static_cast<int>(std::max<std::uint64_t>(1, n / samples_per_segment));
    ChainState x = ChainState::zeros(prm.n_sites);
    x.p[prm.middle()] = std::sqrt(2.0 * e);
    Integrator it(prm, cfg.h);
    const CounterStream rng(seed, static_cast<std::uint32_t>(s));
    for (std::uint64_t j = 0; j < n; ++j) {
      it.step(x, rng, j);
      if ((j + 1) % cfg.record_stride == 0) out.push_back(x);
    }
  }
  return out;
}

}  // namespace chainlab
