#pragma once

// Approximate eigenfunctions of the flat-space conjugated generator:
//   three-site: phi = exp(-a0 H0(pb0, q0) - a2 H2(pb2, q2)) chi(H1/E),  pb_i = p_i + Phi(p1, q1)
//   long chain: phi = exp(-a0 H0(pb, qb) - aN Hr(pb, qb)) chi(Hc/E), with pb, qb shifted on
//               sites 1 and 3 by Phi and Phi2 evaluated at (p2, q2)
// with a_i = alpha_i (plain) or alpha_i* (starred). Residuals are evaluated from
// closed forms and the flat L^2 norms by importance sampling.

#include <chainlab/chain_model.hpp>
#include <chainlab/correctors.hpp>
#include <chainlab/cutoffs.hpp>
#include <chainlab/fit.hpp>
#include <chainlab/random.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace chainlab {

enum class ProbeVariant { three_site, long_chain };

inline std::string to_string(ProbeVariant v) { return v == ProbeVariant::three_site ? "three_site" : "long_chain"; }

struct EigenfunctionSpec {
  ProbeVariant variant = ProbeVariant::three_site;
  double shell_energy = 81.0;  // script E; chi is supported on H_shell in [E, 2E]
  ChainParams params;
  bool starred = false;

  int shell_site() const { return variant == ProbeVariant::three_site ? 1 : 2; }

  void validate() const {
    params.validate();
    if (!(shell_energy >= 3.0)) throw std::invalid_argument("shell energy must be >= 3");
    if (variant == ProbeVariant::three_site && params.n_sites != 3)
      throw std::invalid_argument("three_site variant needs 3 sites");
    if (variant == ProbeVariant::long_chain && params.n_sites < 5)
      throw std::invalid_argument("long_chain variant needs at least 5 sites");
  }
  /// Exponent weight in phi at bath site i, and the other OU constant.
  double a(int i) const { return starred ? params.alpha_star(i) : params.alpha(i); }
  double b(int i) const { return starred ? params.alpha(i) : params.alpha_star(i); }
};

struct MCEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n_samples = 0;
  std::string estimator;
};

struct NormEstimate {
  double shell_energy = 0.0;
  MCEstimate phi_norm;       // ||phi||
  MCEstimate residual_norm;  // ||L phi||
  MCEstimate ratio;          // ||L phi|| / ||phi||, common random numbers
  double acceptance = 1.0;   // rejection-sampler acceptance rate
};

/// Samples q from the density proportional to exp(-2a (|q|^{2k}/(2k) + c q^2/2)) by
/// rejection from the Gaussian N(0, 1/(2ac)).
class PinnedSampler {
 public:
  PinnedSampler(double k, double a, double c) : k_(k), a_(a), sd_(1.0 / std::sqrt(2.0 * a * c)) {
    if (!(a > 0.0) || !(c > 0.0)) throw std::invalid_argument("sampler requires positive weights");
    // Normalizing constant by the trapezoid rule on a range where the density is < e^-60.
    double L = 1.0;
    while (2.0 * a * (pinning_potential(L, k) + 0.5 * c * L * L) < 60.0) L *= 1.25;
    const int n = 20000;
    const double dq = 2.0 * L / n;
    double s = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double q = -L + i * dq;
      const double w = (i == 0 || i == n) ? 0.5 : 1.0;
      s += w * std::exp(-2.0 * a * (pinning_potential(q, k) + 0.5 * c * q * q));
    }
    z_ = s * dq;
  }

  double sample(SequentialRng& rng) {
    for (int tries = 0; tries < 100000; ++tries) {
      const double q = sd_ * rng.normal();
      ++proposed_;
      if (rng.uniform() < std::exp(-2.0 * a_ * pinning_potential(q, k_))) {
        ++accepted_;
        return q;
      }
    }
    throw std::runtime_error("proposal mismatch");
  }

  double normalizer() const { return z_; }
  double acceptance() const { return proposed_ ? static_cast<double>(accepted_) / proposed_ : 1.0; }

 private:
  double k_, a_, sd_, z_ = 1.0;
  std::uint64_t proposed_ = 0, accepted_ = 0;
};

class SpectralProbe {
 public:
  explicit SpectralProbe(Correctors c) : c_(std::move(c)) {}

  const Correctors& correctors() const { return c_; }

  double eval_phi(const EigenfunctionSpec& s, const ChainState& x) const {
    check(s);
    const int m = s.shell_site();
    const double e = hf_energy(x.p[m], x.q[m], s.params.k) / s.shell_energy;
    if (e <= 1.0 || e >= 2.0) return 0.0;
    return std::exp(log_weight(s, x)) * cutoff::bump(e);
  }

  /// (L phi)/phi on the support of chi (zero outside).
  double residual_over_phi(const EigenfunctionSpec& s, const ChainState& x) const {
    check(s);
    const int m = s.shell_site();
    const double e = hf_energy(x.p[m], x.q[m], s.params.k) / s.shell_energy;
    if (e <= 1.0 || e >= 2.0) return 0.0;
    return s.variant == ProbeVariant::three_site ? three_site_residual(s, x, e) : long_chain_residual(s, x, e);
  }

  double eval_residual(const EigenfunctionSpec& s, const ChainState& x) const {
    const double phi = eval_phi(s, x);
    return phi == 0.0 ? 0.0 : phi * residual_over_phi(s, x);
  }

  /// Importance-sampled ||phi||, ||L phi|| and their ratio from one sample stream.
  NormEstimate estimate_norms(const EigenfunctionSpec& s, std::size_t n_samples, std::uint64_t seed,
                              std::uint32_t stream = 0) const {
    check(s);
    s.validate();
    if (n_samples < 2) throw std::invalid_argument("need at least two samples");
    const auto& prm = s.params;
    const double k = prm.k;
    const int n = prm.n_sites, m = s.shell_site(), last = prm.last();
    const FreeOscillator osc(k);
    const double alpha = osc.time_exponent();
    SequentialRng rng(seed, stream);

    // Per-site proposals for the barred coordinates.
    std::vector<PinnedSampler> qs;
    std::vector<double> p_sd(n, 0.0);
    double log_z = 0.0;
    for (int i = 0; i < n; ++i) {
      if (i == m) {
        qs.emplace_back(k, 1.0, 1.0);  // unused placeholder
        continue;
      }
      const double a = i < m ? s.a(0) : s.a(last);
      const double c = quadratic_count(s, i);
      qs.emplace_back(k, a, c);
      p_sd[i] = 1.0 / std::sqrt(2.0 * a);
      log_z += 0.5 * std::log(std::numbers::pi / a) + std::log(qs.back().normalizer());
    }
    const double vol = 2.0 * std::numbers::pi * s.shell_energy;

    double sw = 0.0, swr = 0.0, sww = 0.0, swrwr = 0.0, swwr = 0.0;
    ChainState x = ChainState::zeros(n);
    ChainState bar = ChainState::zeros(n);
    for (std::size_t j = 0; j < n_samples; ++j) {
      const double th = 2.0 * std::numbers::pi * rng.uniform();
      const double en = s.shell_energy * (1.0 + rng.uniform());
      const double r = osc.radius(th);
      const auto pq = osc.from_shell(th, en, r);
      double w = std::pow(en, -alpha) / osc.omega(th, r) * vol;
      const double chi = cutoff::bump(en / s.shell_energy);
      w *= chi * chi;
      for (int i = 0; i < n; ++i) {
        if (i == m) continue;
        bar.p[i] = p_sd[i] * rng.normal();
        bar.q[i] = qs[i].sample(rng);
      }
      bar.p[m] = pq.p;
      bar.q[m] = pq.q;
      w *= std::exp(coupling_log_weight(s, bar));
      unbar(s, bar, x);
      const double res = w > 0.0 ? residual_over_phi(s, x) : 0.0;
      const double wr = w * res * res;
      sw += w;
      swr += wr;
      sww += w * w;
      swrwr += wr * wr;
      swwr += w * wr;
    }
    const double nn = static_cast<double>(n_samples);
    const double zb = std::exp(log_z);
    const double B = sw / nn, A = swr / nn;
    const double vB = (sww / nn - B * B) / (nn - 1.0);
    const double vA = (swrwr / nn - A * A) / (nn - 1.0);
    const double cAB = (swwr / nn - A * B) / (nn - 1.0);

    NormEstimate out;
    out.shell_energy = s.shell_energy;
    double acc = 1.0;
    for (int i = 0; i < n; ++i)
      if (i != m) acc = std::min(acc, qs[i].acceptance());
    out.acceptance = acc;
    if (acc < 0.01) throw std::runtime_error("proposal mismatch");

    const double norm = std::sqrt(zb * B);
    out.phi_norm = {norm, 0.5 * norm * std::sqrt(std::max(vB, 0.0)) / B, n_samples, "importance:shell-uniform"};
    const double rn = std::sqrt(zb * A);
    out.residual_norm = {rn, A > 0.0 ? 0.5 * rn * std::sqrt(std::max(vA, 0.0)) / A : 0.0, n_samples,
                         "importance:shell-uniform"};
    const double q = A / B;
    const double vq = (vA - 2.0 * q * cAB + q * q * vB) / (B * B);
    const double ratio = std::sqrt(q);
    out.ratio = {ratio, q > 0.0 ? 0.5 * std::sqrt(std::max(vq, 0.0)) / ratio : 0.0, n_samples,
                 "importance:common-random-numbers"};
    return out;
  }

  /// Barred coordinates of a state (identity off the shifted sites).
  ChainState to_bar(const EigenfunctionSpec& s, const ChainState& x) const {
    ChainState b = x;
    if (s.variant == ProbeVariant::three_site) {
      const double f = c_.phi(x.p[1], x.q[1]);
      b.p[0] += f;
      b.p[2] += f;
    } else {
      const double f = c_.phi(x.p[2], x.q[2]);
      const double f2 = c_.require_phi2()(x.p[2], x.q[2]);
      for (int i : {1, 3}) {
        b.p[i] += f;
        b.q[i] += f2;
      }
    }
    return b;
  }

 private:
  void check(const EigenfunctionSpec& s) const {
    if (std::abs(s.params.k - c_.k) > 1e-14) throw std::invalid_argument("corrector table built for a different k");
    if (s.variant == ProbeVariant::long_chain) c_.require_phi2();
  }

  void unbar(const EigenfunctionSpec& s, const ChainState& bar, ChainState& x) const {
    x = bar;
    if (s.variant == ProbeVariant::three_site) {
      const double f = c_.phi(bar.p[1], bar.q[1]);
      x.p[0] -= f;
      x.p[2] -= f;
    } else {
      const double f = c_.phi(bar.p[2], bar.q[2]);
      const double f2 = c_.phi2(bar.p[2], bar.q[2]);
      for (int i : {1, 3}) {
        x.p[i] -= f;
        x.q[i] -= f2;
      }
    }
  }

  // Number of q^2/2 halves in the quadratic part of the barred energy at site i.
  static double quadratic_count(const EigenfunctionSpec& s, int i) {
    if (s.variant == ProbeVariant::three_site) return 1.0;
    const int last = s.params.last();
    if (i == 0) return 1.0;
    if (i == 1) return 2.0;
    return i == last ? 1.0 : 2.0;
  }

  // Cross terms of the barred energies not covered by the product proposal.
  static double coupling_log_weight(const EigenfunctionSpec& s, const ChainState& b) {
    if (s.variant == ProbeVariant::three_site) return 0.0;
    const int last = s.params.last();
    double lw = 2.0 * s.a(0) * b.q[0] * b.q[1];
    for (int i = 4; i <= last; ++i) lw += 2.0 * s.a(last) * b.q[i] * b.q[i - 1];
    return lw;
  }

  double log_weight(const EigenfunctionSpec& s, const ChainState& x) const {
    const double k = s.params.k;
    const auto b = to_bar(s, x);
    if (s.variant == ProbeVariant::three_site)
      return -s.a(0) * three_site_h0(b.p[0], b.q[0], k) - s.a(2) * three_site_h0(b.p[2], b.q[2], k);
    return -s.a(0) * long_chain_h0(b, k) - s.a(s.params.last()) * long_chain_hr(b, k);
  }

  double three_site_residual(const EigenfunctionSpec& s, const ChainState& x, double e) const {
    const double k = s.params.k;
    const double f = c_.phi(x.p[1], x.q[1]);
    const double dp = c_.phi.partials(x.p[1], x.q[1]).p;
    const double a0 = s.a(0), a2 = s.a(2), b0 = s.b(0), b2 = s.b(2);
    const double pb0 = x.p[0] + f, pb2 = x.p[2] + f;
    const double lap = x.q[0] + x.q[2] - 2.0 * x.q[1];
    const double transport = a0 * f * (signed_power(x.q[0], k) + x.q[0]) + a2 * f * (signed_power(x.q[2], k) + x.q[2]) +
                             lap * (-(a0 * pb0 + a2 * pb2) * dp + x.p[1] * cutoff::bump_log_d1(e) / s.shell_energy);
    const auto& prm = s.params;
    const double ou = prm.gamma(0) * prm.temperature(0) * a0 * f * (a0 * pb0 + b0 * x.p[0]) +
                      prm.gamma(2) * prm.temperature(2) * a2 * f * (a2 * pb2 + b2 * x.p[2]);
    return (s.starred ? -transport : transport) + ou;
  }

  double long_chain_residual(const EigenfunctionSpec& s, const ChainState& x, double e) const {
    const auto& prm = s.params;
    const double k = prm.k;
    const int n = x.size(), last = prm.last();
    const double f = c_.phi(x.p[2], x.q[2]);
    const double f2 = c_.phi2(x.p[2], x.q[2]);
    const double dp = c_.phi.partials(x.p[2], x.q[2]).p;
    const double dp2 = c_.phi2.partials(x.p[2], x.q[2]).p;
    const double lap = x.q[1] + x.q[3] - 2.0 * x.q[2];
    const double x_phi = -x.q[2] + lap * dp;
    const double x_phi2 = f + lap * dp2;

    std::vector<double> force;
    chain_force(x, prm, force);
    std::vector<double> pb(x.p), qb(x.q), xp(force), xq(x.p);
    for (int i : {1, 3}) {
      pb[i] += f;
      qb[i] += f2;
      xp[i] += x_phi;
      xq[i] += x_phi2;
    }
    const double xh0 = pb[0] * xp[0] + pb[1] * xp[1] + (signed_power(qb[0], k) + qb[0] - qb[1]) * xq[0] +
                       (signed_power(qb[1], k) - (qb[0] - qb[1]) + qb[1]) * xq[1];
    double xhr = 0.0;
    for (int i = 3; i < n; ++i) {
      double dq = signed_power(qb[i], k);
      if (i == 3) dq += qb[3];
      if (i >= 4) dq += qb[i] - qb[i - 1];
      if (i + 1 <= last) dq -= qb[i + 1] - qb[i];
      xhr += pb[i] * xp[i] + dq * xq[i];
    }
    const double xchi = cutoff::bump_log_d1(e) / s.shell_energy * x.p[2] * lap;
    const double transport = -s.a(0) * xh0 - s.a(last) * xhr + xchi;
    return s.starred ? -transport : transport;
  }

  Correctors c_;
};

// ---------------------------------------------------------------------------
// Ladders and exponent fits.

struct LadderReport {
  std::vector<NormEstimate> rungs;
  LineFit norm_fit;   // log ||phi|| vs log E
  LineFit ratio_fit;  // log ratio vs log E
  double predicted_norm_exponent = 0.0;
  double predicted_ratio_exponent = 0.0;
};

inline double predicted_norm_exponent(double k) { return 0.25 + 0.25 / k; }

inline double predicted_ratio_exponent(ProbeVariant v, double k) {
  if (v == ProbeVariant::three_site) return 1.0 / k - 0.5;
  return std::max(1.5 / k - 1.0, 0.5 / k - 0.5);
}

/// Shell energies base^j for j in `exponents`; each rung draws from its own substream.
inline LadderReport run_ladder(const SpectralProbe& probe, EigenfunctionSpec spec, const std::vector<int>& exponents,
                               std::size_t n_samples, std::uint64_t seed, double base = 3.0) {
  if (exponents.size() < 2) throw std::invalid_argument("ladder needs at least two rungs");
  LadderReport rep;
  std::vector<double> x, yn, sn, yr, sr;
  for (std::size_t j = 0; j < exponents.size(); ++j) {
    spec.shell_energy = std::pow(base, exponents[j]);
    auto est = probe.estimate_norms(spec, n_samples, seed, static_cast<std::uint32_t>(exponents[j]));
    x.push_back(std::log(spec.shell_energy));
    yn.push_back(std::log(est.phi_norm.mean));
    sn.push_back(est.phi_norm.stderr_ / est.phi_norm.mean);
    yr.push_back(std::log(est.ratio.mean));
    sr.push_back(est.ratio.stderr_ / est.ratio.mean);
    rep.rungs.push_back(est);
  }
  rep.norm_fit = fit_line_weighted(x, yn, sn);
  rep.ratio_fit = fit_line_weighted(x, yr, sr);
  rep.predicted_norm_exponent = predicted_norm_exponent(spec.params.k);
  rep.predicted_ratio_exponent = predicted_ratio_exponent(spec.variant, spec.params.k);
  return rep;
}

/// Fitted ratio exponent for the long-chain family on N+1 = n_sites sites.
inline LadderReport longchain_residual_scaling(double k, int n_sites, const std::vector<int>& exponents,
                                               std::size_t n_samples, std::uint64_t seed, double beta = 0.8) {
  if (n_sites < 5) throw std::invalid_argument("long_chain variant needs at least 5 sites");
  if (!(k > 1.5)) throw std::domain_error("corrector unbounded in this regime");
  EigenfunctionSpec spec;
  spec.variant = ProbeVariant::long_chain;
  spec.params.n_sites = n_sites;
  spec.params.k = k;
  spec.params.beta = beta;
  SpectralProbe probe(build_correctors(k));
  return run_ladder(probe, spec, exponents, n_samples, seed);
}

}  // namespace chainlab
