#pragma once

// Breather decay: predicted law for H^beta, simulation and fit, the
// exponent recursion for general couplings, and the spectral trichotomy.

#include <chainlab/chain_model.hpp>
#include <chainlab/fit.hpp>
#include <chainlab/orbit.hpp>
#include <chainlab/sde_integrator.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace chainlab {

struct DecayPrediction {
  double k = 2.0;
  int n = 1;
  double beta = 0.0;
  double kappa = 0.0;
  double slope = 0.0;  // -d/dt of H^beta
};

inline DecayPrediction predicted_decay(double k, int n, double gamma0, double gammaN) {
  if (!(k > 1.0)) throw std::invalid_argument("k must exceed 1");
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  DecayPrediction d;
  d.k = k;
  d.n = n;
  d.beta = 2.0 * n * (1.0 - 1.0 / k);
  d.kappa = kappa(k, n).kappa;
  d.slope = (gamma0 + gammaN) * n * (2.0 - 2.0 / k) * d.kappa;
  return d;
}

/// All energy on the middle site (lower middle for even chains), as momentum.
inline ChainState breather_init(const ChainParams& prm, double e_mid) {
  if (!(e_mid > 0.0)) throw std::invalid_argument("E_mid must be positive");
  ChainState s = ChainState::zeros(prm.n_sites);
  s.p[prm.middle()] = std::sqrt(2.0 * e_mid);
  return s;
}

struct DecayResult {
  TimeSeries series;            // ensemble mean: t, H, H^beta, E_mid, E_0 + E_N
  DecayPrediction prediction;
  LineFit fit;                  // of mean H^beta over the breather window
  double window_end = 0.0;
  int n_traj = 1;
  double relative_error() const { return (-fit.slope - prediction.slope) / prediction.slope; }
};

inline constexpr double kDominanceFactor = 10.0;

/// Simulates n_traj breather trajectories and fits the mean of H^beta over
/// the common window where E_mid >= 10 (E_0 + E_N), E_i = 1 + H_f(p_i, q_i).
inline DecayResult run_decay(const ChainParams& prm, double e_mid, const IntegratorConfig& cfg, int n_traj = 1,
                             int n_threads = 0) {
  prm.validate();
  const int n = std::max(1, prm.half_depth());
  DecayResult r;
  r.n_traj = n_traj;
  if (prm.k > 1.0) {
    r.prediction = predicted_decay(prm.k, n, prm.gamma0, prm.gammaN);
  } else {
    r.prediction.k = prm.k;
    r.prediction.n = n;
  }
  const double beta = r.prediction.beta;
  const int mid = prm.middle(), last = prm.last();
  std::vector<Observable> obs{observables::energy(prm), observables::site_energy(prm, mid),
                              observables::site_energy(prm, 0), observables::site_energy(prm, last)};
  auto dominant = [&](const ChainState& s) {
    const double em = 1.0 + hf_energy(s.p[mid], s.q[mid], prm.k);
    const double eb = 2.0 + hf_energy(s.p[0], s.q[0], prm.k) + hf_energy(s.p[last], s.q[last], prm.k);
    return em >= kDominanceFactor * eb;
  };
  const auto runs = ensemble(breather_init(prm, e_mid), prm, cfg, n_traj, obs, n_threads,
                             [&](const ChainState& s, double) { return dominant(s); });

  // Common window: rows before any trajectory leaves the breather regime.
  std::size_t rows = std::numeric_limits<std::size_t>::max();
  for (const auto& ts : runs) {
    std::size_t j = 0;
    const auto& em = ts.columns[1];
    while (j < ts.rows() && em[j] >= kDominanceFactor * (ts.columns[2][j] + ts.columns[3][j])) ++j;
    rows = std::min(rows, j);
  }
  if (rows < 3) throw std::runtime_error("no breather regime");

  std::vector<double> t(runs[0].times.begin(), runs[0].times.begin() + rows);
  std::vector<double> h(rows, 0.0), hb(rows, 0.0), emid(rows, 0.0), eb(rows, 0.0);
  for (const auto& ts : runs)
    for (std::size_t j = 0; j < rows; ++j) {
      h[j] += ts.columns[0][j] / n_traj;
      hb[j] += std::pow(ts.columns[0][j], beta) / n_traj;
      emid[j] += ts.columns[1][j] / n_traj;
      eb[j] += (ts.columns[2][j] + ts.columns[3][j]) / n_traj;
    }
  r.window_end = t.back();
  r.fit = fit_line(t, hb);
  r.series.times = std::move(t);
  r.series.add_column("H", std::move(h));
  r.series.add_column("H^beta", std::move(hb));
  r.series.add_column("E_mid", std::move(emid));
  r.series.add_column("E_0+E_N", std::move(eb));
  return r;
}

struct ExponentRecursion {
  std::vector<double> beta;  // beta_0 .. beta_n
  double gamma = 0.0;        // 2 beta_0
};

/// beta_n = 1/2; beta_i = (2l-1)(beta_{i+1} - a) - a if beta_{i+1} > a, else beta_{i+1} - 2a,
/// with a = 1/2 - 1/(2k).
inline ExponentRecursion exponent_recursion(double k, int ell, int n) {
  if (!(k > 1.0) || ell < 1 || n < 1) throw std::invalid_argument("exponent_recursion requires k > 1, l >= 1, n >= 1");
  const double a = 0.5 - 0.5 / k;
  ExponentRecursion r;
  r.beta.assign(n + 1, 0.0);
  r.beta[n] = 0.5;
  for (int i = n - 1; i >= 0; --i) {
    const double b = r.beta[i + 1];
    r.beta[i] = b > a ? (2.0 * ell - 1.0) * (b - a) - a : b - 2.0 * a;
  }
  r.gamma = 2.0 * r.beta[0];
  return r;
}

enum class SpectrumClass { compact_resolvent, gap_no_compact, essential_at_zero };

inline std::string to_string(SpectrumClass c) {
  switch (c) {
    case SpectrumClass::compact_resolvent: return "compact_resolvent";
    case SpectrumClass::gap_no_compact: return "gap_no_compact";
    case SpectrumClass::essential_at_zero: return "essential_at_zero";
  }
  return "";
}

inline double model_gamma(double k, int n) { return 2.0 * n / k + 1.0 - 2.0 * n; }

inline SpectrumClass classify_spectrum(double k, int n) {
  if (!(k > 1.0) || n < 1) throw std::domain_error("outside model regime");
  const double g = model_gamma(k, n);
  if (std::abs(g) <= 1e-12) return SpectrumClass::gap_no_compact;
  return g > 0.0 ? SpectrumClass::compact_resolvent : SpectrumClass::essential_at_zero;
}

}  // namespace chainlab
