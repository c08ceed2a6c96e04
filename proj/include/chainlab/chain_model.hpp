#pragma once

// Pinned anharmonic chain with harmonic nearest-neighbour coupling and
// Langevin baths at both ends:
//   dq_i = p_i dt
//   dp_i = (-V'(q_i) + q_{i-1} - 2 q_i + q_{i+1}) dt - gamma_i p_i dt + sigma_i dW_i
// with V(q) = |q|^{2k}/(2k), free ends, and baths only on sites 0 and N.

#include <chainlab/free_oscillator.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace chainlab {

struct ChainParams {
  int n_sites = 3;
  double k = 2.0;
  double gamma0 = 1.0, gammaN = 1.0;
  double T0 = 1.0, TN = 1.0;
  double beta = 0.0;
  // Relaxes k > 1, n_sites >= 3 and gamma, T > 0 to k >= 1, n_sites >= 1,
  // gamma >= 0, T >= 0 (harmonic, single-site and frictionless checks).
  bool test_mode = false;

  int last() const { return n_sites - 1; }
  int middle() const { return (n_sites - 1) / 2; }
  /// n with N+1 = 2n+1 (odd chains); lower-middle distance for even chains.
  int half_depth() const { return (n_sites - 1) / 2; }

  bool is_bath(int i) const { return i == 0 || i == last(); }
  double gamma(int i) const {
    if (n_sites == 1) return gamma0;
    return i == 0 ? gamma0 : (i == last() ? gammaN : 0.0);
  }
  double temperature(int i) const { return i == 0 ? T0 : (i == last() ? TN : 0.0); }
  double sigma(int i) const { return std::sqrt(2.0 * gamma(i) * temperature(i)); }
  double alpha(int) const { return 0.5 * beta; }
  double alpha_star(int i) const { return 1.0 / temperature(i) - 0.5 * beta; }

  void validate() const {
    if (test_mode) {
      if (n_sites < 1) throw std::invalid_argument("n_sites must be >= 1");
      if (!(k >= 1.0)) throw std::invalid_argument("k must be >= 1");
      if (!(gamma0 >= 0.0 && gammaN >= 0.0)) throw std::invalid_argument("friction must be >= 0");
      if (!(T0 >= 0.0 && TN >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
      return;
    }
    if (n_sites < 3) throw std::invalid_argument("n_sites must be >= 3");
    if (!(k > 1.0)) throw std::invalid_argument("k must exceed 1");
    if (!(gamma0 > 0.0 && gammaN > 0.0)) throw std::invalid_argument("friction must be positive");
    if (!(T0 > 0.0 && TN > 0.0)) throw std::invalid_argument("temperature must be positive");
    if (!(beta < 2.0 * std::min(1.0 / T0, 1.0 / TN))) throw std::invalid_argument("beta must be below 2 min(1/T0, 1/TN)");
  }
};

struct ChainState {
  std::vector<double> p, q;

  static ChainState zeros(int n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)}; }
  int size() const { return static_cast<int>(p.size()); }

  /// Flat layout (p_0..p_N, q_0..q_N).
  std::vector<double> flat() const {
    std::vector<double> x(p);
    x.insert(x.end(), q.begin(), q.end());
    return x;
  }
  static ChainState from_flat(const std::vector<double>& x) {
    const auto n = x.size() / 2;
    return {std::vector<double>(x.begin(), x.begin() + n), std::vector<double>(x.begin() + n, x.end())};
  }
  bool finite() const {
    for (double v : p) if (!std::isfinite(v)) return false;
    for (double v : q) if (!std::isfinite(v)) return false;
    return true;
  }
  double max_abs() const {
    double m = 0.0;
    for (double v : p) m = std::max(m, std::abs(v));
    for (double v : q) m = std::max(m, std::abs(v));
    return m;
  }
};

/// Tangent vector in the same (p, q) layout.
using PhaseVector = ChainState;

inline double coupling_energy(const ChainState& s) {
  double e = 0.0;
  for (int i = 1; i < s.size(); ++i) {
    const double d = s.q[i] - s.q[i - 1];
    e += 0.5 * d * d;
  }
  return e;
}

inline double hamiltonian(const ChainState& s, const ChainParams& prm) {
  double e = coupling_energy(s);
  for (int i = 0; i < s.size(); ++i) e += hf_energy(s.p[i], s.q[i], prm.k);
  return e;
}

/// Conservative force -dH/dq_i, written into f.
inline void chain_force(const ChainState& s, const ChainParams& prm, std::vector<double>& f) {
  const int n = s.size();
  f.resize(n);
  for (int i = 0; i < n; ++i) {
    double c = 0.0;
    if (i > 0) c += s.q[i - 1] - s.q[i];
    if (i + 1 < n) c += s.q[i + 1] - s.q[i];
    f[i] = -signed_power(s.q[i], prm.k) + c;
  }
}

inline PhaseVector hamiltonian_field(const ChainState& s, const ChainParams& prm) {
  PhaseVector v;
  chain_force(s, prm, v.p);
  v.q = s.p;
  return v;
}

inline PhaseVector drift(const ChainState& s, const ChainParams& prm) {
  PhaseVector v = hamiltonian_field(s, prm);
  for (int i = 0; i < s.size(); ++i) v.p[i] -= prm.gamma(i) * s.p[i];
  return v;
}

struct PartialEnergies {
  // Three-site split: H0, H2 include q^2/2; H1 = H_f(p1, q1).
  double h0 = 0.0, h1 = 0.0, h2 = 0.0;
  // Long-chain split: H0 over sites 0,1; Hc = H_f(p2, q2); Hr over sites 3..N.
  double h0_long = 0.0, hc = 0.0, hr = 0.0;
  // E_i = 1 + H_f(p_i, q_i).
  std::vector<double> site;
};

inline double three_site_h0(double p, double q, double k) { return hf_energy(p, q, k) + 0.5 * q * q; }

inline double long_chain_h0(const ChainState& s, double k) {
  const double d = s.q[0] - s.q[1];
  return hf_energy(s.p[0], s.q[0], k) + hf_energy(s.p[1], s.q[1], k) + 0.5 * (d * d + s.q[1] * s.q[1]);
}

inline double long_chain_hr(const ChainState& s, double k) {
  double e = 0.5 * s.q[3] * s.q[3];
  for (int i = 3; i < s.size(); ++i) e += hf_energy(s.p[i], s.q[i], k);
  for (int i = 4; i < s.size(); ++i) {
    const double d = s.q[i] - s.q[i - 1];
    e += 0.5 * d * d;
  }
  return e;
}

inline PartialEnergies partial_energies(const ChainState& s, const ChainParams& prm) {
  PartialEnergies e;
  const double k = prm.k;
  e.site.resize(s.size());
  for (int i = 0; i < s.size(); ++i) e.site[i] = 1.0 + hf_energy(s.p[i], s.q[i], k);
  if (s.size() == 3) {
    e.h0 = three_site_h0(s.p[0], s.q[0], k);
    e.h1 = hf_energy(s.p[1], s.q[1], k);
    e.h2 = three_site_h0(s.p[2], s.q[2], k);
  }
  if (s.size() >= 5) {
    e.h0_long = long_chain_h0(s, k);
    e.hc = hf_energy(s.p[2], s.q[2], k);
    e.hr = long_chain_hr(s, k);
  }
  return e;
}

// ---------------------------------------------------------------------------
// Finite-difference generator appliers.

namespace detail {

inline double checked(double v) {
  if (!std::isfinite(v)) throw std::domain_error("observable not differentiable here");
  return v;
}

inline void axpy(const ChainState& x, double a, const PhaseVector& v, ChainState& out) {
  for (int i = 0; i < x.size(); ++i) {
    out.p[i] = x.p[i] + a * v.p[i];
    out.q[i] = x.q[i] + a * v.q[i];
  }
}

/// d/de f(x + e v) at e = 0: central differences, one Richardson level.
template <class F>
double directional_derivative(F&& f, const ChainState& x, const PhaseVector& v, double base_step) {
  const double vn = v.max_abs();
  if (vn == 0.0) return 0.0;
  const double h = base_step * (1.0 + x.max_abs()) / vn;
  ChainState y = x;
  auto central = [&](double s) {
    axpy(x, s, v, y);
    const double a = checked(f(static_cast<const ChainState&>(y)));
    axpy(x, -s, v, y);
    const double b = checked(f(static_cast<const ChainState&>(y)));
    return (a - b) / (2.0 * s);
  };
  const double d1 = central(h), d2 = central(0.5 * h);
  return (4.0 * d2 - d1) / 3.0;
}

template <class F>
double momentum_derivative(F&& f, const ChainState& x, int i, double base_step) {
  const double h = base_step * (1.0 + std::abs(x.p[i]));
  ChainState y = x;
  auto central = [&](double s) {
    y.p[i] = x.p[i] + s;
    const double a = checked(f(static_cast<const ChainState&>(y)));
    y.p[i] = x.p[i] - s;
    const double b = checked(f(static_cast<const ChainState&>(y)));
    return (a - b) / (2.0 * s);
  };
  const double d1 = central(h), d2 = central(0.5 * h);
  return (4.0 * d2 - d1) / 3.0;
}

template <class F>
double momentum_second_derivative(F&& f, const ChainState& x, int i, double f0, double base_step) {
  const double h = base_step * (1.0 + std::abs(x.p[i]));
  ChainState y = x;
  auto central = [&](double s) {
    y.p[i] = x.p[i] + s;
    const double a = checked(f(static_cast<const ChainState&>(y)));
    y.p[i] = x.p[i] - s;
    const double b = checked(f(static_cast<const ChainState&>(y)));
    return (a - 2.0 * f0 + b) / (s * s);
  };
  const double d1 = central(h), d2 = central(0.5 * h);
  return (4.0 * d2 - d1) / 3.0;
}

inline std::vector<int> bath_sites(const ChainParams& prm) {
  if (prm.n_sites == 1) return {0};
  return {0, prm.last()};
}

}  // namespace detail

inline constexpr double kFirstDerivativeStep = 1e-4;
inline constexpr double kSecondDerivativeStep = 1e-3;

/// L f = drift . grad f + sum_{baths} gamma_i T_i d^2 f / dp_i^2.
template <class F>
double apply_generator(F&& f, const ChainState& x, const ChainParams& prm, double fd_step = kFirstDerivativeStep) {
  double r = detail::directional_derivative(f, x, drift(x, prm), fd_step);
  const double f0 = detail::checked(f(x));
  for (int i : detail::bath_sites(prm)) {
    const double d = prm.gamma(i) * prm.temperature(i);
    if (d != 0.0) r += d * detail::momentum_second_derivative(f, x, i, f0, kSecondDerivativeStep);
  }
  return r;
}

/// Only the bath part at site i of the conjugated generator:
/// (a - b) p dp + dp^2 - a b p^2 + a, with (a, b) = (alpha, alpha*) or swapped.
template <class F>
double apply_ou(F&& f, const ChainState& x, const ChainParams& prm, int i, bool starred) {
  const double a = starred ? prm.alpha_star(i) : prm.alpha(i);
  const double b = starred ? prm.alpha(i) : prm.alpha_star(i);
  const double f0 = detail::checked(f(x));
  const double p = x.p[i];
  return (a - b) * p * detail::momentum_derivative(f, x, i, kFirstDerivativeStep) +
         detail::momentum_second_derivative(f, x, i, f0, kSecondDerivativeStep) - a * b * p * p * f0 + a * f0;
}

/// Flat-space conjugate X_H + sum gamma_i T_i L_OU^i, or its adjoint when starred.
template <class F>
double apply_weighted_generator(F&& f, const ChainState& x, const ChainParams& prm, bool starred,
                                double fd_step = kFirstDerivativeStep) {
  double r = detail::directional_derivative(f, x, hamiltonian_field(x, prm), fd_step);
  if (starred) r = -r;
  for (int i : detail::bath_sites(prm)) {
    const double d = prm.gamma(i) * prm.temperature(i);
    if (d != 0.0) r += d * apply_ou(f, x, prm, i, starred);
  }
  return r;
}

}  // namespace chainlab
