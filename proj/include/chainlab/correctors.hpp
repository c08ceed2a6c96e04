#pragma once

// Correctors Phi, Phi2 and Psi: centered Poisson solutions along the free
// flow with a smooth low-energy cutoff. The cutoff sources are of the form
// rising(H_f)^m times a homogeneous source, and X_{H_f} kills functions of
// H_f, so each corrector is exactly rising(H_f)^m times a homogeneous
// solution. Below E_lo = 1 every corrector vanishes; above E_hi = 2 it is
// exactly homogeneous.

#include <chainlab/cutoffs.hpp>
#include <chainlab/theta_profile.hpp>

#include <cmath>
#include <stdexcept>

namespace chainlab {

class CutoffShellFunction {
 public:
  CutoffShellFunction() = default;
  CutoffShellFunction(ThetaProfile outer, int cutoff_power)
      : outer_(std::move(outer)), power_(cutoff_power) {}

  static constexpr double e_lo = 1.0;
  static constexpr double e_hi = 2.0;

  const ThetaProfile& outer() const { return outer_; }
  double exponent() const { return outer_.exponent(); }
  double k() const { return outer_.k(); }
  int cutoff_power() const { return power_; }

  /// rising(E)^m
  double radial(double energy) const { return std::pow(cutoff::rising(energy), power_); }

  double operator()(double p, double q) const {
    const double e = hf_energy(p, q, k());
    if (e <= e_lo) return 0.0;
    return radial(e) * outer_(p, q);
  }

  PhasePoint partials(double p, double q) const {
    const double e = hf_energy(p, q, k());
    if (e <= e_lo) return {0.0, 0.0};
    const double c = radial(e);
    const auto hp = outer_.partials(p, q);
    if (e >= e_hi) return hp;
    const double g = outer_(p, q);
    const double dc = power_ * std::pow(cutoff::rising(e), power_ - 1) * cutoff::rising_d1(e);
    return {c * hp.p + dc * p * g, c * hp.q + dc * signed_power(q, k()) * g};
  }

 private:
  ThetaProfile outer_;
  int power_ = 1;
};

/// The three correctors for one k, plus kappa = time average of Phi^2 on the unit shell.
struct Correctors {
  double k = 2.0;
  double kappa = 0.0;
  CutoffShellFunction phi;
  CutoffShellFunction phi2;  // empty profile when k <= 3/2
  CutoffShellFunction psi;   // empty profile when k <= 3/2
  bool has_second_order = false;

  const CutoffShellFunction& require_phi2() const {
    if (!has_second_order) throw std::domain_error("corrector unbounded in this regime");
    return phi2;
  }
  const CutoffShellFunction& require_psi() const {
    if (!has_second_order) throw std::domain_error("corrector unbounded in this regime");
    return psi;
  }

  /// R'(E) = kappa E^{2/k-1} - average of Phi^2 over the shell of energy E.
  double r_prime(double energy) const {
    const double c = cutoff::rising(energy);
    return kappa * std::pow(energy, 2.0 / k - 1.0) * (1.0 - c * c);
  }
};

/// Homogeneous Phi: X_{H_f} Phi = -Q, centered. Exponent 1/k - 1/2.
inline ThetaProfile phi_homogeneous(double k, int m = kDefaultProfileGrid) {
  const auto src = ThetaProfile::from_phase_function(k, 0.5 / k, [](double, double q) { return -q; }, m);
  return solve_poisson_on_shell(src);
}

inline CutoffShellFunction corrector_phi(double k, int m = kDefaultProfileGrid) {
  if (!(k > 1.0)) throw std::invalid_argument("corrector requires k > 1");
  return CutoffShellFunction(phi_homogeneous(k, m), 1);
}

inline CutoffShellFunction corrector_phi2(double k, int m = kDefaultProfileGrid) {
  if (!(k > 1.5)) throw std::domain_error("corrector unbounded in this regime");
  const auto phi = phi_homogeneous(k, m);
  return CutoffShellFunction(solve_poisson_on_shell(phi), 1);
}

inline double kappa_from_phi(const ThetaProfile& phi) {
  std::vector<double> sq(phi.size());
  for (int j = 0; j < phi.size(); ++j) sq[j] = phi.values()[j] * phi.values()[j];
  return shell_average(ThetaProfile(phi.k(), 2.0 * phi.exponent(), std::move(sq)));
}

inline CutoffShellFunction corrector_psi(double k, int m = kDefaultProfileGrid) {
  if (!(k > 1.5)) throw std::domain_error("corrector unbounded in this regime");
  const auto phi = phi_homogeneous(k, m);
  const double kap = kappa_from_phi(phi);
  std::vector<double> src(phi.size());
  for (int j = 0; j < phi.size(); ++j) src[j] = phi.values()[j] * phi.values()[j] - kap;
  return CutoffShellFunction(solve_poisson_on_shell(ThetaProfile(k, 2.0 * phi.exponent(), std::move(src))), 2);
}

inline Correctors build_correctors(double k, int m = kDefaultProfileGrid) {
  if (!(k > 1.0)) throw std::invalid_argument("corrector requires k > 1");
  Correctors c;
  c.k = k;
  const auto phi = phi_homogeneous(k, m);
  c.kappa = kappa_from_phi(phi);
  c.phi = CutoffShellFunction(phi, 1);
  if (k > 1.5) {
    c.has_second_order = true;
    c.phi2 = CutoffShellFunction(solve_poisson_on_shell(phi), 1);
    std::vector<double> src(phi.size());
    for (int j = 0; j < phi.size(); ++j) src[j] = phi.values()[j] * phi.values()[j] - c.kappa;
    c.psi = CutoffShellFunction(solve_poisson_on_shell(ThetaProfile(k, 2.0 * phi.exponent(), std::move(src))), 2);
  }
  return c;
}

}  // namespace chainlab
