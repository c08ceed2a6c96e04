#pragma once

// Functions on phase space that scale like H_f^a, stored as a periodic
// profile g(theta) on the unit shell: f(P,Q) = E^a g(theta(P,Q)).

#include <chainlab/free_oscillator.hpp>

#include <complex>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace chainlab {

namespace spectral {

/// Derivative of the trigonometric interpolant of periodic samples over
/// [0, period). The Nyquist mode is dropped.
inline std::vector<double> derivative(const std::vector<double>& v, double period = 2.0 * std::numbers::pi) {
  const int m = static_cast<int>(v.size());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> c;
  fft.fwd(c, v);
  const double w = 2.0 * std::numbers::pi / period;
  for (int j = 0; j < m; ++j) {
    const int f = j <= m / 2 ? j : j - m;
    if (2 * j == m) { c[j] = 0.0; continue; }
    c[j] *= std::complex<double>(0.0, w * f);
  }
  std::vector<double> out;
  fft.inv(out, c);
  return out;
}

/// Zero-mean periodic antiderivative. The mean of v is discarded.
inline std::vector<double> antiderivative(const std::vector<double>& v, double period = 2.0 * std::numbers::pi) {
  const int m = static_cast<int>(v.size());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> c;
  fft.fwd(c, v);
  const double w = 2.0 * std::numbers::pi / period;
  for (int j = 0; j < m; ++j) {
    const int f = j <= m / 2 ? j : j - m;
    if (j == 0 || 2 * j == m) { c[j] = 0.0; continue; }
    c[j] /= std::complex<double>(0.0, w * f);
  }
  std::vector<double> out;
  fft.inv(out, c);
  return out;
}

}  // namespace spectral

inline constexpr int kDefaultProfileGrid = 2048;

class ThetaProfile {
 public:
  ThetaProfile() = default;

  /// Samples on theta_j = 2 pi j / M. If d1 is empty it is computed spectrally.
  ThetaProfile(double k, double exponent, std::vector<double> values, std::vector<double> d1 = {})
      : k_(k), exponent_(exponent), v_(std::move(values)), d1_(std::move(d1)) {
    const std::size_t m = v_.size();
    if (m < 256 || (m & (m - 1)) != 0) throw std::invalid_argument("profile grid must be a power of two >= 256");
    if (d1_.empty()) d1_ = spectral::derivative(v_);
    if (d1_.size() != m) throw std::invalid_argument("profile derivative size mismatch");
    d2_ = spectral::derivative(d1_);
    d3_ = spectral::derivative(d2_);
  }

  /// Samples g(theta) = f(unit-shell point at theta).
  template <class F>
  static ThetaProfile from_phase_function(double k, double exponent, F&& f, int m = kDefaultProfileGrid) {
    FreeOscillator osc(k);
    std::vector<double> v(m);
    for (int j = 0; j < m; ++j) {
      const double th = grid_angle(j, m);
      const auto pt = osc.from_shell(th, 1.0);
      v[j] = f(pt.p, pt.q);
    }
    return ThetaProfile(k, exponent, std::move(v));
  }

  static double grid_angle(int j, int m) { return 2.0 * std::numbers::pi * j / m; }

  double k() const { return k_; }
  double exponent() const { return exponent_; }
  int size() const { return static_cast<int>(v_.size()); }
  const std::vector<double>& values() const { return v_; }
  const std::vector<double>& derivatives() const { return d1_; }

  double value(double theta) const { return hermite(v_, d1_, theta); }
  double d1(double theta) const { return hermite(d1_, d2_, theta); }
  double d2(double theta) const { return hermite(d2_, d3_, theta); }

  /// E^a g(theta) at energy E.
  double on_shell(double theta, double energy) const { return std::pow(energy, exponent_) * value(theta); }

  /// Homogeneous extension evaluated at a phase-space point. Zero at the origin.
  double operator()(double p, double q) const {
    const FreeOscillator osc(k_);
    if (p == 0.0 && q == 0.0) return 0.0;
    const auto s = osc.to_shell(p, q);
    return on_shell(s.theta, s.energy);
  }

  /// (d/dP, d/dQ) of the homogeneous extension.
  PhasePoint partials(double p, double q) const {
    const FreeOscillator osc(k_);
    const auto s = osc.to_shell(p, q);
    const auto gt = osc.theta_gradient(p, q);
    const double ea = std::pow(s.energy, exponent_);
    const double g = value(s.theta), gp = d1(s.theta);
    const double radial = exponent_ * ea / s.energy * g;
    return {radial * p + ea * gp * gt.p, radial * signed_power(q, k_) + ea * gp * gt.q};
  }

  ThetaProfile scaled(double c) const {
    ThetaProfile r = *this;
    for (auto* vec : {&r.v_, &r.d1_, &r.d2_, &r.d3_})
      for (double& x : *vec) x *= c;
    return r;
  }

 private:
  // Periodic cubic Hermite interpolation on the uniform grid.
  static double hermite(const std::vector<double>& f, const std::vector<double>& df, double theta) {
    const int m = static_cast<int>(f.size());
    const double h = 2.0 * std::numbers::pi / m;
    double x = theta / h;
    double fl = std::floor(x);
    double t = x - fl;
    long j = static_cast<long>(fl) % m;
    if (j < 0) j += m;
    const long j1 = (j + 1) % m;
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    return h00 * f[j] + h10 * h * df[j] + h01 * f[j1] + h11 * h * df[j1];
  }

  double k_ = 2.0;
  double exponent_ = 0.0;
  std::vector<double> v_, d1_, d2_, d3_;
};

/// Unit-shell weights 1/omega(theta_j) on an M-point grid.
inline std::vector<double> inverse_omega_weights(double k, int m) {
  const FreeOscillator osc(k);
  std::vector<double> w(m);
  for (int j = 0; j < m; ++j) w[j] = 1.0 / osc.omega(ThetaProfile::grid_angle(j, m));
  return w;
}

/// Time average over one free orbit: int g/omega dtheta / int 1/omega dtheta.
inline double shell_average(const ThetaProfile& g) {
  const auto w = inverse_omega_weights(g.k(), g.size());
  double num = 0.0, den = 0.0;
  for (int j = 0; j < g.size(); ++j) {
    num += g.values()[j] * w[j];
    den += w[j];
  }
  return num / den;
}

/// Average over the shell of energy E for a homogeneous function.
inline double shell_average(const ThetaProfile& g, double energy) {
  return std::pow(energy, g.exponent()) * shell_average(g);
}

/// Centered solution of X_{H_f} phi = psi, i.e. omega(theta) phi'(theta) = g_psi(theta).
inline ThetaProfile solve_poisson_on_shell(const ThetaProfile& source) {
  const double k = source.k();
  const int m = source.size();
  const auto w = inverse_omega_weights(k, m);
  double avg = 0.0, den = 0.0, scale = 0.0;
  std::vector<double> h(m);
  for (int j = 0; j < m; ++j) {
    h[j] = source.values()[j] * w[j];
    avg += h[j];
    den += w[j];
    scale += std::abs(source.values()[j]);
  }
  avg /= den;
  scale /= m;
  if (std::abs(avg) > 1e-8 * std::max(1.0, scale)) throw std::domain_error("source does not average out to zero");

  auto phi = spectral::antiderivative(h);
  double c = 0.0;
  for (int j = 0; j < m; ++j) c += phi[j] * w[j];
  c /= den;
  for (double& x : phi) x -= c;
  const double alpha = 0.5 - 0.5 / k;
  return ThetaProfile(k, source.exponent() - alpha, std::move(phi), std::move(h));
}

}  // namespace chainlab
