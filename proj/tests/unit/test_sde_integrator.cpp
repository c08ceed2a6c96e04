#include <chainlab/fit.hpp>
#include <chainlab/io.hpp>
#include <chainlab/random.hpp>
#include <chainlab/sde_integrator.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace chainlab;

namespace {

ChainParams single_site(double gamma, double temp) {
  ChainParams p;
  p.n_sites = 1;
  p.k = 1.0;
  p.gamma0 = p.gammaN = gamma;
  p.T0 = p.TN = temp;
  p.test_mode = true;
  return p;
}

ChainParams frictionless(int n, double k) {
  ChainParams p;
  p.n_sites = n;
  p.k = k;
  p.gamma0 = p.gammaN = 0.0;
  p.test_mode = true;
  return p;
}

}  // namespace

TEST(Philox, KnownAnswerVectors) {
  const auto a = philox4x32_10({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(a, (Philox4x32Block{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  const auto b = philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(b, (Philox4x32Block{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  const auto c = philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(c, (Philox4x32Block{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Random, NormalQuantileInvertsCdf) {
  for (double u : {1e-12, 1e-6, 0.01, 0.02425, 0.3, 0.5, 0.77, 0.97575, 0.999, 1 - 1e-9}) {
    EXPECT_NEAR(oracle::normal_cdf(normal_quantile(u)), u, 1e-14 + 1e-12 * u);
  }
  EXPECT_EQ(normal_quantile(0.5), 0.0);
}

TEST(Random, StreamsAreAddressableAndDistinct) {
  const CounterStream a(42, 0), b(42, 1), c(43, 0);
  EXPECT_EQ(a.normal(10, 1), CounterStream(42, 0).normal(10, 1));
  EXPECT_NE(a.normal(10, 1), b.normal(10, 1));
  EXPECT_NE(a.normal(10, 1), c.normal(10, 1));
  EXPECT_NE(a.normal(10, 0), a.normal(10, 1));
  // Sample moments of a long sequential stream.
  SequentialRng r(7, 3);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(Config, Validation) {
  IntegratorConfig c;
  EXPECT_NO_THROW(c.validate());
  c.h = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.record_stride = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.scheme = "euler";
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.T_final = 1.0;
  c.h = 1e-3;
  EXPECT_EQ(c.n_steps(), 1000u);
}

TEST(Step, HarmonicVelocityVerletOracle) {
  const auto prm = single_site(0.0, 0.0);
  const double h = 0.1;
  Integrator it(prm, h);
  ChainState s = ChainState::zeros(1);
  s.p[0] = 0.7;
  s.q[0] = -0.3;
  const double p_half = 0.7 - 0.5 * h * (-0.3);
  const double q1 = -0.3 + h * p_half;
  const double p1 = p_half - 0.5 * h * q1;
  const double xi[1] = {0.0};
  it.step_with_noise(s, xi);
  EXPECT_NEAR(s.q[0], q1, 1e-16);
  EXPECT_NEAR(s.p[0], p1, 1e-16);
}

TEST(Step, OrnsteinUhlenbeckCoefficients) {
  // Affine map of one step: noise enters through the exact OU variance.
  const double g = 1.3, T = 2.0, h = 0.05;
  Integrator it(single_site(g, T), h);
  const auto a = oracle::extract_affine_step(it);
  const double sd = std::sqrt(2 * g * T * (1 - std::exp(-2 * g * h)) / (2 * g));
  EXPECT_NEAR(a.b[0], sd * (1 - 0.25 * h * h), 1e-15);  // second half kick: p -= h/2 * (h/2 * noise)
  EXPECT_NEAR(a.b[1], 0.5 * h * sd, 1e-15);
}

TEST(Step, PureFunctionOfStepIndex) {
  ChainParams p;
  p.k = 2.0;
  IntegratorConfig c;
  ChainState s = ChainState::zeros(3);
  s.p[1] = 10;
  const CounterStream rng(5, 0);
  const auto a = step(s, p, c, rng, 17), b = step(s, p, c, rng, 17), d = step(s, p, c, rng, 18);
  EXPECT_EQ(a.p, b.p);
  EXPECT_NE(a.p, d.p);
}

TEST(Step, BlowUpIsReported) {
  ChainParams p;
  p.k = 3.0;
  IntegratorConfig c;
  c.h = 0.5;
  c.T_final = 50;
  ChainState s = ChainState::zeros(3);
  s.q[1] = 20;
  try {
    simulate(s, p, c, {observables::energy(p)});
    FAIL();
  } catch (const BlowUp& e) {
    EXPECT_NE(std::string(e.what()).find("blow-up; reduce h (t="), std::string::npos);
  }
}

TEST(Simulate, FrictionlessEnergyBounded) {
  const auto p = frictionless(3, 2.0);
  IntegratorConfig c;
  c.h = 1e-3;
  c.T_final = 100;  // 1e5 steps; the acceptance binary runs 1e6
  c.record_stride = 100;
  ChainState s = ChainState::zeros(3);
  s.p[1] = std::sqrt(2.0);
  const auto ts = simulate(s, p, c, {observables::energy(p)});
  double err = 0;
  for (double e : ts.columns[0]) err = std::max(err, std::abs(e - 1.0));
  EXPECT_LT(err, 1e-6);
}

TEST(Simulate, ZeroNoiseBreatherConservesEnergy) {
  const auto p = frictionless(3, 3.0);
  IntegratorConfig c;
  c.h = 1e-4;
  c.T_final = 20;
  c.record_stride = 50;
  ChainState s = ChainState::zeros(3);
  s.p[1] = std::sqrt(2.0 * 100);
  const auto ts = simulate(s, p, c, {observables::energy(p)});
  for (double e : ts.columns[0]) EXPECT_NEAR(e / 100.0, 1.0, 1e-6);
}

TEST(Simulate, RecordingLayout) {
  ChainParams p;
  IntegratorConfig c;
  c.h = 0.01;
  c.T_final = 1.0;
  c.record_stride = 7;
  const auto ts = simulate(ChainState::zeros(3), p, c, {observables::energy(p), observables::momentum(0)});
  EXPECT_EQ(ts.rows(), 100u / 7 + 1);
  for (std::size_t i = 1; i < ts.rows(); ++i) EXPECT_GT(ts.times[i], ts.times[i - 1]);
  EXPECT_EQ(ts.names, (std::vector<std::string>{"H", "p0"}));
  EXPECT_EQ(ts.columns[1].size(), ts.rows());
  EXPECT_THROW(ts.column("nope"), std::out_of_range);
}

TEST(Simulate, DeterministicCsvBytes) {
  ChainParams p;
  p.k = 2.0;
  IntegratorConfig c;
  c.h = 1e-3;
  c.T_final = 5;
  c.record_stride = 10;
  c.seed = 99;
  std::vector<Observable> obs{observables::energy(p), observables::site_energy(p, 0)};
  auto csv = [&] {
    std::ostringstream os;
    io::write_csv(os, simulate(ChainState::zeros(3), p, c, obs));
    return os.str();
  };
  EXPECT_EQ(csv(), csv());
}

TEST(Ensemble, SingleEqualsSimulateAndThreadIndependent) {
  ChainParams p;
  p.k = 2.0;
  IntegratorConfig c;
  c.h = 1e-3;
  c.T_final = 2;
  c.record_stride = 20;
  c.seed = 3;
  std::vector<Observable> obs{observables::energy(p)};
  ChainState s0 = ChainState::zeros(3);
  s0.p[1] = 5;
  const auto one = ensemble(s0, p, c, 1, obs, 1);
  const auto sim = simulate(s0, p, c, obs, 0);
  EXPECT_EQ(one[0].columns, sim.columns);
  const auto a = ensemble(s0, p, c, 5, obs, 1), b = ensemble(s0, p, c, 5, obs, 3);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(a[i].columns, b[i].columns);
  EXPECT_NE(a[0].columns, a[1].columns);
}

TEST(Ensemble, EquilibriumEnergyFluxVanishes) {
  // At T0 = TN, exp(-H/T) is invariant, so E[g0 (T - p0^2) + gN (T - pN^2)] = 0.
  ChainParams p;
  p.k = 2.0;
  p.gamma0 = 1.0;
  p.gammaN = 0.6;
  p.T0 = p.TN = 1.5;
  IntegratorConfig c;
  c.h = 5e-3;
  c.T_final = 4000;
  c.record_stride = 100;
  c.seed = 11;
  Observable flux{"J", [p](const ChainState& s) {
                    return p.gamma0 * (p.T0 - s.p[0] * s.p[0]) + p.gammaN * (p.TN - s.p[2] * s.p[2]);
                  }};
  const auto runs = ensemble(ChainState::zeros(3), p, c, 4, {flux}, 1);
  std::vector<double> batch;
  for (const auto& ts : runs) {
    const auto& v = ts.columns[0];
    const std::size_t skip = v.size() / 20, nb = 10, bs = (v.size() - skip) / nb;
    for (std::size_t b = 0; b < nb; ++b) {
      double m = 0;
      for (std::size_t j = skip + b * bs; j < skip + (b + 1) * bs; ++j) m += v[j];
      batch.push_back(m / bs);
    }
  }
  double mean = 0, var = 0;
  for (double m : batch) mean += m / batch.size();
  for (double m : batch) var += (m - mean) * (m - mean) / (batch.size() - 1);
  const double se = std::sqrt(var / batch.size());
  EXPECT_LT(std::abs(mean), 4 * se + 0.01) << "mean=" << mean << " se=" << se;
}

TEST(WeakOrder, SecondMomentOnHarmonicOuSite) {
  // Exact second moments of the numerical scheme (affine map) vs the exact moment ODE.
  const double g = 1.0, T = 1.0, t_end = 2.0;
  const auto exact = oracle::harmonic_ou_second_moments(g, 2 * g * T, 1.0, 0.0, t_end);
  std::vector<double> lh, le;
  for (int j = 6; j <= 10; ++j) {
    const double h = std::ldexp(1.0, -j);
    Integrator it(single_site(g, T), h);
    const auto a = oracle::extract_affine_step(it);
    const auto m = oracle::propagate_second_moments(a, 1.0, 0.0, std::lround(t_end / h));
    lh.push_back(std::log(h));
    le.push_back(std::log(std::abs(m[0] - exact[0])));
  }
  const auto f = fit_line(lh, le);
  EXPECT_NEAR(f.slope, 2.0, 0.2);
}

TEST(WeakOrder, StationaryVarianceBias) {
  // Stationary E p^2 of the scheme approaches T with O(h^2) bias.
  const double g = 1.3, T = 1.0;
  std::vector<double> lh, le;
  for (int j = 3; j <= 7; ++j) {
    const double h = std::ldexp(1.0, -j);
    Integrator it(single_site(g, T), h);
    const auto a = oracle::extract_affine_step(it);
    const auto m = oracle::propagate_second_moments(a, 0.0, 0.0, std::lround(200.0 / h));
    lh.push_back(std::log(h));
    le.push_back(std::log(std::abs(m[0] - T)));
  }
  EXPECT_NEAR(fit_line(lh, le).slope, 2.0, 0.2);
}
