#include <chainlab/lyapunov.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>

using namespace chainlab;

namespace {

const Correctors& correctors_for(double k) {
  static std::map<double, Correctors> cache;
  auto it = cache.find(k);
  if (it == cache.end()) it = cache.emplace(k, build_correctors(k)).first;
  return it->second;
}

ChainParams params(double k) {
  ChainParams p;
  p.k = k;
  p.gamma0 = 1.0;
  p.gammaN = 1.6;
  return p;
}

LyapunovFunctions make(double k, int n = 2) {
  const auto prm = params(k);
  return LyapunovFunctions(prm, correctors_for(k), LyapunovConfig::for_params(prm, n));
}

ChainState breather(double k, double e1, SequentialRng& rng, double spread) {
  ChainState x = ChainState::zeros(3);
  const auto pt = FreeOscillator(k).from_shell(2 * std::numbers::pi * rng.uniform(), e1);
  x.p[1] = pt.p;
  x.q[1] = pt.q;
  for (int i : {0, 2}) {
    x.p[i] = spread * rng.normal();
    x.q[i] = spread * rng.normal();
  }
  return x;
}

}  // namespace

TEST(Config, ForParams) {
  const auto c = LyapunovConfig::for_params(params(2.0), 3, 4);
  EXPECT_EQ(c.n, 3);
  EXPECT_EQ(c.N_pow, 4);
  EXPECT_DOUBLE_EQ(c.gamma_mix, 0.5);
  EXPECT_EQ(c.regime, LyapunovRegime::k_high);
  EXPECT_EQ(regime_for(1.75), LyapunovRegime::k_low);
  EXPECT_EQ(LyapunovConfig::for_params(params(1.75)).regime, LyapunovRegime::k_low);
  auto p = params(2.0);
  p.gamma0 = 0.4;
  EXPECT_DOUBLE_EQ(LyapunovConfig::for_params(p).gamma_mix, 0.2);
  try {
    regime_for(1.5);
    FAIL();
  } catch (const std::domain_error& e) {
    EXPECT_STREQ(e.what(), "corrector unbounded in this regime");
  }
}

TEST(Construction, Errors) {
  auto p = params(2.0);
  p.n_sites = 5;
  EXPECT_THROW(LyapunovFunctions(p, correctors_for(2.0), LyapunovConfig::for_params(params(2.0))), std::invalid_argument);
  auto c = LyapunovConfig::for_params(params(2.0));
  c.regime = LyapunovRegime::k_low;
  EXPECT_THROW(LyapunovFunctions(params(2.0), correctors_for(2.0), c), std::domain_error);
  c = LyapunovConfig::for_params(params(2.0));
  c.n = 1;
  EXPECT_THROW(LyapunovFunctions(params(2.0), correctors_for(2.0), c), std::invalid_argument);
}

TEST(U0, AtRest) {
  for (double k : {1.75, 2.0, 3.0}) EXPECT_DOUBLE_EQ(make(k).u0(ChainState::zeros(3)), 2.0);
}

TEST(U0, MatchesBarredSumAndYoungBounds) {
  SequentialRng rng(1, 0);
  for (double k : {1.75, 2.0, 3.0}) {
    const auto lf = make(k);
    const auto& ed = lf.boundary_effective();
    for (int j = 0; j < 500; ++j) {
      const auto x = breather(k, std::pow(10.0, 5 * rng.uniform()), rng, std::pow(10.0, 2 * rng.uniform()));
      const auto b = ed.to_bar(x);
      double h = 0, cross = 0;
      for (int s = 0; s < 2; ++s) {
        h += b.pb[s] * b.pb[s] / 2 + std::pow(std::abs(b.qb[s]), 2 * k) / (2 * k) + b.qb[s] * b.qb[s] / 2 + 1;
        cross += b.pb[s] * b.qb[s];
      }
      const double g = lf.config().gamma_mix;
      const double u = lf.u0(x);
      EXPECT_NEAR(u, h + g * cross, 1e-12 * h);
      EXPECT_GE(u, (1 - g) * h * (1 - 1e-12));
      EXPECT_LE(u, (1 + g) * h * (1 + 1e-12));
    }
  }
}

TEST(U1, LowRegimeReducesToEnergyPowerBelowCutoff) {
  const auto lf = make(1.75, 3);
  SequentialRng rng(2, 0);
  for (int j = 0; j < 200; ++j) {
    const auto x = breather(1.75, 0.99 * rng.uniform(), rng, 3.0);
    const double h = hamiltonian(x, lf.params());
    EXPECT_NEAR(lf.u1(x), h * h * h, 1e-13 * h * h * h);
    EXPECT_EQ(lf.w(x), 0.0);
  }
}

TEST(U1, LowRegimeCorrectorTerm) {
  const auto lf = make(1.75, 2);
  SequentialRng rng(3, 0);
  for (int j = 0; j < 100; ++j) {
    const auto x = breather(1.75, 5 + 1e4 * rng.uniform(), rng, 1.0);
    const double h = hamiltonian(x, lf.params());
    const double psi = correctors_for(1.75).psi(x.p[1], x.q[1]);
    EXPECT_NEAR(lf.u1(x), h * h + h * (2.0 / 2) * (1.0 + 1.6) * psi, 1e-12 * h * h);
  }
}

TEST(U1, HighRegimeTermByTerm) {
  for (double k : {2.0, 3.0}) {
    const auto lf = make(k, 2);
    const auto& cr = correctors_for(k);
    SequentialRng rng(4, 0);
    for (int j = 0; j < 100; ++j) {
      const auto x = breather(k, 5 + 1e4 * rng.uniform(), rng, 2.0);
      const double h = hamiltonian(x, lf.params());
      const double f = cr.phi(x.p[1], x.q[1]), f2 = cr.phi2(x.p[1], x.q[1]), psi = cr.psi(x.p[1], x.q[1]);
      const double g[2] = {1.0, 1.6};
      double xi_sum = 0, corr = 0;
      for (int s = 0; s < 2; ++s) {
        const int i = 2 * s;
        const double pb = x.p[i] + f - g[s] * f2, qb = x.q[i] + f2;
        xi_sum += pb * pb / 2 + std::pow(std::abs(qb), 2 * k) / (2 * k) + qb * qb / 2 + 1;
        corr += g[s] * (psi - 2 * pb * f2);
      }
      const double xi = 2 * h * xi_sum;
      EXPECT_NEAR(lf.xi(x), xi, 1e-12 * xi);
      EXPECT_NEAR(lf.u1(x), h * h - xi + 2 * h * corr, 1e-11 * h * h);
    }
  }
}

TEST(Jets, ItoProductRule) {
  const auto lf = make(2.0);
  SequentialRng rng(5, 0);
  for (int j = 0; j < 50; ++j) {
    const auto x = breather(2.0, 1 + 50 * rng.uniform(), rng, 1.0);
    const auto h = lf.energy_jet(x);
    const auto direct = lf.jet([&](const ChainState& y) { return hamiltonian(y, lf.params()); }, x);
    EXPECT_NEAR(h.L, direct.L, 1e-5 * (1 + std::abs(h.L)));
    const auto sq = lf.product(h, h), p2 = lf.power(h, 2);
    EXPECT_NEAR(sq.L, p2.L, 1e-12 * (1 + std::abs(p2.L)));
    const auto h3 = lf.jet([&](const ChainState& y) { return std::pow(hamiltonian(y, lf.params()), 3); }, x);
    EXPECT_NEAR(lf.power(h, 3).L, h3.L, 1e-5 * (1 + std::abs(h3.L)));
  }
}

TEST(Jets, AssembledGeneratorMatchesDirectFiniteDifference) {
  SequentialRng rng(6, 0);
  for (double k : {1.75, 2.0, 3.0}) {
    auto lf = make(k);
    lf.set_n_pow(2);
    for (int j = 0; j < 30; ++j) {
      const auto x = breather(k, 3 + 30 * rng.uniform(), rng, 1.0);
      const double a = lf.generator_v(x), d = lf.generator_v_direct(x);
      const double scale = std::abs(lf.generator_u1(x)) + std::abs(lf.generator_u0_power(x, 2)) + 1;
      EXPECT_NEAR(a, d, 1e-4 * scale) << "k=" << k;
    }
  }
}

TEST(Jets, ExpMomentRate) {
  const auto lf = make(2.0);
  SequentialRng rng(7, 0);
  const double theta = 0.05;
  for (int j = 0; j < 30; ++j) {
    const auto x = breather(2.0, 2 + 20 * rng.uniform(), rng, 1.0);
    const double u = lf.u0(x);
    const double direct =
        apply_generator([&](const ChainState& y) { return std::exp(theta * (lf.u0(y) - u)); }, x, lf.params());
    EXPECT_NEAR(lf.exp_moment_rate(x, theta), direct, 1e-5 * (1 + std::abs(direct)));
  }
}

TEST(Dominant, MatchesGeneratorOfU1AtHighEnergy) {
  // Boundaries at rest in the barred variables: L U1 is carried by the averaged friction term.
  for (double k : {2.0, 3.0}) {
    const auto lf = make(k);
    SequentialRng rng(8, 0);
    for (int j = 0; j < 20; ++j) {
      ChainState x = breather(k, 1e6, rng, 0.0);
      BarState b;
      x = lf.boundary_effective().from_bar(b, x.p[1], x.q[1]);
      const double d = lf.dominant_term(x), l = lf.generator_u1(x);
      EXPECT_LT(d, 0.0);
      EXPECT_NEAR(l / d, 1.0, 0.2) << "k=" << k;
    }
  }
}

TEST(Dissipation, KTwoSmallSample) {
  const auto prm = params(2.0);
  auto cfg = LyapunovConfig::for_params(prm, 2);
  const LyapunovFunctions lf(prm, correctors_for(2.0), cfg);
  const auto sample = lyapunov_sampler(lf, 300, 11);
  ASSERT_EQ(sample.size(), 900u);
  const auto rep = verify_dissipation(prm, correctors_for(2.0), cfg, sample);
  EXPECT_TRUE(rep.skipped.empty());
  EXPECT_TRUE(rep.threshold_ok) << rep.threshold;
  EXPECT_TRUE(rep.envelope_ok) << rep.envelope.slope;
  EXPECT_NEAR(rep.envelope_predicted, 1.0, 1e-15);
  EXPECT_TRUE(rep.u0_bound_ok) << rep.u0_bound_low << " " << rep.u0_bound_high;
  EXPECT_GT(rep.coercive_c, 0.0);
  // Thresholds are non-increasing in the power of U0 once it dominates.
  EXPECT_LE(rep.threshold_by_npow[rep.config.N_pow - 1], kThresholdGate);
}

TEST(Sampler, FamiliesAndDeterminism) {
  const auto lf = make(3.0);
  const auto a = lyapunov_sampler(lf, 50, 3), b = lyapunov_sampler(lf, 50, 3);
  ASSERT_EQ(a.size(), 150u);
  for (std::size_t j = 0; j < a.size(); ++j) {
    EXPECT_EQ(a[j].state.p, b[j].state.p);
    EXPECT_EQ(static_cast<int>(a[j].family), static_cast<int>(j / 50));
  }
  for (int j = 0; j < 50; ++j) {
    const auto& x = a[j].state;
    const double e1 = hf_energy(x.p[1], x.q[1], 3.0);
    EXPECT_GE(e1, 10.0 * (1 - 1e-9));
    EXPECT_LE(e1, 1e6 * (1 + 1e-9));
  }
}

TEST(Stationary, EqualTemperaturesRequired) {
  auto p = params(2.0);
  p.TN = 2.0;
  const LyapunovFunctions lf(p, correctors_for(2.0), LyapunovConfig::for_params(p));
  EXPECT_THROW(stationary_generator_average(lf, 100, 1e-2, 1), std::invalid_argument);
}

TEST(Stationary, ShortRunConsistent) {
  const auto lf = make(2.0);
  const auto s = stationary_generator_average(lf, 2000, 2e-3, 11);
  EXPECT_EQ(s.n_batches, 20);
  EXPECT_GT(s.stderr_, 0.0);
  EXPECT_TRUE(s.consistent(3.0)) << s.mean << " +- " << s.stderr_;
}
