#pragma once

// Strang splitting B(h/2) A(h/2) O(h) A(h/2) B(h/2): B kicks momenta with the
// full conservative force, A drifts positions, O is the exact
// Ornstein-Uhlenbeck flow of the bath momenta. With gamma = 0 this is
// velocity Verlet.

#include <chainlab/chain_model.hpp>
#include <chainlab/random.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace chainlab {

inline constexpr const char* kSchemeId = "strang-ou-verlet";

struct IntegratorConfig {
  double h = 1e-3;
  double T_final = 1.0;
  int record_stride = 1;
  std::uint64_t seed = 0;
  std::string scheme = kSchemeId;

  void validate() const {
    if (!(h > 0.0)) throw std::invalid_argument("h must be positive");
    if (!(T_final >= 0.0)) throw std::invalid_argument("T_final must be >= 0");
    if (record_stride < 1) throw std::invalid_argument("record_stride must be >= 1");
    if (scheme != kSchemeId) throw std::invalid_argument("unknown scheme: " + scheme);
  }
  std::uint64_t n_steps() const { return static_cast<std::uint64_t>(std::llround(T_final / h)); }
};

class BlowUp : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Integrator {
 public:
  Integrator(const ChainParams& prm, double h) : prm_(prm), h_(h) {
    for (int i : detail::bath_sites(prm_)) {
      const double g = prm_.gamma(i);
      Bath b;
      b.site = i;
      b.decay = std::exp(-g * h_);
      // sigma^2 (1 - e^{-2 g h}) / (2 g), with the g -> 0 limit sigma^2 h.
      const double s2 = 2.0 * g * prm_.temperature(i);
      b.noise = g > 0.0 ? std::sqrt(s2 * (-std::expm1(-2.0 * g * h_)) / (2.0 * g)) : 0.0;
      baths_.push_back(b);
    }
  }

  int noise_dim() const { return static_cast<int>(baths_.size()); }
  double h() const { return h_; }

  /// One step with given standard-normal increments (one per bath site).
  void step_with_noise(ChainState& s, std::span<const double> xi) {
    const int n = s.size();
    if (force_.size() != static_cast<std::size_t>(n) || !cache_valid_) {
      chain_force(s, prm_, force_);
      cache_valid_ = true;
    }
    const double hh = 0.5 * h_;
    for (int i = 0; i < n; ++i) s.p[i] += hh * force_[i];
    for (int i = 0; i < n; ++i) s.q[i] += hh * s.p[i];
    for (std::size_t b = 0; b < baths_.size(); ++b) {
      auto& p = s.p[baths_[b].site];
      p = baths_[b].decay * p + baths_[b].noise * xi[b];
    }
    for (int i = 0; i < n; ++i) s.q[i] += hh * s.p[i];
    chain_force(s, prm_, force_);
    for (int i = 0; i < n; ++i) s.p[i] += hh * force_[i];
    if (!s.finite()) {
      cache_valid_ = false;
      throw BlowUp("blow-up; reduce h");
    }
  }

  /// One step drawing noise for step index `step` from a counter stream.
  void step(ChainState& s, const CounterStream& rng, std::uint64_t step) {
    double xi[2] = {0.0, 0.0};
    for (int b = 0; b < noise_dim(); ++b) xi[b] = rng.normal(step, static_cast<std::uint32_t>(b));
    step_with_noise(s, std::span<const double>(xi, noise_dim()));
  }

  /// Forget the cached force (call after modifying the state externally).
  void invalidate() { cache_valid_ = false; }

 private:
  struct Bath {
    int site;
    double decay, noise;
  };
  ChainParams prm_;
  double h_;
  std::vector<Bath> baths_;
  std::vector<double> force_;
  bool cache_valid_ = false;
};

/// Single step as a pure function of (state, step index).
inline ChainState step(const ChainState& s, const ChainParams& prm, const IntegratorConfig& cfg,
                       const CounterStream& rng, std::uint64_t step_index = 0) {
  Integrator it(prm, cfg.h);
  ChainState out = s;
  it.step(out, rng, step_index);
  return out;
}

// ---------------------------------------------------------------------------

struct Observable {
  std::string name;
  std::function<double(const ChainState&)> fn;
};

namespace observables {

inline Observable energy(const ChainParams& prm) {
  return {"H", [prm](const ChainState& s) { return hamiltonian(s, prm); }};
}
inline Observable energy_power(const ChainParams& prm, double beta) {
  return {"H^beta", [prm, beta](const ChainState& s) { return std::pow(hamiltonian(s, prm), beta); }};
}
/// E_i = 1 + H_f(p_i, q_i)
inline Observable site_energy(const ChainParams& prm, int i) {
  return {"E" + std::to_string(i), [k = prm.k, i](const ChainState& s) { return 1.0 + hf_energy(s.p[i], s.q[i], k); }};
}
inline Observable momentum(int i) {
  return {"p" + std::to_string(i), [i](const ChainState& s) { return s.p[i]; }};
}
inline Observable position(int i) {
  return {"q" + std::to_string(i), [i](const ChainState& s) { return s.q[i]; }};
}

}  // namespace observables

struct TimeSeries {
  std::vector<double> times;
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return times.size(); }
  const std::vector<double>& column(const std::string& name) const {
    for (std::size_t c = 0; c < names.size(); ++c)
      if (names[c] == name) return columns[c];
    throw std::out_of_range("no column " + name);
  }
  void add_column(std::string name, std::vector<double> v) {
    if (v.size() != times.size()) throw std::invalid_argument("column length mismatch");
    names.push_back(std::move(name));
    columns.push_back(std::move(v));
  }
};

/// Returns false to stop the run early.
using StopPredicate = std::function<bool(const ChainState&, double)>;

inline constexpr double kBlowUpEnergy = 1e12;

/// Runs one trajectory on RNG stream `stream`, recording every record_stride steps
/// (including t = 0). The energy guard is evaluated at every recorded sample and
/// every 64 steps.
inline TimeSeries simulate(const ChainState& state0, const ChainParams& prm, const IntegratorConfig& cfg,
                           const std::vector<Observable>& obs, std::uint32_t stream = 0,
                           const StopPredicate& keep_going = {}) {
  prm.validate();
  cfg.validate();
  TimeSeries ts;
  for (const auto& o : obs) ts.names.push_back(o.name);
  ts.columns.resize(obs.size());
  const std::uint64_t n = cfg.n_steps();
  const std::size_t expected = n / cfg.record_stride + 1;
  ts.times.reserve(expected);
  for (auto& c : ts.columns) c.reserve(expected);

  ChainState s = state0;
  Integrator it(prm, cfg.h);
  const CounterStream rng(cfg.seed, stream);
  auto record = [&](double t) {
    ts.times.push_back(t);
    for (std::size_t c = 0; c < obs.size(); ++c) ts.columns[c].push_back(obs[c].fn(s));
  };
  record(0.0);
  for (std::uint64_t j = 0; j < n; ++j) {
    const double t = static_cast<double>(j + 1) * cfg.h;
    try {
      it.step(s, rng, j);
      if ((j & 63u) == 63u && hamiltonian(s, prm) > kBlowUpEnergy) throw BlowUp("blow-up; reduce h");
    } catch (const BlowUp&) {
      std::ostringstream m;
      m.precision(17);
      m << "blow-up; reduce h (t=" << t << ")";
      throw BlowUp(m.str());
    }
    if ((j + 1) % cfg.record_stride == 0) {
      record(t);
      if (keep_going && !keep_going(s, t)) break;
    }
  }
  return ts;
}

/// n_traj trajectories on streams 0..n_traj-1. Output order is by trajectory
/// index; each trajectory is sequential, so results do not depend on n_threads.
inline std::vector<TimeSeries> ensemble(const ChainState& state0, const ChainParams& prm, const IntegratorConfig& cfg,
                                        int n_traj, const std::vector<Observable>& obs, int n_threads = 0,
                                        const StopPredicate& keep_going = {}) {
  if (n_traj < 1) throw std::invalid_argument("n_traj must be >= 1");
  std::vector<TimeSeries> out(n_traj);
  if (n_threads <= 0) n_threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  n_threads = std::min(n_threads, n_traj);
  if (n_threads == 1) {
    for (int i = 0; i < n_traj; ++i) out[i] = simulate(state0, prm, cfg, obs, static_cast<std::uint32_t>(i), keep_going);
    return out;
  }
  std::vector<std::exception_ptr> errors(n_threads);
  std::vector<std::thread> pool;
  for (int w = 0; w < n_threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < n_traj; i += n_threads)
          out[i] = simulate(state0, prm, cfg, obs, static_cast<std::uint32_t>(i), keep_going);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace chainlab
