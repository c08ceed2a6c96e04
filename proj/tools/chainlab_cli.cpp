// chainlab command-line driver.
//
// Exit codes: 0 success (including a passed property check), 2 property check failed
// (outputs still written), 1 usage, configuration or runtime error.

#include <chainlab/chainlab.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace chainlab;
using io::ordered_json;
namespace fs = std::filesystem;

namespace {

// Options that can come from the config file; an explicit flag wins.
class Block {
 public:
  Block(CLI::App* app, std::string name) : app_(app), name_(std::move(name)) {}

  template <class T>
  CLI::Option* add(const std::string& flag, const std::string& key, T& var, const std::string& desc) {
    auto* opt = app_->add_option(flag, var, desc)->capture_default_str();
    entries_.push_back({key, opt,
                        [&var](const nlohmann::json& j) { var = j.get<T>(); },
                        [&var] { return ordered_json(var); }});
    return opt;
  }
  CLI::Option* flag(const std::string& flag, const std::string& key, bool& var, const std::string& desc) {
    auto* opt = app_->add_flag(flag, var, desc);
    entries_.push_back({key, opt,
                        [&var](const nlohmann::json& j) { var = j.get<bool>(); },
                        [&var] { return ordered_json(var); }});
    return opt;
  }

  void merge(const nlohmann::json& cfg) {
    const nlohmann::json* block = cfg.contains(name_) ? &cfg.at(name_) : nullptr;
    for (auto& e : entries_) {
      if (e.opt->count() > 0) continue;
      if (block && block->contains(e.key)) e.set(block->at(e.key));
      else if (cfg.contains(e.key) && !cfg.at(e.key).is_object()) e.set(cfg.at(e.key));
    }
  }

  ordered_json echo() const {
    ordered_json j = ordered_json::object();
    for (const auto& e : entries_) j[e.key] = e.get();
    return j;
  }

  CLI::App* app() const { return app_; }
  const std::string& name() const { return name_; }

 private:
  struct Entry {
    std::string key;
    CLI::Option* opt;
    std::function<void(const nlohmann::json&)> set;
    std::function<ordered_json()> get;
  };
  CLI::App* app_;
  std::string name_;
  std::vector<Entry> entries_;
};

struct Globals {
  std::string config_path;
  std::string out_dir;
  std::string table_cache;
  std::uint64_t seed = 1;
  int grid = kDefaultProfileGrid;
};

class Outputs {
 public:
  Outputs(const Globals& g, std::string sub, ordered_json cfg)
      : dir_(g.out_dir), sub_(std::move(sub)), cfg_(std::move(cfg)), seed_(g.seed) {}

  void add_table(const std::string& name, const Correctors& c) { hashes_.emplace_back(name, io::correctors_hash(c)); }

  /// Writes `file` and `file.meta.json` next to it.
  void emit(const std::string& file, const std::string& content) {
    const fs::path p = fs::path(dir_) / file;
    io::write_file(p, content);
    auto meta = io::metadata(sub_, cfg_, seed_, hashes_);
    meta["file"] = file;
    meta["content_hash"] = io::git_blob_hash(content);
    io::write_file(fs::path(dir_) / (file + ".meta.json"), meta.dump(2) + "\n");
  }

 private:
  std::string dir_, sub_;
  ordered_json cfg_;
  std::uint64_t seed_;
  std::vector<std::pair<std::string, std::string>> hashes_;
};

Correctors correctors(const Globals& g, double k) {
  std::string path;
  if (!g.table_cache.empty()) {
    std::ostringstream name;
    name << "correctors_k" << io::format_double(k) << "_m" << g.grid << ".json";
    path = (fs::path(g.table_cache) / name.str()).string();
  }
  return io::load_or_build_correctors(k, g.grid, path);
}

std::vector<int> parse_ladder(const std::string& s) {
  std::vector<int> parts;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ':')) parts.push_back(std::stoi(tok));
  if (parts.size() < 2 || parts.size() > 3) throw std::invalid_argument("ladder must be lo:hi or lo:hi:step");
  const int step = parts.size() == 3 ? parts[2] : 1;
  if (step < 1 || parts[1] <= parts[0]) throw std::invalid_argument("ladder must be increasing");
  std::vector<int> out;
  for (int j = parts[0]; j <= parts[1]; j += step) out.push_back(j);
  return out;
}

ordered_json fit_json(const LineFit& f) {
  return {{"slope", f.slope}, {"slope_stderr", f.slope_stderr}, {"intercept", f.intercept}, {"n", f.n}};
}

std::string csv(const io::CsvTable& t) {
  std::ostringstream os;
  io::write_csv(os, t);
  return os.str();
}

// ---------------------------------------------------------------------------

struct ChainFlags {
  int sites = 3;
  double k = 2.0, gamma0 = 1.3, gammaN = 1.3, T0 = 1.0, TN = 1.0, beta = 1.0;

  void bind(Block& b, bool with_beta = false) {
    b.add("--k", "k", k, "pinning exponent");
    b.add("--sites", "n_sites", sites, "number of sites N+1");
    b.add("--gamma0", "gamma0", gamma0, "left friction");
    b.add("--gammaN", "gammaN", gammaN, "right friction");
    b.add("--T0", "T0", T0, "left temperature");
    b.add("--TN", "TN", TN, "right temperature");
    if (with_beta) b.add("--beta", "beta", beta, "inverse temperature of the weight");
  }
  ChainParams params() const {
    ChainParams p;
    p.n_sites = sites;
    p.k = k;
    p.gamma0 = gamma0;
    p.gammaN = gammaN;
    p.T0 = T0;
    p.TN = TN;
    p.beta = beta;
    p.validate();
    return p;
  }
};

int run_kappa(const Globals& g, const Block& b, double k, int n, int m_t) {
  const auto r = kappa(k, n, m_t);
  std::printf("%.8f\n", r.kappa);
  Outputs out(g, "kappa", b.echo());
  ordered_json j{{"k", k}, {"n", n}, {"kappa", r.kappa}, {"stderr_estimate", r.stderr_estimate}};
  out.emit("kappa.json", j.dump(2) + "\n");
  return 0;
}

int run_classify(double k, int n) {
  std::printf("%s\n", to_string(classify_spectrum(k, n)).c_str());
  return 0;
}

struct SimFlags {
  double h = 1e-3, t_final = 10.0, e_mid = 100.0;
  int stride = 100;
  std::string format = "csv";
};

int run_simulate(const Globals& g, const Block& b, const ChainParams& prm, const SimFlags& f) {
  IntegratorConfig cfg;
  cfg.h = f.h;
  cfg.T_final = f.t_final;
  cfg.record_stride = f.stride;
  cfg.seed = g.seed;
  std::vector<Observable> obs{observables::energy(prm)};
  for (int i = 0; i < prm.n_sites; ++i) obs.push_back(observables::momentum(i));
  for (int i = 0; i < prm.n_sites; ++i) obs.push_back(observables::position(i));
  const auto ts = simulate(breather_init(prm, f.e_mid), prm, cfg, obs);
  Outputs out(g, "simulate", b.echo());
  std::ostringstream os;
  if (f.format == "jsonl") {
    io::write_jsonl(os, ts);
    out.emit("simulate.jsonl", os.str());
  } else {
    io::write_csv(os, ts);
    out.emit("simulate.csv", os.str());
  }
  return 0;
}

struct DecayFlags {
  double h = 1e-3, t_final = 1e5, e_mid = 1e3, tolerance = 0.05, record_dt = 0.1;
  int n_traj = 64, threads = 0;
};

int run_decay_cmd(const Globals& g, const Block& b, const ChainParams& prm, const DecayFlags& f) {
  IntegratorConfig cfg;
  cfg.h = f.h;
  cfg.T_final = f.t_final;
  cfg.record_stride = std::max(1, static_cast<int>(std::lround(f.record_dt / f.h)));
  cfg.seed = g.seed;
  const auto r = run_decay(prm, f.e_mid, cfg, f.n_traj, f.threads);
  Outputs out(g, "decay", b.echo());
  std::ostringstream os;
  io::write_csv(os, r.series);
  out.emit("decay.csv", os.str());
  const bool pass = std::abs(r.relative_error()) <= f.tolerance;
  ordered_json j{{"beta", r.prediction.beta},
                 {"kappa", r.prediction.kappa},
                 {"predicted_slope", r.prediction.slope},
                 {"fitted_slope", -r.fit.slope},
                 {"fitted_slope_stderr", r.fit.slope_stderr},
                 {"relative_error", r.relative_error()},
                 {"window_end", r.window_end},
                 {"n_traj", r.n_traj},
                 {"tolerance", f.tolerance},
                 {"pass", pass}};
  out.emit("decay.json", j.dump(2) + "\n");
  std::printf("predicted %.6f fitted %.6f relative error %.4f %s\n", r.prediction.slope, -r.fit.slope,
              r.relative_error(), pass ? "PASS" : "FAIL");
  return pass ? 0 : 2;
}

struct SpectralFlags {
  std::string variant = "three", ladder = "20:60:5";
  int samples = 20000;
  bool starred = false;
  double ratio_tolerance = 0.05;
};

int run_spectral(const Globals& g, const Block& b, ChainParams prm, const SpectralFlags& f) {
  EigenfunctionSpec spec;
  if (f.variant == "three") spec.variant = ProbeVariant::three_site;
  else if (f.variant == "long") spec.variant = ProbeVariant::long_chain;
  else throw std::invalid_argument("variant must be three or long");
  spec.params = prm;
  spec.starred = f.starred;
  spec.shell_energy = 3.0;
  spec.validate();
  const auto c = correctors(g, prm.k);
  const SpectralProbe probe(c);
  const auto rep = run_ladder(probe, spec, parse_ladder(f.ladder), static_cast<std::size_t>(f.samples), g.seed);
  Outputs out(g, "spectral", b.echo());
  out.add_table("correctors", c);
  io::CsvTable t;
  t.header = {"E", "phi_norm", "phi_norm_stderr", "ratio", "ratio_stderr"};
  for (const auto& r : rep.rungs)
    t.add_row({r.shell_energy, r.phi_norm.mean, r.phi_norm.stderr_, r.ratio.mean, r.ratio.stderr_});
  out.emit("spectral.csv", csv(t));
  const bool norm_ok = std::abs(rep.norm_fit.slope - rep.predicted_norm_exponent) <= 2.0 * rep.norm_fit.slope_stderr;
  const bool ratio_ok = std::abs(rep.ratio_fit.slope - rep.predicted_ratio_exponent) <= f.ratio_tolerance;
  ordered_json j{{"variant", to_string(spec.variant)},
                 {"starred", spec.starred},
                 {"norm_fit", fit_json(rep.norm_fit)},
                 {"predicted_norm_exponent", rep.predicted_norm_exponent},
                 {"ratio_fit", fit_json(rep.ratio_fit)},
                 {"predicted_ratio_exponent", rep.predicted_ratio_exponent},
                 {"norm_pass", norm_ok},
                 {"ratio_pass", ratio_ok},
                 {"pass", norm_ok && ratio_ok}};
  out.emit("spectral.json", j.dump(2) + "\n");
  std::printf("norm slope %.4f (pred %.4f) ratio slope %.4f (pred %.4f) %s\n", rep.norm_fit.slope,
              rep.predicted_norm_exponent, rep.ratio_fit.slope, rep.predicted_ratio_exponent,
              norm_ok && ratio_ok ? "PASS" : "FAIL");
  return norm_ok && ratio_ok ? 0 : 2;
}

struct EffectiveFlags {
  std::string variant = "41", from;
  double e_lo = 1e2, e_hi = 1e6, t_segment = 50.0, delta = kDefaultDelta;
  int segments = 3, samples = 10000;
};

std::vector<ChainState> read_states(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read " + path);
  const auto t = io::read_csv(in);
  std::vector<int> pc(3, -1), qc(3, -1);
  for (std::size_t c = 0; c < t.header.size(); ++c)
    for (int i = 0; i < 3; ++i) {
      if (t.header[c] == "p" + std::to_string(i)) pc[i] = static_cast<int>(c);
      if (t.header[c] == "q" + std::to_string(i)) qc[i] = static_cast<int>(c);
    }
  for (int i = 0; i < 3; ++i)
    if (pc[i] < 0 || qc[i] < 0) throw std::invalid_argument("input needs columns p0..p2, q0..q2");
  std::vector<ChainState> out;
  for (const auto& r : t.rows) {
    ChainState x = ChainState::zeros(3);
    for (int i = 0; i < 3; ++i) {
      x.p[i] = r[pc[i]];
      x.q[i] = r[qc[i]];
    }
    out.push_back(x);
  }
  return out;
}

int run_effective(const Globals& g, const Block& b, const ChainParams& prm, const EffectiveFlags& f) {
  EffectiveVariant v;
  if (f.variant == "41") v = EffectiveVariant::thm_4_1;
  else if (f.variant == "43") v = EffectiveVariant::thm_4_3;
  else throw std::invalid_argument("variant must be 41 or 43");
  const auto c = correctors(g, prm.k);
  const EffectiveDynamics ed(prm, c, v);
  const auto traj = f.from.empty() ? breather_trajectory(prm, f.e_lo, f.e_hi, f.segments, f.t_segment, g.seed, f.samples)
                                   : read_states(f.from);
  const auto rep = verify_error_bounds(traj, ed, f.delta, true);
  Outputs out(g, "effective", b.echo());
  out.add_table("correctors", c);
  io::CsvTable t;
  t.header = {"E1"};
  for (const auto& n : rep.names) t.header.push_back(n);
  for (const auto& r : rep.rows) {
    std::vector<double> row{r.e1};
    row.insert(row.end(), r.values.begin(), r.values.end());
    t.add_row(std::move(row));
  }
  out.emit("effective.csv", csv(t));
  ordered_json ratios = ordered_json::object();
  for (std::size_t j = 0; j < rep.names.size(); ++j)
    ratios[rep.names[j]] = {{"sup_first_decade", rep.sup_first[j]},
                            {"sup_last_decade", rep.sup_last[j]},
                            {"sup", rep.sup_all[j]},
                            {"pass", static_cast<bool>(rep.pass_each[j])}};
  ordered_json j{{"variant", to_string(v)}, {"delta", rep.delta},         {"e1_min", rep.e1_min},
                 {"e1_max", rep.e1_max},    {"growth_factor", kNoGrowthFactor}, {"ratios", ratios},
                 {"pass", rep.pass}};
  out.emit("effective.json", j.dump(2) + "\n");
  std::printf("%s over E1 in [%.3g, %.3g]: %s\n", to_string(v).c_str(), rep.e1_min, rep.e1_max, rep.pass ? "PASS" : "FAIL");
  return rep.pass ? 0 : 2;
}

struct LyapunovFlags {
  int n = 2, points = 3000;
  double stationary_t = 0.0, stationary_h = 2e-3;
};

int run_lyapunov(const Globals& g, const Block& b, const ChainParams& prm, const LyapunovFlags& f) {
  const auto c = correctors(g, prm.k);
  const auto cfg = LyapunovConfig::for_params(prm, f.n);
  const LyapunovFunctions lf(prm, c, cfg);
  const auto sample = lyapunov_sampler(lf, std::max(1, f.points / 3), g.seed);
  const auto rep = verify_dissipation(prm, c, cfg, sample);
  Outputs out(g, "lyapunov", b.echo());
  out.add_table("correctors", c);
  io::CsvTable t;
  t.header = {"family", "H", "E1", "LV", "bound"};
  for (const auto& p : rep.points) t.add_row({static_cast<double>(p.family), p.H, p.E1, p.LV, p.dominant});
  out.emit("lyapunov.csv", csv(t));
  bool pass = rep.pass();
  ordered_json j{{"n", f.n},
                 {"N_pow", rep.config.N_pow},
                 {"gamma_mix", rep.config.gamma_mix},
                 {"regime", to_string(rep.config.regime)},
                 {"threshold", rep.threshold},
                 {"threshold_gate", kThresholdGate},
                 {"threshold_pass", rep.threshold_ok},
                 {"envelope_fit", fit_json(rep.envelope)},
                 {"envelope_predicted", rep.envelope_predicted},
                 {"envelope_pass", rep.envelope_ok},
                 {"u0_bound_low", rep.u0_bound_low},
                 {"u0_bound_high", rep.u0_bound_high},
                 {"u0_bound_pass", rep.u0_bound_ok},
                 {"coercive_c", rep.coercive_c},
                 {"skipped", rep.skipped.size()}};
  if (f.stationary_t > 0.0) {
    LyapunovFunctions lv(prm, c, rep.config);
    const auto s = stationary_generator_average(lv, f.stationary_t, f.stationary_h, g.seed);
    j["stationary"] = {{"mean", s.mean}, {"stderr", s.stderr_}, {"z", s.z()}, {"pass", s.consistent(3.0)}};
    pass = pass && s.consistent(3.0);
  }
  j["pass"] = pass;
  out.emit("lyapunov.json", j.dump(2) + "\n");
  std::printf("N_pow %d threshold %.4g envelope %.4f (pred %.4f) %s\n", rep.config.N_pow, rep.threshold,
              rep.envelope.slope, rep.envelope_predicted, pass ? "PASS" : "FAIL");
  return pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chainlab: pinned oscillator chain experiments"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print help");  // -h is taken by the step size flag --h
  Globals g;
  if (const char* env = std::getenv("CHAINLAB_OUT")) g.out_dir = env;
  if (g.out_dir.empty()) g.out_dir = ".";
  app.add_option("--config", g.config_path, "JSON config; flags override its values")->check(CLI::ExistingFile);
  app.add_option("--out", g.out_dir, "output directory (default $CHAINLAB_OUT or .)");
  app.add_option("--table-cache", g.table_cache, "directory for corrector tables");

  std::vector<Block> blocks;
  blocks.reserve(7);
  auto block = [&](const char* name, const char* desc) -> Block& {
    blocks.emplace_back(app.add_subcommand(name, desc), name);
    blocks.back().add("--seed", "seed", g.seed, "master seed");
    blocks.back().add("--grid", "grid", g.grid, "angle grid for corrector tables");
    return blocks.back();
  };

  double kk = 2.0;
  int kn = 1, m_t = 4096;
  auto& b_kappa = block("kappa", "averaged constant kappa_{k,n}");
  b_kappa.add("--k", "k", kk, "pinning exponent")->required();
  b_kappa.add("--n", "n", kn, "half-chain depth")->required();
  b_kappa.add("--samples", "m_t", m_t, "time samples per period");

  double ck = 2.0;
  int cn = 1;
  auto& b_class = block("classify", "spectral class of the model generator");
  b_class.add("--k", "k", ck, "pinning exponent")->required();
  b_class.add("--n", "n", cn, "half-chain depth")->required();

  ChainFlags sim_chain;
  SimFlags sim;
  auto& b_sim = block("simulate", "single breather trajectory");
  sim_chain.bind(b_sim);
  b_sim.add("--h", "h", sim.h, "step size");
  b_sim.add("--t-final", "T_final", sim.t_final, "final time");
  b_sim.add("--stride", "record_stride", sim.stride, "steps between records");
  b_sim.add("--e-mid", "e_mid", sim.e_mid, "initial middle energy");
  b_sim.add("--format", "format", sim.format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));

  ChainFlags dec_chain;
  DecayFlags dec;
  double dec_gamma = -1.0, dec_temp = -1.0;
  auto& b_dec = block("decay", "ensemble energy decay against the prediction");
  dec_chain.bind(b_dec);
  b_dec.add("--gamma", "gamma", dec_gamma, "both frictions (overrides gamma0/gammaN)");
  b_dec.add("--temp", "temp", dec_temp, "both temperatures (overrides T0/TN)");
  b_dec.add("--h", "h", dec.h, "step size");
  b_dec.add("--t-final", "T_final", dec.t_final, "final time");
  b_dec.add("--e-mid", "e_mid", dec.e_mid, "initial middle energy");
  b_dec.add("--n-traj", "n_traj", dec.n_traj, "trajectories");
  b_dec.add("--threads", "threads", dec.threads, "worker threads (0 = hardware)");
  b_dec.add("--record-dt", "record_dt", dec.record_dt, "time between records");
  b_dec.add("--tolerance", "tolerance", dec.tolerance, "relative slope tolerance");

  ChainFlags sp_chain;
  sp_chain.beta = 0.8;
  SpectralFlags sp;
  auto& b_sp = block("spectral", "norm and residual scaling of the test functions");
  sp_chain.bind(b_sp, true);
  b_sp.add("--variant", "variant", sp.variant, "three or long")->check(CLI::IsMember({"three", "long"}));
  b_sp.add("--ladder", "ladder", sp.ladder, "rung exponents lo:hi[:step], shell energy 3^j");
  b_sp.add("--samples", "samples", sp.samples, "Monte Carlo samples per rung");
  b_sp.flag("--starred", "starred", sp.starred, "use the starred family");
  b_sp.add("--ratio-tolerance", "ratio_tolerance", sp.ratio_tolerance, "tolerance on the ratio exponent");

  ChainFlags ef_chain;
  EffectiveFlags ef;
  auto& b_ef = block("effective", "remainder bounds of the effective boundary dynamics");
  ef_chain.bind(b_ef);
  b_ef.add("--variant", "variant", ef.variant, "41 or 43")->check(CLI::IsMember({"41", "43"}));
  b_ef.add("--from", "from", ef.from, "CSV with columns p0..p2, q0..q2 (e.g. simulate output)");
  b_ef.add("--e-lo", "e_lo", ef.e_lo, "lowest middle energy");
  b_ef.add("--e-hi", "e_hi", ef.e_hi, "highest middle energy");
  b_ef.add("--segments", "segments_per_decade", ef.segments, "segments per decade");
  b_ef.add("--t-segment", "t_segment", ef.t_segment, "duration of each segment");
  b_ef.add("--samples", "samples_per_segment", ef.samples, "recorded states per segment");
  b_ef.add("--delta", "delta", ef.delta, "bound exponent slack");

  ChainFlags ly_chain;
  ly_chain.gamma0 = 1.0;
  ly_chain.gammaN = 1.6;
  LyapunovFlags ly;
  auto& b_ly = block("lyapunov", "dissipation of the Lyapunov function on sampled states");
  ly_chain.bind(b_ly);
  b_ly.add("--n", "n", ly.n, "power of H");
  b_ly.add("--points", "points", ly.points, "sampled states (split over three families)");
  b_ly.add("--stationary-t", "stationary_T", ly.stationary_t, "length of the stationary run (0 = skip)");
  b_ly.add("--stationary-h", "stationary_h", ly.stationary_h, "step of the stationary run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    nlohmann::json cfg = nlohmann::json::object();
    if (!g.config_path.empty()) {
      std::ifstream in(g.config_path);
      cfg = nlohmann::json::parse(in);
      if (!cfg.is_object()) throw std::invalid_argument("config must be a JSON object");
    }
    Block* active = nullptr;
    for (auto& b : blocks)
      if (b.app()->parsed()) active = &b;
    active->merge(cfg);
    const std::string sub = active->name();

    if (sub == "kappa") return run_kappa(g, *active, kk, kn, m_t);
    if (sub == "classify") return run_classify(ck, cn);
    if (sub == "simulate") return run_simulate(g, *active, sim_chain.params(), sim);
    if (sub == "decay") {
      if (dec_gamma >= 0.0) dec_chain.gamma0 = dec_chain.gammaN = dec_gamma;
      if (dec_temp >= 0.0) dec_chain.T0 = dec_chain.TN = dec_temp;
      return run_decay_cmd(g, *active, dec_chain.params(), dec);
    }
    if (sub == "spectral") return run_spectral(g, *active, sp_chain.params(), sp);
    if (sub == "effective") return run_effective(g, *active, ef_chain.params(), ef);
    if (sub == "lyapunov") return run_lyapunov(g, *active, ly_chain.params(), ly);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
