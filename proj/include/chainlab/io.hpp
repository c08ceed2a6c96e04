#pragma once

// Output formats: CSV (header row, 17 significant digits), JSON-lines, a JSON container for
// corrector tables and git-style content hashes.

#include <chainlab/chain_model.hpp>
#include <chainlab/correctors.hpp>
#include <chainlab/sde_integrator.hpp>

#include <json.hpp>
#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace chainlab::io {

using ordered_json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "1.0.0";

/// 17 significant digits, '.' decimal point.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  void add_row(std::vector<double> r) {
    if (r.size() != header.size()) throw std::invalid_argument("row width mismatch");
    rows.push_back(std::move(r));
  }
};

inline void write_csv(std::ostream& os, const CsvTable& t) {
  for (std::size_t c = 0; c < t.header.size(); ++c) os << (c ? "," : "") << t.header[c];
  os << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t c = 0; c < r.size(); ++c) os << (c ? "," : "") << format_double(r[c]);
    os << '\n';
  }
}

inline CsvTable to_table(const TimeSeries& ts) {
  CsvTable t;
  t.header.push_back("t");
  for (const auto& n : ts.names) t.header.push_back(n);
  for (std::size_t i = 0; i < ts.rows(); ++i) {
    std::vector<double> r{ts.times[i]};
    for (const auto& col : ts.columns) r.push_back(col[i]);
    t.rows.push_back(std::move(r));
  }
  return t;
}

inline void write_csv(std::ostream& os, const TimeSeries& ts) { write_csv(os, to_table(ts)); }

inline void write_jsonl(std::ostream& os, const TimeSeries& ts) {
  for (std::size_t i = 0; i < ts.rows(); ++i) {
    ordered_json j;
    j["t"] = ts.times[i];
    for (std::size_t c = 0; c < ts.names.size(); ++c) j[ts.names[c]] = ts.columns[c][i];
    os << j.dump() << '\n';
  }
}

/// Parses a CSV written by write_csv (numeric cells only).
inline CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty csv");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.header.push_back(cell);
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> r;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) r.push_back(std::stod(cell));
    t.add_row(std::move(r));
  }
  return t;
}

inline std::string to_hex(const unsigned char* d, std::size_t n) {
  static const char* digits = "0123456789abcdef";
  std::string s(2 * n, '0');
  for (std::size_t i = 0; i < n; ++i) {
    s[2 * i] = digits[d[i] >> 4];
    s[2 * i + 1] = digits[d[i] & 15];
  }
  return s;
}

/// SHA-1 of "blob <size>\0<content>", as git computes object ids.
inline std::string git_blob_hash(const std::string& content) {
  std::string obj = "blob " + std::to_string(content.size());
  obj.push_back('\0');
  obj += content;
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(obj.data(), obj.size(), out, &len, EVP_sha1(), nullptr) != 1) throw std::runtime_error("sha1 failed");
  return to_hex(out, len);
}

// ---------------------------------------------------------------------------
// Corrector container. Values and spectral first derivatives are stored so that a
// reloaded table evaluates bit-identically.

inline ordered_json profile_to_json(const ThetaProfile& p) {
  ordered_json j;
  j["k"] = p.k();
  j["exponent"] = p.exponent();
  j["grid"] = p.size();
  j["values"] = p.values();
  j["d1"] = p.derivatives();
  return j;
}

inline ThetaProfile profile_from_json(const nlohmann::json& j) {
  auto v = j.at("values").get<std::vector<double>>();
  auto d = j.at("d1").get<std::vector<double>>();
  if (static_cast<int>(v.size()) != j.at("grid").get<int>()) throw std::runtime_error("grid size mismatch");
  return ThetaProfile(j.at("k").get<double>(), j.at("exponent").get<double>(), std::move(v), std::move(d));
}

inline ordered_json correctors_to_json(const Correctors& c) {
  ordered_json j;
  j["format"] = "chainlab-correctors/1";
  j["k"] = c.k;
  j["kappa"] = c.kappa;
  j["cutoff"] = {{"e_lo", CutoffShellFunction::e_lo}, {"e_hi", CutoffShellFunction::e_hi}};
  j["build"] = {{"radius_tolerance", 1e-13}, {"poisson", "fft"}};
  j["phi"] = {{"cutoff_power", c.phi.cutoff_power()}, {"profile", profile_to_json(c.phi.outer())}};
  if (c.has_second_order) {
    j["phi2"] = {{"cutoff_power", c.phi2.cutoff_power()}, {"profile", profile_to_json(c.phi2.outer())}};
    j["psi"] = {{"cutoff_power", c.psi.cutoff_power()}, {"profile", profile_to_json(c.psi.outer())}};
  }
  return j;
}

inline Correctors correctors_from_json(const nlohmann::json& j) {
  if (j.at("format") != "chainlab-correctors/1") throw std::runtime_error("unknown corrector format");
  Correctors c;
  c.k = j.at("k").get<double>();
  c.kappa = j.at("kappa").get<double>();
  auto load = [&](const char* key) {
    const auto& e = j.at(key);
    return CutoffShellFunction(profile_from_json(e.at("profile")), e.at("cutoff_power").get<int>());
  };
  c.phi = load("phi");
  c.has_second_order = j.contains("phi2");
  if (c.has_second_order) {
    c.phi2 = load("phi2");
    c.psi = load("psi");
  }
  return c;
}

inline std::string correctors_hash(const Correctors& c) { return git_blob_hash(correctors_to_json(c).dump()); }

/// Loads the table from cache_path when present and matching k and grid, otherwise builds and stores it.
inline Correctors load_or_build_correctors(double k, int grid, const std::string& cache_path) {
  namespace fs = std::filesystem;
  if (!cache_path.empty() && fs::exists(cache_path)) {
    std::ifstream in(cache_path);
    const auto j = nlohmann::json::parse(in);
    if (j.at("k").get<double>() == k && j.at("phi").at("profile").at("grid").get<int>() == grid)
      return correctors_from_json(j);
  }
  auto c = build_correctors(k, grid);
  if (!cache_path.empty()) {
    const fs::path p(cache_path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream(cache_path) << correctors_to_json(c).dump() << '\n';
  }
  return c;
}

// ---------------------------------------------------------------------------

inline ordered_json params_to_json(const ChainParams& p) {
  ordered_json j;
  j["n_sites"] = p.n_sites;
  j["k"] = p.k;
  j["gamma0"] = p.gamma0;
  j["gammaN"] = p.gammaN;
  j["T0"] = p.T0;
  j["TN"] = p.TN;
  j["beta"] = p.beta;
  j["test_mode"] = p.test_mode;
  return j;
}

/// Missing keys keep the values already in `base`.
inline ChainParams params_from_json(const nlohmann::json& j, ChainParams base = {}) {
  auto take = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  take("n_sites", base.n_sites);
  take("k", base.k);
  take("gamma0", base.gamma0);
  take("gammaN", base.gammaN);
  take("T0", base.T0);
  take("TN", base.TN);
  take("beta", base.beta);
  take("test_mode", base.test_mode);
  return base;
}

inline ordered_json metadata(const std::string& subcommand, const ordered_json& config, std::uint64_t seed,
                             const std::vector<std::pair<std::string, std::string>>& table_hashes) {
  ordered_json j;
  j["tool"] = "chainlab";
  j["version"] = kToolVersion;
  j["subcommand"] = subcommand;
  j["seed"] = seed;
  j["scheme"] = kSchemeId;
  j["config"] = config;
  ordered_json h = ordered_json::object();
  for (const auto& [name, hash] : table_hashes) h[name] = hash;
  j["table_hashes"] = h;
  return j;
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
}

}  // namespace chainlab::io
