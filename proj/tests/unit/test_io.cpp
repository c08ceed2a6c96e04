#include <chainlab/decay.hpp>
#include <chainlab/io.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

using namespace chainlab;

TEST(FormatDouble, SeventeenDigitsRoundTrip) {
  EXPECT_EQ(io::format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(io::format_double(1.0), "1");
  EXPECT_EQ(io::format_double(-2.5e-300), "-2.5e-300");
  EXPECT_EQ(io::format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(io::format_double(-std::numeric_limits<double>::infinity()), "-inf");
  SequentialRng rng(1, 0);
  for (int j = 0; j < 10000; ++j) {
    const double x = std::ldexp(rng.uniform() - 0.5, static_cast<int>(200 * rng.uniform()) - 100);
    EXPECT_EQ(std::stod(io::format_double(x)), x);
  }
}

TEST(Csv, WriteReadRoundTrip) {
  io::CsvTable t;
  t.header = {"t", "H", "H^beta"};
  t.add_row({0.0, 1.0 / 3.0, 1e-17});
  t.add_row({0.1, -2.0, 12345.678});
  EXPECT_THROW(t.add_row({1.0}), std::invalid_argument);
  std::ostringstream os;
  io::write_csv(os, t);
  EXPECT_EQ(os.str(), "t,H,H^beta\n0,0.33333333333333331,1.0000000000000001e-17\n0.10000000000000001,-2,12345.678\n");
  std::istringstream is(os.str());
  const auto r = io::read_csv(is);
  EXPECT_EQ(r.header, t.header);
  EXPECT_EQ(r.rows, t.rows);
  std::istringstream empty("");
  EXPECT_THROW(io::read_csv(empty), std::runtime_error);
}

TEST(Csv, TimeSeriesLayoutAndJsonl) {
  ChainParams p;
  IntegratorConfig c;
  c.h = 1e-2;
  c.T_final = 0.05;
  c.record_stride = 1;
  c.seed = 4;
  const auto ts = simulate(breather_init(p, 10.0), p, c, {observables::energy(p), observables::momentum(1)});
  std::ostringstream os, js;
  io::write_csv(os, ts);
  io::write_jsonl(js, ts);
  std::istringstream is(os.str());
  const auto t = io::read_csv(is);
  EXPECT_EQ(t.header, (std::vector<std::string>{"t", "H", "p1"}));
  ASSERT_EQ(t.rows.size(), ts.rows());
  for (std::size_t i = 0; i < ts.rows(); ++i) EXPECT_EQ(t.rows[i][1], ts.columns[0][i]);
  std::istringstream jl(js.str());
  std::string line;
  std::getline(jl, line);
  const auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j.begin().key(), "H");  // nlohmann::json sorts keys on parse
  EXPECT_EQ(line.substr(0, 5), "{\"t\":");
  EXPECT_DOUBLE_EQ(j.at("H").get<double>(), 10.0);
}

TEST(GitBlobHash, KnownObjects) {
  EXPECT_EQ(io::git_blob_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(io::git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
  EXPECT_EQ(io::git_blob_hash(std::string("a\0b", 3)).size(), 40u);
}

TEST(Correctors, JsonRoundTripIsBitExact) {
  for (double k : {1.75, 2.0, 3.0}) {
    const auto c = build_correctors(k, 512);
    const auto back = io::correctors_from_json(nlohmann::json::parse(io::correctors_to_json(c).dump()));
    EXPECT_EQ(back.kappa, c.kappa);
    EXPECT_EQ(back.has_second_order, c.has_second_order);
    EXPECT_EQ(io::correctors_hash(back), io::correctors_hash(c));
    SequentialRng rng(2, 0);
    for (int j = 0; j < 200; ++j) {
      const double p = 40 * (rng.uniform() - 0.5), q = 10 * (rng.uniform() - 0.5);
      EXPECT_EQ(back.phi(p, q), c.phi(p, q));
      EXPECT_EQ(back.phi.partials(p, q).q, c.phi.partials(p, q).q);
      if (c.has_second_order) {
        EXPECT_EQ(back.phi2(p, q), c.phi2(p, q));
        EXPECT_EQ(back.psi(p, q), c.psi(p, q));
      }
    }
  }
  auto bad = io::correctors_to_json(build_correctors(2.0, 256));
  bad["format"] = "other";
  EXPECT_THROW(io::correctors_from_json(bad), std::runtime_error);
  EXPECT_THROW(build_correctors(2.0, 64), std::invalid_argument);
}

TEST(Correctors, CacheReusesMatchingTable) {
  const auto dir = std::filesystem::temp_directory_path() / "chainlab_io_cache_test";
  std::filesystem::remove_all(dir);
  const auto path = (dir / "c.json").string();
  const auto a = io::load_or_build_correctors(2.0, 512, path);
  ASSERT_TRUE(std::filesystem::exists(path));
  const auto b = io::load_or_build_correctors(2.0, 512, path);
  EXPECT_EQ(io::correctors_hash(a), io::correctors_hash(b));
  // A different grid rebuilds instead of returning the stale table.
  const auto c = io::load_or_build_correctors(2.0, 256, path);
  EXPECT_EQ(c.phi.outer().size(), 256);
  std::filesystem::remove_all(dir);
}

TEST(Params, JsonRoundTripAndDefaults) {
  ChainParams p;
  p.n_sites = 5;
  p.k = 3.0;
  p.gamma0 = 0.7;
  p.TN = 2.5;
  p.beta = 0.8;
  const auto back = io::params_from_json(nlohmann::json::parse(io::params_to_json(p).dump()));
  EXPECT_EQ(io::params_to_json(back), io::params_to_json(p));
  const auto partial = io::params_from_json(nlohmann::json{{"k", 1.75}}, p);
  EXPECT_EQ(partial.k, 1.75);
  EXPECT_EQ(partial.n_sites, 5);
  EXPECT_THROW(io::params_from_json(nlohmann::json{{"k", "two"}}), nlohmann::json::exception);
}

TEST(Metadata, StableKeyOrder) {
  const auto m = io::metadata("decay", {{"k", 2.0}, {"h", 1e-3}}, 7, {{"correctors", "abc"}});
  std::vector<std::string> keys;
  for (auto it = m.begin(); it != m.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"tool", "version", "subcommand", "seed", "scheme", "config", "table_hashes"}));
  EXPECT_EQ(m.at("scheme"), kSchemeId);
  EXPECT_EQ(m.at("version"), io::kToolVersion);
  EXPECT_EQ(m.dump(), io::metadata("decay", {{"k", 2.0}, {"h", 1e-3}}, 7, {{"correctors", "abc"}}).dump());
  EXPECT_EQ(m.at("config").begin().key(), "k");
}
