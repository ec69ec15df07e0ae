#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "interlace/error.hpp"
#include "interlace/experiments.hpp"
#include "interlace/green.hpp"

using namespace interlace;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::ConfigError;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Drops the wall_ms column.
std::string without_timing(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

// Drops the config hash as well; a split run hashes differently from the whole.
std::string rows_only(const std::string& csv) {
  std::istringstream in(without_timing(csv));
  std::string line, out;
  while (std::getline(in, line)) {
    const auto a = line.find(','), b = line.find(',', a + 1);
    out += line.substr(0, a) + line.substr(b) + "\n";
  }
  return out;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("interlace_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse_config("seed = 9\nreplicas = 4\n[torus]\nsizes = 8, 10\nu = 2\n", std::nullopt);
  CHECK(c.kind == ExperimentKind::Torus);
  CHECK(c.seed == 9);
  CHECK(c.replicas == 4);
  CHECK(c.sizes == std::vector<Coord>{8, 10});
  CHECK(c.u == std::vector<double>{2.0});
  CHECK(parse_config("[shape]\nsizes = 20\n", ExperimentKind::Shape).hash() ==
        parse_config("# comment\n[shape]\nsizes = 20\n", ExperimentKind::Shape).hash());
  CHECK(parse_config("[shape]\nsizes = 20\n", ExperimentKind::Shape).hash() !=
        parse_config("[shape]\nsizes = 24\n", ExperimentKind::Shape).hash());
  // first_replica splits a run without changing its identity.
  CHECK(parse_config("first_replica = 5\n", ExperimentKind::Ldp).hash() == parse_config("", ExperimentKind::Ldp).hash());

  for (const char* text : {"[shape]\nsizes = 3\n", "[shape]\nbogus = 1\n", "[nope]\n", "[ldp]\na = 0.4\n",
                           "[vacancy]\nreplicas = 0\n", "[shape]\nu = x\n", "[torus]\nsizes 8\n"}) {
    CAPTURE(text);
    CHECK(code_of([&] { parse_config(text, std::nullopt); }) == ErrorCode::ConfigError);
  }
  try {
    parse_config("[shape]\n\nbogus = 1\n", std::nullopt, "x.cfg");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("x.cfg:3") != std::string::npos);
  }
}

TEST_CASE("wilson interval") {
  const auto [lo, hi] = wilson(0, 10);
  CHECK(lo == 0.0);
  CHECK(hi == doctest::Approx(0.2775).epsilon(1e-3));
  const auto [a, b] = wilson(50, 100);
  CHECK(a == doctest::Approx(0.4038).epsilon(1e-3));
  CHECK(b == doctest::Approx(0.5962).epsilon(1e-3));
}

TEST_CASE("csv round trip and aggregates") {
  std::vector<Record> rs{{"ldp", 0xabcULL, 0, "exceed|n=10", 1, "", 1.5},
                         {"ldp", 0xabcULL, 1, "exceed|n=10", 0, "truncated", 2.25},
                         {"ldp", 0xabcULL, 2, "rho|n=10", 0.1 + 0.2, "", 0}};
  const auto back = parse_results_csv(results_csv(rs));
  REQUIRE(back.size() == rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) {
    CHECK(back[i].metric == rs[i].metric);
    CHECK(back[i].value == rs[i].value);
    CHECK(back[i].flag == rs[i].flag);
    CHECK(back[i].config_hash == rs[i].config_hash);
  }
  const auto a = aggregate(rs), b = aggregate(back);
  CHECK(a.at("exceed|n=10").mean == b.at("exceed|n=10").mean);
  CHECK(a.at("exceed|n=10").stderr_mean == b.at("exceed|n=10").stderr_mean);
  CHECK(a.at("exceed|n=10").successes == 1);
  CHECK(a.at("exceed|n=10").flagged == 1);
  CHECK(parse_results_csv(results_csv({})).empty());
  CHECK(code_of([] { parse_results_csv("a,b\n1,2\n"); }) == ErrorCode::FormatError);
  CHECK(code_of([] { results_csv({{"ldp", 1, 0, "a,b", 0, "", 0}}); }) == ErrorCode::FormatError);
}

TEST_CASE("emit, clobber and merge") {
  const auto dir = scratch("emit");
  RunResult empty;
  empty.config = parse_config("[torus]\nsizes = 8\n", std::nullopt);
  emit_results(empty, dir.string(), false);
  CHECK(slurp(dir / "results.csv") == "experiment,config_hash,replica,metric,value,flag,wall_ms\n");
  CHECK(fs::exists(dir / "summary.json"));
  CHECK(fs::exists(dir / "meta.json"));
  CHECK(code_of([&] { emit_results(empty, dir.string(), false); }) == ErrorCode::Clobber);
  emit_results(empty, dir.string(), true);

  GreenTable green(3);
  auto cfg = parse_config("[torus]\nsizes = 8, 10\nreplicas = 2\npairs = 3\nu = 2\n", std::nullopt);
  const auto whole = run_experiment(cfg, green);
  cfg.first_replica = 0;
  cfg.replicas = 1;
  const auto part0 = run_experiment(cfg, green);
  cfg.first_replica = 1;
  const auto part1 = run_experiment(cfg, green);
  const auto d0 = scratch("p0"), d1 = scratch("p1"), dm = scratch("merged");
  emit_results(part1, d1.string(), false);
  emit_results(part0, d0.string(), false);
  const auto merged = merge_results({(d1 / "results.csv").string(), (d0 / "results.csv").string()});
  std::vector<Record> sorted = whole.records;
  std::stable_sort(sorted.begin(), sorted.end(), [](const Record& a, const Record& b) { return a.replica < b.replica; });
  CHECK(rows_only(results_csv(merged)) == rows_only(results_csv(sorted)));
  emit_merged(merged, dm.string(), false);
  CHECK(fs::exists(dm / "summary.json"));

  auto other = parse_config("[torus]\nsizes = 8\nreplicas = 1\npairs = 3\nu = 2\n", std::nullopt);
  const auto dx = scratch("other");
  emit_results(run_experiment(other, green), dx.string(), false);
  CHECK(code_of([&] { merge_results({(d0 / "results.csv").string(), (dx / "results.csv").string()}); }) ==
        ErrorCode::MixedConfig);
  for (const auto& p : {dir, d0, d1, dm, dx}) fs::remove_all(p);
}

TEST_CASE("identical seeds give identical results") {
  GreenTable green(3);
  for (const char* text : {"[ldp]\nsizes = 6, 8\nreplicas = 3\n", "[vacancy]\nreplicas = 50\nsets = point, pair\n",
                           "[connect]\nsizes = 6\nreplicas = 3\nlevels = 3\n"}) {
    CAPTURE(text);
    const auto cfg = parse_config(text, std::nullopt);
    const auto a = run_experiment(cfg, green), b = run_experiment(cfg, green);
    CHECK(without_timing(results_csv(a.records)) == without_timing(results_csv(b.records)));
    auto other = cfg;
    other.seed += 1;
    CHECK(without_timing(results_csv(run_experiment(other, green).records)) !=
          without_timing(results_csv(a.records)));
  }
}

TEST_CASE("monotone coupling in connectivity") {
  GreenTable green(3);
  const auto cfg = parse_config("[connect]\nsizes = 8\nreplicas = 6\nlevels = 4\nu = 0.2, 2\n", std::nullopt);
  const auto r = run_experiment(cfg, green);
  // connected|n|u is non-decreasing in u within each replica.
  std::map<std::int64_t, std::vector<double>> per;
  for (const auto& rec : r.records)
    if (rec.metric.rfind("connected|", 0) == 0) per[rec.replica].push_back(rec.value);
  CHECK(per.size() == 6);
  for (const auto& [rep, v] : per) CHECK(std::is_sorted(v.begin(), v.end()));
}

TEST_CASE("torus edge cases") {
  GreenTable green(3);
  // Covering walks: the set is the whole torus, every ratio is 1.
  const auto covered = run_torus(parse_config("[torus]\nsizes = 5, 6\nu = 40\nreplicas = 2\npairs = 5\n", std::nullopt));
  for (const auto& c : covered.checks)
    if (c.name == "covered_ratio_one") CHECK(c.pass);
  for (const auto& rec : covered.records)
    if (rec.metric.rfind("ratio|", 0) == 0) CHECK(rec.value == 1.0);
  CHECK(code_of([] { run_torus(parse_config("[torus]\nsizes = 40\nu = 0.00001\nreplicas = 1\ngamma = 1\n", std::nullopt)); }) ==
        ErrorCode::SparseRange);
}

TEST_CASE("slab at zero intensity") {
  GreenTable green(5);
  const auto r = run_slab(parse_config("[slab]\nd = 5\nu = 0\nK = 4\nreplicas = 2\npatch = 3\n", std::nullopt), green);
  for (const auto& rec : r.records)
    if (rec.metric.rfind("good|", 0) == 0) CHECK(rec.value == 0.0);
}

TEST_CASE("named sets") {
  CHECK(named_set("point", 3).size() == 1);
  CHECK(named_set("pair", 3).size() == 2);
  CHECK(named_set("segment8", 3).size() == 9);
  CHECK(named_set("ball2", 3).size() == 125);
  CHECK(code_of([] { named_set("blob", 3); }) == ErrorCode::ConfigError);
  CHECK(default_directions(3).size() == 4);
}
