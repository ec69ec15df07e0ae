// interlace: potential theory queries, field sampling and experiment runs.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>

#include <CLI11.hpp>
#include <json.hpp>

#include "interlace/chemdist.hpp"
#include "interlace/equilibrium.hpp"
#include "interlace/error.hpp"
#include "interlace/experiments.hpp"
#include "interlace/hitting.hpp"
#include "interlace/sampler.hpp"

using namespace interlace;
using nlohmann::json;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out;
  bool force = false;
  std::string cache;
  bool quiet = false;
};

// A site set from exactly one of --set / --ball / --points.
struct SetSpec {
  int d = 3;
  std::string name;
  std::optional<Coord> ball;
  std::string points;

  void add(CLI::App* app) {
    app->add_option("-d,--dim", d, "Dimension")->check(CLI::Range(3, kMaxDim));
    app->add_option("--set", name, "Named set: point, pair, corner, ball1, ball2, ball3, segmentK");
    app->add_option("--ball", ball, "Sup-norm ball B(0, r)");
    app->add_option("--points", points, "Sites as 'x,y,z; x,y,z; ...'");
  }
  std::vector<Point> sites() const {
    const int given = !name.empty() + ball.has_value() + !points.empty();
    if (given != 1) throw Error(ErrorCode::ConfigError, "give exactly one of --set, --ball, --points");
    if (!name.empty()) return named_set(name, d);
    if (ball) return Domain::ball(Point(d), *ball).sites();
    std::vector<Point> out;
    std::size_t pos = 0;
    while (pos <= points.size()) {
      const auto end = points.find(';', pos);
      const std::string part = points.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
      if (part.find_first_not_of(" \t") != std::string::npos) {
        out.push_back(parse_point(part));
        if (out.back().dim() != d) throw Error(ErrorCode::ConfigError, "point " + part + " is not " + std::to_string(d) + "-dimensional");
      }
      if (end == std::string::npos) break;
      pos = end + 1;
    }
    if (out.empty()) throw Error(ErrorCode::EmptySet, "no points given");
    return out;
  }
};

struct FieldSpec {
  std::string file;
  Coord n = 10;
  int d = 3;
  double u = 1.0;
  double lambda = 0.5;
  double kill_eps = 0.5;
  std::uint64_t replica = 0;

  void add(CLI::App* app, bool allow_file) {
    if (allow_file) app->add_option("--field", file, "Field file written by 'sample'");
    app->add_option("-d,--dim", d, "Dimension")->check(CLI::Range(3, kMaxDim));
    app->add_option("-n,--size", n, "Window B(0, n)");
    app->add_option("-u,--level", u, "Interlacement level");
    app->add_option("--lambda", lambda, "Window enlargement");
    app->add_option("--kill-eps", kill_eps, "Per-trajectory return bound setting the kill radius");
    app->add_option("--replica", replica, "Replica index");
  }
  OccupancyField get(GreenTable& green, std::uint64_t seed, bool keep_paths = false) const {
    if (!file.empty()) return OccupancyField::load(file);
    FieldOptions fo;
    fo.lambda = lambda;
    fo.kill_eps = kill_eps;
    fo.keep_paths = keep_paths;
    return FieldSampler(Domain::ball(Point(d), n), green, fo).sample(u, seed, replica);
  }
};

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

std::string hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

class GreenCache {
 public:
  GreenCache(int d, const std::string& path) : table_(d), path_(path) {
    if (!path_.empty()) table_.load(path_);
  }
  ~GreenCache() {
    if (!path_.empty()) {
      try {
        table_.save(path_);
      } catch (const std::exception& e) {
        std::cerr << "warning: " << e.what() << "\n";
      }
    }
  }
  GreenTable& table() { return table_; }

 private:
  GreenTable table_;
  std::string path_;
};

int run_kind(ExperimentKind kind, const Globals& g, std::optional<std::int64_t> replicas,
             std::optional<std::int64_t> first) {
  ExperimentConfig cfg = g.config.empty() ? parse_config("", kind) : load_config(g.config, kind);
  if (g.seed) cfg.seed = *g.seed;
  if (replicas) cfg.replicas = *replicas;
  if (first) cfg.first_replica = *first;
  if (cfg.replicas < 1) throw Error(ErrorCode::ConfigError, "replicas must be >= 1");
  const std::string dir = g.out.empty() ? "results/" + to_string(kind) : g.out;
  // Fail on an existing output before spending the run.
  if (!g.force && std::filesystem::exists(std::filesystem::path(dir) / "results.csv"))
    throw Error(ErrorCode::Clobber, dir + "/results.csv exists; pass --force to overwrite");
  RunOptions opt;
  opt.threads = g.threads;
  if (!g.quiet) opt.log = [](const std::string& s) { std::cerr << s << "\n"; };
  GreenCache green(cfg.d, g.cache);
  const RunResult res = run_experiment(cfg, green.table(), opt);
  emit_results(res, dir, g.force);
  int failed = 0;
  for (const auto& c : res.checks) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
    failed += !c.pass;
  }
  for (const auto& w : res.warnings) std::cout << "warning: " << w << "\n";
  std::cout << res.records.size() << " records, config " << hex(cfg.hash()) << " -> " << dir << "\n";
  return failed ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random interlacement simulator and potential theory toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Experiment config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed (overrides the config)");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory (or file for 'sample')");
  app.add_flag("--force", g.force, "Overwrite existing results");
  app.add_option("--green-cache", g.cache, "Green table cache file (read and updated)");
  app.add_flag("-q,--quiet", g.quiet, "No progress output");

  auto* cap = app.add_subcommand("cap", "Capacity and equilibrium measure of a finite set");
  SetSpec cap_set;
  cap_set.add(cap);
  std::int64_t mc = 0;
  Coord mc_radius = 0;
  cap->add_option("--mc", mc, "Also estimate by Monte Carlo with this many walks per site");
  cap->add_option("--mc-radius", mc_radius, "Kill radius of the Monte Carlo walks (default 8 diam + 16)");

  auto* green_cmd = app.add_subcommand("green", "Green function g(0, x) or its stopped version");
  int green_d = 3;
  std::string green_x;
  std::optional<std::int64_t> green_n;
  green_cmd->add_option("-d,--dim", green_d, "Dimension")->check(CLI::Range(3, kMaxDim));
  green_cmd->add_option("-x", green_x, "Displacement 'x1,...,xd'")->required();
  green_cmd->add_option("-n,--horizon", green_n, "Finite horizon");

  auto* sample = app.add_subcommand("sample", "Sample I^u in a window and optionally save the field");
  FieldSpec sample_field;
  sample_field.add(sample, false);
  bool sample_paths = false;
  sample->add_flag("--paths", sample_paths, "Store full trajectory paths");

  auto* distance = app.add_subcommand("distance", "Chemical distance rho_u(x, y) in a sampled field");
  FieldSpec dist_field;
  dist_field.add(distance, true);
  std::string dist_x, dist_y;
  std::optional<double> dist_level;
  distance->add_option("-x", dist_x, "Source site")->required();
  distance->add_option("-y", dist_y, "Target site")->required();
  distance->add_option("--at", dist_level, "Level for a loaded field (default: the field's level)");

  auto* connect = app.add_subcommand("connect", "Connectivity experiment, or the trajectory graph of one field");
  FieldSpec conn_field;
  conn_field.add(connect, true);
  std::optional<std::int64_t> conn_m;
  bool conn_single = false;
  connect->add_option("-m,--prefix-length", conn_m, "Prefix length of each trajectory (default: whole)");
  connect->add_flag("--single", conn_single, "Trajectory graph of one field instead of the experiment");

  std::optional<std::int64_t> replicas, first_replica;
  std::vector<std::pair<ExperimentKind, CLI::App*>> runs;
  for (const auto& [name, kind, help] :
       std::vector<std::tuple<std::string, ExperimentKind, std::string>>{
           {"shape", ExperimentKind::Shape, "Time constant sigma_u(x) along directions"},
           {"ldp", ExperimentKind::Ldp, "Exceedance of rho_u(0, x) > C n in B(n)"},
           {"torus", ExperimentKind::Torus, "Chemical distances in a random walk range on the torus"},
           {"slab", ExperimentKind::Slab, "Good-edge probability of the slab renormalization"},
           {"lemmas", ExperimentKind::Lemmas, "Hitting, capacity and range lemma checks"},
           {"vacancy", ExperimentKind::Vacancy, "P[A vacant] against exp(-u cap A)"}}) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--replicas", replicas, "Override the replica count");
    sub->add_option("--first-replica", first_replica, "Index of the first replica (for split runs)");
    runs.emplace_back(kind, sub);
  }
  connect->add_option("--replicas", replicas, "Override the replica count");
  connect->add_option("--first-replica", first_replica, "Index of the first replica (for split runs)");

  auto* merge = app.add_subcommand("merge", "Merge results.csv files of one configuration");
  std::vector<std::string> merge_in;
  merge->add_option("inputs", merge_in, "results.csv files")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    const std::uint64_t seed = g.seed.value_or(1);
    if (cap->parsed()) {
      const auto sites = cap_set.sites();
      GreenCache green(cap_set.d, g.cache);
      const auto eq = equilibrium(sites, green.table());
      json j = {{"cap", eq.cap},          {"sites", eq.set_size},         {"support", eq.sites.size()},
                {"orbits", eq.orbit_count}, {"symmetry_order", eq.symmetry_order}, {"residual", eq.residual}};
      if (mc > 0) {
        const Coord r = mc_radius > 0 ? mc_radius : 8 * diameter_linf(sites) + 16;
        const auto est = capacity_mc(sites, mc, r, seed, green.table());
        j["mc"] = {{"estimate", est.estimate}, {"std_error", est.std_error}, {"bias_bound", est.bias_bound},
                   {"kill_fraction", est.kill_fraction}, {"kill_radius", r}};
      }
      print(j);
    } else if (green_cmd->parsed()) {
      const Point x = parse_point(green_x);
      if (x.dim() != green_d) throw Error(ErrorCode::ConfigError, "x must have dimension " + std::to_string(green_d));
      if (green_n) {
        print({{"x", x.str()}, {"horizon", *green_n}, {"g", green_stopped(Point(green_d), x, *green_n)}});
      } else {
        GreenCache green(green_d, g.cache);
        const double v = green.table().get(x);
        print({{"x", x.str()}, {"g", v}, {"error_estimate", green.table().max_error_estimate()}});
      }
    } else if (sample->parsed()) {
      GreenCache green(sample_field.d, g.cache);
      const auto f = sample_field.get(green.table(), seed, sample_paths);
      if (!g.out.empty()) {
        if (!g.force && std::filesystem::exists(g.out))
          throw Error(ErrorCode::Clobber, g.out + " exists; pass --force to overwrite");
        f.save(g.out);
      }
      print({{"trajectories", f.trajectories().size()},
             {"occupied", f.site_count(f.u())},
             {"cap", f.capacity()},
             {"kill_radius", f.kill_radius()},
             {"bias_budget", f.bias_budget()},
             {"seed", f.seed()},
             {"replica", f.replica()}});
    } else if (distance->parsed()) {
      GreenCache green(dist_field.d, g.cache);
      const auto f = dist_field.get(green.table(), seed);
      const double level = dist_level.value_or(f.u());
      const SiteGrid grid = SiteGrid::from_field(f, level);
      const auto r = bfs_distance(grid, parse_point(dist_x), parse_point(dist_y));
      json j = {{"rho", nullptr}, {"flagged", r.flagged}};
      if (r.rho) j["rho"] = *r.rho;
      print(j);
    } else if (connect->parsed() && (conn_single || !conn_field.file.empty())) {
      GreenCache green(conn_field.d, g.cache);
      const auto f = conn_field.get(green.table(), seed, true);
      const auto m = conn_m.value_or(std::numeric_limits<std::int64_t>::max() / 2);
      const auto graph = trajectory_graph(f, m, f.u());
      json j = {{"trajectories", graph.size()},
                {"components", graph.components()},
                {"max_switch", nullptr},
                {"saturated", graph.saturated}};
      if (const auto s = max_switch(graph)) j["max_switch"] = *s;
      print(j);
    } else if (connect->parsed()) {
      return run_kind(ExperimentKind::Connect, g, replicas, first_replica);
    } else if (merge->parsed()) {
      if (g.out.empty()) throw Error(ErrorCode::ConfigError, "merge needs --out DIR");
      const auto records = merge_results(merge_in);
      emit_merged(records, g.out, g.force);
      std::cout << records.size() << " records -> " << g.out << "\n";
    } else {
      for (const auto& [kind, sub] : runs)
        if (sub->parsed()) return run_kind(kind, g, replicas, first_replica);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
