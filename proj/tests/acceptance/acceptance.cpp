// Acceptance suite: one PASS/FAIL line per criterion, details indented below.
// Exit status is the number of failed criteria (capped at 100).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "interlace/chemdist.hpp"
#include "interlace/equilibrium.hpp"
#include "interlace/error.hpp"
#include "interlace/experiments.hpp"
#include "interlace/green.hpp"
#include "interlace/hitting.hpp"
#include "interlace/sampler.hpp"
#include "interlace/walk.hpp"

using namespace interlace;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::vector<std::string> lines;

  void note(const std::string& s) { lines.push_back(s); }
  void require(bool ok, const std::string& s) {
    pass &= ok;
    lines.push_back(std::string(ok ? "ok   " : "FAIL ") + s);
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Context {
  int threads = 1;
  std::uint64_t seed = 1;
  bool verbose = false;
  RunOptions run() const {
    RunOptions o;
    o.threads = threads;
    if (verbose) o.log = [](const std::string& s) { std::cerr << "  .. " << s << "\n"; };
    return o;
  }
};

// Copies the checks of a run into the outcome.
void take_checks(Outcome& out, const RunResult& r) {
  for (const auto& c : r.checks) out.require(c.pass, c.name + ": " + c.detail);
  for (const auto& w : r.warnings) out.note("warning: " + w);
}

ExperimentConfig config(const std::string& text, ExperimentKind kind, std::uint64_t seed) {
  auto c = parse_config(text, kind, "<acceptance>");
  c.seed = seed;
  return c;
}

// 1. beta values and the a-sequence closed form.
Outcome exact_combinatorics(const Context&) {
  Outcome out;
  const std::int64_t expected[] = {1, 2, 3, 4, 6};
  std::string got;
  bool ok = true;
  for (int d = 3; d <= 7; ++d) {
    got += std::to_string(beta(d, 0)) + (d < 7 ? "," : "");
    ok &= beta(d, 0) == expected[d - 3];
  }
  out.require(ok, "beta(d,0) for d=3..7 = (" + got + ")");
  double worst = 0;
  for (int d = 3; d <= 10; ++d)
    for (double h : {0.0, 0.1})
      for (std::int64_t n = 1; n <= 50; ++n) worst = std::max(worst, std::abs(a_seq(d, h, n) - a_closed(d, h, n)));
  out.require(worst <= 1e-12, fmt("a_seq vs closed form, max deviation %.3g (tol 1e-12)", worst));
  return out;
}

// All canonical displacements with entries in [0, r].
std::vector<Point> canonical_box(int d, Coord r) {
  std::vector<Point> out;
  std::vector<Coord> c(static_cast<std::size_t>(d), 0);
  std::function<void(int, Coord)> rec = [&](int i, Coord lo) {
    if (i == d) {
      out.emplace_back(c);
      return;
    }
    for (Coord v = lo; v <= r; ++v) {
      c[static_cast<std::size_t>(i)] = v;
      rec(i + 1, v);
    }
  };
  rec(0, 0);
  return out;
}

// 2. Green symmetry, quadrature against the stopped sum, capacities two ways.
Outcome potential_oracles(const Context& ctx) {
  Outcome out;
  for (int d : {3, 4}) {
    GreenTable g(d);
    // Symmetry: every signed permutation of a few displacements.
    bool exact = true;
    for (const Point& base : canonical_box(d, 3)) {
      std::vector<int> perm(static_cast<std::size_t>(d));
      for (int i = 0; i < d; ++i) perm[static_cast<std::size_t>(i)] = i;
      const double ref = g.get(base);
      do {
        for (int signs = 0; signs < (1 << d); ++signs) {
          Point v(d);
          for (int i = 0; i < d; ++i) v[i] = ((signs >> i) & 1 ? -1 : 1) * base[perm[static_cast<std::size_t>(i)]];
          exact &= g.get(v) == ref;
        }
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
    out.require(exact, fmt("d=%d: g(0,v) identical over signed permutations, |v|_inf <= 3", d));
    double worst = 0;
    std::size_t count = 0;
    for (const Point& v : canonical_box(d, 5)) {
      const auto e = green_extrapolated(v, 4000);
      worst = std::max(worst, std::abs(e.value - g.get(v)));
      ++count;
    }
    out.require(worst <= 1e-4, fmt("d=%d: quadrature vs stopped sum plus tail over %zu displacements "
                                   "(|v|_inf <= 5), max diff %.2e (tol 1e-4)", d, count, worst));
  }
  GreenTable g(3);
  const std::vector<std::pair<std::string, std::vector<Point>>> sets{
      {"point", named_set("point", 3)}, {"pair", named_set("pair", 3)},     {"B(2)", named_set("ball2", 3)},
      {"B(3)", named_set("ball3", 3)},  {"S_8", named_set("segment8", 3)},
  };
  std::uint64_t k = 0;
  for (const auto& [name, set] : sets) {
    const double exact = equilibrium(set, g).cap;
    const auto mc = capacity_mc(set, 20000, 40, ctx.seed + 101 + k++, g);
    const double tol = 3 * mc.std_error + mc.bias_bound;
    out.require(std::abs(mc.estimate - exact) <= tol,
                fmt("cap(%s): solve %.6f, escape MC %.6f +- %.6f (bias <= %.2e), |diff| %.2e <= %.2e", name.c_str(),
                    exact, mc.estimate, mc.std_error, mc.bias_bound, std::abs(mc.estimate - exact), tol));
  }
  return out;
}

// 3. Sandwich bracket on random small instances.
Outcome sandwich(const Context& ctx) {
  Outcome out;
  GreenTable g(3);
  int violations = 0, finite = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    RngStream rng({ctx.seed, 0x3, i});
    const std::size_t size = 1 + rng.below(8);
    std::vector<Point> set;
    while (set.size() < size) {
      const Point p{Coord(rng.below(7)) - 3, Coord(rng.below(7)) - 3, Coord(rng.below(7)) - 3};
      if (std::find(set.begin(), set.end(), p) == set.end()) set.push_back(p);
    }
    Point x(3);
    do {
      for (int a = 0; a < 3; ++a) x[a] = Coord(rng.below(17)) - 8;
    } while (std::find(set.begin(), set.end(), x) != set.end());
    Horizon n;
    if (rng.below(2)) {
      n = 2 + static_cast<std::int64_t>(rng.below(11));
      ++finite;
    }
    const auto b = hit_sandwich(x, set, n, g);
    const auto q = hit_prob_exact(x, set, n, g);
    violations += !(0 <= b.lower && b.lower <= q.value + q.error_bound + 1e-12 &&
                    q.value - q.error_bound - 1e-12 <= b.upper);
  }
  out.require(violations == 0, fmt("100 instances (|A| <= 8, x in B(8), %d finite horizons): %d violations", finite,
                                   violations));
  return out;
}

// 4. Vacancy law on three sets.
Outcome vacancy(const Context& ctx) {
  Outcome out;
  GreenTable g(3);
  const auto cfg = config("[vacancy]\nu = 0.5, 1\nreplicas = 10000\nsets = point, pair, segment8\n",
                          ExperimentKind::Vacancy, ctx.seed);
  take_checks(out, run_vacancy(cfg, g, ctx.run()));
  return out;
}

// 5. Trajectory counts against Poisson(u cap(B(n))).
Outcome poisson_counts(const Context& ctx) {
  Outcome out;
  GreenTable g(3);
  for (Coord n : {10, 20}) {
    FieldOptions fo;
    fo.lambda = 0;
    const FieldSampler s(Domain::ball(Point(3), n), g, fo);
    std::vector<std::uint64_t> counts;
    for (std::uint64_t r = 0; r < 10000; ++r) counts.push_back(s.sample_starts(1.0, ctx.seed + 5, r).size());
    const auto ks = ks_poisson(counts, s.equilibrium().cap);
    out.require(ks.pass, fmt("B(%lld): cap %.4f, KS %.4f vs 1%% critical %.4f over 10^4 replicas", (long long)n,
                             s.equilibrium().cap, ks.statistic, ks.critical));
  }
  return out;
}

// 6. Range bounds for one and many walks.
Outcome ranges(const Context& ctx) {
  Outcome out;
  const auto one = range_lemma_stats(3, 50, 0.2, 1000, ctx.seed + 6);
  out.require(one.fraction() >= 0.99, fmt("single walk, n=50, alpha=0.2: all bounds held in %.3f of 1000 replicas "
                                          "(need 0.99)", one.fraction()));
  const auto many = multi_range_stats(30, 30, {Point(3)}, 1000, ctx.seed + 7, 0.5);
  out.require(many.fraction() >= 0.95, fmt("30 walks from 0, n=30, alpha3=0.5: union >= k n^1.5 in %.3f of 1000 "
                                           "replicas (need 0.95)", many.fraction()));
  return out;
}

// 7. Connectivity at all levels and switch counts.
Outcome connectivity(const Context& ctx) {
  Outcome out;
  GreenTable g(3);
  const auto cfg = config("[connect]\nsizes = 20, 30\nu = 0.5, 2\nlevels = 8\nreplicas = 200\n",
                          ExperimentKind::Connect, ctx.seed);
  const auto r = run_connect(cfg, g, ctx.run());
  take_checks(out, r);
  return out;
}

// 8. Shape diagnostics.
Outcome shape(const Context& ctx) {
  Outcome out;
  GreenTable g(3);
  const auto cfg = config("[shape]\nu = 1\nsizes = 20, 40, 80\nreplicas = 20\n"
                          "directions = 1 0 0; 0 1 0; 0 0 1; -1 0 0; 2 0 0; 1 1 0\n",
                          ExperimentKind::Shape, ctx.seed);
  const auto r = run_shape(cfg, g, ctx.run());
  take_checks(out, r);
  return out;
}

// 9. Large deviations with the constant frozen at the smallest size.
Outcome ldp(const Context& ctx) {
  Outcome out;
  GreenTable g(3);
  const auto cfg = config("[ldp]\nsizes = 10, 20, 40\n", ExperimentKind::Ldp, ctx.seed);
  const auto r = run_ldp(cfg, g, ctx.run());
  for (const auto& c : r.checks)
    if (c.name.rfind("exceedance_non_increasing", 0) == 0) out.require(c.pass, c.name + ": " + c.detail);
  for (const auto& c : r.checks)
    if (c.name.rfind("exceedance_non_increasing", 0) != 0) out.note("diagnostic " + c.name + ": " + c.detail);
  return out;
}

// 10. Torus ratios.
Outcome torus(const Context& ctx) {
  Outcome out;
  const auto r = run_torus(config("[torus]\nsizes = 16, 32, 64\nu = 1\n", ExperimentKind::Torus, ctx.seed), ctx.run());
  take_checks(out, r);
  for (const auto& [k, v] : r.values)
    if (k.rfind("q99|", 0) == 0) out.note(fmt("%s = %.4f", k.c_str(), v));
  const auto covered =
      run_torus(config("[torus]\nsizes = 6, 8\nu = 40\nreplicas = 10\npairs = 20\n", ExperimentKind::Torus, ctx.seed),
                ctx.run());
  bool has = false;
  for (const auto& c : covered.checks)
    if (c.name == "covered_ratio_one") {
      has = true;
      out.require(c.pass, "u=40, N in {6, 8}: " + c.detail);
    }
  out.require(has, "u=40 covers the torus in every replica");
  return out;
}

// 11. Slab renormalization.
Outcome slab(const Context& ctx) {
  Outcome out;
  GreenTable g(5);
  const auto r = run_slab(config("[slab]\nd = 5\nK = 6, 10, 16\n", ExperimentKind::Slab, ctx.seed), g, ctx.run());
  take_checks(out, r);
  for (const auto& [k, v] : r.values)
    if (k.rfind("p_good|", 0) == 0) out.note(fmt("%s = %.4f", k.c_str(), v));
  return out;
}

std::string strip_timing(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, res;
  while (std::getline(in, line)) res += line.substr(0, line.rfind(',')) + "\n";
  return res;
}

// 12. Reproducibility and BFS speed.
Outcome engineering(const Context& ctx) {
  Outcome out;
  GreenTable g(3);
  for (const char* text : {"[ldp]\nsizes = 8, 12\nreplicas = 4\n", "[connect]\nsizes = 8\nreplicas = 4\nlevels = 3\n",
                           "[vacancy]\nreplicas = 200\n", "[torus]\nsizes = 8, 12\nreplicas = 3\n"}) {
    const auto cfg = parse_config(text, std::nullopt);
    RunOptions one, many;
    many.threads = std::max(2, ctx.threads);
    const auto a = run_experiment(cfg, g, one), b = run_experiment(cfg, g, many);
    out.require(strip_timing(results_csv(a.records)) == strip_timing(results_csv(b.records)),
                to_string(cfg.kind) + ": identical results.csv bytes (wall_ms aside) across two runs");
  }
  const auto t0 = Clock::now();
  const auto field = sample_field(3.0, Domain::ball(Point(3), 60), 0.0, 0.5, ctx.seed + 12, g);
  const auto grid = SiteGrid::from_field(field, 3.0);
  const double sample_s = std::chrono::duration<double>(Clock::now() - t0).count();
  const auto source = nearest_occupied(grid, Point(3), 60);
  if (!source) {
    out.require(false, "no occupied site near the origin");
    return out;
  }
  const auto t1 = Clock::now();
  const auto map = bfs(grid, *source);
  const double bfs_s = std::chrono::duration<double>(Clock::now() - t1).count();
  std::size_t reached = 0;
  for (auto v : map.dist) reached += v >= 0;
  out.require(grid.count() >= 1000000 && bfs_s < 1.0,
              fmt("BFS over %zu occupied sites (%zu reached) took %.3f s (sampling %.1f s)", grid.count(), reached,
                  bfs_s, sample_s));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  Context ctx;
  std::vector<int> only;
  app.add_option("--threads", ctx.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", ctx.seed, "Base seed");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_flag("-v,--verbose", ctx.verbose, "Progress on stderr");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome(const Context&)>>> criteria{
      {"exact combinatorics", exact_combinatorics},
      {"potential-theory oracles", potential_oracles},
      {"hitting sandwich", sandwich},
      {"vacancy law", vacancy},
      {"poisson count law", poisson_counts},
      {"range statistics", ranges},
      {"connectivity and switches", connectivity},
      {"shape diagnostics", shape},
      {"large-deviation shape", ldp},
      {"torus ratios", torus},
      {"slab renormalization", slab},
      {"engineering", engineering},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      o.require(false, std::string("error: ") + e.what());
    }
    const double s = std::chrono::duration<double>(Clock::now() - t0).count();
    std::printf("[%s] criterion %2d: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), s);
    for (const auto& l : o.lines) std::printf("         %s\n", l.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d criteria failed\n", failed);
  return std::min(failed, 100);
}
