// Good edges of the slab renormalization along a straight patch of edges
// (0,1), (1,2), ..., (P-1,P) of Z^2, embedded on the first axis.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>

#include "interlace/equilibrium.hpp"
#include "interlace/error.hpp"
#include "interlace/experiments.hpp"
#include "interlace/sampler.hpp"

namespace interlace {

namespace {

// Cells of the trace region; slab runs above this are refused.
constexpr std::uint64_t kSlabCellBudget = std::uint64_t{1} << 27;
// Tighter than the experiment default: in d >= 5 the kill radius grows slowly
// with 1 / eps, and lost returns would bias the local classification.
constexpr double kSlabKillEps = 0.05;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct SlabGeometry {
  int d;
  Coord k, r;
  std::int64_t patch;
  Box sampled;  // union of the G_e of the patch
  Box region;   // sampled set plus the vertex boxes B(Kx, 2r)

  Box edge_box(std::int64_t i) const {
    Box b = sampled;
    b.lo[0] = k * i - r;
    b.hi[0] = k * (i + 1) + r;
    return b;
  }
  Box vertex_box(std::int64_t v, Coord radius) const {
    Point c(d);
    c[0] = k * v;
    Box b{c, c};
    for (int a = 0; a < d; ++a) {
      b.lo[a] -= radius;
      b.hi[a] += radius;
    }
    return b;
  }
  // Bitmask of the G_e (by patch position) containing p; p must lie in `sampled`.
  std::uint64_t edges_at(const Point& p) const {
    auto floor_div = [](Coord a, Coord b) { return a >= 0 ? a / b : -((-a + b - 1) / b); };
    const Coord first = std::max<Coord>(0, -floor_div(-(p[0] - r - k), k));
    const Coord last = std::min<Coord>(patch - 1, floor_div(p[0] + r, k));
    std::uint64_t m = 0;
    for (Coord i = first; i <= last; ++i) m |= std::uint64_t{1} << i;
    return m;
  }
};

struct TrajectoryTrace {
  std::uint64_t hits = 0;             // G_e met, by patch position
  std::vector<std::uint32_t> cells;   // region cells visited (with repeats)
};

// W*_e for edge i: meets G_{e_i} and no G_{e_j} with |i - j| >= 2.
bool local_to(std::uint64_t hits, std::int64_t i) {
  if (!((hits >> i) & 1)) return false;
  std::uint64_t allowed = std::uint64_t{1} << i;
  if (i > 0) allowed |= std::uint64_t{1} << (i - 1);
  allowed |= std::uint64_t{1} << (i + 1);
  return (hits & ~allowed) == 0;
}

// BFS over marked cells inside `box`, from all marked cells of `from`;
// returns the stamp-marked reach.
class RegionBfs {
 public:
  explicit RegionBfs(const BoxIndexer& idx) : idx_(idx), seen_(idx.size(), 0) {}

  std::uint32_t begin() { return ++stamp_; }

  // Marks are held by the caller as `mark[cell] == mark_stamp`.
  std::size_t run(const std::vector<std::uint32_t>& mark, std::uint32_t mark_stamp, const Box& box,
                  const std::vector<std::uint64_t>& sources) {
    const std::uint32_t s = begin();
    std::deque<std::uint64_t> queue;
    for (auto c : sources)
      if (seen_[c] != s) {
        seen_[c] = s;
        queue.push_back(c);
      }
    std::size_t reached = queue.size();
    const int d = idx_.dim();
    while (!queue.empty()) {
      const std::uint64_t c = queue.front();
      queue.pop_front();
      const Point p = idx_.point(c);
      for (int a = 0; a < d; ++a)
        for (int sgn : {-1, 1}) {
          Point q = p;
          q[a] += sgn;
          if (!box.contains(q) || !idx_.inside(q)) continue;
          const auto n = idx_.index(q);
          if (mark[n] != mark_stamp || seen_[n] == s) continue;
          seen_[n] = s;
          ++reached;
          queue.push_back(n);
        }
    }
    return reached;
  }
  bool reached(std::uint64_t c) const { return seen_[c] == stamp_; }

 private:
  const BoxIndexer& idx_;
  std::vector<std::uint32_t> seen_;
  std::uint32_t stamp_ = 0;
};

std::vector<std::uint64_t> cells_in(const BoxIndexer& idx, const Box& box, const std::vector<std::uint32_t>& mark,
                                    std::uint32_t stamp) {
  std::vector<std::uint64_t> out;
  for (const Point& p : Domain::box(box.lo, box.hi).sites())
    if (idx.inside(p) && mark[idx.index(p)] == stamp) out.push_back(idx.index(p));
  return out;
}

}  // namespace

RunResult run_slab(const ExperimentConfig& cfg, GreenTable& green, const RunOptions& opt) {
  RunResult res;
  res.config = cfg;
  const std::string exp = to_string(cfg.kind);
  const std::uint64_t hash = cfg.hash();
  const int d = cfg.d;
  const double u = cfg.u.front();
  if (d < 5) res.warnings.push_back("d < 5: transverse walks are recurrent enough that p_good degrades");
  if (cfg.patch < 2 || cfg.patch > 62) throw Error(ErrorCode::ConfigError, "slab patch must lie in [2, 62]");

  std::vector<std::pair<double, std::int64_t>> p_good;
  for (const Coord k : cfg.k_values) {
    SlabGeometry g{d, k, sausage_radius(k, cfg.eps), cfg.patch, {}, {}};
    const Coord r = g.r;
    Point lo(d), hi(d);
    for (int a = 0; a < d; ++a) {
      lo[a] = -r;
      hi[a] = r;
    }
    hi[0] = k * cfg.patch + r;
    g.sampled = {lo, hi};
    Point rlo(d), rhi(d);
    for (int a = 0; a < d; ++a) {
      rlo[a] = -2 * r;
      rhi[a] = 2 * r;
    }
    rhi[0] = k * cfg.patch + 2 * r;
    g.region = {rlo, rhi};
    const BoxIndexer idx(g.region);
    if (idx.size() > kSlabCellBudget)
      throw Error(ErrorCode::SlabBudget, "K=" + std::to_string(k) + " needs " + std::to_string(idx.size()) + " cells");
    const std::string tag = "K=" + std::to_string(k);

    const Domain sampled = Domain::box(lo, hi);
    const EquilibriumSolution eq = equilibrium(sampled, green);
    const StartSampler starts(eq);
    Point centre(d);
    centre[0] = (k * cfg.patch) / 2;
    Coord rho = 0;
    for (const auto& p : {lo, hi}) rho = std::max(rho, norm_linf(p - centre));
    const Coord kill = kill_radius_for(eq.cap, rho, kSlabKillEps, green, rho + 1, 4096);
    if (opt.log) opt.log("slab " + tag + ": r " + std::to_string(r) + ", cap " + num(eq.cap) + ", kill radius " +
                         std::to_string(kill));
    res.values["cap|" + tag] = eq.cap;
    res.values["kill_radius|" + tag] = static_cast<double>(kill);
    const std::uint64_t seed = cfg.seed ^ (0x736c6162ULL * static_cast<std::uint64_t>(k));
    const auto edges = cfg.patch;

    std::vector<std::vector<std::uint8_t>> good(static_cast<std::size_t>(cfg.replicas));
    std::vector<std::vector<Record>> rows(static_cast<std::size_t>(cfg.replicas));
    parallel_for(cfg.replicas, opt.threads, [&](std::int64_t i) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto rep = static_cast<std::uint64_t>(cfg.first_replica + i);
      const auto labels = trajectory_labels(u, eq.cap, seed, rep);
      std::vector<TrajectoryTrace> traces(labels.size());
      for (std::size_t j = 0; j < labels.size(); ++j) {
        RngStream rng({seed, rep, j});
        Point p = starts.sample(rng);
        auto& tr = traces[j];
        while (true) {
          if (g.region.contains(p)) {
            tr.cells.push_back(static_cast<std::uint32_t>(idx.index(p)));
            if (g.sampled.contains(p)) tr.hits |= g.edges_at(p);
          }
          const std::uint8_t code = draw_step(rng, d);
          apply_step(p, code);
          const int a = code >> 1;
          if (std::abs(p[a] - centre[a]) > kill) break;
        }
      }
      std::vector<std::uint32_t> mark(idx.size(), 0);
      std::uint32_t stamp = 0;
      RegionBfs bfs(idx);

      auto connect_event = [&](const Box& box, const Box& from, const Box& to) {
        const auto sources = cells_in(idx, from, mark, stamp);
        if (sources.empty()) return false;
        bfs.run(mark, stamp, box, sources);
        for (const Point& p : Domain::box(to.lo, to.hi).sites())
          if (idx.inside(p) && mark[idx.index(p)] == stamp && bfs.reached(idx.index(p))) return true;
        return false;
      };
      std::vector<std::uint8_t> c_event(static_cast<std::size_t>(edges)), d_event(static_cast<std::size_t>(edges + 1));
      for (std::int64_t e = 0; e < edges; ++e) {
        ++stamp;
        for (const auto& tr : traces)
          if (local_to(tr.hits, e))
            for (auto c : tr.cells) mark[c] = stamp;
        const Box ge = g.edge_box(e);
        c_event[static_cast<std::size_t>(e)] = connect_event(ge, g.vertex_box(e, r), g.vertex_box(e + 1, r));
      }
      for (std::int64_t v = 0; v <= edges; ++v) {
        ++stamp;
        for (const auto& tr : traces)
          if ((v > 0 && local_to(tr.hits, v - 1)) || (v < edges && local_to(tr.hits, v)))
            for (auto c : tr.cells) mark[c] = stamp;
        const Box inner = g.vertex_box(v, r), outer = g.vertex_box(v, 2 * r);
        // Sites of local trajectories in B(Kx, r) must be joined inside B(Kx, 2r).
        const auto need = cells_in(idx, inner, mark, stamp);
        bool ok = true;
        if (!need.empty()) {
          bfs.run(mark, stamp, outer, {need.front()});
          for (auto c : need) ok &= bfs.reached(c);
        }
        d_event[static_cast<std::size_t>(v)] = ok;
      }
      auto& out = rows[static_cast<std::size_t>(i)];
      auto& gd = good[static_cast<std::size_t>(i)];
      const double wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      std::int64_t local = 0;
      for (const auto& tr : traces) {
        bool any = false;
        for (std::int64_t e = 0; e < edges; ++e) any |= local_to(tr.hits, e);
        local += any;
      }
      out.push_back({exp, hash, cfg.first_replica + i, "trajectories|" + tag, static_cast<double>(traces.size()), "", 0});
      out.push_back({exp, hash, cfg.first_replica + i, "local_trajectories|" + tag, static_cast<double>(local), "", 0});
      for (std::int64_t e = 0; e < edges; ++e) {
        const auto ee = static_cast<std::size_t>(e);
        const bool is_good = c_event[ee] && d_event[ee] && d_event[ee + 1];
        gd.push_back(is_good);
        const std::string et = tag + "|e=" + std::to_string(e);
        out.push_back({exp, hash, cfg.first_replica + i, "C|" + et, static_cast<double>(c_event[ee]), "", 0});
        out.push_back({exp, hash, cfg.first_replica + i, "good|" + et, is_good ? 1.0 : 0.0, "", e + 1 == edges ? wall : 0});
      }
      for (std::int64_t v = 0; v <= edges; ++v)
        out.push_back({exp, hash, cfg.first_replica + i, "D|" + tag + "|x=" + std::to_string(v),
                       static_cast<double>(d_event[static_cast<std::size_t>(v)]), "", 0});
    });
    for (auto& r : rows)
      for (auto& rec : r) res.records.push_back(std::move(rec));

    std::int64_t good_count = 0;
    for (const auto& gd : good) good_count += std::count(gd.begin(), gd.end(), 1);
    const std::int64_t trials = cfg.replicas * edges;
    const double p = static_cast<double>(good_count) / static_cast<double>(trials);
    p_good.emplace_back(p, trials);
    const auto [lo_ci, hi_ci] = wilson(good_count, trials);
    res.values["p_good|" + tag] = p;
    res.values["p_good_ci_low|" + tag] = lo_ci;
    res.values["p_good_ci_high|" + tag] = hi_ci;

    // Edges 0 and P-1 are at distance P-2 in E_2.
    if (edges - 2 >= 4) {
      double sa = 0, sb = 0, sab = 0;
      const auto n = static_cast<double>(cfg.replicas);
      for (const auto& gd : good) {
        sa += gd.front();
        sb += gd.back();
        sab += gd.front() * gd.back();
      }
      const double ma = sa / n, mb = sb / n;
      const double va = ma * (1 - ma), vb = mb * (1 - mb);
      const double tol = 3 / std::sqrt(n);
      if (va > 0 && vb > 0) {
        const double corr = (sab / n - ma * mb) / std::sqrt(va * vb);
        res.values["far_correlation|" + tag] = corr;
        res.checks.push_back({"far_edges_uncorrelated|" + tag, std::abs(corr) <= tol,
                              "correlation " + num(corr) + " tol " + num(tol)});
      } else {
        res.checks.push_back({"far_edges_uncorrelated|" + tag, true,
                              "degenerate indicators (p " + num(ma) + ", " + num(mb) + "): independent trivially"});
      }
    }
  }
  for (std::size_t i = 1; i < p_good.size(); ++i) {
    const auto [a, na] = p_good[i - 1];
    const auto [b, nb] = p_good[i];
    const double s = std::sqrt(a * (1 - a) / static_cast<double>(na) + b * (1 - b) / static_cast<double>(nb));
    res.checks.push_back({"p_good_non_decreasing|K=" + std::to_string(cfg.k_values[i - 1]) + "->" +
                              std::to_string(cfg.k_values[i]),
                          b >= a - 2 * s, num(a) + " -> " + num(b) + " (2 sigma " + num(2 * s) + ")"});
  }
  return res;
}

}  // namespace interlace
