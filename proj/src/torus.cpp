#include <algorithm>
#include <cmath>
#include <cstdio>

#include "interlace/chemdist.hpp"
#include "interlace/error.hpp"
#include "interlace/experiments.hpp"
#include "interlace/walk.hpp"

namespace interlace {

namespace {

Point torus_point(std::uint64_t cell, int d, Coord side) {
  Point p(d);
  for (int i = d - 1; i >= 0; --i) {
    p[i] = static_cast<Coord>(cell % static_cast<std::uint64_t>(side));
    cell /= static_cast<std::uint64_t>(side);
  }
  return p;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return NAN;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

std::vector<std::uint8_t> torus_range(int d, Coord side, double u, StreamId id) {
  std::uint64_t cells = 1;
  for (int i = 0; i < d; ++i) cells *= static_cast<std::uint64_t>(side);
  std::vector<std::uint8_t> occ(cells, 0);
  RngStream rng(id);
  std::uint64_t cell = rng() % cells;
  Point p = torus_point(cell, d, side);
  std::array<std::uint64_t, kMaxDim> stride{};
  stride[d - 1] = 1;
  for (int i = d - 2; i >= 0; --i) stride[i] = stride[i + 1] * static_cast<std::uint64_t>(side);
  occ[cell] = 1;
  const auto steps = static_cast<std::int64_t>(std::floor(u * static_cast<double>(cells)));
  for (std::int64_t t = 0; t < steps; ++t) {
    const std::uint8_t code = draw_step(rng, d);
    const int axis = code >> 1;
    if (code & 1) {
      if (p[axis] == 0) {
        p[axis] = side - 1;
        cell += stride[axis] * static_cast<std::uint64_t>(side - 1);
      } else {
        --p[axis];
        cell -= stride[axis];
      }
    } else if (p[axis] == side - 1) {
      p[axis] = 0;
      cell -= stride[axis] * static_cast<std::uint64_t>(side - 1);
    } else {
      ++p[axis];
      cell += stride[axis];
    }
    occ[cell] = 1;
  }
  return occ;
}

RunResult run_torus(const ExperimentConfig& cfg, const RunOptions& opt) {
  RunResult res;
  res.config = cfg;
  const std::string exp = to_string(cfg.kind);
  const std::uint64_t hash = cfg.hash();
  const double u = cfg.u.front();
  std::vector<double> q99;
  bool all_covered = true;
  double max_ratio_covered = 1.0;
  for (const Coord side : cfg.sizes) {
    const double threshold = std::pow(std::log(static_cast<double>(side)), cfg.gamma);
    const std::string tag = "N=" + std::to_string(side);
    if (opt.log) opt.log("torus " + tag + ": threshold " + num(threshold));
    std::vector<std::vector<Record>> rows(static_cast<std::size_t>(cfg.replicas));
    std::vector<std::vector<double>> ratios(static_cast<std::size_t>(cfg.replicas));
    std::vector<std::uint8_t> covered(static_cast<std::size_t>(cfg.replicas), 0);
    parallel_for(cfg.replicas, opt.threads, [&](std::int64_t i) {
      const auto rep = static_cast<std::uint64_t>(cfg.first_replica + i);
      const std::uint64_t seed = cfg.seed ^ (0x746f727573ULL * static_cast<std::uint64_t>(side));
      const auto occ = torus_range(cfg.d, side, u, {seed, rep, 0});
      std::vector<std::uint64_t> sites;
      for (std::uint64_t c = 0; c < occ.size(); ++c)
        if (occ[c]) sites.push_back(c);
      covered[static_cast<std::size_t>(i)] = sites.size() == occ.size();
      auto& out = rows[static_cast<std::size_t>(i)];
      auto add = [&](const std::string& metric, double v) {
        out.push_back({exp, hash, cfg.first_replica + i, metric + "|" + tag, v, "", 0});
      };
      add("density", static_cast<double>(sites.size()) / static_cast<double>(occ.size()));
      // Pair stream: independent of the walk stream.
      RngStream rng({seed, rep, 1});
      for (std::int64_t k = 0; k < cfg.pairs; ++k) {
        std::uint64_t a = 0, b = 0;
        Coord dn = 0;
        int tries = 0;
        do {
          if (++tries > 50)
            throw Error(ErrorCode::SparseRange, "no occupied pair at torus distance >= " + num(threshold) + " on " + tag);
          a = sites[rng() % sites.size()];
          b = sites[rng() % sites.size()];
          dn = torus_distance(torus_point(a, cfg.d, side), torus_point(b, cfg.d, side), side);
        } while (a == b || static_cast<double>(dn) < threshold);
        const auto dist = torus_bfs(occ, cfg.d, side, a);
        const double ratio = static_cast<double>(dist[b]) / static_cast<double>(dn);
        ratios[static_cast<std::size_t>(i)].push_back(ratio);
        add("ratio", ratio);
      }
    });
    std::vector<double> pooled;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (auto& r : rows[i]) res.records.push_back(std::move(r));
      pooled.insert(pooled.end(), ratios[i].begin(), ratios[i].end());
      if (covered[i])
        max_ratio_covered = std::max(max_ratio_covered, *std::max_element(ratios[i].begin(), ratios[i].end()));
      else
        all_covered = false;
    }
    q99.push_back(quantile(pooled, 0.99));
    res.values["q99|" + tag] = q99.back();
    res.values["q50|" + tag] = quantile(pooled, 0.5);
    res.values["max|" + tag] = *std::max_element(pooled.begin(), pooled.end());
    res.values["threshold|" + tag] = threshold;
  }
  if (q99.size() > 1) {
    const auto [lo, hi] = std::minmax_element(q99.begin(), q99.end());
    const double spread = *hi / *lo - 1;
    res.values["q99_spread"] = spread;
    res.checks.push_back({"q99_stable_across_N", spread < 0.25, "max/min - 1 = " + num(spread)});
  }
  if (all_covered)
    res.checks.push_back({"covered_ratio_one", max_ratio_covered == 1.0, "max ratio " + num(max_ratio_covered)});
  return res;
}

}  // namespace interlace
