#include "interlace/hitting.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_map>
#include <unordered_set>

#include "interlace/error.hpp"
#include "interlace/walk.hpp"

namespace interlace {

namespace {

constexpr std::uint64_t kChainBudget = std::uint64_t{1} << 24;

bool in_set(const Point& x, const std::vector<Point>& set) {
  return std::find(set.begin(), set.end(), x) != set.end();
}

void require_nonempty(const std::vector<Point>& set) {
  if (set.empty()) throw Error(ErrorCode::EmptySet, "empty target set");
}

// g(., .; n) memoised by canonical displacement.
class StoppedGreenCache {
 public:
  explicit StoppedGreenCache(std::int64_t n) : n_(n) {}
  double operator()(const Point& x, const Point& y) {
    const Point key = canonical_displacement(y - x);
    auto [it, fresh] = cache_.try_emplace(key, 0.0);
    if (fresh) it->second = green_stopped(Point(key.dim()), key, n_);
    return it->second;
  }

 private:
  std::int64_t n_;
  std::unordered_map<Point, double, PointHash> cache_;
};

double set_sum(const Point& x, const std::vector<Point>& set, auto&& g) {
  double s = 0.0;
  for (const auto& z : set) s += g(x, z);
  return s;
}

void check_lemma_preconditions(const Point& x, const std::vector<Point>& set, Horizon n, Coord ell) {
  if (set.size() < 2) throw Error(ErrorCode::OutOfRange, "bound needs a set with at least two sites");
  if (n && static_cast<double>(*n) < static_cast<double>(ell) * static_cast<double>(ell))
    throw Error(ErrorCode::OutOfRange, "bound needs n >= l(x,A)^2 = " + std::to_string(ell * ell));
  (void)x;
}

}  // namespace

double green_to_set(const Point& x, const std::vector<Point>& set, Horizon n, GreenTable& green) {
  require_nonempty(set);
  if (n) {
    StoppedGreenCache g(*n);
    return set_sum(x, set, g);
  }
  return set_sum(x, set, [&](const Point& a, const Point& b) { return green.get(b - a); });
}

HitProbability hit_prob_exact(const Point& x, const std::vector<Point>& set, Horizon n, GreenTable& green) {
  require_nonempty(set);
  if (in_set(x, set)) return {1.0, 0.0};
  if (!n) {
    const EquilibriumSolution eq = equilibrium(set, green);
    double value = 0.0;
    for (std::size_t i = 0; i < eq.sites.size(); ++i) value += green.get(eq.sites[i] - x) * eq.mass[i];
    return {value, eq.cap * green.tol() + 10.0 * eq.residual};
  }
  if (*n < 0) throw Error(ErrorCode::OutOfRange, "horizon must be >= 0");

  // Mass at time t < n sits within distance t of x, so every neighbour it
  // reaches lies in B(x, n) and the sweep needs no bounds checks.
  const int d = x.dim();
  const Coord r = *n;
  Point lo = x, hi = x;
  for (int i = 0; i < d; ++i) {
    lo[i] -= r;
    hi[i] += r;
  }
  const BoxIndexer box(Box{lo, hi});
  if (box.size() > kChainBudget)
    throw Error(ErrorCode::ChainBudget, "chain of " + std::to_string(box.size()) + " states above budget");
  std::vector<std::uint64_t> targets;
  for (const auto& z : set)
    if (box.inside(z)) targets.push_back(box.index(z));

  std::vector<double> cur(box.size(), 0.0), next(box.size(), 0.0);
  cur[box.index(x)] = 1.0;
  const double w = 1.0 / (2 * d);
  double absorbed = 0.0;
  for (std::int64_t t = 1; t <= *n; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::uint64_t i = 0; i < box.size(); ++i) {
      const double m = cur[i];
      if (m == 0.0) continue;
      for (int axis = 0; axis < d; ++axis) {
        const std::uint64_t s = box.stride(axis);
        next[i + s] += m * w;
        next[i - s] += m * w;
      }
    }
    for (auto idx : targets) {
      absorbed += next[idx];
      next[idx] = 0.0;
    }
    std::swap(cur, next);
  }
  return {absorbed, 1e-15 * static_cast<double>(*n)};
}

HitBounds hit_sandwich(const Point& x, const std::vector<Point>& set, Horizon n, GreenTable& green) {
  require_nonempty(set);
  HitBounds b;
  if (in_set(x, set)) {
    b.lower = b.upper = 1.0;
    return b;
  }
  double gmin = INFINITY;
  for (const auto& y : set) gmin = std::min(gmin, green_to_set(y, set, std::nullopt, green));
  b.upper = green_to_set(x, set, std::nullopt, green) / gmin;

  double gmax = 0.0;
  if (n) {
    StoppedGreenCache g(*n);
    for (const auto& y : set) gmax = std::max(gmax, set_sum(y, set, g));
    b.lower = set_sum(x, set, g) / gmax;
  } else {
    for (const auto& y : set) gmax = std::max(gmax, green_to_set(y, set, std::nullopt, green));
    b.lower = green_to_set(x, set, std::nullopt, green) / gmax;
  }
  return b;
}

bool is_connected(const std::vector<Point>& set) {
  if (set.empty()) return true;
  const std::unordered_set<Point, PointHash> members(set.begin(), set.end());
  std::unordered_set<Point, PointHash> seen{set.front()};
  std::deque<Point> queue{set.front()};
  while (!queue.empty()) {
    Point p = queue.front();
    queue.pop_front();
    for (int axis = 0; axis < p.dim(); ++axis)
      for (Coord s : {Coord{-1}, Coord{1}}) {
        Point q = p;
        q[axis] += s;
        if (members.contains(q) && seen.insert(q).second) queue.push_back(q);
      }
  }
  return seen.size() == members.size();
}

ShapeBound hit_lower_diam(const Point& x, const std::vector<Point>& set, Horizon n, double c3) {
  require_nonempty(set);
  const Coord ell = max_distance(x, set);
  check_lemma_preconditions(x, set, n, ell);
  if (!is_connected(set)) throw Error(ErrorCode::NotConnected, "diameter bound needs a connected set");
  const int d = x.dim();
  const auto diam = static_cast<double>(diameter_linf(set));
  double shape = diam / std::pow(static_cast<double>(ell), d - 2);
  if (d == 3) {
    if (diam < 2) throw Error(ErrorCode::OutOfRange, "d = 3 diameter bound is degenerate for diam(A) = 1");
    shape /= std::log(diam);
  }
  return {c3 * shape, shape};
}

ShapeBound hit_lower_volume(const Point& x, const std::vector<Point>& set, Horizon n, double c4) {
  require_nonempty(set);
  const Coord ell = max_distance(x, set);
  check_lemma_preconditions(x, set, n, ell);
  const int d = x.dim();
  const double shape = std::pow(static_cast<double>(set.size()), 1.0 - 2.0 / d) /
                       std::pow(static_cast<double>(ell), d - 2);
  return {c4 * shape, shape};
}

double green_sup_tail(GreenTable& green, Coord r) {
  return green.get(Point::unit(green.dim(), 0, std::max<Coord>(r, 0)));
}

CapacityEstimate capacity_mc(const std::vector<Point>& set, std::int64_t replicas, Coord kill_radius,
                             std::uint64_t seed, GreenTable& green) {
  require_nonempty(set);
  if (replicas < 1) throw Error(ErrorCode::OutOfRange, "replicas must be >= 1");
  std::vector<Point> sites = set;
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  const int d = sites.front().dim();

  const Domain domain = Domain::from_sites(sites);
  const Box& bb = domain.bounding_box();
  Point center(d);
  for (int i = 0; i < d; ++i) center[i] = (bb.lo[i] + bb.hi[i]) / 2;
  const Coord rho = max_distance(center, sites);
  if (kill_radius <= rho) throw Error(ErrorCode::OutOfRange, "kill radius must exceed the radius of A");

  double gmin = INFINITY, gmax = 0.0;
  for (const auto& y : sites) {
    const double v = green_to_set(y, sites, std::nullopt, green);
    gmin = std::min(gmin, v);
    gmax = std::max(gmax, v);
  }
  // Exit points y satisfy ||y - z||_inf <= kill_radius + 1 + rho for z in A.
  std::vector<Coord> extents(static_cast<std::size_t>(d), kill_radius + 1 + rho);
  green.ensure_extents(extents);
  auto g_to_set = [&](const Point& y) {
    double s = 0.0;
    for (const auto& z : sites) s += green(y - z);
    return s;
  };

  const std::int64_t per_site = (replicas + static_cast<std::int64_t>(sites.size()) - 1) /
                                static_cast<std::int64_t>(sites.size());
  StopCondition stop = StopCondition::hitting(domain);
  stop.with_kill_ball(center, kill_radius);

  CapacityEstimate out;
  double variance = 0.0, kill_mass = 0.0;
  std::int64_t kills = 0;
  for (std::size_t zi = 0; zi < sites.size(); ++zi) {
    double sum = 0.0, sum2 = 0.0;
    std::int64_t site_kills = 0;
    for (std::int64_t w = 0; w < per_site; ++w) {
      RngStream rng({seed, zi, static_cast<std::uint64_t>(w)});
      const StoppedPath path = run_until(sites[zi], rng, stop);
      double score = 0.0;
      if (path.stop_kind == StopKind::KillRadius) {
        const double gy = g_to_set(path.end());
        const double mid = 0.5 * (gy / gmax + std::min(1.0, gy / gmin));
        score = 1.0 - mid;
        ++site_kills;
      }
      sum += score;
      sum2 += score * score;
    }
    const auto nz = static_cast<double>(per_site);
    const double mean = sum / nz;
    out.estimate += mean;
    if (per_site > 1) variance += std::max(0.0, (sum2 - nz * mean * mean) / (nz - 1)) / nz;
    kill_mass += static_cast<double>(site_kills) / nz;
    kills += site_kills;
  }
  out.std_error = std::sqrt(variance);
  out.walks = per_site * static_cast<std::int64_t>(sites.size());
  out.kill_fraction = static_cast<double>(kills) / static_cast<double>(out.walks);
  // Worst half-gap of the bracket over all exit points: it grows with g(y,A)
  // until the upper end clamps at 1, which happens at g(y,A) = gmin.
  const double g_exit = static_cast<double>(sites.size()) * green_sup_tail(green, kill_radius + 1 - rho);
  const double g_star = std::min(g_exit, gmin);
  const double half_gap = 0.5 * (g_star / gmin - g_star / gmax);
  out.bias_bound = kill_mass * std::max(0.0, half_gap);
  return out;
}

}  // namespace interlace
