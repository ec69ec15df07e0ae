#include "interlace/chemdist.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "interlace/error.hpp"

namespace interlace {

namespace {

Box grown(const Box& b, Coord pad) {
  Box out = b;
  for (int i = 0; i < b.lo.dim(); ++i) {
    out.lo[i] -= pad;
    out.hi[i] += pad;
  }
  return out;
}

void require_occupied(const SiteGrid& grid, const Point& p) {
  if (!grid.occupied(p)) throw Error(ErrorCode::NotInSet, p.str() + " is not an occupied site");
}

// Neighbour offsets in index space; valid for every occupied cell because the
// outer layer of the grid is empty.
std::vector<std::int64_t> offsets(const BoxIndexer& idx) {
  std::vector<std::int64_t> out;
  for (int i = 0; i < idx.dim(); ++i) {
    out.push_back(static_cast<std::int64_t>(idx.stride(i)));
    out.push_back(-static_cast<std::int64_t>(idx.stride(i)));
  }
  return out;
}

// Plain BFS over cells; stops once `target` is labelled (if given) or the
// radius is exhausted.
void run_bfs(const SiteGrid& grid, std::uint64_t source, std::optional<std::int64_t> max_radius,
             std::optional<std::uint64_t> target, std::vector<std::int32_t>& dist, bool& touched_edge) {
  const auto nb = offsets(grid.indexer());
  dist.assign(grid.indexer().size(), -1);
  std::vector<std::uint64_t> queue;
  queue.reserve(1024);
  queue.push_back(source);
  dist[source] = 0;
  touched_edge = grid.edge(source);
  const std::int64_t limit = max_radius.value_or(std::numeric_limits<std::int32_t>::max());
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const std::uint64_t c = queue[head];
    if (target && c == *target) return;
    const std::int32_t next = dist[c] + 1;
    if (next > limit) continue;
    for (const auto o : nb) {
      const auto n = static_cast<std::uint64_t>(static_cast<std::int64_t>(c) + o);
      if (dist[n] < 0 && grid.occupied(n)) {
        dist[n] = next;
        touched_edge |= grid.edge(n);
        queue.push_back(n);
      }
    }
  }
}

}  // namespace

SiteGrid SiteGrid::from_field(const OccupancyField& field, double u) {
  SiteGrid g;
  g.indexer_ = field.indexer();
  g.occ_ = field.occupancy(u);
  g.finish(&field.enlarged());
  return g;
}

SiteGrid SiteGrid::from_sites(const std::vector<Point>& sites, const Domain& region) {
  if (sites.empty() && region.boxes().empty()) throw Error(ErrorCode::EmptySet, "grid over no sites");
  Box bb = region.boxes().empty() ? Domain::from_sites(sites).bounding_box() : region.bounding_box();
  if (!region.boxes().empty() && !sites.empty()) {
    const Box sb = Domain::from_sites(sites).bounding_box();
    for (int i = 0; i < bb.lo.dim(); ++i) {
      bb.lo[i] = std::min(bb.lo[i], sb.lo[i]);
      bb.hi[i] = std::max(bb.hi[i], sb.hi[i]);
    }
  }
  SiteGrid g;
  g.indexer_ = BoxIndexer(grown(bb, 1));
  g.occ_.assign(g.indexer_.size(), 0);
  for (const auto& p : sites) {
    if (!region.boxes().empty() && !region.contains(p)) continue;
    g.occ_[g.indexer_.index(p)] = 1;
  }
  g.finish(region.boxes().empty() ? nullptr : &region);
  return g;
}

void SiteGrid::finish(const Domain* region) {
  edge_.assign(occ_.size(), 0);
  count_ = 0;
  std::optional<DomainMask> mask;
  if (region) mask.emplace(*region);
  const int d = dim();
  for (std::uint64_t c = 0; c < occ_.size(); ++c) {
    if (!occ_[c]) continue;
    ++count_;
    if (!mask) continue;
    const Point p = indexer_.point(c);
    for (int i = 0; i < d && !edge_[c]; ++i)
      for (Coord s : {Coord{-1}, Coord{1}}) {
        Point q = p;
        q[i] += s;
        if (!mask->contains(q)) edge_[c] = 1;
      }
  }
}

std::vector<Point> SiteGrid::sites() const {
  std::vector<Point> out;
  out.reserve(count_);
  for (std::uint64_t c = 0; c < occ_.size(); ++c)
    if (occ_[c]) out.push_back(indexer_.point(c));
  return out;
}

std::optional<std::int64_t> DistanceMap::at(const Point& p) const {
  if (!indexer.inside(p)) return std::nullopt;
  const auto v = dist[indexer.index(p)];
  if (v < 0) return std::nullopt;
  return v;
}

std::vector<Point> DistanceMap::reached() const {
  std::vector<Point> out;
  for (std::uint64_t c = 0; c < dist.size(); ++c)
    if (dist[c] >= 0) out.push_back(indexer.point(c));
  return out;
}

DistanceMap bfs(const SiteGrid& grid, const Point& source, std::optional<std::int64_t> max_radius) {
  require_occupied(grid, source);
  DistanceMap m;
  m.source = source;
  m.indexer = grid.indexer();
  run_bfs(grid, grid.indexer().index(source), max_radius, std::nullopt, m.dist, m.frontier_truncated);
  return m;
}

DistanceResult bfs_distance(const SiteGrid& grid, const Point& x, const Point& y) {
  require_occupied(grid, x);
  require_occupied(grid, y);
  DistanceResult r;
  if (x == y) {
    r.rho = 0;
    r.flagged = grid.edge(grid.indexer().index(x));
    return r;
  }
  const auto cx = grid.indexer().index(x), cy = grid.indexer().index(y);
  std::vector<std::int32_t> dx, dy;
  bool touched = false;
  run_bfs(grid, cx, std::nullopt, cy, dx, touched);
  if (dx[cy] < 0) {
    r.flagged = touched;
    return r;
  }
  const std::int32_t rho = dx[cy];
  r.rho = rho;
  // Second pass from y: z lies on a geodesic iff dx(z) + dy(z) = rho. Only
  // cells with dx(z) <= rho can qualify, and all of them are labelled.
  run_bfs(grid, cy, rho, std::nullopt, dy, touched);
  for (std::uint64_t c = 0; c < dy.size(); ++c)
    if (dy[c] >= 0 && dx[c] >= 0 && dx[c] + dy[c] == rho && grid.edge(c)) {
      r.flagged = true;
      break;
    }
  return r;
}

std::vector<Point> ball(const SiteGrid& grid, const Point& x, std::int64_t r) {
  if (r < 0) throw Error(ErrorCode::OutOfRange, "ball radius must be >= 0");
  return bfs(grid, x, r).reached();
}

std::vector<RayPoint> ray_scan(const SiteGrid& grid, const Point& y, const Point& x, std::int64_t k_max,
                               std::size_t count) {
  if (norm_linf(x) == 0) throw Error(ErrorCode::OutOfRange, "ray direction must be nonzero");
  auto site = [&](std::int64_t m) {
    const Point p = y + m * x;
    if (!grid.indexer().inside(p)) throw Error(ErrorCode::OutOfRange, "ray scan left the grid at " + p.str());
    return p;
  };
  std::vector<RayPoint> out;
  std::optional<std::int64_t> z0;
  for (std::int64_t m = 0; m >= -k_max; --m)
    if (grid.occupied(site(m))) {
      z0 = m;
      break;
    }
  if (!z0) throw Error(ErrorCode::RayEmpty, "no occupied site within " + std::to_string(k_max) + " steps behind " + y.str());
  out.push_back({*z0, y + *z0 * x});
  for (std::size_t k = 1; k <= count; ++k) {
    const std::int64_t from = out.back().zeta;
    std::optional<std::int64_t> z;
    for (std::int64_t m = from + 1; m <= from + k_max; ++m)
      if (grid.occupied(site(m))) {
        z = m;
        break;
      }
    if (!z) throw Error(ErrorCode::RayEmpty, "no occupied site within " + std::to_string(k_max) + " steps ahead");
    out.push_back({*z, y + *z * x});
  }
  return out;
}

namespace {

// Visits the displacements of l1 norm exactly r in lexicographic order until
// `f` returns true.
template <class F>
bool l1_shell(Point& v, int axis, Coord budget, F&& f) {
  const int d = v.dim();
  if (axis == d - 1) {
    for (Coord s : {-budget, budget}) {
      v[axis] = s;
      if (f(v)) return true;
      if (budget == 0) break;
    }
    return false;
  }
  for (Coord c = -budget; c <= budget; ++c) {
    v[axis] = c;
    if (l1_shell(v, axis + 1, budget - (c < 0 ? -c : c), f)) return true;
  }
  return false;
}

}  // namespace

std::optional<Point> nearest_occupied(const SiteGrid& grid, const Point& p, std::int64_t max_radius) {
  std::optional<Point> found;
  for (Coord r = 0; r <= max_radius && !found; ++r) {
    Point v(p.dim());
    l1_shell(v, 0, r, [&](const Point& w) {
      const Point q = p + w;
      if (grid.occupied(q)) {
        found = q;
        return true;
      }
      return false;
    });
  }
  return found;
}

std::size_t TrajectoryGraph::components() const {
  std::vector<std::uint32_t> parent(nodes.size());
  for (std::uint32_t i = 0; i < parent.size(); ++i) parent[i] = i;
  auto find = [&](std::uint32_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  std::size_t comps = nodes.size();
  for (const auto& [a, b] : edges) {
    const auto ra = find(a), rb = find(b);
    if (ra != rb) {
      parent[ra] = rb;
      --comps;
    }
  }
  return comps;
}

namespace {

class GraphBuilder {
 public:
  GraphBuilder(TrajectoryGraph& g, std::size_t n) : g_(g) {
    g_.nodes.resize(n);
    g_.adjacency.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) g_.nodes[i] = i;
  }
  void link(std::uint32_t a, std::uint32_t b, const Point& site) {
    if (a == b) return;
    if (a > b) std::swap(a, b);
    if (!seen_.insert((static_cast<std::uint64_t>(a) << 32) | b).second) return;
    g_.edges.emplace_back(a, b);
    g_.witness.push_back(site);
    g_.adjacency[a].push_back(b);
    g_.adjacency[b].push_back(a);
  }

 private:
  TrajectoryGraph& g_;
  std::unordered_set<std::uint64_t> seen_;
};

}  // namespace

TrajectoryGraph trajectory_graph(const OccupancyField& field, std::int64_t m, double u) {
  if (m < 0) throw Error(ErrorCode::OutOfRange, "prefix length must be >= 0");
  TrajectoryGraph g;
  g.m = m;
  const std::size_t n = field.count_at(u);
  GraphBuilder builder(g, n);
  const auto& trajs = field.trajectories();
  if (field.has_paths()) {
    auto prefix_len = [&](const Trajectory& t) { return std::min(m, t.length); };
    // Bounding box of every prefix, so sites pack into one integer key.
    const int d = field.dim();
    Box box{trajs.empty() ? Point(d) : trajs.front().start, trajs.empty() ? Point(d) : trajs.front().start};
    for (std::size_t j = 0; j < n; ++j) {
      Point p = trajs[j].start;
      const std::int64_t len = prefix_len(trajs[j]);
      for (std::int64_t s = 0;; ++s) {
        for (int a = 0; a < d; ++a) {
          box.lo[a] = std::min(box.lo[a], p[a]);
          box.hi[a] = std::max(box.hi[a], p[a]);
        }
        if (s == len) break;
        apply_step(p, trajs[j].steps[static_cast<std::size_t>(s)]);
      }
    }
    const BoxIndexer idx(box);
    constexpr int kTrajBits = 24;
    if (n >= (std::size_t{1} << kTrajBits) || idx.size() >= (std::uint64_t{1} << (64 - kTrajBits)))
      throw Error(ErrorCode::OutOfRange, "trajectory graph too large to index");
    std::vector<std::uint64_t> keys;
    for (std::size_t j = 0; j < n; ++j) {
      Point p = trajs[j].start;
      const std::int64_t len = prefix_len(trajs[j]);
      for (std::int64_t s = 0;; ++s) {
        keys.push_back((idx.index(p) << kTrajBits) | j);
        if (s == len) break;
        apply_step(p, trajs[j].steps[static_cast<std::size_t>(s)]);
      }
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    constexpr std::uint64_t kMask = (std::uint64_t{1} << kTrajBits) - 1;
    for (std::size_t i = 0; i < keys.size();) {
      std::size_t k = i + 1;
      while (k < keys.size() && (keys[k] >> kTrajBits) == (keys[i] >> kTrajBits)) ++k;
      if (k - i > 1) {
        const Point site = idx.point(keys[i] >> kTrajBits);
        for (std::size_t a = i; a < k; ++a)
          for (std::size_t b = a + 1; b < k; ++b)
            builder.link(static_cast<std::uint32_t>(keys[a] & kMask), static_cast<std::uint32_t>(keys[b] & kMask), site);
      }
      i = k;
    }
    return g;
  }
  const BoxIndexer& idx = field.indexer();
  std::vector<std::uint32_t> here;
  for (std::uint64_t c = 0; c < idx.size(); ++c) {
    const auto visits = field.visits(c);
    if (visits.empty()) continue;
    here.clear();
    for (const auto& v : visits)
      if (v.trajectory < n && v.time <= m) here.push_back(v.trajectory);
    if (here.empty()) continue;
    if (field.saturated(c)) g.saturated = true;
    if (here.size() < 2) continue;
    const Point site = idx.point(c);
    for (std::size_t a = 0; a < here.size(); ++a)
      for (std::size_t b = a + 1; b < here.size(); ++b) builder.link(here[a], here[b], site);
  }
  return g;
}

TrajectoryGraph prefix_subgraph(const TrajectoryGraph& graph, std::size_t count) {
  count = std::min(count, graph.size());
  TrajectoryGraph g;
  g.m = graph.m;
  g.saturated = graph.saturated;
  g.nodes.assign(graph.nodes.begin(), graph.nodes.begin() + static_cast<std::ptrdiff_t>(count));
  g.adjacency.resize(count);
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const auto [a, b] = graph.edges[e];
    if (a >= count || b >= count) continue;
    g.edges.emplace_back(a, b);
    g.witness.push_back(graph.witness[e]);
    g.adjacency[a].push_back(b);
    g.adjacency[b].push_back(a);
  }
  return g;
}

TrajectoryGraph trajectory_graph(const OccupancyField& field, std::int64_t m) {
  return trajectory_graph(field, m, field.u());
}

namespace {

std::vector<std::int64_t> graph_bfs(const TrajectoryGraph& g, std::size_t from) {
  std::vector<std::int64_t> dist(g.size(), -1);
  std::vector<std::uint32_t> queue{static_cast<std::uint32_t>(from)};
  dist[from] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const auto a = queue[head];
    for (auto b : g.adjacency[a])
      if (dist[b] < 0) {
        dist[b] = dist[a] + 1;
        queue.push_back(b);
      }
  }
  return dist;
}

}  // namespace

std::optional<std::int64_t> switch_distance(const TrajectoryGraph& graph, std::size_t i, std::size_t j) {
  if (i >= graph.size() || j >= graph.size()) throw Error(ErrorCode::OutOfRange, "node out of range");
  const auto d = graph_bfs(graph, i)[j];
  if (d < 0) return std::nullopt;
  return d;
}

std::optional<std::int64_t> max_switch(const TrajectoryGraph& graph) {
  std::int64_t best = 0;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const auto dist = graph_bfs(graph, i);
    for (auto v : dist) {
      if (v < 0) return std::nullopt;
      best = std::max(best, v);
    }
  }
  return best;
}

std::int64_t beta(int d, double h) {
  if (d < 3) throw Error(ErrorCode::OutOfRange, "beta needs d >= 3");
  if (!(h >= 0) || h >= 2.0 / d) throw Error(ErrorCode::OutOfRange, "beta needs 0 <= h < 2/d");
  const double head = d * h / 2;
  const double coef = d - 3 + h - head;
  const double ratio = 1.0 - 2.0 / d;
  double power = 1.0;
  for (std::int64_t k = 1;; ++k, power *= ratio)
    if (head + coef * power < 1.0) return k;
}

double a_seq(int d, double h, std::int64_t n) {
  if (d < 3) throw Error(ErrorCode::OutOfRange, "a_n needs d >= 3");
  if (n < 1) throw Error(ErrorCode::OutOfRange, "a_n needs n >= 1");
  double a = 1.0 - h;
  for (std::int64_t k = 1; k < n; ++k) a = (a + 2.0) * (1.0 - 2.0 / d) - h;
  return a;
}

double a_closed(int d, double h, std::int64_t n) {
  if (d < 3) throw Error(ErrorCode::OutOfRange, "a_n needs d >= 3");
  if (n < 1) throw Error(ErrorCode::OutOfRange, "a_n needs n >= 1");
  return d - 2 - d * h / 2 - (d - 3 + h - d * h / 2) * std::pow(1.0 - 2.0 / d, static_cast<double>(n - 1));
}

std::vector<std::int32_t> torus_bfs(const std::vector<std::uint8_t>& occupied, int d, Coord side,
                                    std::uint64_t source) {
  std::uint64_t size = 1;
  std::vector<std::uint64_t> stride(static_cast<std::size_t>(d));
  for (int i = d - 1; i >= 0; --i) {
    stride[static_cast<std::size_t>(i)] = size;
    size *= static_cast<std::uint64_t>(side);
  }
  if (occupied.size() != size) throw Error(ErrorCode::OutOfRange, "occupancy does not match the torus size");
  if (!occupied[source]) throw Error(ErrorCode::NotInSet, "torus source is not occupied");
  std::vector<std::int32_t> dist(size, -1);
  std::vector<std::uint64_t> queue{source};
  dist[source] = 0;
  const auto n = static_cast<std::uint64_t>(side);
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const std::uint64_t c = queue[head];
    for (std::size_t i = 0; i < stride.size(); ++i) {
      const std::uint64_t s = stride[i];
      const std::uint64_t coord = (c / s) % n;
      const std::uint64_t up = coord + 1 == n ? c - (n - 1) * s : c + s;
      const std::uint64_t down = coord == 0 ? c + (n - 1) * s : c - s;
      for (const auto nb : {up, down})
        if (dist[nb] < 0 && occupied[nb]) {
          dist[nb] = dist[c] + 1;
          queue.push_back(nb);
        }
    }
  }
  return dist;
}

}  // namespace interlace
