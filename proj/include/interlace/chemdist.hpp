#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "interlace/domain.hpp"
#include "interlace/sampler.hpp"

namespace interlace {

/// Occupied sites of one level on a dense grid whose outermost layer is always
/// empty, so neighbour offsets never leave the array.
class SiteGrid {
 public:
  SiteGrid() = default;

  /// Sites of `field` at level u. A site is an edge site when one of its
  /// neighbours lies outside the enlarged window.
  static SiteGrid from_field(const OccupancyField& field, double u);
  /// Arbitrary sites; edge sites are those with a neighbour outside `region`
  /// (no edge sites when region is empty).
  static SiteGrid from_sites(const std::vector<Point>& sites, const Domain& region = {});

  const BoxIndexer& indexer() const noexcept { return indexer_; }
  int dim() const noexcept { return indexer_.dim(); }
  bool occupied(std::uint64_t cell) const noexcept { return occ_[cell] != 0; }
  bool occupied(const Point& p) const noexcept { return indexer_.inside(p) && occ_[indexer_.index(p)] != 0; }
  bool edge(std::uint64_t cell) const noexcept { return edge_[cell] != 0; }
  std::size_t count() const noexcept { return count_; }
  std::vector<Point> sites() const;

 private:
  BoxIndexer indexer_;
  std::vector<std::uint8_t> occ_, edge_;
  std::size_t count_ = 0;
  void finish(const Domain* region);
};

/// Chemical distances from one source; -1 marks sites not reached.
struct DistanceMap {
  Point source;
  BoxIndexer indexer;
  std::vector<std::int32_t> dist;
  /// The search reached an edge site of the grid.
  bool frontier_truncated = false;

  std::optional<std::int64_t> at(const Point& p) const;
  std::vector<Point> reached() const;
};

/// Breadth-first search through occupied sites, optionally stopped after
/// radius `max_radius`. Throws NotInSet when the source is vacant.
DistanceMap bfs(const SiteGrid& grid, const Point& source, std::optional<std::int64_t> max_radius = std::nullopt);

struct DistanceResult {
  std::optional<std::int64_t> rho;  // nullopt: unreachable within the grid
  /// Some geodesic touches an edge site (or, when unreachable, the search did),
  /// so a path leaving the window might be shorter.
  bool flagged = false;
};

/// rho(x, y) inside the grid. Throws NotInSet when x or y is vacant.
DistanceResult bfs_distance(const SiteGrid& grid, const Point& x, const Point& y);

/// The chemical ball {y : rho(x, y) <= r}.
std::vector<Point> ball(const SiteGrid& grid, const Point& x, std::int64_t r);

struct RayPoint {
  std::int64_t zeta;
  Point psi;
};

/// zeta_0 = max{m <= 0 : y + m x occupied} and the next `count` occupied
/// multiples above it, with psi_k = y + zeta_k x. Searches at most k_max steps
/// in either direction: RayEmpty when no zeta_k is found in range,
/// OutOfRange when the scan leaves the grid first.
std::vector<RayPoint> ray_scan(const SiteGrid& grid, const Point& y, const Point& x, std::int64_t k_max,
                               std::size_t count = 1);

/// Occupied site closest to p in l1 norm; ties broken by lexicographic order
/// of the displacement, which is translation invariant.
std::optional<Point> nearest_occupied(const SiteGrid& grid, const Point& p, std::int64_t max_radius);

/// Trajectories as nodes, joined when their length-m prefixes share a site.
struct TrajectoryGraph {
  std::int64_t m = 0;
  std::vector<std::uint64_t> nodes;                     // trajectory indices
  std::vector<std::vector<std::uint32_t>> adjacency;    // positions in `nodes`
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::vector<Point> witness;                           // one shared site per edge
  /// A saturated site list was involved, so edges may be missing.
  bool saturated = false;

  std::size_t size() const noexcept { return nodes.size(); }
  std::size_t components() const;
};

/// Graph of the trajectories with label <= u. Uses the stored paths when the
/// field kept them (prefix sites anywhere); otherwise the visit lists, which
/// only see the enlarged window.
TrajectoryGraph trajectory_graph(const OccupancyField& field, std::int64_t m, double u);
TrajectoryGraph trajectory_graph(const OccupancyField& field, std::int64_t m);
/// The subgraph on the first `count` nodes. Nodes are in label order, so this is
/// the graph of a lower level without rebuilding it.
TrajectoryGraph prefix_subgraph(const TrajectoryGraph& graph, std::size_t count);

/// Graph distance between positions i and j; nullopt when disconnected.
std::optional<std::int64_t> switch_distance(const TrajectoryGraph& graph, std::size_t i, std::size_t j);

/// Largest switch distance over all pairs; nullopt when disconnected.
std::optional<std::int64_t> max_switch(const TrajectoryGraph& graph);

/// min{k >= 1 : dh/2 + (d - 3 + h - dh/2)(1 - 2/d)^(k-1) < 1}.
std::int64_t beta(int d, double h);

/// a_1 = 1 - h, a_{n+1} = (a_n + 2)(1 - 2/d) - h.
double a_seq(int d, double h, std::int64_t n);
double a_closed(int d, double h, std::int64_t n);

/// Distances on the torus (Z/NZ)^d over the occupied cells (row-major,
/// last axis fastest); -1 marks unreached cells.
std::vector<std::int32_t> torus_bfs(const std::vector<std::uint8_t>& occupied, int d, Coord side,
                                    std::uint64_t source);

}  // namespace interlace
