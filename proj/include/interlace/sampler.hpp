#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "interlace/domain.hpp"
#include "interlace/equilibrium.hpp"
#include "interlace/green.hpp"
#include "interlace/rng.hpp"
#include "interlace/walk.hpp"

namespace interlace {

/// Poisson(lambda): sequential inversion below 10, Hormann's PTRS above.
std::uint64_t sample_poisson(double lambda, RngStream& rng);

/// Poisson(u cap(A)) trajectory count.
std::uint64_t sample_count(double u, double cap, RngStream& rng);

/// Counts at increasing levels u_1 < u_2 < ... built from independent
/// Poisson increments, so count(u_j) - count(u_i) ~ Poisson((u_j - u_i) cap).
std::vector<std::uint64_t> nested_counts(const std::vector<double>& levels, double cap, RngStream& rng);

/// Vose alias table: O(1) categorical draws.
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(const std::vector<double>& weights);
  std::size_t size() const noexcept { return prob_.size(); }
  std::size_t sample(RngStream& rng) const noexcept;

 private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

/// Start sites drawn from e_A / cap(A).
class StartSampler {
 public:
  explicit StartSampler(const EquilibriumSolution& eq);
  const Point& sample(RngStream& rng) const noexcept { return sites_[table_.sample(rng)]; }

 private:
  std::vector<Point> sites_;
  AliasTable table_;
};

Point sample_start(const EquilibriumSolution& eq, RngStream& rng);

/// Stream slot reserved for the label arrival process of a replica.
inline constexpr std::uint64_t kLabelStream = ~std::uint64_t{0};

/// Labels of the trajectories of one replica up to level u_max: the arrival
/// times of a rate-cap(A) Poisson process, so that for every u the number of
/// labels <= u is Poisson(u cap(A)) and levels are nested.
std::vector<double> trajectory_labels(double u_max, double cap, std::uint64_t seed, std::uint64_t replica);

struct Trajectory {
  std::uint64_t index = 0;  // rank in label order
  double label = 0;
  Point start;
  StopKind kill = StopKind::KillRadius;
  std::int64_t length = 0;
  std::vector<std::uint8_t> steps;  // kept only when paths are requested
};

struct FieldOptions {
  double lambda = 0.5;
  /// Per-trajectory bound on the probability of returning to the sampled set
  /// after the kill; sets the kill radius.
  double kill_eps = 0.05;
  Coord max_kill_radius = 4096;
  /// Optional cap on trajectory length (prefix sampling).
  std::optional<std::int64_t> time_cap;
  bool keep_paths = false;
};

struct Visit {
  std::uint32_t trajectory;
  std::int64_t time;  // first visit time of the site by the trajectory
};

/// Sites of the enlarged window visited by the trajectories of one replica,
/// each with the (label-ordered) trajectories visiting it.
class OccupancyField {
 public:
  static constexpr std::size_t kSiteListCap = 15;

  int dim() const noexcept { return indexer_.dim(); }
  double u() const noexcept { return u_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t replica() const noexcept { return replica_; }
  const Domain& window() const noexcept { return window_; }
  const Domain& enlarged() const noexcept { return enlarged_; }
  const BoxIndexer& indexer() const noexcept { return indexer_; }
  Coord kill_radius() const noexcept { return kill_radius_; }
  double kill_eps() const noexcept { return kill_eps_; }
  std::optional<std::int64_t> time_cap() const noexcept { return time_cap_; }
  /// Certified bound on the expected number of trajectories lost to the kill
  /// that would have returned to the sampled set.
  double bias_budget() const noexcept { return bias_budget_; }
  double capacity() const noexcept { return cap_; }

  const std::vector<Trajectory>& trajectories() const noexcept { return trajectories_; }
  /// Full step lists are stored for every trajectory.
  bool has_paths() const noexcept { return paths_; }
  /// Number of trajectories with label <= u.
  std::size_t count_at(double u) const noexcept;

  /// Visits recorded at a cell (sorted by trajectory, at most kSiteListCap).
  std::span<const Visit> visits(std::uint64_t cell) const noexcept {
    return {visits_.data() + offsets_[cell], visits_.data() + offsets_[cell + 1]};
  }
  std::span<const Visit> visits(const Point& p) const noexcept;
  bool saturated(std::uint64_t cell) const noexcept { return saturated_[cell] != 0; }
  bool occupied(const Point& p, double u) const noexcept;
  /// Occupied sites at level u, in cell order.
  std::vector<Point> sites(double u) const;
  std::size_t site_count(double u) const;
  /// (site, trajectory) pairs at level u, sorted.
  std::vector<std::pair<Point, std::uint64_t>> pairs(double u) const;

  /// Dense occupancy over the indexer box at level u (1 = occupied).
  std::vector<std::uint8_t> occupancy(double u) const;

  void save(const std::string& path) const;
  static OccupancyField load(const std::string& path);

  friend class FieldSampler;
  friend OccupancyField field_from_pairs(const Domain&, const std::vector<std::pair<Point, std::uint64_t>>&);

 private:
  double u_ = 0;
  std::uint64_t seed_ = 0, replica_ = 0;
  Domain window_, enlarged_;
  BoxIndexer indexer_;
  Coord kill_radius_ = 0;
  double kill_eps_ = 0;
  std::optional<std::int64_t> time_cap_;
  double bias_budget_ = 0;
  double cap_ = 0;
  bool paths_ = false;
  std::vector<Trajectory> trajectories_;
  std::vector<std::uint64_t> offsets_;
  std::vector<Visit> visits_;
  std::vector<std::uint8_t> saturated_;
  void build(std::vector<std::pair<std::uint64_t, Visit>>& entries);
};

/// A field holding exactly the given (site, trajectory) pairs, all at label 0;
/// sites outside `enlarged` are dropped. Used to load fields and in tests.
OccupancyField field_from_pairs(const Domain& enlarged, const std::vector<std::pair<Point, std::uint64_t>>& pairs);

/// Samples I^u restricted to the enlarged window (1 + lambda) W. Trajectories
/// start from the normalised equilibrium measure of the enlarged window and are
/// killed on leaving B(c, R), R the smallest radius at which the last-exit bound
/// cap * max g(y - z) on the return probability falls below kill_eps.
class FieldSampler {
 public:
  FieldSampler(const Domain& window, GreenTable& green, const FieldOptions& options = {});

  const Domain& window() const noexcept { return window_; }
  const Domain& enlarged() const noexcept { return enlarged_; }
  const EquilibriumSolution& equilibrium() const noexcept { return eq_; }
  Coord kill_radius() const noexcept { return kill_radius_; }
  const Point& kill_center() const noexcept { return center_; }
  double return_bound() const noexcept { return return_bound_; }
  const FieldOptions& options() const noexcept { return options_; }

  OccupancyField sample(double u, std::uint64_t seed, std::uint64_t replica) const;
  /// Starts only (no walks): labels and start sites of one replica.
  std::vector<std::pair<double, Point>> sample_starts(double u, std::uint64_t seed, std::uint64_t replica) const;

 private:
  Domain window_, enlarged_;
  FieldOptions options_;
  EquilibriumSolution eq_;
  StartSampler starts_;
  Point center_;
  Coord kill_radius_ = 0;
  double return_bound_ = 0;
};

OccupancyField sample_field(double u, const Domain& window, double lambda, double kill_eps, std::uint64_t seed,
                            GreenTable& green);

/// Smallest R >= r_min with cap * max_{||v||_inf >= R + 1 - rho} g(0, v) <= eps.
/// Throws KillBudget above r_max.
Coord kill_radius_for(double cap, Coord rho, double eps, GreenTable& green, Coord r_min, Coord r_max);

struct VacancyLevel {
  double u = 0;
  std::int64_t replicas = 0;
  std::int64_t vacant = 0;        // no trajectory hit A before its kill
  double frequency = 0;           // vacant / replicas
  double raw_bias = 0;            // bound on frequency - P[vacant]
  double corrected = 0;           // mean of prod_j (1 - q_{exit_j}(A)): unbiased
  double corrected_stderr = 0;
  double corrected_bias = 0;      // Green tolerance only
  double target = 0;              // exp(-u cap(A))
  double z = 0;                   // (corrected - target) / stderr
  std::vector<std::uint8_t> vacant_samples;  // per replica
  std::vector<double> corrected_samples;     // per replica
};

struct VacancyReport {
  double cap_set = 0;
  double cap_window = 0;
  Coord kill_radius = 0;
  std::vector<VacancyLevel> levels;
};

/// Checks P[A cap I^u = empty] = exp(-u cap(A)) by sampling the trajectories of
/// a window W containing A. One run serves all levels through label coupling.
VacancyReport vacancy_check(const std::vector<Point>& set, const std::vector<double>& levels, const Domain& window,
                            std::int64_t replicas, std::uint64_t seed, GreenTable& green,
                            std::optional<Coord> kill_radius = std::nullopt);

/// U_k = B(floor(k n^a) e_1, n^a) for k >= 0 with floor(k n^a) <= n.
std::vector<Domain> sausage_slices(int dim, Coord n, double a);

/// Number of trajectories (label <= u) starting in each slice U_k.
std::vector<std::int64_t> slice_start_counts(const std::vector<std::pair<double, Point>>& starts, double u,
                                             int dim, Coord n, double a);

struct KsResult {
  double statistic = 0;
  double critical = 0;  // 1% level, 1.628 / sqrt(n)
  bool pass = false;
};

/// Kolmogorov-Smirnov distance between integer samples and Poisson(lambda).
KsResult ks_poisson(const std::vector<std::uint64_t>& samples, double lambda);

}  // namespace interlace
