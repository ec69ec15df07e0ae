#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <unordered_set>
#include <vector>

#include "interlace/domain.hpp"
#include "interlace/lattice.hpp"
#include "interlace/rng.hpp"

namespace interlace {

/// Direction codes: 2*axis for +e_axis, 2*axis+1 for -e_axis.
inline void apply_step(Point& p, std::uint8_t code) noexcept {
  p[code >> 1] += (code & 1) ? -1 : 1;
}

inline std::uint8_t draw_step(RngStream& rng, int dim) noexcept {
  return static_cast<std::uint8_t>(rng.below(static_cast<std::uint32_t>(2 * dim)));
}

struct WalkState {
  Point position;
  std::int64_t time = 0;
  StreamId stream;
};

enum class StopKind { Entrance, Hitting, Exit, TimeCap, KillRadius };

const char* stop_kind_name(StopKind kind) noexcept;

/// One of H_A, H~_A, T_A, a time cap, or exit from a kill ball; the first two
/// need a cap or kill ball because a transient walk may never reach A.
class StopCondition {
 public:
  static StopCondition entrance(const Domain& set);
  static StopCondition hitting(const Domain& set);
  static StopCondition exit(const Domain& set);
  static StopCondition time_cap(std::int64_t steps);
  static StopCondition kill_ball(const Point& center, Coord radius);

  StopCondition& with_time_cap(std::int64_t steps);
  StopCondition& with_kill_ball(const Point& center, Coord radius);

  StopKind kind() const noexcept { return kind_; }
  const std::shared_ptr<const DomainMask>& set() const noexcept { return set_; }
  std::optional<std::int64_t> cap() const noexcept { return cap_; }
  std::optional<Coord> kill_radius() const noexcept { return kill_radius_; }
  const Point& kill_center() const noexcept { return kill_center_; }

 private:
  StopKind kind_ = StopKind::TimeCap;
  std::shared_ptr<const DomainMask> set_;
  std::optional<std::int64_t> cap_;
  std::optional<Coord> kill_radius_;
  Point kill_center_;
};

/// A walk prefix stored as a start plus one direction byte per step.
struct StoppedPath {
  Point start;
  std::vector<std::uint8_t> steps;
  StopKind stop_kind = StopKind::TimeCap;
  std::int64_t stop_time = 0;

  std::int64_t length() const noexcept { return static_cast<std::int64_t>(steps.size()); }
  Point end() const;
  Point site_at(std::int64_t t) const;
  std::vector<Point> sites() const;

  friend bool operator==(const StoppedPath&, const StoppedPath&) = default;
};

StoppedPath run_until(const WalkState& state, const StopCondition& condition);
StoppedPath run_until(const Point& start, RngStream& rng, const StopCondition& condition);

using SiteSet = std::unordered_set<Point, PointHash>;

/// Distinct sites among the first m+1 positions. Throws RangeOverrun past the path.
SiteSet range(const StoppedPath& path, std::int64_t m);

/// Independent length-`steps` walk from `start` on stream `id`.
StoppedPath fixed_length_walk(const Point& start, std::int64_t steps, StreamId id);

struct RangeLemmaSummary {
  int replicas = 0;
  double alpha = 0;
  std::int64_t n = 0;
  double diam_lower = 0;    // n^(1-alpha)
  double diam_upper = 0;    // n^(1+alpha)
  double volume_lower = 0;  // n^(2-2alpha)
  int held = 0;             // replicas where all three bounds hold
  std::vector<std::int64_t> diameters;
  std::vector<std::int64_t> volumes;

  double fraction() const noexcept { return replicas ? static_cast<double>(held) / replicas : 0.0; }
};

/// Single-walk range statistics of R(n^2) against the diameter/volume bounds.
RangeLemmaSummary range_lemma_stats(int dim, std::int64_t n, double alpha, int replicas,
                                    std::uint64_t seed);

struct MultiRangeSummary {
  std::int64_t k = 0;
  std::int64_t n = 0;
  double alpha3 = 0;
  double threshold = 0;          // k n^(2 - alpha3)
  bool ensemble_size_in_regime = false;  // n^h <= k <= n^(d-2) for some h in (0, d-2)
  std::vector<std::int64_t> union_sizes;
  std::vector<std::int64_t> summed_sizes;     // sum_j |R_j(n^2)|
  std::vector<bool> pairwise_disjoint;
  int held = 0;

  double fraction() const noexcept {
    return union_sizes.empty() ? 0.0 : static_cast<double>(held) / union_sizes.size();
  }
};

/// |U_j R_j(n^2)| over k independent walks. A single start is shared by all walks.
MultiRangeSummary multi_range_stats(std::int64_t k, std::int64_t n, const std::vector<Point>& starts,
                                    int replicas, std::uint64_t seed, double alpha3);

}  // namespace interlace
