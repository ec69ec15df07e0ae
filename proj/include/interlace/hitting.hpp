#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "interlace/equilibrium.hpp"
#include "interlace/green.hpp"
#include "interlace/lattice.hpp"

namespace interlace {

/// Time horizon of a hitting probability; nullopt means n = infinity.
using Horizon = std::optional<std::int64_t>;

enum class BoundSource { Sandwich, DiamBound, VolumeBound };

struct HitBounds {
  double lower = 0;
  double upper = 1;
  BoundSource source = BoundSource::Sandwich;
};

struct HitProbability {
  double value = 0;
  /// Absolute error bound from Green tolerance and solve residual (n = infinity)
  /// or floating rounding (finite n).
  double error_bound = 0;
};

/// q_x(A;n) = P_x[H_A <= n]. Finite n: forward recursion of the walk killed on
/// A inside B(x, n). Infinite n: the last-exit identity q_x(A) = sum_z g(x,z) e_A(z).
/// Throws ChainBudget when the finite-n box exceeds the memory budget.
HitProbability hit_prob_exact(const Point& x, const std::vector<Point>& set, Horizon n, GreenTable& green);

/// g(x, A; n), with n = infinity read from the table.
double green_to_set(const Point& x, const std::vector<Point>& set, Horizon n, GreenTable& green);

/// The bracket g(x,A;n) / max_y g(y,A;n) <= q_x(A;n) <= g(x,A) / min_y g(y,A).
/// Returns (1, 1) for x in A.
HitBounds hit_sandwich(const Point& x, const std::vector<Point>& set, Horizon n, GreenTable& green);

struct ShapeBound {
  double bound = 0;  // constant times shape
  double shape = 0;  // the constant-free factor
};

/// C3 diam(A) / l^{d-2} (divided by ln diam(A) in d = 3). Needs A connected
/// (NotConnected) with at least two sites and n >= l(x,A)^2 (OutOfRange).
ShapeBound hit_lower_diam(const Point& x, const std::vector<Point>& set, Horizon n, double c3 = 1.0);

/// C4 |A|^{1-2/d} / l^{d-2}. Needs at least two sites and n >= l(x,A)^2.
ShapeBound hit_lower_volume(const Point& x, const std::vector<Point>& set, Horizon n, double c4 = 1.0);

/// Nearest-neighbour connectivity of a finite site set.
bool is_connected(const std::vector<Point>& set);

/// max of g(0, v) over ||v||_inf >= r, which is attained at r e_1.
double green_sup_tail(GreenTable& green, Coord r);

struct CapacityEstimate {
  double estimate = 0;
  double std_error = 0;
  double bias_bound = 0;
  double kill_fraction = 0;
  std::int64_t walks = 0;
};

/// Monte Carlo cap(A) = sum_z P_z[H~_A = infinity]. Walks are killed on leaving
/// B(c, kill_radius) around the centre of A; a killed walk scores 1 - m(y) with
/// m(y) the midpoint of the sandwich bracket at its exit point y, so the
/// remaining bias is at most the estimated kill mass times the half-gap bound.
CapacityEstimate capacity_mc(const std::vector<Point>& set, std::int64_t replicas, Coord kill_radius,
                             std::uint64_t seed, GreenTable& green);

}  // namespace interlace
