#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "interlace/domain.hpp"
#include "interlace/green.hpp"

namespace interlace {

struct EquilibriumOptions {
  /// Solve on the internal boundary only; the interior carries no mass since a
  /// walk started there must cross the boundary before escaping.
  bool boundary_only = true;
  /// Reduce by the signed coordinate permutations that map the support onto itself.
  bool use_symmetry = true;
  std::size_t max_unknowns = 6000;
  double residual_limit = 1e-6;
};

/// e_A and cap(A). `sites` is the support on which the system was solved; the
/// mass of every other site of A is zero.
struct EquilibriumSolution {
  int dim = 0;
  std::vector<Point> sites;
  std::vector<double> mass;
  double cap = 0;
  double residual = 0;
  std::size_t set_size = 0;
  std::size_t orbit_count = 0;
  std::size_t symmetry_order = 1;

  /// e_A(x); zero off the solved support.
  double mass_at(const Point& x) const;
};

/// Solves sum_{z} g(x,z) e(z) = 1 for x in the support. Throws SolveFailed when
/// the system is singular, too large or misses the residual limit, and
/// NegativeMass when an entry is negative beyond rounding.
EquilibriumSolution equilibrium(const Domain& set, GreenTable& green, const EquilibriumOptions& options = {});
EquilibriumSolution equilibrium(const std::vector<Point>& sites, GreenTable& green,
                                const EquilibriumOptions& options = {});

/// Signed coordinate permutations (in doubled coordinates about `doubled_center`)
/// mapping `sites` onto itself, each as (perm, signs).
struct SignedPermutation {
  std::array<int, kMaxDim> perm{};
  std::array<int, kMaxDim> sign{};
};
std::vector<SignedPermutation> symmetries(const std::vector<Point>& sites, const Point& doubled_center);

/// Slice masses k -> sum of e over support sites with first coordinate k.
std::map<Coord, double> slice_masses(const EquilibriumSolution& eq);

/// Equilibrium mass of the sausage G_a^(n) on the hyperplane {x_1 = k}.
double equilibrium_slice_mass(Coord n, double a, Coord k, GreenTable& green);

}  // namespace interlace
