#include "interlace/equilibrium.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "interlace/error.hpp"

namespace interlace {

namespace {

// Position lookup for a site set over its bounding box.
class SiteIndex {
 public:
  explicit SiteIndex(const std::vector<Point>& sites) {
    const int d = sites.front().dim();
    Box bbox{sites.front(), sites.front()};
    for (const auto& s : sites)
      for (int i = 0; i < d; ++i) {
        bbox.lo[i] = std::min(bbox.lo[i], s[i]);
        bbox.hi[i] = std::max(bbox.hi[i], s[i]);
      }
    indexer_ = BoxIndexer(bbox);
    pos_.assign(indexer_.size(), -1);
    for (std::size_t i = 0; i < sites.size(); ++i) pos_[indexer_.index(sites[i])] = static_cast<std::int64_t>(i);
  }
  const Box& box() const noexcept { return indexer_.box(); }
  std::int64_t find(const Point& p) const noexcept { return indexer_.inside(p) ? pos_[indexer_.index(p)] : -1; }

 private:
  BoxIndexer indexer_;
  std::vector<std::int64_t> pos_;
};

// Image of x under g, or nullopt when g moves x off the half-integer grid.
std::optional<Point> apply(const SignedPermutation& g, const Point& x, const Point& c2) {
  const int d = x.dim();
  Point y(d);
  for (int i = 0; i < d; ++i) {
    const Coord src = 2 * x[g.perm[i]] - c2[g.perm[i]];
    const Coord doubled = g.sign[i] * src + c2[i];
    if (doubled & 1) return std::nullopt;
    y[i] = doubled / 2;
  }
  return y;
}

}  // namespace

std::vector<SignedPermutation> symmetries(const std::vector<Point>& sites, const Point& doubled_center) {
  if (sites.empty()) throw Error(ErrorCode::EmptySet, "symmetries of an empty set");
  const int d = sites.front().dim();
  const SiteIndex index(sites);
  std::vector<SignedPermutation> out;

  std::array<int, kMaxDim> perm{};
  std::iota(perm.begin(), perm.begin() + d, 0);
  // Full signed permutation groups are affordable up to d = 6; beyond that only
  // reflections are tried.
  const bool permute = d <= 6;
  do {
    for (unsigned mask = 0; mask < (1u << d); ++mask) {
      SignedPermutation g;
      g.perm = perm;
      for (int i = 0; i < d; ++i) g.sign[i] = (mask >> i) & 1 ? -1 : 1;
      bool ok = true;
      for (const auto& x : sites) {
        const auto y = apply(g, x, doubled_center);
        if (!y || index.find(*y) < 0) {
          ok = false;
          break;
        }
      }
      if (ok) out.push_back(g);
    }
  } while (permute && std::next_permutation(perm.begin(), perm.begin() + d));
  return out;
}

double EquilibriumSolution::mass_at(const Point& x) const {
  const auto it = std::lower_bound(sites.begin(), sites.end(), x);
  if (it == sites.end() || *it != x) return 0.0;
  return mass[static_cast<std::size_t>(it - sites.begin())];
}

EquilibriumSolution equilibrium(const Domain& set, GreenTable& green, const EquilibriumOptions& options) {
  if (set.boxes().empty()) throw Error(ErrorCode::EmptySet, "equilibrium of an empty set");
  if (set.dim() != green.dim()) throw Error(ErrorCode::OutOfRange, "Green table dimension mismatch");
  const int d = set.dim();

  EquilibriumSolution sol;
  sol.dim = d;
  sol.set_size = static_cast<std::size_t>(set.volume());
  std::vector<Point> support = options.boundary_only ? set.internal_boundary() : set.sites();
  std::sort(support.begin(), support.end());
  const std::size_t n = support.size();

  // Orbits of the support under its symmetry group.
  std::vector<std::size_t> orbit_of(n, SIZE_MAX);
  std::vector<std::size_t> reps;
  const SiteIndex index(support);
  const Point c2 = index.box().lo + index.box().hi;
  std::vector<SignedPermutation> group;
  if (options.use_symmetry) group = symmetries(support, c2);
  sol.symmetry_order = std::max<std::size_t>(group.size(), 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (orbit_of[i] != SIZE_MAX) continue;
    const std::size_t id = reps.size();
    reps.push_back(i);
    orbit_of[i] = id;
    for (const auto& g : group) {
      const auto j = static_cast<std::size_t>(index.find(*apply(g, support[i], c2)));
      if (orbit_of[j] == SIZE_MAX) orbit_of[j] = id;
    }
  }
  const std::size_t m = reps.size();
  sol.orbit_count = m;
  if (m > options.max_unknowns)
    throw Error(ErrorCode::SolveFailed, std::to_string(m) + " unknowns exceed the solver budget");

  std::vector<Coord> extents(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) extents[static_cast<std::size_t>(i)] = index.box().hi[i] - index.box().lo[i];
  const DenseGreen g(green, extents);

  // M[a][b] = sum over z in orbit b of g(rep_a, z): the full system restricted
  // to orbit-constant vectors, exact because the group preserves g.
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t a = 0; a < m; ++a) {
    const Point& x = support[reps[a]];
    for (std::size_t z = 0; z < n; ++z)
      M(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(orbit_of[z])) += g(x, support[z]);
  }

  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
  if (!(lu.rcond() > 1e-13)) throw Error(ErrorCode::SolveFailed, "Green matrix is numerically singular");
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(m));
  Eigen::VectorXd e = lu.solve(ones);
  auto residual_of = [&](const Eigen::VectorXd& v, Eigen::VectorXd& r) {
    double worst = 0;
    for (Eigen::Index a = 0; a < M.rows(); ++a) {
      long double acc = 1.0L;
      for (Eigen::Index b = 0; b < M.cols(); ++b) acc -= static_cast<long double>(M(a, b)) * v(b);
      r(a) = static_cast<double>(acc);
      worst = std::max(worst, std::abs(r(a)));
    }
    return worst;
  };
  Eigen::VectorXd r(static_cast<Eigen::Index>(m));
  double residual = residual_of(e, r);
  for (int iter = 0; iter < 3 && residual > 0; ++iter) {
    const Eigen::VectorXd candidate = e + lu.solve(r);
    Eigen::VectorXd rc(static_cast<Eigen::Index>(m));
    const double next = residual_of(candidate, rc);
    if (next >= residual) break;
    e = candidate;
    r = rc;
    residual = next;
  }
  if (!(residual <= options.residual_limit))
    throw Error(ErrorCode::SolveFailed, "residual " + std::to_string(residual) + " above limit");
  sol.residual = residual;

  // Entries that are analytically zero come out as rounding noise of either sign;
  // the floor keeps that noise from tripping the check when the residual is 0.
  const double scale = e.cwiseAbs().maxCoeff();
  const double neg_tol = 10.0 * std::max(residual, 1e-14 * scale);
  sol.sites = std::move(support);
  sol.mass.resize(n);
  for (std::size_t z = 0; z < n; ++z) {
    double v = e(static_cast<Eigen::Index>(orbit_of[z]));
    if (v < -neg_tol)
      throw Error(ErrorCode::NegativeMass, "equilibrium mass " + std::to_string(v) + " at " + sol.sites[z].str());
    if (v < 0) v = 0;
    sol.mass[z] = v;
    sol.cap += v;
  }
  return sol;
}

EquilibriumSolution equilibrium(const std::vector<Point>& sites, GreenTable& green,
                                const EquilibriumOptions& options) {
  if (sites.empty()) throw Error(ErrorCode::EmptySet, "equilibrium of an empty set");
  std::vector<Point> unique = sites;
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  return equilibrium(Domain::from_sites(unique), green, options);
}

std::map<Coord, double> slice_masses(const EquilibriumSolution& eq) {
  std::map<Coord, double> out;
  for (std::size_t i = 0; i < eq.sites.size(); ++i) out[eq.sites[i][0]] += eq.mass[i];
  return out;
}

double equilibrium_slice_mass(Coord n, double a, Coord k, GreenTable& green) {
  if (!(a > 0 && a < 1.0 / 3)) throw Error(ErrorCode::OutOfRange, "sausage exponent must lie in (0, 1/3)");
  const Coord lo = -sausage_radius(n, a) + 1;
  const auto hi = static_cast<Coord>(std::floor(static_cast<double>(n) + std::pow(static_cast<double>(n), a) + 1e-12)) - 1;
  if (k < lo || k > hi)
    throw Error(ErrorCode::OutOfRange, "slice " + std::to_string(k) + " outside [" + std::to_string(lo) + ", " +
                                           std::to_string(hi) + "]");
  const auto eq = equilibrium(Domain::sausage(green.dim(), n, a), green);
  const auto slices = slice_masses(eq);
  const auto it = slices.find(k);
  return it == slices.end() ? 0.0 : it->second;
}

}  // namespace interlace
