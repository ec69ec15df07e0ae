#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "interlace/lattice.hpp"

namespace interlace {

/// e^{-s} I_k(s) for k = 0..max_order (modified Bessel functions, scaled).
std::vector<double> scaled_bessel_i(int max_order, double s);

/// Canonical form of a displacement under signed coordinate permutations:
/// absolute values sorted ascending.
Point canonical_displacement(const Point& v);

enum class GreenMethod : std::uint32_t { Quadrature = 1, DynamicProgramming = 2 };

/// g(0, x) for the simple random walk on Z^d, indexed by canonical displacement.
/// Values come from the Bessel-product integral
///   g(0,x) = int_0^inf prod_i e^{-t/d} I_{x_i}(t/d) dt
/// evaluated with a double-exponential rule on a shared node set; the error
/// estimate is the difference against the rule with every other node.
class GreenTable {
 public:
  explicit GreenTable(int dim, double tol = 1e-10);

  int dim() const noexcept { return d_; }
  double tol() const noexcept { return tol_; }
  GreenMethod method() const noexcept { return GreenMethod::Quadrature; }
  std::size_t size() const noexcept { return values_.size(); }
  double max_error_estimate() const noexcept { return max_error_; }

  std::uint64_t key(const Point& displacement) const;
  Point unkey(std::uint64_t key) const;

  /// Computes all missing canonical displacements. Throws QuadBudget if the
  /// error estimate of any new entry exceeds tol.
  void ensure(const std::vector<Point>& displacements);
  /// Every displacement v with |v_i| <= extents[i] (up to permutation).
  void ensure_extents(const std::vector<Coord>& extents);

  bool contains(const Point& displacement) const;
  /// g(0, v); throws OutOfRange when v was never ensured.
  double operator()(const Point& displacement) const;
  double between(const Point& x, const Point& y) const { return (*this)(y - x); }
  /// g(0, v), computing it first if needed.
  double get(const Point& displacement);

  /// Binary cache keyed by (d, method, tol).
  void save(const std::string& path) const;
  /// Merges entries of a cache file with matching (d, method, tol); returns false
  /// when the file is absent or keyed differently.
  bool load(const std::string& path);

  const std::unordered_map<std::uint64_t, double>& entries() const noexcept { return values_; }

 private:
  void compute(const std::vector<std::uint64_t>& keys);

  int d_;
  double tol_;
  int bits_;
  double max_error_ = 0.0;
  std::unordered_map<std::uint64_t, double> values_;
};

/// Single Green value to absolute tolerance `tol`, refining the step until the
/// estimate stabilises. Throws QuadBudget if that never happens.
double green_inf(const Point& x, double tol = 1e-10);

/// Dense view of a GreenTable over displacements |v_i| <= extents[i]; the hot
/// lookup path for assembling Green matrices.
class DenseGreen {
 public:
  DenseGreen(GreenTable& table, const std::vector<Coord>& extents);
  double operator()(const Point& x, const Point& y) const noexcept {
    std::size_t idx = 0;
    for (int i = 0; i < d_; ++i) {
      const Coord v = x[i] > y[i] ? x[i] - y[i] : y[i] - x[i];
      idx += static_cast<std::size_t>(v) * stride_[i];
    }
    return values_[idx];
  }

 private:
  int d_;
  std::array<std::size_t, kMaxDim> stride_{};
  std::vector<double> values_;
};

/// P_0[X_k = v] for k = 0..n via the coordinate split: the axis counts are
/// multinomial and, given them, each coordinate is an independent 1-d walk.
std::vector<double> transition_probabilities(const Point& v, std::int64_t n);

/// g(x, y; n) = sum_{k<=n} P_x[X_k = y]. Throws DpBudget for n > max_stopped_horizon().
double green_stopped(const Point& x, const Point& y, std::int64_t n);
std::int64_t max_stopped_horizon() noexcept;

struct GreenExtrapolation {
  double value = 0;
  double error_estimate = 0;
  double partial_sum = 0;
};

/// g(0, v) from the stopped sum at horizon n plus the local-CLT tail beyond n.
GreenExtrapolation green_extrapolated(const Point& v, std::int64_t n);

}  // namespace interlace
