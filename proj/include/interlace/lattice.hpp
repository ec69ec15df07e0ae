#pragma once

#include <array>
#include <cassert>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace interlace {

using Coord = std::int64_t;

inline constexpr int kMaxDim = 8;
inline constexpr Coord kCoordLimit = Coord{1} << 40;

/// A site of Z^d, 3 <= d <= kMaxDim. Stored inline so points are cheap values.
class Point {
 public:
  Point() = default;
  explicit Point(int dim);
  Point(std::initializer_list<Coord> coords);
  explicit Point(const std::vector<Coord>& coords);

  static Point unit(int dim, int axis, Coord scale = 1);

  int dim() const noexcept { return d_; }
  Coord operator[](int i) const noexcept { return c_[i]; }
  Coord& operator[](int i) noexcept { return c_[i]; }

  Point& operator+=(const Point& o) noexcept {
    for (int i = 0; i < d_; ++i) {
      c_[i] += o.c_[i];
      assert(c_[i] <= kCoordLimit && c_[i] >= -kCoordLimit);
    }
    return *this;
  }
  Point& operator-=(const Point& o) noexcept {
    for (int i = 0; i < d_; ++i) {
      c_[i] -= o.c_[i];
      assert(c_[i] <= kCoordLimit && c_[i] >= -kCoordLimit);
    }
    return *this;
  }
  friend Point operator+(Point a, const Point& b) noexcept { return a += b; }
  friend Point operator-(Point a, const Point& b) noexcept { return a -= b; }
  friend Point operator*(Coord k, Point a) noexcept {
    for (int i = 0; i < a.d_; ++i) a.c_[i] *= k;
    return a;
  }
  Point operator-() const noexcept { return Coord{-1} * *this; }

  friend bool operator==(const Point& a, const Point& b) noexcept {
    if (a.d_ != b.d_) return false;
    for (int i = 0; i < a.d_; ++i)
      if (a.c_[i] != b.c_[i]) return false;
    return true;
  }
  friend std::strong_ordering operator<=>(const Point& a, const Point& b) noexcept {
    if (auto c = a.d_ <=> b.d_; c != 0) return c;
    for (int i = 0; i < a.d_; ++i)
      if (auto c = a.c_[i] <=> b.c_[i]; c != 0) return c;
    return std::strong_ordering::equal;
  }

  std::vector<Coord> coords() const { return {c_.begin(), c_.begin() + d_}; }
  std::string str() const;

 private:
  std::array<Coord, kMaxDim> c_{};
  int d_ = 0;
};

struct PointHash {
  std::size_t operator()(const Point& p) const noexcept;
};

/// Parses "x1,x2,...,xd".
Point parse_point(const std::string& text);

enum class Norm { L1, L2, Linf };

double norm(const Point& x, Norm kind);
Coord norm_l1(const Point& x) noexcept;
Coord norm_linf(const Point& x) noexcept;

/// l(x, A) = max over y in A of ||x - y||_inf. Throws EmptySet on empty A.
Coord max_distance(const Point& x, const std::vector<Point>& sites);

/// Diameter of a site set in the sup norm (0 for a singleton).
Coord diameter_linf(const std::vector<Point>& sites);

/// Coordinatewise reduction into [0, N).
Point torus_wrap(const Point& x, Coord side);

/// Graph distance on (Z/NZ)^d.
Coord torus_distance(const Point& x, const Point& y, Coord side);

}  // namespace interlace
