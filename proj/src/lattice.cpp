#include "interlace/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "interlace/error.hpp"

namespace interlace {

namespace {

void check_dim(int d) {
  if (d < 3 || d > kMaxDim)
    throw Error(ErrorCode::OutOfRange, "dimension must be in [3, " + std::to_string(kMaxDim) +
                                           "], got " + std::to_string(d));
}

void check_coord(Coord c) {
  if (c > kCoordLimit || c < -kCoordLimit)
    throw Error(ErrorCode::OutOfRange, "coordinate exceeds 2^40: " + std::to_string(c));
}

}  // namespace

Point::Point(int dim) : d_(dim) { check_dim(dim); }

Point::Point(std::initializer_list<Coord> coords) : d_(static_cast<int>(coords.size())) {
  check_dim(d_);
  std::copy(coords.begin(), coords.end(), c_.begin());
  for (int i = 0; i < d_; ++i) check_coord(c_[i]);
}

Point::Point(const std::vector<Coord>& coords) : d_(static_cast<int>(coords.size())) {
  check_dim(d_);
  std::copy(coords.begin(), coords.end(), c_.begin());
  for (int i = 0; i < d_; ++i) check_coord(c_[i]);
}

Point Point::unit(int dim, int axis, Coord scale) {
  Point p(dim);
  if (axis < 0 || axis >= dim) throw Error(ErrorCode::OutOfRange, "axis out of range");
  p[axis] = scale;
  return p;
}

std::string Point::str() const {
  std::string out = "(";
  for (int i = 0; i < d_; ++i) {
    if (i) out += ',';
    out += std::to_string(c_[i]);
  }
  return out + ")";
}

std::size_t PointHash::operator()(const Point& p) const noexcept {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(p.dim());
  for (int i = 0; i < p.dim(); ++i) {
    h ^= static_cast<std::uint64_t>(p[i]) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 31;
  }
  return static_cast<std::size_t>(h);
}

Point parse_point(const std::string& text) {
  std::vector<Coord> coords;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      coords.push_back(std::stoll(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::FormatError, "bad coordinate '" + item + "' in point '" + text + "'");
    }
  }
  return Point(coords);
}

Coord norm_l1(const Point& x) noexcept {
  Coord s = 0;
  for (int i = 0; i < x.dim(); ++i) s += x[i] < 0 ? -x[i] : x[i];
  return s;
}

Coord norm_linf(const Point& x) noexcept {
  Coord m = 0;
  for (int i = 0; i < x.dim(); ++i) m = std::max(m, x[i] < 0 ? -x[i] : x[i]);
  return m;
}

double norm(const Point& x, Norm kind) {
  switch (kind) {
    case Norm::L1: return static_cast<double>(norm_l1(x));
    case Norm::Linf: return static_cast<double>(norm_linf(x));
    case Norm::L2: {
      double s = 0;
      for (int i = 0; i < x.dim(); ++i) s += static_cast<double>(x[i]) * static_cast<double>(x[i]);
      return std::sqrt(s);
    }
  }
  return 0.0;
}

Coord max_distance(const Point& x, const std::vector<Point>& sites) {
  if (sites.empty()) throw Error(ErrorCode::EmptySet, "max_distance over an empty set");
  Coord best = 0;
  for (const auto& y : sites) best = std::max(best, norm_linf(x - y));
  return best;
}

Coord diameter_linf(const std::vector<Point>& sites) {
  if (sites.empty()) throw Error(ErrorCode::EmptySet, "diameter of an empty set");
  const int d = sites.front().dim();
  Coord diam = 0;
  for (int i = 0; i < d; ++i) {
    Coord lo = sites.front()[i], hi = lo;
    for (const auto& p : sites) {
      lo = std::min(lo, p[i]);
      hi = std::max(hi, p[i]);
    }
    diam = std::max(diam, hi - lo);
  }
  return diam;
}

Point torus_wrap(const Point& x, Coord side) {
  if (side < 2) throw Error(ErrorCode::OutOfRange, "torus side must be >= 2");
  Point out = x;
  for (int i = 0; i < x.dim(); ++i) {
    Coord r = x[i] % side;
    out[i] = r < 0 ? r + side : r;
  }
  return out;
}

Coord torus_distance(const Point& x, const Point& y, Coord side) {
  const Point a = torus_wrap(x, side), b = torus_wrap(y, side);
  Coord dist = 0;
  for (int i = 0; i < x.dim(); ++i) {
    Coord delta = a[i] > b[i] ? a[i] - b[i] : b[i] - a[i];
    dist += std::min(delta, side - delta);
  }
  return dist;
}

}  // namespace interlace
