#include "interlace/domain.hpp"

#include <algorithm>
#include <cmath>

#include "interlace/error.hpp"

namespace interlace {

bool Box::contains(const Point& p) const noexcept {
  for (int i = 0; i < lo.dim(); ++i)
    if (p[i] < lo[i] || p[i] > hi[i]) return false;
  return true;
}

std::int64_t Box::volume() const noexcept {
  std::int64_t v = 1;
  for (int i = 0; i < lo.dim(); ++i) v *= hi[i] - lo[i] + 1;
  return v;
}

BoxIndexer::BoxIndexer(const Box& box) : box_(box) {
  std::uint64_t s = 1;
  for (int i = box.lo.dim() - 1; i >= 0; --i) {
    if (box.hi[i] < box.lo[i]) throw Error(ErrorCode::OutOfRange, "inverted box");
    stride_[i] = s;
    s *= static_cast<std::uint64_t>(box.hi[i] - box.lo[i] + 1);
  }
  size_ = s;
}

Point BoxIndexer::point(std::uint64_t index) const {
  Point p = box_.lo;
  for (int i = 0; i < box_.lo.dim(); ++i) {
    p[i] += static_cast<Coord>(index / stride_[i]);
    index %= stride_[i];
  }
  return p;
}

Domain::Domain(std::vector<Box> boxes) : boxes_(std::move(boxes)) {
  if (boxes_.empty()) throw Error(ErrorCode::EmptySet, "domain needs at least one box");
  const int d = boxes_.front().lo.dim();
  bbox_ = boxes_.front();
  for (const auto& b : boxes_) {
    if (b.lo.dim() != d || b.hi.dim() != d) throw Error(ErrorCode::OutOfRange, "mixed dimensions");
    for (int i = 0; i < d; ++i) {
      if (b.hi[i] < b.lo[i]) throw Error(ErrorCode::OutOfRange, "inverted box");
      bbox_.lo[i] = std::min(bbox_.lo[i], b.lo[i]);
      bbox_.hi[i] = std::max(bbox_.hi[i], b.hi[i]);
    }
  }
}

Domain Domain::box(const Point& lo, const Point& hi) { return Domain({Box{lo, hi}}); }

Domain Domain::ball(const Point& center, Coord radius) {
  Point lo = center, hi = center;
  for (int i = 0; i < center.dim(); ++i) {
    lo[i] -= radius;
    hi[i] += radius;
  }
  return box(lo, hi);
}

Coord sausage_radius(Coord n, double a) {
  return static_cast<Coord>(std::floor(std::pow(static_cast<double>(n), a) + 1e-12));
}

Domain Domain::sausage(int dim, Coord n, double a) {
  // The union of B(k e_1, n^a) over k = 0..n is a single box.
  const Coord r = sausage_radius(n, a);
  Point lo(dim), hi(dim);
  for (int i = 0; i < dim; ++i) {
    lo[i] = -r;
    hi[i] = r;
  }
  hi[0] = n + r;
  return box(lo, hi);
}

Domain Domain::tube(const Point& direction, Coord n, Coord halfwidth, Coord pad) {
  const int d = direction.dim();
  int nonzero = 0;
  for (int i = 0; i < d; ++i) nonzero += direction[i] != 0;
  if (nonzero == 0) throw Error(ErrorCode::OutOfRange, "tube direction must be nonzero");
  if (nonzero == 1 && norm_linf(direction) <= 2 * halfwidth + 1) {
    Point a = (-pad) * direction, b = (n + pad) * direction;
    Point lo(d), hi(d);
    for (int i = 0; i < d; ++i) {
      lo[i] = std::min(a[i], b[i]) - halfwidth;
      hi[i] = std::max(a[i], b[i]) + halfwidth;
    }
    return box(lo, hi);
  }
  std::vector<Box> boxes;
  for (Coord m = -pad; m <= n + pad; ++m) {
    Point c = m * direction;
    Point lo = c, hi = c;
    for (int i = 0; i < d; ++i) {
      lo[i] -= halfwidth;
      hi[i] += halfwidth;
    }
    boxes.push_back({lo, hi});
  }
  return Domain(std::move(boxes));
}

Domain Domain::from_sites(const std::vector<Point>& sites) {
  if (sites.empty()) throw Error(ErrorCode::EmptySet, "domain from an empty site list");
  std::vector<Box> boxes;
  boxes.reserve(sites.size());
  for (const auto& s : sites) boxes.push_back({s, s});
  return Domain(std::move(boxes));
}

bool Domain::contains(const Point& p) const noexcept {
  if (!bbox_.contains(p)) return false;
  for (const auto& b : boxes_)
    if (b.contains(p)) return true;
  return false;
}

std::vector<Point> Domain::sites() const {
  std::vector<Point> out;
  if (boxes_.size() == 1) {
    BoxIndexer idx(bbox_);
    out.reserve(idx.size());
    for (std::uint64_t i = 0; i < idx.size(); ++i) out.push_back(idx.point(i));
    return out;
  }
  DomainMask mask(*this);
  const auto& idx = mask.indexer();
  for (std::uint64_t i = 0; i < idx.size(); ++i)
    if (mask.contains_index(i)) out.push_back(idx.point(i));
  return out;
}

std::int64_t Domain::volume() const {
  if (boxes_.size() == 1) return boxes_.front().volume();
  DomainMask mask(*this);
  std::int64_t v = 0;
  for (std::uint64_t i = 0; i < mask.indexer().size(); ++i) v += mask.contains_index(i);
  return v;
}

std::vector<Point> Domain::internal_boundary() const {
  DomainMask mask(*this);
  const auto& idx = mask.indexer();
  const int d = dim();
  std::vector<Point> out;
  for (std::uint64_t i = 0; i < idx.size(); ++i) {
    if (!mask.contains_index(i)) continue;
    Point p = idx.point(i);
    bool boundary = false;
    for (int axis = 0; axis < d && !boundary; ++axis) {
      for (Coord s : {Coord{-1}, Coord{1}}) {
        p[axis] += s;
        boundary = boundary || !mask.contains(p);
        p[axis] -= s;
      }
    }
    if (boundary) out.push_back(p);
  }
  return out;
}

Point Domain::doubled_center() const {
  Point c = bbox_.lo + bbox_.hi;
  return c;
}

Domain Domain::enlarged(double lambda) const {
  if (lambda < 0) throw Error(ErrorCode::OutOfRange, "enlargement must be >= 0");
  const Point c2 = doubled_center();
  const int d = dim();
  std::vector<Box> out;
  out.reserve(boxes_.size());
  for (const auto& b : boxes_) {
    Box e = b;
    for (int i = 0; i < d; ++i) {
      const double c = 0.5 * static_cast<double>(c2[i]);
      e.lo[i] = static_cast<Coord>(std::floor(c + (1.0 + lambda) * (static_cast<double>(b.lo[i]) - c) + 1e-9));
      e.hi[i] = static_cast<Coord>(std::ceil(c + (1.0 + lambda) * (static_cast<double>(b.hi[i]) - c) - 1e-9));
    }
    out.push_back(e);
  }
  return Domain(std::move(out));
}

DomainMask::DomainMask(const Domain& domain) : indexer_(domain.bounding_box()) {
  bits_.assign(indexer_.size(), 0);
  const int d = domain.dim();
  for (const auto& b : domain.boxes()) {
    // Walk the box row by row along the last axis.
    Point p = b.lo;
    while (true) {
      const std::uint64_t base = indexer_.index(p);
      const auto len = static_cast<std::uint64_t>(b.hi[d - 1] - b.lo[d - 1] + 1);
      std::fill_n(bits_.begin() + static_cast<std::ptrdiff_t>(base), len, std::uint8_t{1});
      int axis = d - 2;
      while (axis >= 0) {
        if (++p[axis] <= b.hi[axis]) break;
        p[axis] = b.lo[axis];
        --axis;
      }
      if (axis < 0) break;
    }
  }
}

}  // namespace interlace
