#pragma once

#include <cstdint>
#include <vector>

#include "interlace/lattice.hpp"

namespace interlace {

/// Closed axis-aligned box [lo, hi] (inclusive corners).
struct Box {
  Point lo;
  Point hi;

  bool contains(const Point& p) const noexcept;
  std::int64_t volume() const noexcept;
  friend bool operator==(const Box&, const Box&) = default;
};

/// Dense linear indexing of the sites of a box.
class BoxIndexer {
 public:
  BoxIndexer() = default;
  explicit BoxIndexer(const Box& box);

  const Box& box() const noexcept { return box_; }
  int dim() const noexcept { return box_.lo.dim(); }
  std::uint64_t size() const noexcept { return size_; }

  bool inside(const Point& p) const noexcept { return box_.contains(p); }
  std::uint64_t index(const Point& p) const noexcept {
    std::uint64_t idx = 0;
    for (int i = 0; i < box_.lo.dim(); ++i)
      idx += static_cast<std::uint64_t>(p[i] - box_.lo[i]) * stride_[i];
    return idx;
  }
  std::uint64_t stride(int axis) const noexcept { return stride_[axis]; }
  Point point(std::uint64_t index) const;

 private:
  Box box_;
  std::array<std::uint64_t, kMaxDim> stride_{};
  std::uint64_t size_ = 0;
};

/// A finite union of boxes: balls B(x, r), sausages, tubes, slabs.
class Domain {
 public:
  Domain() = default;
  explicit Domain(std::vector<Box> boxes);

  static Domain box(const Point& lo, const Point& hi);
  /// Closed sup-norm ball B(center, r).
  static Domain ball(const Point& center, Coord radius);
  /// The n^a-neighbourhood of the segment [0, n e_1]: union of B(k e_1, n^a).
  static Domain sausage(int dim, Coord n, double a);
  /// Union of B(m * direction, halfwidth) for m in [-pad, n + pad].
  static Domain tube(const Point& direction, Coord n, Coord halfwidth, Coord pad);
  /// A finite site list as a union of unit boxes.
  static Domain from_sites(const std::vector<Point>& sites);

  int dim() const noexcept { return boxes_.empty() ? 0 : boxes_.front().lo.dim(); }
  const std::vector<Box>& boxes() const noexcept { return boxes_; }
  const Box& bounding_box() const noexcept { return bbox_; }

  bool contains(const Point& p) const noexcept;
  std::vector<Point> sites() const;
  std::int64_t volume() const;
  /// {x in A : some nearest neighbour of x is outside A}.
  std::vector<Point> internal_boundary() const;

  /// Twice the bounding-box centre (integral so odd extents stay exact).
  Point doubled_center() const;

  /// Every box scaled by (1 + lambda) about the bounding-box centre, rounded outward.
  Domain enlarged(double lambda) const;

 private:
  std::vector<Box> boxes_;
  Box bbox_;
};

/// floor(n^a), guarded against pow rounding just below an integer.
Coord sausage_radius(Coord n, double a);

/// Bitmap membership over the bounding box of a domain; O(1) lookups for walk kernels.
class DomainMask {
 public:
  DomainMask() = default;
  explicit DomainMask(const Domain& domain);

  const BoxIndexer& indexer() const noexcept { return indexer_; }
  bool contains(const Point& p) const noexcept {
    return indexer_.inside(p) && bits_[indexer_.index(p)] != 0;
  }
  bool contains_index(std::uint64_t idx) const noexcept { return bits_[idx] != 0; }

 private:
  BoxIndexer indexer_;
  std::vector<std::uint8_t> bits_;
};

}  // namespace interlace
