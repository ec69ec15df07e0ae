#include "interlace/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "interlace/error.hpp"
#include "interlace/hitting.hpp"

namespace interlace {

namespace {

std::uint64_t poisson_inversion(double lambda, RngStream& rng) {
  const double u = rng.uniform();
  double p = std::exp(-lambda);
  double cdf = p;
  std::uint64_t k = 0;
  while (u > cdf && k < 1000) {
    ++k;
    p *= lambda / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

// Transformed rejection with squeeze (Hormann 1993).
std::uint64_t poisson_ptrs(double lambda, RngStream& rng) {
  const double slam = std::sqrt(lambda);
  const double loglam = std::log(lambda);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2);
  while (true) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2 * a / us + b) * u + lambda + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        -lambda + k * loglam - std::lgamma(k + 1))
      return static_cast<std::uint64_t>(k);
  }
}

Box padded(const Box& b, Coord pad) {
  Box out = b;
  for (int i = 0; i < b.lo.dim(); ++i) {
    out.lo[i] -= pad;
    out.hi[i] += pad;
  }
  return out;
}

Point box_center(const Box& b) {
  Point c(b.lo.dim());
  for (int i = 0; i < b.lo.dim(); ++i) c[i] = (b.lo[i] + b.hi[i]) / 2;
  return c;
}

Coord box_radius(const Box& b, const Point& c) {
  Coord r = 0;
  for (int i = 0; i < b.lo.dim(); ++i) r = std::max({r, c[i] - b.lo[i], b.hi[i] - c[i]});
  return r;
}

// Walks p until it leaves B(c, R) or reaches `cap` steps, calling visit(p, t)
// at every position inside the ball (t = 0 included); visit returning false
// stops the walk. p ends at the final position.
template <class Visit>
std::pair<StopKind, std::int64_t> walk_killed(Point& p, RngStream& rng, const Point& c, Coord radius,
                                              std::int64_t cap, std::vector<std::uint8_t>* steps, Visit&& visit) {
  const int d = p.dim();
  if (!visit(p, 0)) return {StopKind::Hitting, 0};
  for (std::int64_t t = 1; t <= cap; ++t) {
    const std::uint8_t code = draw_step(rng, d);
    apply_step(p, code);
    if (steps) steps->push_back(code);
    const int axis = code >> 1;
    const Coord off = p[axis] - c[axis];
    if (off > radius || off < -radius) return {StopKind::KillRadius, t};
    if (!visit(p, t)) return {StopKind::Hitting, t};
  }
  return {StopKind::TimeCap, cap};
}

}  // namespace

std::uint64_t sample_poisson(double lambda, RngStream& rng) {
  if (!(lambda >= 0)) throw Error(ErrorCode::OutOfRange, "Poisson mean must be >= 0");
  if (lambda == 0) return 0;
  return lambda < 10 ? poisson_inversion(lambda, rng) : poisson_ptrs(lambda, rng);
}

std::uint64_t sample_count(double u, double cap, RngStream& rng) {
  if (u < 0 || cap < 0) throw Error(ErrorCode::OutOfRange, "level and capacity must be >= 0");
  return sample_poisson(u * cap, rng);
}

std::vector<std::uint64_t> nested_counts(const std::vector<double>& levels, double cap, RngStream& rng) {
  std::vector<std::uint64_t> out;
  out.reserve(levels.size());
  double prev = 0;
  std::uint64_t total = 0;
  for (double u : levels) {
    if (u < prev) throw Error(ErrorCode::OutOfRange, "levels must be non-decreasing and >= 0");
    total += sample_count(u - prev, cap, rng);
    out.push_back(total);
    prev = u;
  }
  return out;
}

AliasTable::AliasTable(const std::vector<double>& weights) {
  const std::size_t n = weights.size();
  if (n == 0) throw Error(ErrorCode::EmptySet, "alias table over no outcomes");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0)) throw Error(ErrorCode::OutOfRange, "alias weights must have positive total");
  prob_.assign(n, 0.0);
  alias_.assign(n, 0);
  std::vector<double> scaled(n);
  std::vector<std::uint32_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i] < 0) throw Error(ErrorCode::OutOfRange, "negative alias weight");
    scaled[i] = weights[i] * static_cast<double>(n) / total;
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    const auto s = small.back(), l = large.back();
    small.pop_back();
    prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  for (auto i : large) prob_[i] = 1.0;
  for (auto i : small) prob_[i] = 1.0;  // leftovers from rounding
}

std::size_t AliasTable::sample(RngStream& rng) const noexcept {
  const std::size_t i = rng.below(static_cast<std::uint32_t>(prob_.size()));
  return rng.uniform() < prob_[i] ? i : alias_[i];
}

StartSampler::StartSampler(const EquilibriumSolution& eq) {
  for (std::size_t i = 0; i < eq.sites.size(); ++i)
    if (eq.mass[i] > 0) sites_.push_back(eq.sites[i]);
  std::vector<double> w;
  for (std::size_t i = 0; i < eq.sites.size(); ++i)
    if (eq.mass[i] > 0) w.push_back(eq.mass[i]);
  table_ = AliasTable(w);
}

Point sample_start(const EquilibriumSolution& eq, RngStream& rng) { return StartSampler(eq).sample(rng); }

std::vector<double> trajectory_labels(double u_max, double cap, std::uint64_t seed, std::uint64_t replica) {
  if (u_max < 0 || cap < 0) throw Error(ErrorCode::OutOfRange, "level and capacity must be >= 0");
  std::vector<double> labels;
  if (u_max == 0 || cap == 0) return labels;
  RngStream rng({seed, replica, kLabelStream});
  double t = 0;
  while (true) {
    t += -std::log1p(-rng.uniform()) / cap;
    if (t > u_max) break;
    labels.push_back(t);
  }
  return labels;
}

std::size_t OccupancyField::count_at(double u) const noexcept {
  const auto it = std::upper_bound(trajectories_.begin(), trajectories_.end(), u,
                                   [](double v, const Trajectory& t) { return v < t.label; });
  return static_cast<std::size_t>(it - trajectories_.begin());
}

std::span<const Visit> OccupancyField::visits(const Point& p) const noexcept {
  if (!indexer_.inside(p)) return {};
  return visits(indexer_.index(p));
}

bool OccupancyField::occupied(const Point& p, double u) const noexcept {
  const auto v = visits(p);
  return !v.empty() && v.front().trajectory < count_at(u);
}

std::vector<std::uint8_t> OccupancyField::occupancy(double u) const {
  const auto n = count_at(u);
  std::vector<std::uint8_t> occ(indexer_.size(), 0);
  for (std::uint64_t c = 0; c < indexer_.size(); ++c)
    if (offsets_[c] != offsets_[c + 1] && visits_[offsets_[c]].trajectory < n) occ[c] = 1;
  return occ;
}

std::vector<Point> OccupancyField::sites(double u) const {
  const auto occ = occupancy(u);
  std::vector<Point> out;
  for (std::uint64_t c = 0; c < occ.size(); ++c)
    if (occ[c]) out.push_back(indexer_.point(c));
  return out;
}

std::size_t OccupancyField::site_count(double u) const {
  const auto occ = occupancy(u);
  return static_cast<std::size_t>(std::count(occ.begin(), occ.end(), std::uint8_t{1}));
}

std::vector<std::pair<Point, std::uint64_t>> OccupancyField::pairs(double u) const {
  const auto n = count_at(u);
  std::vector<std::pair<Point, std::uint64_t>> out;
  for (std::uint64_t c = 0; c < indexer_.size(); ++c)
    for (const auto& v : visits(c))
      if (v.trajectory < n) out.emplace_back(indexer_.point(c), v.trajectory);
  std::sort(out.begin(), out.end());
  return out;
}

void OccupancyField::build(std::vector<std::pair<std::uint64_t, Visit>>& entries) {
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : a.second.trajectory < b.second.trajectory;
  });
  offsets_.assign(indexer_.size() + 1, 0);
  saturated_.assign(indexer_.size(), 0);
  visits_.clear();
  std::size_t i = 0;
  for (std::uint64_t c = 0; c < indexer_.size(); ++c) {
    offsets_[c] = visits_.size();
    std::size_t kept = 0;
    while (i < entries.size() && entries[i].first == c) {
      if (kept < kSiteListCap) {
        visits_.push_back(entries[i].second);
        ++kept;
      } else {
        saturated_[c] = 1;
      }
      ++i;
    }
  }
  offsets_[indexer_.size()] = visits_.size();
}

OccupancyField field_from_pairs(const Domain& enlarged, const std::vector<std::pair<Point, std::uint64_t>>& pairs) {
  OccupancyField f;
  f.window_ = enlarged;
  f.enlarged_ = enlarged;
  f.indexer_ = BoxIndexer(padded(enlarged.bounding_box(), 1));
  const DomainMask mask(enlarged);
  std::uint64_t max_traj = 0;
  std::vector<std::pair<std::uint64_t, Visit>> entries;
  for (const auto& [p, t] : pairs) {
    if (!mask.contains(p)) continue;
    entries.push_back({f.indexer_.index(p), Visit{static_cast<std::uint32_t>(t), 0}});
    max_traj = std::max(max_traj, t + 1);
  }
  f.trajectories_.resize(max_traj);
  for (std::uint64_t j = 0; j < max_traj; ++j) f.trajectories_[j].index = j;
  f.build(entries);
  return f;
}

Coord kill_radius_for(double cap, Coord rho, double eps, GreenTable& green, Coord r_min, Coord r_max) {
  if (!(eps > 0)) throw Error(ErrorCode::OutOfRange, "kill_eps must be positive");
  auto bound = [&](Coord r) { return cap * green_sup_tail(green, r + 1 - rho); };
  if (r_max < r_min || bound(r_max) > eps)
    throw Error(ErrorCode::KillBudget, "kill radius for eps=" + std::to_string(eps) + " exceeds " +
                                           std::to_string(r_max));
  if (bound(r_min) <= eps) return r_min;
  Coord lo = r_min, hi = r_max;  // bound(lo) > eps >= bound(hi)
  while (hi - lo > 1) {
    const Coord mid = lo + (hi - lo) / 2;
    (bound(mid) <= eps ? hi : lo) = mid;
  }
  return hi;
}

FieldSampler::FieldSampler(const Domain& window, GreenTable& green, const FieldOptions& options)
    : window_(window),
      enlarged_(window.enlarged(options.lambda)),
      options_(options),
      eq_(interlace::equilibrium(enlarged_, green)),
      starts_(eq_) {
  const Box& bb = enlarged_.bounding_box();
  center_ = box_center(bb);
  const Coord rho = box_radius(bb, center_);
  kill_radius_ = kill_radius_for(eq_.cap, rho, options.kill_eps, green, rho + 1, options.max_kill_radius);
  // Capped walks are finite already; keep the kill sphere out of their reach so
  // every prefix runs to the cap.
  if (options.time_cap) kill_radius_ = std::max(kill_radius_, rho + *options.time_cap + 1);
  return_bound_ = eq_.cap * green_sup_tail(green, kill_radius_ + 1 - rho);
}

std::vector<std::pair<double, Point>> FieldSampler::sample_starts(double u, std::uint64_t seed,
                                                                  std::uint64_t replica) const {
  const auto labels = trajectory_labels(u, eq_.cap, seed, replica);
  std::vector<std::pair<double, Point>> out;
  out.reserve(labels.size());
  for (std::size_t j = 0; j < labels.size(); ++j) {
    RngStream rng({seed, replica, j});
    out.emplace_back(labels[j], starts_.sample(rng));
  }
  return out;
}

OccupancyField FieldSampler::sample(double u, std::uint64_t seed, std::uint64_t replica) const {
  OccupancyField f;
  f.u_ = u;
  f.seed_ = seed;
  f.replica_ = replica;
  f.window_ = window_;
  f.enlarged_ = enlarged_;
  f.indexer_ = BoxIndexer(padded(enlarged_.bounding_box(), 1));
  f.kill_radius_ = kill_radius_;
  f.kill_eps_ = options_.kill_eps;
  f.time_cap_ = options_.time_cap;
  f.cap_ = eq_.cap;
  f.paths_ = options_.keep_paths;
  f.bias_budget_ = u * eq_.cap * return_bound_;

  const DomainMask mask(enlarged_);
  const BoxIndexer& idx = f.indexer_;
  std::vector<std::uint32_t> stamp(idx.size(), 0);
  std::vector<std::pair<std::uint64_t, Visit>> entries;
  const auto labels = trajectory_labels(u, eq_.cap, seed, replica);
  const std::int64_t cap = options_.time_cap.value_or(std::numeric_limits<std::int64_t>::max());
  f.trajectories_.resize(labels.size());
  for (std::size_t j = 0; j < labels.size(); ++j) {
    RngStream rng({seed, replica, j});
    Trajectory& tr = f.trajectories_[j];
    tr.index = j;
    tr.label = labels[j];
    tr.start = starts_.sample(rng);
    const auto mark = static_cast<std::uint32_t>(j + 1);
    Point p = tr.start;
    auto [kind, length] = walk_killed(p, rng, center_, kill_radius_, cap,
                                      options_.keep_paths ? &tr.steps : nullptr,
                                      [&](const Point& p, std::int64_t t) {
                                        if (mask.contains(p)) {
                                          const auto c = idx.index(p);
                                          if (stamp[c] != mark) {
                                            stamp[c] = mark;
                                            entries.push_back({c, Visit{static_cast<std::uint32_t>(j), t}});
                                          }
                                        }
                                        return true;
                                      });
    tr.kill = kind;
    tr.length = length;
  }
  f.build(entries);
  return f;
}

OccupancyField sample_field(double u, const Domain& window, double lambda, double kill_eps, std::uint64_t seed,
                            GreenTable& green) {
  FieldOptions opt;
  opt.lambda = lambda;
  opt.kill_eps = kill_eps;
  return FieldSampler(window, green, opt).sample(u, seed, 0);
}

// ---------------------------------------------------------------------------
// Field files: little-endian header, trajectories, then sorted
// (site coordinates, trajectory index) pairs as 64-bit integers.

namespace {

constexpr std::uint64_t kFieldMagic = 0x31444c4549464c49ULL;  // "ILFIELD1"
constexpr std::uint32_t kFieldVersion = 1;

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error(ErrorCode::FormatError, "cannot write " + path);
  }
  template <class T>
  void put(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void point(const Point& p) {
    for (int i = 0; i < p.dim(); ++i) put(static_cast<std::int64_t>(p[i]));
  }
  void boxes(const Domain& d) {
    put(static_cast<std::uint32_t>(d.boxes().size()));
    for (const auto& b : d.boxes()) {
      point(b.lo);
      point(b.hi);
    }
  }
  void bytes(const std::vector<std::uint8_t>& v) { out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size())); }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw Error(ErrorCode::FormatError, "cannot read " + path);
  }
  template <class T>
  T get() {
    T v{};
    if (!in_.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error(ErrorCode::FormatError, "truncated field file " + path_);
    return v;
  }
  Point point(int d) {
    Point p(d);
    for (int i = 0; i < d; ++i) p[i] = get<std::int64_t>();
    return p;
  }
  Domain boxes(int d) {
    const auto n = get<std::uint32_t>();
    std::vector<Box> b;
    for (std::uint32_t i = 0; i < n; ++i) {
      Point lo = point(d);
      Point hi = point(d);
      b.push_back({lo, hi});
    }
    return Domain(std::move(b));
  }
  std::vector<std::uint8_t> bytes(std::uint64_t n) {
    std::vector<std::uint8_t> v(n);
    if (!in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n)))
      throw Error(ErrorCode::FormatError, "truncated field file " + path_);
    return v;
  }

 private:
  std::ifstream in_;
  std::string path_;
};

}  // namespace

void OccupancyField::save(const std::string& path) const {
  Writer w(path);
  w.put(kFieldMagic);
  w.put(kFieldVersion);
  w.put(static_cast<std::uint32_t>(dim()));
  w.put(u_);
  w.put(seed_);
  w.put(replica_);
  w.put(cap_);
  w.put(static_cast<std::int64_t>(kill_radius_));
  w.put(kill_eps_);
  w.put(static_cast<std::int64_t>(time_cap_.value_or(-1)));
  w.put(bias_budget_);
  w.boxes(window_);
  w.boxes(enlarged_);
  w.put(static_cast<std::uint64_t>(trajectories_.size()));
  for (const auto& t : trajectories_) {
    w.put(t.index);
    w.put(t.label);
    w.point(t.start);
    w.put(static_cast<std::uint8_t>(t.kill));
    w.put(static_cast<std::int64_t>(t.length));
    w.put(static_cast<std::uint64_t>(t.steps.size()));
    w.bytes(t.steps);
  }
  const auto all = pairs(u_);
  w.put(static_cast<std::uint64_t>(all.size()));
  for (const auto& [p, t] : all) {
    w.point(p);
    w.put(static_cast<std::int64_t>(t));
  }
}

OccupancyField OccupancyField::load(const std::string& path) {
  Reader r(path);
  if (r.get<std::uint64_t>() != kFieldMagic) throw Error(ErrorCode::FormatError, path + " is not a field file");
  if (const auto v = r.get<std::uint32_t>(); v != kFieldVersion)
    throw Error(ErrorCode::FormatError, "unsupported field version " + std::to_string(v));
  const auto d = static_cast<int>(r.get<std::uint32_t>());
  if (d < 3 || d > kMaxDim) throw Error(ErrorCode::FormatError, "bad dimension in " + path);
  OccupancyField f;
  f.u_ = r.get<double>();
  f.seed_ = r.get<std::uint64_t>();
  f.replica_ = r.get<std::uint64_t>();
  f.cap_ = r.get<double>();
  f.kill_radius_ = r.get<std::int64_t>();
  f.kill_eps_ = r.get<double>();
  if (const auto cap = r.get<std::int64_t>(); cap >= 0) f.time_cap_ = cap;
  f.bias_budget_ = r.get<double>();
  f.window_ = r.boxes(d);
  f.enlarged_ = r.boxes(d);
  f.indexer_ = BoxIndexer(padded(f.enlarged_.bounding_box(), 1));
  const auto nt = r.get<std::uint64_t>();
  f.trajectories_.resize(nt);
  bool have_paths = nt > 0;
  bool any_steps = false;
  for (auto& t : f.trajectories_) {
    t.index = r.get<std::uint64_t>();
    t.label = r.get<double>();
    t.start = r.point(d);
    t.kill = static_cast<StopKind>(r.get<std::uint8_t>());
    t.length = r.get<std::int64_t>();
    t.steps = r.bytes(r.get<std::uint64_t>());
    if (static_cast<std::int64_t>(t.steps.size()) != t.length) have_paths = false;
    any_steps |= !t.steps.empty();
  }
  const auto np = r.get<std::uint64_t>();
  std::vector<std::pair<std::uint64_t, Visit>> entries;
  entries.reserve(np);
  for (std::uint64_t i = 0; i < np; ++i) {
    const Point p = r.point(d);
    const auto t = r.get<std::int64_t>();
    if (!f.indexer_.inside(p) || t < 0 || static_cast<std::uint64_t>(t) >= nt)
      throw Error(ErrorCode::FormatError, "field pair out of range in " + path);
    entries.push_back({f.indexer_.index(p), Visit{static_cast<std::uint32_t>(t), 0}});
  }
  // A field of bare pairs has zero-length trajectories; that is not a path record.
  have_paths = have_paths && any_steps;
  f.paths_ = have_paths;
  if (have_paths) {
    // First-visit times are not stored; replay the paths to recover them.
    std::vector<std::uint64_t> first(f.indexer_.size());
    const DomainMask mask(f.enlarged_);
    entries.clear();
    std::vector<std::uint32_t> stamp(f.indexer_.size(), 0);
    for (const auto& t : f.trajectories_) {
      Point p = t.start;
      const auto mark = static_cast<std::uint32_t>(t.index + 1);
      for (std::int64_t s = 0;; ++s) {
        if (mask.contains(p)) {
          const auto c = f.indexer_.index(p);
          if (stamp[c] != mark) {
            stamp[c] = mark;
            entries.push_back({c, Visit{static_cast<std::uint32_t>(t.index), s}});
          }
        }
        if (s == t.length) break;
        apply_step(p, t.steps[static_cast<std::size_t>(s)]);
        // The kill step leaves the ball, so it is never recorded.
      }
    }
  }
  f.build(entries);
  return f;
}

// ---------------------------------------------------------------------------

VacancyReport vacancy_check(const std::vector<Point>& set, const std::vector<double>& levels, const Domain& window,
                            std::int64_t replicas, std::uint64_t seed, GreenTable& green,
                            std::optional<Coord> kill_radius) {
  if (set.empty()) throw Error(ErrorCode::EmptySet, "vacancy of an empty set");
  if (levels.empty()) throw Error(ErrorCode::OutOfRange, "no levels given");
  for (const auto& a : set)
    if (!window.contains(a)) throw Error(ErrorCode::OutOfRange, "set must lie inside the window");
  const int d = window.dim();
  const auto eq_a = equilibrium(set, green);
  const auto eq_w = equilibrium(window, green);
  const StartSampler starts(eq_w);

  const Box& bb = window.bounding_box();
  const Point c = box_center(bb);
  const Coord rho_w = box_radius(bb, c);
  const Coord radius = kill_radius.value_or(2 * rho_w + 16);
  if (radius <= rho_w) throw Error(ErrorCode::OutOfRange, "kill radius must exceed the window radius");
  Coord rho_a = 0;
  for (const auto& a : set) rho_a = std::max(rho_a, norm_linf(a - c));

  // q_y(A) = sum_z g(y, z) e_A(z) at exit points y, ||y - c||_inf = R + 1.
  const DenseGreen g(green, std::vector<Coord>(static_cast<std::size_t>(d), radius + 1 + rho_a));
  auto return_prob = [&](const Point& y) {
    double q = 0.0;
    for (std::size_t i = 0; i < eq_a.sites.size(); ++i) q += g(y, eq_a.sites[i]) * eq_a.mass[i];
    return std::min(q, 1.0);
  };
  std::vector<Point> sorted_set = set;
  std::sort(sorted_set.begin(), sorted_set.end());
  const DomainMask in_a(Domain::from_sites(sorted_set));

  std::vector<double> lv = levels;
  std::sort(lv.begin(), lv.end());
  const double u_max = lv.back();
  std::vector<double> vac(lv.size(), 0.0), corr(lv.size(), 0.0), corr2(lv.size(), 0.0);
  std::vector<std::vector<std::uint8_t>> vac_s(lv.size());
  std::vector<std::vector<double>> corr_s(lv.size());
  const std::int64_t no_cap = std::numeric_limits<std::int64_t>::max();

  for (std::int64_t rep = 0; rep < replicas; ++rep) {
    const auto labels = trajectory_labels(u_max, eq_w.cap, seed, static_cast<std::uint64_t>(rep));
    // factor_j = 0 if trajectory j hits A, else 1 - q_{exit}(A); products are
    // taken over the trajectories at each level, in label order.
    double first_hit = INFINITY;
    std::vector<double> label_of, factor_of;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      RngStream rng({seed, static_cast<std::uint64_t>(rep), j});
      Point p = starts.sample(rng);
      const auto kind = walk_killed(p, rng, c, radius, no_cap, nullptr,
                                    [&](const Point& q, std::int64_t) { return !in_a.contains(q); })
                            .first;
      if (kind == StopKind::Hitting) {
        first_hit = labels[j];
        break;
      }
      label_of.push_back(labels[j]);
      factor_of.push_back(1.0 - return_prob(p));
    }
    for (std::size_t l = 0; l < lv.size(); ++l) {
      const double u = lv[l];
      if (first_hit <= u) {  // not vacant; the corrected product is 0 as well
        vac_s[l].push_back(0);
        corr_s[l].push_back(0.0);
        continue;
      }
      vac[l] += 1;
      double prod = 1.0;
      for (std::size_t j = 0; j < label_of.size() && label_of[j] <= u; ++j) prod *= factor_of[j];
      corr[l] += prod;
      corr2[l] += prod * prod;
      vac_s[l].push_back(1);
      corr_s[l].push_back(prod);
    }
  }

  VacancyReport report;
  report.cap_set = eq_a.cap;
  report.cap_window = eq_w.cap;
  report.kill_radius = radius;
  const double q_max = std::min(1.0, eq_a.cap * green_sup_tail(green, radius + 1 - rho_a));
  const auto n = static_cast<double>(replicas);
  for (std::size_t l = 0; l < lv.size(); ++l) {
    VacancyLevel v;
    v.u = lv[l];
    v.replicas = replicas;
    v.vacant = static_cast<std::int64_t>(vac[l]);
    v.frequency = vac[l] / n;
    v.raw_bias = v.u * eq_w.cap * q_max;
    v.corrected = corr[l] / n;
    v.corrected_stderr = n > 1 ? std::sqrt(std::max(0.0, (corr2[l] / n - v.corrected * v.corrected) / (n - 1))) : 0.0;
    v.corrected_bias = v.u * eq_w.cap * eq_a.cap * green.tol() + eq_a.residual;
    v.target = std::exp(-v.u * eq_a.cap);
    v.z = v.corrected_stderr > 0 ? (v.corrected - v.target) / v.corrected_stderr : 0.0;
    v.vacant_samples = std::move(vac_s[l]);
    v.corrected_samples = std::move(corr_s[l]);
    report.levels.push_back(v);
  }
  return report;
}

std::vector<Domain> sausage_slices(int dim, Coord n, double a) {
  const Coord r = sausage_radius(n, a);
  const double step = std::pow(static_cast<double>(n), a);
  std::vector<Domain> out;
  for (Coord k = 0;; ++k) {
    const auto c = static_cast<Coord>(std::floor(static_cast<double>(k) * step + 1e-12));
    if (c > n) break;
    out.push_back(Domain::ball(Point::unit(dim, 0, c), r));
  }
  return out;
}

std::vector<std::int64_t> slice_start_counts(const std::vector<std::pair<double, Point>>& starts, double u,
                                             int dim, Coord n, double a) {
  const auto slices = sausage_slices(dim, n, a);
  std::vector<std::int64_t> counts(slices.size(), 0);
  for (const auto& [label, x] : starts) {
    if (label > u) continue;
    for (std::size_t k = 0; k < slices.size(); ++k)
      if (slices[k].contains(x)) ++counts[k];
  }
  return counts;
}

KsResult ks_poisson(const std::vector<std::uint64_t>& samples, double lambda) {
  if (samples.empty()) throw Error(ErrorCode::EmptySet, "KS test on no samples");
  std::vector<std::uint64_t> s = samples;
  std::sort(s.begin(), s.end());
  const auto n = static_cast<double>(s.size());
  KsResult r;
  // Both CDFs are right-continuous step functions jumping at integers, so the
  // supremum is attained at an integer.
  const std::uint64_t kmax = std::max<std::uint64_t>(s.back(), static_cast<std::uint64_t>(lambda + 20 * std::sqrt(lambda + 1)));
  double cdf = 0.0;
  std::size_t pos = 0;
  for (std::uint64_t k = 0; k <= kmax; ++k) {
    cdf += std::exp(static_cast<double>(k) * std::log(lambda) - lambda - std::lgamma(static_cast<double>(k) + 1));
    while (pos < s.size() && s[pos] <= k) ++pos;
    r.statistic = std::max(r.statistic, std::abs(static_cast<double>(pos) / n - std::min(cdf, 1.0)));
  }
  r.critical = 1.628 / std::sqrt(n);
  r.pass = r.statistic <= r.critical;
  return r;
}

}  // namespace interlace
