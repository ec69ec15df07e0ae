#include "interlace/walk.hpp"

#include <algorithm>
#include <cmath>

#include "interlace/error.hpp"

namespace interlace {

const char* stop_kind_name(StopKind kind) noexcept {
  switch (kind) {
    case StopKind::Entrance: return "entrance";
    case StopKind::Hitting: return "hitting";
    case StopKind::Exit: return "exit";
    case StopKind::TimeCap: return "time_cap";
    case StopKind::KillRadius: return "kill_radius";
  }
  return "unknown";
}

StopCondition StopCondition::entrance(const Domain& set) {
  StopCondition c;
  c.kind_ = StopKind::Entrance;
  c.set_ = std::make_shared<const DomainMask>(set);
  return c;
}

StopCondition StopCondition::hitting(const Domain& set) {
  StopCondition c = entrance(set);
  c.kind_ = StopKind::Hitting;
  return c;
}

StopCondition StopCondition::exit(const Domain& set) {
  StopCondition c = entrance(set);
  c.kind_ = StopKind::Exit;
  return c;
}

StopCondition StopCondition::time_cap(std::int64_t steps) {
  StopCondition c;
  c.kind_ = StopKind::TimeCap;
  c.with_time_cap(steps);
  return c;
}

StopCondition StopCondition::kill_ball(const Point& center, Coord radius) {
  StopCondition c;
  c.kind_ = StopKind::KillRadius;
  c.with_kill_ball(center, radius);
  return c;
}

StopCondition& StopCondition::with_time_cap(std::int64_t steps) {
  if (steps < 0) throw Error(ErrorCode::OutOfRange, "time cap must be >= 0");
  cap_ = steps;
  return *this;
}

StopCondition& StopCondition::with_kill_ball(const Point& center, Coord radius) {
  if (radius < 0) throw Error(ErrorCode::OutOfRange, "kill radius must be >= 0");
  kill_center_ = center;
  kill_radius_ = radius;
  return *this;
}

Point StoppedPath::end() const { return site_at(length()); }

Point StoppedPath::site_at(std::int64_t t) const {
  if (t < 0 || t > length()) throw Error(ErrorCode::RangeOverrun, "time beyond recorded path");
  Point p = start;
  for (std::int64_t i = 0; i < t; ++i) apply_step(p, steps[static_cast<std::size_t>(i)]);
  return p;
}

std::vector<Point> StoppedPath::sites() const {
  std::vector<Point> out;
  out.reserve(steps.size() + 1);
  Point p = start;
  out.push_back(p);
  for (auto s : steps) {
    apply_step(p, s);
    out.push_back(p);
  }
  return out;
}

StoppedPath run_until(const WalkState& state, const StopCondition& condition) {
  RngStream rng(state.stream);
  return run_until(state.position, rng, condition);
}

StoppedPath run_until(const Point& start, RngStream& rng, const StopCondition& condition) {
  const StopKind kind = condition.kind();
  const bool needs_bound = kind == StopKind::Entrance || kind == StopKind::Hitting;
  if (needs_bound && !condition.cap() && !condition.kill_radius())
    throw Error(ErrorCode::UnboundedStop,
                "entrance/hitting conditions need a time cap or kill radius");
  if (kind == StopKind::TimeCap && !condition.cap())
    throw Error(ErrorCode::UnboundedStop, "time-cap condition without a cap");

  const int d = start.dim();
  const DomainMask* set = condition.set().get();
  const std::int64_t cap = condition.cap().value_or(std::numeric_limits<std::int64_t>::max());
  const bool killing = condition.kill_radius().has_value();
  const Coord kill_r = condition.kill_radius().value_or(0);
  const Point& kc = condition.kill_center();

  StoppedPath path;
  path.start = start;
  Point p = start;

  auto finish = [&](StopKind why) {
    path.stop_kind = why;
    path.stop_time = path.length();
    return path;
  };

  if (kind == StopKind::Entrance && set->contains(p)) return finish(StopKind::Entrance);
  if (kind == StopKind::Exit && !set->contains(p)) return finish(StopKind::Exit);
  if (killing && norm_linf(p - kc) > kill_r) return finish(StopKind::KillRadius);

  for (std::int64_t t = 0; t < cap; ++t) {
    const std::uint8_t code = draw_step(rng, d);
    apply_step(p, code);
    path.steps.push_back(code);
    switch (kind) {
      case StopKind::Entrance:
      case StopKind::Hitting:
        if (set->contains(p)) return finish(kind);
        break;
      case StopKind::Exit:
        if (!set->contains(p)) return finish(kind);
        break;
      default:
        break;
    }
    if (killing) {
      const int axis = code >> 1;
      const Coord off = p[axis] - kc[axis];
      if (off > kill_r || off < -kill_r) return finish(StopKind::KillRadius);
    }
  }
  return finish(StopKind::TimeCap);
}

SiteSet range(const StoppedPath& path, std::int64_t m) {
  if (m < 0 || m > path.length())
    throw Error(ErrorCode::RangeOverrun, "range prefix " + std::to_string(m) +
                                             " exceeds path length " + std::to_string(path.length()));
  SiteSet out;
  out.reserve(static_cast<std::size_t>(m + 1));
  Point p = path.start;
  out.insert(p);
  for (std::int64_t t = 0; t < m; ++t) {
    apply_step(p, path.steps[static_cast<std::size_t>(t)]);
    out.insert(p);
  }
  return out;
}

StoppedPath fixed_length_walk(const Point& start, std::int64_t steps, StreamId id) {
  RngStream rng(id);
  return run_until(start, rng, StopCondition::time_cap(steps));
}

namespace {

Coord set_diameter(const SiteSet& sites) { return diameter_linf({sites.begin(), sites.end()}); }

}  // namespace

RangeLemmaSummary range_lemma_stats(int dim, std::int64_t n, double alpha, int replicas,
                                    std::uint64_t seed) {
  RangeLemmaSummary s;
  s.replicas = replicas;
  s.alpha = alpha;
  s.n = n;
  const double nd = static_cast<double>(n);
  s.diam_lower = std::pow(nd, 1.0 - alpha);
  s.diam_upper = std::pow(nd, 1.0 + alpha);
  s.volume_lower = std::pow(nd, 2.0 - 2.0 * alpha);
  const Point origin(dim);
  for (int r = 0; r < replicas; ++r) {
    const StoppedPath path = fixed_length_walk(origin, n * n, {seed, static_cast<std::uint64_t>(r), 0});
    const SiteSet sites = range(path, n * n);
    const Coord diam = set_diameter(sites);
    const auto vol = static_cast<std::int64_t>(sites.size());
    s.diameters.push_back(diam);
    s.volumes.push_back(vol);
    const auto dd = static_cast<double>(diam);
    if (dd >= s.diam_lower && dd <= s.diam_upper && static_cast<double>(vol) >= s.volume_lower) ++s.held;
  }
  return s;
}

MultiRangeSummary multi_range_stats(std::int64_t k, std::int64_t n, const std::vector<Point>& starts,
                                    int replicas, std::uint64_t seed, double alpha3) {
  if (k <= 0) throw Error(ErrorCode::EmptyEnsemble, "multi_range_stats needs k >= 1");
  if (starts.empty()) throw Error(ErrorCode::EmptySet, "no start sites given");
  if (starts.size() != 1 && static_cast<std::int64_t>(starts.size()) != k)
    throw Error(ErrorCode::OutOfRange, "starts must have 1 or k entries");
  const int d = starts.front().dim();
  MultiRangeSummary s;
  s.k = k;
  s.n = n;
  s.alpha3 = alpha3;
  const double nd = static_cast<double>(n);
  s.threshold = static_cast<double>(k) * std::pow(nd, 2.0 - alpha3);
  // n^h <= k <= n^(d-2) for some h in (0, d-2) iff 1 < k <= n^(d-2).
  s.ensemble_size_in_regime = k > 1 && static_cast<double>(k) <= std::pow(nd, d - 2.0);
  const std::int64_t steps = n * n;
  for (int r = 0; r < replicas; ++r) {
    SiteSet all;
    std::int64_t summed = 0;
    for (std::int64_t j = 0; j < k; ++j) {
      const Point& start = starts.size() == 1 ? starts.front() : starts[static_cast<std::size_t>(j)];
      const StoppedPath path = fixed_length_walk(
          start, steps, {seed, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(j)});
      SiteSet sites = range(path, steps);
      summed += static_cast<std::int64_t>(sites.size());
      all.insert(sites.begin(), sites.end());
    }
    // The union has exactly sum_j |R_j| sites iff the ranges are pairwise disjoint.
    const bool disjoint = static_cast<std::int64_t>(all.size()) == summed;
    s.union_sizes.push_back(static_cast<std::int64_t>(all.size()));
    s.summed_sizes.push_back(summed);
    s.pairwise_disjoint.push_back(disjoint);
    if (static_cast<double>(all.size()) >= s.threshold) ++s.held;
  }
  return s;
}

}  // namespace interlace
