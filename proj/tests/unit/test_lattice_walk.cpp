#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "interlace/domain.hpp"
#include "interlace/error.hpp"
#include "interlace/green.hpp"
#include "interlace/lattice.hpp"
#include "interlace/rng.hpp"
#include "interlace/walk.hpp"

using namespace interlace;

TEST_CASE("norms") {
  CHECK(norm(Point{0, 0, 0}, Norm::L1) == 0);
  CHECK(norm(Point{1, -2, 2}, Norm::Linf) == 2);
  CHECK(norm(Point{3, 4, 0}, Norm::L2) == doctest::Approx(5.0));
  CHECK(norm_l1(Point{1, -2, 2}) == 5);
}

TEST_CASE("max distance to a set") {
  CHECK(max_distance(Point{0, 0, 0}, {Point{0, 0, 0}}) == 0);
  CHECK(max_distance(Point{0, 0, 0}, {Point{1, 0, 0}, Point{0, 3, 0}}) == 3);
  CHECK(max_distance(Point{-2, 0, 0}, Domain::ball(Point(3), 1).sites()) == 3);
  CHECK_THROWS_AS(max_distance(Point(3), {}), Error);
}

TEST_CASE("torus wrap and distance") {
  CHECK(torus_wrap(Point{-1, 0, 0}, 8) == Point{7, 0, 0});
  CHECK(torus_wrap(Point{8, 8, 8}, 8) == Point{0, 0, 0});
  CHECK(torus_distance(Point{0, 0, 0}, Point{7, 0, 0}, 8) == 1);
  CHECK(torus_distance(Point{0, 0, 0}, Point{4, 4, 4}, 8) == 12);
}

TEST_CASE("point parsing and limits") {
  CHECK(parse_point("1,-2,3") == Point{1, -2, 3});
  CHECK_THROWS_AS(parse_point("1,x,3"), Error);
  CHECK_THROWS_AS(Point(2), Error);
}

TEST_CASE("domains") {
  const Domain b2 = Domain::ball(Point(3), 2);
  CHECK(b2.volume() == 125);
  CHECK(b2.sites().size() == 125);
  CHECK(Domain::ball(Point(3), 1).internal_boundary().size() == 26);
  CHECK(b2.contains(Point{2, -2, 0}));
  CHECK_FALSE(b2.contains(Point{3, 0, 0}));
  const Domain s = Domain::sausage(3, 64, 0.3);
  CHECK(sausage_radius(64, 0.3) == 3);
  CHECK(s.contains(Point{64, 3, -3}));
  CHECK_FALSE(s.contains(Point{65 + 3, 0, 0}));
  // Overlapping boxes count each site once.
  const Domain u({Box{Point{0, 0, 0}, Point{2, 0, 0}}, Box{Point{1, 0, 0}, Point{3, 0, 0}}});
  CHECK(u.volume() == 4);
  const Domain e = Domain::ball(Point(3), 4).enlarged(0.5);
  CHECK(e.bounding_box().hi == Point{6, 6, 6});
  const BoxIndexer idx(Box{Point{-1, -1, -1}, Point{1, 2, 3}});
  for (std::uint64_t i = 0; i < idx.size(); ++i) CHECK(idx.index(idx.point(i)) == i);
}

TEST_CASE("philox known answers") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are independent of access order") {
  RngStream a({7, 1, 2}), b({7, 1, 2}), c({7, 1, 3});
  std::vector<std::uint64_t> va, vb;
  for (int i = 0; i < 100; ++i) va.push_back(a());
  for (int i = 0; i < 100; ++i) vb.push_back(b());
  CHECK(va == vb);
  CHECK(c() != va.front());
  // below() is unbiased: chi-square over 6 cells.
  RngStream r({1, 0, 0});
  std::array<int, 6> cnt{};
  const int n = 60000;
  for (int i = 0; i < n; ++i) ++cnt[r.below(6)];
  double chi = 0;
  for (int k : cnt) chi += (k - n / 6.0) * (k - n / 6.0) / (n / 6.0);
  CHECK(chi < 20.5);  // 99.9% quantile of chi2(5)
}

TEST_CASE("stopping times") {
  RngStream rng({3, 0, 0});
  const Domain origin = Domain::box(Point(3), Point(3));
  const auto exit = run_until(Point(3), rng, StopCondition::exit(origin));
  CHECK(exit.length() == 1);
  CHECK(norm_l1(exit.end()) == 1);
  CHECK(exit.stop_kind == StopKind::Exit);

  const auto entered = run_until(Point(3), rng, StopCondition::entrance(origin).with_time_cap(10));
  CHECK(entered.stop_time == 0);
  CHECK(entered.sites() == std::vector<Point>{Point(3)});

  CHECK_THROWS_AS(run_until(Point(3), rng, StopCondition::hitting(origin)), Error);

  const auto killed = run_until(Point(3), rng, StopCondition::kill_ball(Point(3), 5).with_time_cap(100000));
  CHECK(killed.stop_kind == StopKind::KillRadius);
  CHECK(norm_linf(killed.end()) == 6);
}

TEST_CASE("return frequency against 1 - 1/g(0,0)") {
  // P[return by n] differs from P[return] by at most sum_{k>n} p_k(0,0).
  const std::int64_t n = 2000;
  const double g = 1.516386059151978;
  const double tail = g - green_stopped(Point(3), Point(3), n);
  const Domain origin = Domain::box(Point(3), Point(3));
  const int reps = 20000;
  int returned = 0;
  for (int i = 0; i < reps; ++i) {
    const auto p = run_until(WalkState{Point(3), 0, {11, 0, static_cast<std::uint64_t>(i)}},
                             StopCondition::hitting(origin).with_time_cap(n));
    returned += p.stop_kind == StopKind::Hitting;
  }
  const double target = 1 - 1 / g;
  const double f = static_cast<double>(returned) / reps;
  const double sigma = std::sqrt(target * (1 - target) / reps);
  CHECK(f <= target + 3 * sigma);
  CHECK(f >= target - tail - 3 * sigma);
}

TEST_CASE("ranges") {
  StoppedPath p{Point(3), {0, 0, 0}, StopKind::TimeCap, 3};
  CHECK(range(p, 3).size() == 4);
  CHECK(range(p, 0).size() == 1);
  CHECK_THROWS_AS(range(p, 4), Error);
  StoppedPath back{Point(3), {0, 1, 0, 1}, StopKind::TimeCap, 4};
  CHECK(range(back, 4).size() == 2);
  CHECK(fixed_length_walk(Point(3), 50, {1, 2, 3}) == fixed_length_walk(Point(3), 50, {1, 2, 3}));
}

TEST_CASE("range statistics") {
  const auto s = range_lemma_stats(3, 20, 0.2, 50, 5);
  CHECK(s.diameters.size() == 50);
  CHECK(s.diam_lower == doctest::Approx(std::pow(20.0, 0.8)));
  // k = 1 agrees with single walks on the same stream layout.
  const auto one = multi_range_stats(1, 10, {Point(3)}, 5, 9, 0.5);
  CHECK(one.union_sizes == one.summed_sizes);
  // Far-apart starts give disjoint ranges, so the union is the sum.
  std::vector<Point> starts;
  for (int j = 0; j < 4; ++j) starts.push_back(Point::unit(3, 0, 1000 * j));
  const auto far = multi_range_stats(4, 10, starts, 5, 9, 0.5);
  for (std::size_t r = 0; r < far.union_sizes.size(); ++r) {
    CHECK(far.pairwise_disjoint[r]);
    CHECK(far.union_sizes[r] == far.summed_sizes[r]);
  }
}

TEST_CASE("property: increments have mean zero") {
  RngStream rng({21, 0, 0});
  const int n = 100000;
  std::array<double, 3> sum{};
  for (int t = 0; t < n; ++t) {
    Point p(3);
    apply_step(p, draw_step(rng, 3));
    for (int i = 0; i < 3; ++i) sum[i] += static_cast<double>(p[i]);
  }
  // Each coordinate increment has variance 1/3.
  const double se = std::sqrt(1.0 / 3.0 / n);
  for (double s : sum) CHECK(std::abs(s / n) <= 4 * se);
}

TEST_CASE("property: stop-time semantics") {
  const Domain a = Domain::ball(Point(3), 2);
  for (std::uint64_t k = 0; k < 200; ++k) {
    const Point start{static_cast<Coord>(k % 5) - 2, static_cast<Coord>(k / 5 % 5) - 2, 0};
    const auto h = run_until(WalkState{start, 0, {5, 0, k}}, StopCondition::entrance(a).with_time_cap(1));
    CHECK(h.stop_time == 0);
    const auto t = run_until(WalkState{start, 0, {5, 1, k}}, StopCondition::exit(a));
    CHECK(t.stop_time >= 1);
    const auto sites = t.sites();
    CHECK_FALSE(a.contains(sites.back()));
    for (std::size_t i = 0; i + 1 < sites.size(); ++i) CHECK(a.contains(sites[i]));
    const auto ht = run_until(WalkState{start, 0, {5, 2, k}}, StopCondition::hitting(a).with_time_cap(1000));
    CHECK(ht.stop_time >= 1);
    if (ht.stop_kind == StopKind::Hitting) CHECK(a.contains(ht.end()));
  }
}

TEST_CASE("property: determinism and range monotonicity") {
  for (std::uint64_t k = 0; k < 20; ++k) {
    const auto p = fixed_length_walk(Point(4), 300, {8, k, 3});
    CHECK(p == fixed_length_walk(Point(4), 300, {8, k, 3}));
    SiteSet prev;
    for (std::int64_t m = 0; m <= 300; m += 25) {
      const auto r = range(p, m);
      for (const auto& s : prev) CHECK(r.count(s) == 1);
      prev = r;
    }
  }
}
