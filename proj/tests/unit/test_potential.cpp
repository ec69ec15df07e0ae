#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "interlace/equilibrium.hpp"
#include "interlace/error.hpp"
#include "interlace/green.hpp"
#include "interlace/hitting.hpp"

using namespace interlace;

namespace {

constexpr double kG0 = 1.516386059151978;  // Watson's value of g(0,0) in d = 3

GreenTable& table3() {
  static GreenTable g(3);
  return g;
}

// P_x[H_A <= n] by enumerating every path of n steps.
double enumerate_hit(const Point& x, const std::vector<Point>& set, int n) {
  const int d = x.dim();
  const int moves = 2 * d;
  long total = 1;
  for (int i = 0; i < n; ++i) total *= moves;
  long hits = 0;
  for (long code = 0; code < total; ++code) {
    Point p = x;
    bool hit = std::find(set.begin(), set.end(), p) != set.end();
    long c = code;
    for (int t = 0; t < n && !hit; ++t, c /= moves) {
      const int m = static_cast<int>(c % moves);
      p[m / 2] += (m % 2) ? -1 : 1;
      hit = std::find(set.begin(), set.end(), p) != set.end();
    }
    hits += hit;
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace

TEST_CASE("stopped green function") {
  CHECK(green_stopped(Point(3), Point(3), 0) == 1.0);
  CHECK(green_stopped(Point(3), Point::unit(3, 0), 1) == doctest::Approx(1.0 / 6).epsilon(1e-15));
  double prev = 0;
  for (std::int64_t n : {0, 2, 10, 50, 200}) {
    const double v = green_stopped(Point(3), Point(3), n);
    CHECK(v > prev);
    CHECK(v < kG0);
    prev = v;
  }
  const Point x{1, -2, 0}, y{3, 1, 1};
  const double a = green_stopped(x, y, 40);
  CHECK(green_stopped(y, x, 40) == a);
  CHECK(green_stopped(Point(3), y - x, 40) == a);
  CHECK_THROWS_AS(green_stopped(Point(3), Point(3), max_stopped_horizon() + 1), Error);
}

TEST_CASE("quadrature against the stopped sum") {
  CHECK(green_inf(Point(3)) == doctest::Approx(kG0).epsilon(1e-10));
  // Origin: the n = 10^4 partial sum plus its local-CLT tail.
  const auto e = green_extrapolated(Point(3), 10000);
  CHECK(std::abs(e.value - kG0) < 1e-3);
  CHECK(e.partial_sum < kG0);
  for (const Point& v : {Point{1, 0, 0}, Point{1, 2, 0}, Point{2, 2, 1}}) {
    const auto ex = green_extrapolated(v, 2000);
    CHECK(std::abs(ex.value - green_inf(v)) < 1e-4);
  }
  CHECK(green_inf(Point::unit(3, 0)) == doctest::Approx(kG0 - 1).epsilon(1e-10));
}

TEST_CASE("green table symmetry and shape") {
  auto& g = table3();
  const double a = g.get(Point{1, 2, 0});
  CHECK(g.get(Point{2, 1, 0}) == a);
  CHECK(g.get(Point{0, -1, -2}) == a);
  CHECK(g.get(Point(3)) > a);
  // g(0, r e_1) r approaches a constant, monotonically and within 5% per step.
  double prev = 0;
  for (Coord r : {5, 10, 20}) {
    const double v = g.get(Point::unit(3, 0, r)) * static_cast<double>(r);
    if (prev > 0) {
      CHECK(v < prev);
      CHECK(std::abs(v / prev - 1) < 0.05);
    }
    prev = v;
  }
  CHECK(prev == doctest::Approx(3 / (2 * M_PI)).epsilon(0.01));
  // g(0,x)(1 + |x|) stays within fixed bounds on 1 <= |x| <= 30.
  double lo = 1e9, hi = 0;
  for (Coord r = 1; r <= 30; ++r)
    for (const Point& v : {Point{r, 0, 0}, Point{r, r, 0}, Point{r, r / 2, 1}}) {
      const double s = g.get(v) * (1 + norm(v, Norm::L2));
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  CHECK(lo > 0.4);
  CHECK(hi < 1.1);
}

TEST_CASE("green cache round trip") {
  GreenTable g(3);
  g.ensure_extents({3, 3, 3});
  const auto path = std::filesystem::temp_directory_path() / "interlace_green_test.bin";
  g.save(path.string());
  GreenTable h(3);
  CHECK(h.load(path.string()));
  CHECK(h(Point{3, 1, 2}) == g(Point{3, 1, 2}));
  GreenTable other(4);
  CHECK_FALSE(other.load(path.string()));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(GreenTable(3)(Point{9, 9, 9}), Error);
}

TEST_CASE("capacities of small sets") {
  auto& g = table3();
  const auto point = equilibrium(std::vector<Point>{Point(3)}, g);
  CHECK(point.cap == doctest::Approx(1 / kG0).epsilon(1e-9));
  CHECK(point.cap == doctest::Approx(0.65946).epsilon(1e-5));
  const auto pair = equilibrium(std::vector<Point>{Point(3), Point::unit(3, 0)}, g);
  CHECK(pair.cap == doctest::Approx(2 / (kG0 + (kG0 - 1))).epsilon(1e-9));

  // Boundary-only solve against the full solve, and the last-exit system on all of A.
  for (Coord r : {1, 2}) {
    const Domain b = Domain::ball(Point(3), r);
    const auto full = equilibrium(b, g, {.boundary_only = false, .use_symmetry = false});
    const auto bd = equilibrium(b, g);
    CHECK(bd.cap == doctest::Approx(full.cap).epsilon(1e-8));
    for (const Point& x : b.sites()) {
      double s = 0;
      for (std::size_t i = 0; i < bd.sites.size(); ++i) s += g.get(bd.sites[i] - x) * bd.mass[i];
      CHECK(s == doctest::Approx(1.0).epsilon(1e-8));
      CHECK(bd.mass_at(x) >= 0);
    }
  }
  CHECK(equilibrium(Domain::ball(Point(3), 3), g).cap > equilibrium(Domain::ball(Point(3), 2), g).cap);

  // cap(S_k) ln k / k stays within a factor 2 over k = 8..64.
  double lo = 1e9, hi = 0;
  for (Coord k : {8, 16, 32, 64}) {
    std::vector<Point> seg;
    for (Coord i = 0; i <= k; ++i) seg.push_back(Point::unit(3, 0, i));
    const double r = equilibrium(seg, g).cap * std::log(static_cast<double>(k)) / static_cast<double>(k);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  CHECK(hi / lo < 2);
  CHECK_THROWS_AS(equilibrium(std::vector<Point>{}, g), Error);
}

TEST_CASE("capacity by escape frequency") {
  auto& g = table3();
  const auto mc = capacity_mc({Point(3)}, 20000, 30, 4, g);
  CHECK(std::abs(mc.estimate - 1 / kG0) <= 3 * mc.std_error + mc.bias_bound);
  const auto b2 = equilibrium(Domain::ball(Point(3), 2), g);
  const auto mc2 = capacity_mc(Domain::ball(Point(3), 2).sites(), 4000, 30, 5, g);
  CHECK(std::abs(mc2.estimate - b2.cap) <= 3 * mc2.std_error + mc2.bias_bound);
}

TEST_CASE("slice masses of the sausage") {
  auto& g = table3();
  const Coord n = 64;
  const Coord r = sausage_radius(n, 0.3);
  const auto eq = equilibrium(Domain::sausage(3, n, 0.3), g);
  const auto slices = slice_masses(eq);
  for (Coord k = -r + 1; k <= n + r - 1; ++k)
    CHECK(slices.at(k) == doctest::Approx(slices.at(n - k)).epsilon(1e-8));
  CHECK(equilibrium_slice_mass(n, 0.3, n / 2, g) > 0);
  const double first = equilibrium_slice_mass(32, 0.3, 16, g) * std::log(32.0);
  for (Coord m : {64, 128})
    CHECK(equilibrium_slice_mass(m, 0.3, m / 2, g) * std::log(static_cast<double>(m)) >= 0.5 * first);
}

TEST_CASE("exact hitting probabilities") {
  auto& g = table3();
  const std::vector<Point> origin{Point(3)};
  CHECK(hit_prob_exact(Point(3), origin, 0, g).value == 1.0);
  CHECK(hit_prob_exact(Point(3), origin, std::nullopt, g).value == 1.0);
  const auto inf = hit_prob_exact(Point::unit(3, 0), origin, std::nullopt, g);
  CHECK(std::abs(inf.value - green_inf(Point::unit(3, 0)) / kG0) <= inf.error_bound + 1e-9);
  const double four = enumerate_hit(Point::unit(3, 0, 2), origin, 4);
  CHECK(four == doctest::Approx(58.0 / 1296).epsilon(1e-15));
  CHECK(hit_prob_exact(Point::unit(3, 0, 2), origin, 4, g).value == doctest::Approx(four).epsilon(1e-13));
  const std::vector<Point> corner{Point(3), Point::unit(3, 0), Point::unit(3, 1)};
  CHECK(hit_prob_exact(Point{2, 1, 0}, corner, 5, g).value ==
        doctest::Approx(enumerate_hit(Point{2, 1, 0}, corner, 5)).epsilon(1e-13));
}

TEST_CASE("sandwich brackets the exact value") {
  auto& g = table3();
  const auto single = hit_sandwich(Point{3, 1, 0}, {Point(3)}, std::nullopt, g);
  CHECK(single.lower == doctest::Approx(green_inf(Point{3, 1, 0}) / kG0).epsilon(1e-9));
  CHECK(single.upper == doctest::Approx(single.lower).epsilon(1e-12));
  const auto inside = hit_sandwich(Point(3), {Point(3)}, 7, g);
  CHECK(inside.lower == 1.0);
  CHECK(inside.upper == 1.0);

  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> in3(-3, 3), in6(-6, 6), horizon(0, 3);
  int checked = 0;
  while (checked < 40) {
    std::vector<Point> set;
    while (set.size() < 5) {
      const Point p{in3(rng), in3(rng), in3(rng)};
      if (std::find(set.begin(), set.end(), p) == set.end()) set.push_back(p);
    }
    const Point x{in6(rng), in6(rng), in6(rng)};
    if (std::find(set.begin(), set.end(), x) != set.end()) continue;
    const int h = horizon(rng);
    const Horizon n = h == 0 ? Horizon{} : Horizon{4 * h};
    const auto b = hit_sandwich(x, set, n, g);
    const auto e = hit_prob_exact(x, set, n, g);
    CHECK(b.lower <= e.value + e.error_bound + 1e-12);
    CHECK(e.value - e.error_bound <= b.upper + 1e-12);
    CHECK(0 <= b.lower);
    CHECK(b.lower <= b.upper);
    ++checked;
  }
}

TEST_CASE("shape bounds") {
  std::vector<Point> seg;
  for (Coord i = 0; i < 5; ++i) seg.push_back(Point{i, 0, 0, 0});
  // Diameter 4 seen from l-infinity distance 4 * 4 = 16: shape 4 / 16^2.
  const auto s = hit_lower_diam(Point{0, 16, 0, 0}, seg, std::nullopt);
  CHECK(s.shape == doctest::Approx(4.0 / 256));
  const auto ball2 = Domain::ball(Point(3), 2).sites();
  // l(x, A) is the farthest site, 12 away.
  const auto v = hit_lower_volume(Point::unit(3, 0, 10), ball2, std::nullopt);
  CHECK(ball2.size() == 125);
  CHECK(v.shape == doctest::Approx(std::cbrt(125.0) / 12));
  CHECK_THROWS_AS(hit_lower_diam(Point::unit(3, 1, 9), {Point(3), Point::unit(3, 0, 2)}, std::nullopt), Error);
  CHECK_THROWS_AS(hit_lower_diam(Point::unit(3, 1, 9), {Point(3)}, std::nullopt), Error);
  CHECK_THROWS_AS(hit_lower_volume(Point::unit(3, 0, 10), ball2, 10), Error);
  CHECK(is_connected(seg));
  CHECK_FALSE(is_connected({Point(3), Point{1, 1, 0}}));
}
