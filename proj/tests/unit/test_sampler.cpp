#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "interlace/equilibrium.hpp"
#include "interlace/error.hpp"
#include "interlace/green.hpp"
#include "interlace/sampler.hpp"

using namespace interlace;

namespace {

GreenTable& table3() {
  static GreenTable g(3);
  return g;
}


}  // namespace

TEST_CASE("poisson variates") {
  RngStream rng({1, 0, 0});
  CHECK(sample_count(0.0, 12.5, rng) == 0);
  for (double lambda : {3.0, 10.0, 80.0}) {
    const int n = 100000;
    std::vector<std::uint64_t> xs(n);
    double s = 0;
    for (auto& x : xs) s += static_cast<double>(x = sample_poisson(lambda, rng));
    CHECK(std::abs(s / n - lambda) <= 4 * std::sqrt(lambda / n));
    CHECK(ks_poisson(xs, lambda).pass);
    CHECK_FALSE(ks_poisson(xs, lambda * 1.05).pass);
  }
}

TEST_CASE("nested counts have independent increments") {
  // 2x2 contingency of count(u1) against the increment, split at the medians.
  RngStream rng({2, 0, 0});
  const int n = 20000;
  const double cap = 10;
  std::array<std::array<double, 2>, 2> table{};
  double inc_sum = 0;
  for (int i = 0; i < n; ++i) {
    const auto c = nested_counts({0.5, 1.5}, cap, rng);
    CHECK(c[1] >= c[0]);
    const auto inc = c[1] - c[0];
    inc_sum += static_cast<double>(inc);
    ++table[c[0] > 5][inc > 10];
  }
  CHECK(std::abs(inc_sum / n - 10) <= 4 * std::sqrt(10.0 / n));
  double chi = 0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const double e = (table[a][0] + table[a][1]) * (table[0][b] + table[1][b]) / n;
      chi += (table[a][b] - e) * (table[a][b] - e) / e;
    }
  CHECK(chi < 6.635);  // 1% quantile of chi2(1)
}

TEST_CASE("labels are arrival times") {
  const auto labels = trajectory_labels(2.0, 30.0, 9, 4);
  CHECK(std::is_sorted(labels.begin(), labels.end()));
  CHECK(labels == trajectory_labels(2.0, 30.0, 9, 4));
  for (double l : labels) CHECK((l >= 0 && l <= 2.0));
  // The labels up to 1 are a prefix of the labels up to 2 with the same seed.
  const auto low = trajectory_labels(1.0, 30.0, 9, 4);
  CHECK(std::equal(low.begin(), low.end(), labels.begin()));
  std::vector<std::uint64_t> counts;
  for (std::uint64_t r = 0; r < 5000; ++r) counts.push_back(trajectory_labels(0.5, 20.0, 3, r).size());
  CHECK(ks_poisson(counts, 10.0).pass);
}

TEST_CASE("alias table") {
  const std::vector<double> w{1, 0, 3, 6};
  const AliasTable t(w);
  RngStream rng({3, 0, 0});
  const int n = 100000;
  std::array<double, 4> cnt{};
  for (int i = 0; i < n; ++i) ++cnt[t.sample(rng)];
  CHECK(cnt[1] == 0);
  double chi = 0;
  for (int k : {0, 2, 3}) {
    const double e = n * w[k] / 10;
    chi += (cnt[k] - e) * (cnt[k] - e) / e;
  }
  CHECK(chi < 9.21);  // 1% quantile of chi2(2)
  CHECK_THROWS_AS(AliasTable(std::vector<double>{}), Error);
}

TEST_CASE("equilibrium starts") {
  auto& g = table3();
  RngStream rng({4, 0, 0});
  const auto one = equilibrium(std::vector<Point>{Point{2, 2, 2}}, g);
  for (int i = 0; i < 10; ++i) CHECK(sample_start(one, rng) == Point{2, 2, 2});

  const auto pair = equilibrium(std::vector<Point>{Point(3), Point::unit(3, 0)}, g);
  int first = 0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) first += sample_start(pair, rng) == Point(3);
  CHECK(std::abs(first - n / 2.0) <= 4 * std::sqrt(n / 4.0));

  // Faces of B(5): the six face counts agree within 4 sigma.
  const auto b5 = equilibrium(Domain::ball(Point(3), 5), g);
  const StartSampler starts(b5);
  std::array<double, 6> face{};
  const int m = 100000;
  for (int i = 0; i < m; ++i) {
    const Point& p = starts.sample(rng);
    for (int a = 0; a < 3; ++a) {
      face[2 * a] += p[a] == 5;
      face[2 * a + 1] += p[a] == -5;
    }
  }
  const double mean = (face[0] + face[1] + face[2] + face[3] + face[4] + face[5]) / 6;
  for (double f : face) CHECK(std::abs(f - mean) <= 4 * std::sqrt(2 * mean));

  // Chi-square of starts against e_A / cap on the boundary of B(2).
  const auto b2 = equilibrium(Domain::ball(Point(3), 2), g);
  const StartSampler s2(b2);
  std::map<Point, double> seen;
  const int k = 50000;
  for (int i = 0; i < k; ++i) ++seen[s2.sample(rng)];
  double chi = 0;
  int cells = 0;
  for (std::size_t i = 0; i < b2.sites.size(); ++i) {
    if (b2.mass[i] <= 0) continue;
    const double e = k * b2.mass[i] / b2.cap;
    chi += (seen[b2.sites[i]] - e) * (seen[b2.sites[i]] - e) / e;
    ++cells;
  }
  // Wilson-Hilferty 1% upper quantile of chi2(cells - 1).
  const double df = cells - 1;
  const double q = df * std::pow(1 - 2 / (9 * df) + 2.326 * std::sqrt(2 / (9 * df)), 3);
  CHECK(chi < q);
}

TEST_CASE("field invariants") {
  auto& g = table3();
  const Domain w = Domain::ball(Point(3), 6);
  FieldOptions opt;
  opt.keep_paths = true;
  const FieldSampler sampler(w, g, opt);
  CHECK(sampler.sample(0.0, 1, 0).sites(0.0).empty());

  const auto f = sampler.sample(2.0, 5, 1);
  CHECK(f.trajectories().size() == f.count_at(2.0));
  // Every listed visit is real, and every visit inside the enlarged window is listed.
  std::set<std::pair<Point, std::uint64_t>> from_paths;
  for (std::size_t j = 0; j < f.trajectories().size(); ++j) {
    const auto& t = f.trajectories()[j];
    StoppedPath p{t.start, t.steps, t.kill, t.length};
    for (const auto& s : p.sites())
      if (f.enlarged().contains(s)) from_paths.insert({s, j});
  }
  std::set<std::pair<Point, std::uint64_t>> listed;
  bool saturated = false;
  for (const auto& s : f.sites(2.0)) {
    CHECK(f.enlarged().contains(s));
    saturated |= f.saturated(f.indexer().index(s));
    for (const auto& v : f.visits(s)) listed.insert({s, v.trajectory});
  }
  for (const auto& e : listed) CHECK(from_paths.count(e) == 1);
  if (!saturated) CHECK(listed.size() == from_paths.size());

  // Monotone coupling across levels.
  for (double u : {0.25, 0.5, 1.0}) {
    const auto lo = f.sites(u / 2), hi = f.sites(u);
    CHECK(std::includes(hi.begin(), hi.end(), lo.begin(), lo.end()));
  }
  // Reproducibility and the file round trip.
  const auto again = sampler.sample(2.0, 5, 1);
  CHECK(again.sites(2.0) == f.sites(2.0));
  const auto path = std::filesystem::temp_directory_path() / "interlace_field_test.bin";
  f.save(path.string());
  const auto back = OccupancyField::load(path.string());
  std::filesystem::remove(path);
  CHECK(back.pairs(1.0) == f.pairs(1.0));
  CHECK(back.kill_radius() == f.kill_radius());
  CHECK(back.bias_budget() == f.bias_budget());
}

TEST_CASE("kill radius and bias budget") {
  auto& g = table3();
  const Domain w = Domain::ball(Point(3), 5);
  Coord prev_r = 0;
  double prev_b = 1e9;
  for (double eps : {0.5, 0.1, 0.02}) {
    FieldOptions opt;
    opt.kill_eps = eps;
    const FieldSampler s(w, g, opt);
    CHECK(s.return_bound() <= eps);
    CHECK(s.kill_radius() >= prev_r);
    const double b = s.sample(1.0, 1, 0).bias_budget();
    CHECK(b <= prev_b);
    prev_r = s.kill_radius();
    prev_b = b;
  }
  CHECK_THROWS_AS(kill_radius_for(100.0, 10, 1e-9, g, 11, 40), Error);
}

TEST_CASE("trajectory count on B(20)") {
  auto& g = table3();
  FieldOptions opt;
  opt.lambda = 0;
  const FieldSampler s(Domain::ball(Point(3), 20), g, opt);
  const double lambda = s.equilibrium().cap;
  const auto n = static_cast<double>(s.sample_starts(1.0, 3, 0).size());
  CHECK(std::abs(n - lambda) <= 2.576 * std::sqrt(lambda));
}

TEST_CASE("vacancy of a point") {
  auto& g = table3();
  const Domain w = Domain::ball(Point(3), 2);
  const auto rep = vacancy_check({Point(3)}, {1.0, 20.0}, w, 3000, 6, g);
  CHECK(rep.cap_set == doctest::Approx(1 / 1.516386059151978).epsilon(1e-9));
  const auto& l1 = rep.levels[0];
  CHECK(l1.target == doctest::Approx(std::exp(-rep.cap_set)));
  CHECK(l1.target == doctest::Approx(0.5172).epsilon(1e-4));
  CHECK(std::abs(l1.corrected - l1.target) <= 3 * l1.corrected_stderr + l1.corrected_bias);
  CHECK(l1.frequency >= l1.corrected - 3 * std::sqrt(l1.target * (1 - l1.target) / 3000));
  CHECK(rep.levels[1].vacant == 0);
}

TEST_CASE("sausage slice counts") {
  auto& g = table3();
  const Coord n = 64;
  const double a = 0.3;
  FieldOptions opt;
  opt.lambda = 0;
  const FieldSampler s(Domain::sausage(3, n, a), g, opt);
  const auto& eq = s.equilibrium();
  const auto slices = sausage_slices(3, n, a);
  // Starts form a Poisson process of intensity u e_A, so slice k is empty with
  // probability exp(-u e_A(U_k)); "nonempty" events are increasing, hence
  // positively correlated, and P[all nonempty] is at least the product.
  std::vector<double> empty_prob;
  double product = 1;
  for (std::size_t k = 0; k < slices.size(); ++k) {
    double m = 0;
    for (std::size_t i = 0; i < eq.sites.size(); ++i)
      if (slices[k].contains(eq.sites[i])) m += eq.mass[i];
    empty_prob.push_back(std::exp(-m));
    if (k > 0 && k + 1 < slices.size()) product *= 1 - empty_prob.back();
  }
  std::vector<int> empty(slices.size(), 0);
  int all_positive = 0;
  double left = 0, right = 0;
  const int reps = 2000;
  for (int r = 0; r < reps; ++r) {
    const auto starts = s.sample_starts(1.0, 8, static_cast<std::uint64_t>(r));
    const auto counts = slice_start_counts(starts, 1.0, 3, n, a);
    REQUIRE(counts.size() == slices.size());
    std::int64_t total = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      total += counts[k];
      empty[k] += counts[k] == 0;
    }
    // Centres can sit 3 apart with radius 3, so a start lies in up to three slices.
    CHECK(total <= 3 * static_cast<std::int64_t>(starts.size()));
    all_positive += *std::min_element(counts.begin() + 1, counts.end() - 1) > 0;
    for (const auto& [label, p] : starts) {
      if (2 * p[0] < n) left += 1;
      if (2 * p[0] > n) right += 1;
    }
  }
  for (std::size_t k = 0; k < slices.size(); ++k) {
    const double q = empty_prob[k];
    CHECK(std::abs(empty[k] / double(reps) - q) <= 4 * std::sqrt(q * (1 - q) / reps));
  }
  const double f = all_positive / double(reps);
  CHECK(f >= product - 3 * std::sqrt(product * (1 - product) / reps));
  CHECK(std::abs(left - right) <= 4 * std::sqrt(left + right));
}
