#include "interlace/green.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "interlace/error.hpp"

namespace interlace {

namespace {

// Double-exponential substitution t = exp(pi/2 sinh s) on s in [-S, S].
constexpr double kDeRange = 5.25;
constexpr std::uint64_t kCacheMagic = 0x31455245454e5247ULL;  // "GRNEERE1"

std::vector<double> bessel_series(int max_order, double s) {
  // Direct power series; used for s < 1 where it converges in a few terms.
  std::vector<double> out(static_cast<std::size_t>(max_order) + 1, 0.0);
  const double half = 0.5 * s;
  const double q = half * half;
  for (int k = 0; k <= max_order; ++k) {
    double term = s > 0 ? std::exp(k * std::log(half) - std::lgamma(k + 1.0)) : (k == 0 ? 1.0 : 0.0);
    if (term == 0.0) break;
    double sum = term;
    for (int m = 1; m < 60; ++m) {
      term *= q / (m * static_cast<double>(m + k));
      sum += term;
      if (term < 1e-18 * sum) break;
    }
    out[static_cast<std::size_t>(k)] = sum * std::exp(-s);
  }
  return out;
}

std::vector<double> bessel_asymptotic(int max_order, double s) {
  // Hankel expansion e^{-s} I_k(s) ~ (2 pi s)^{-1/2} sum_j (-1)^j a_j(k) / s^j.
  std::vector<double> out(static_cast<std::size_t>(max_order) + 1);
  const double lead = 1.0 / std::sqrt(2.0 * std::numbers::pi * s);
  for (int k = 0; k <= max_order; ++k) {
    const double mu = 4.0 * k * static_cast<double>(k);
    double term = 1.0, sum = 1.0;
    for (int j = 1; j < 40; ++j) {
      const double odd = 2.0 * j - 1.0;
      term *= -(mu - odd * odd) / (8.0 * j * s);
      sum += term;
      if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    out[static_cast<std::size_t>(k)] = lead * sum;
  }
  return out;
}

std::vector<double> bessel_miller(int max_order, double s) {
  // Backward recurrence I_{k-1} = (2k/s) I_k + I_{k+1}, normalised by
  // e^{-s}(I_0 + 2 sum_{k>=1} I_k) = 1.
  const int start = max_order + 30 + static_cast<int>(std::ceil(std::sqrt(100.0 * s)));
  std::vector<double> out(static_cast<std::size_t>(max_order) + 1, 0.0);
  double next = 0.0, cur = 1e-280, total = 0.0;
  for (int k = start; k >= 1; --k) {
    const double prev = (2.0 * k / s) * cur + next;
    if (k <= max_order) out[static_cast<std::size_t>(k)] = cur;
    total += 2.0 * cur;
    next = cur;
    cur = prev;
    if (cur > 1e250) {
      for (auto& v : out) v *= 1e-250;
      total *= 1e-250;
      next *= 1e-250;
      cur *= 1e-250;
    }
  }
  out[0] = cur;
  total += cur;
  for (auto& v : out) v /= total;
  return out;
}

// log k! for k = 0..n.
std::vector<double> log_factorials(std::int64_t n) {
  std::vector<double> lf(static_cast<std::size_t>(n) + 2);
  lf[0] = 0.0;
  for (std::size_t k = 1; k < lf.size(); ++k) lf[k] = lf[k - 1] + std::log(static_cast<double>(k));
  return lf;
}

struct QuadratureRule {
  std::vector<double> arg;     // t / d at each node
  std::vector<double> weight;  // dt/ds * h
};

QuadratureRule de_rule(int dim, double h) {
  QuadratureRule r;
  const int half = static_cast<int>(std::lround(kDeRange / h));
  for (int j = -half; j <= half; ++j) {
    const double s = j * h;
    const double e = std::numbers::pi / 2 * std::sinh(s);
    const double t = std::exp(e);
    r.arg.push_back(t / dim);
    r.weight.push_back(h * t * std::numbers::pi / 2 * std::cosh(s));
  }
  return r;
}

// Bessel table for every node of a rule: row j holds e^{-s_j} I_k(s_j), k <= max_order.
std::vector<std::vector<double>> node_bessels(const QuadratureRule& rule, int max_order) {
  std::vector<std::vector<double>> rows;
  rows.reserve(rule.arg.size());
  for (double s : rule.arg) rows.push_back(scaled_bessel_i(max_order, s));
  return rows;
}

}  // namespace

std::vector<double> scaled_bessel_i(int max_order, double s) {
  if (max_order < 0) throw Error(ErrorCode::OutOfRange, "negative Bessel order");
  if (s < 0) throw Error(ErrorCode::OutOfRange, "negative Bessel argument");
  if (s < 1.0) return bessel_series(max_order, s);
  if (s > 2000.0 + 8.0 * max_order * static_cast<double>(max_order))
    return bessel_asymptotic(max_order, s);
  return bessel_miller(max_order, s);
}

Point canonical_displacement(const Point& v) {
  Point out(v.dim());
  std::array<Coord, kMaxDim> a{};
  for (int i = 0; i < v.dim(); ++i) a[i] = v[i] < 0 ? -v[i] : v[i];
  std::sort(a.begin(), a.begin() + v.dim());
  for (int i = 0; i < v.dim(); ++i) out[i] = a[i];
  return out;
}

GreenTable::GreenTable(int dim, double tol) : d_(dim), tol_(tol), bits_(64 / dim) {
  if (dim < 3 || dim > kMaxDim) throw Error(ErrorCode::OutOfRange, "Green table needs 3 <= d <= 8");
  if (!(tol > 0)) throw Error(ErrorCode::OutOfRange, "tolerance must be positive");
}

std::uint64_t GreenTable::key(const Point& displacement) const {
  const Point c = canonical_displacement(displacement);
  const Coord limit = (Coord{1} << bits_) - 1;
  std::uint64_t k = 0;
  for (int i = 0; i < d_; ++i) {
    if (c[i] > limit) throw Error(ErrorCode::OutOfRange, "displacement too large for Green key");
    k |= static_cast<std::uint64_t>(c[i]) << (bits_ * i);
  }
  return k;
}

Point GreenTable::unkey(std::uint64_t key) const {
  Point p(d_);
  const std::uint64_t mask = (std::uint64_t{1} << bits_) - 1;
  for (int i = 0; i < d_; ++i) p[i] = static_cast<Coord>((key >> (bits_ * i)) & mask);
  return p;
}

void GreenTable::ensure(const std::vector<Point>& displacements) {
  std::vector<std::uint64_t> missing;
  for (const auto& v : displacements) {
    const auto k = key(v);
    if (!values_.contains(k)) missing.push_back(k);
  }
  std::sort(missing.begin(), missing.end());
  missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
  if (!missing.empty()) compute(missing);
}

void GreenTable::ensure_extents(const std::vector<Coord>& extents) {
  if (static_cast<int>(extents.size()) != d_) throw Error(ErrorCode::OutOfRange, "extent count != d");
  std::vector<Coord> e = extents;
  for (auto& x : e) x = x < 0 ? -x : x;
  std::sort(e.begin(), e.end());
  // Sorted tuples c_0 <= ... <= c_{d-1} with c_i <= e_i are exactly the
  // canonical forms of displacements inside the extents.
  std::vector<std::uint64_t> missing;
  Point c(d_);
  auto rec = [&](auto&& self, int i, Coord lo) -> void {
    if (i == d_) {
      const auto k = key(c);
      if (!values_.contains(k)) missing.push_back(k);
      return;
    }
    for (Coord v = lo; v <= e[static_cast<std::size_t>(i)]; ++v) {
      c[i] = v;
      self(self, i + 1, v);
    }
  };
  rec(rec, 0, 0);
  if (!missing.empty()) compute(missing);
}

void GreenTable::compute(const std::vector<std::uint64_t>& keys) {
  // Far displacements make the integrand oscillate less smoothly in s, so
  // keys whose estimate misses tol are retried on a finer node set.
  std::vector<std::uint64_t> pending = keys;
  double worst = 0.0;
  Point worst_at(d_);
  for (double h = 1.0 / 32; h >= 1.0 / 256 && !pending.empty(); h /= 2) {
    Coord max_coord = 0;
    for (auto k : pending) max_coord = std::max(max_coord, unkey(k)[d_ - 1]);
    const QuadratureRule rule = de_rule(d_, h);
    const auto bessel = node_bessels(rule, static_cast<int>(max_coord));
    const std::size_t nodes = rule.arg.size();
    const std::size_t mid = nodes / 2;  // even offsets from the middle form the 2h rule

    std::vector<std::uint64_t> failed;
    worst = 0.0;
    for (auto k : pending) {
      const Point c = unkey(k);
      double fine = 0.0, coarse = 0.0;
      for (std::size_t j = 0; j < nodes; ++j) {
        const auto& row = bessel[j];
        double prod = rule.weight[j];
        for (int i = 0; i < d_; ++i) prod *= row[static_cast<std::size_t>(c[i])];
        fine += prod;
        if ((j + mid) % 2 == 0) coarse += 2.0 * prod;
      }
      const double err = std::abs(fine - coarse);
      if (err > tol_) {
        failed.push_back(k);
        if (err > worst) {
          worst = err;
          worst_at = c;
        }
        continue;
      }
      max_error_ = std::max(max_error_, err);
      values_[k] = fine;
    }
    pending = std::move(failed);
  }
  if (!pending.empty())
    throw Error(ErrorCode::QuadBudget, "quadrature error " + std::to_string(worst) +
                                           " above tolerance at " + worst_at.str());
}

bool GreenTable::contains(const Point& displacement) const { return values_.contains(key(displacement)); }

double GreenTable::operator()(const Point& displacement) const {
  const auto it = values_.find(key(displacement));
  if (it == values_.end())
    throw Error(ErrorCode::OutOfRange, "Green value not tabulated for " + displacement.str());
  return it->second;
}

double GreenTable::get(const Point& displacement) {
  const auto k = key(displacement);
  if (auto it = values_.find(k); it != values_.end()) return it->second;
  compute({k});
  return values_.at(k);
}

void GreenTable::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::FormatError, "cannot write Green cache " + path);
  auto put = [&](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
  put(kCacheMagic);
  put(static_cast<std::uint32_t>(d_));
  put(static_cast<std::uint32_t>(method()));
  put(tol_);
  put(static_cast<std::uint64_t>(values_.size()));
  std::vector<std::pair<std::uint64_t, double>> rows(values_.begin(), values_.end());
  std::sort(rows.begin(), rows.end());
  for (const auto& [k, v] : rows) {
    put(k);
    put(v);
  }
}

bool GreenTable::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  auto get = [&](auto& v) { return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof v)); };
  std::uint64_t magic = 0, count = 0;
  std::uint32_t dim = 0, method_id = 0;
  double tol = 0;
  if (!get(magic) || magic != kCacheMagic) throw Error(ErrorCode::FormatError, "not a Green cache: " + path);
  if (!get(dim) || !get(method_id) || !get(tol) || !get(count))
    throw Error(ErrorCode::FormatError, "truncated Green cache header: " + path);
  if (static_cast<int>(dim) != d_ || method_id != static_cast<std::uint32_t>(method()) || tol != tol_)
    return false;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t k;
    double v;
    if (!get(k) || !get(v)) throw Error(ErrorCode::FormatError, "truncated Green cache body: " + path);
    values_[k] = v;
  }
  return true;
}

double green_inf(const Point& x, double tol) {
  const int d = x.dim();
  const Point c = canonical_displacement(x);
  const int order = static_cast<int>(c[d - 1]);
  auto integrate = [&](double h) {
    const QuadratureRule rule = de_rule(d, h);
    double sum = 0.0;
    for (std::size_t j = 0; j < rule.arg.size(); ++j) {
      const auto row = scaled_bessel_i(order, rule.arg[j]);
      double prod = rule.weight[j];
      for (int i = 0; i < d; ++i) prod *= row[static_cast<std::size_t>(c[i])];
      sum += prod;
    }
    return sum;
  };
  double h = 0.25;
  double prev = integrate(h);
  for (int level = 0; level < 6; ++level) {
    h /= 2;
    const double cur = integrate(h);
    if (std::abs(cur - prev) <= tol) return cur;
    prev = cur;
  }
  throw Error(ErrorCode::QuadBudget, "quadrature did not reach tolerance for " + x.str());
}

DenseGreen::DenseGreen(GreenTable& table, const std::vector<Coord>& extents) : d_(table.dim()) {
  if (static_cast<int>(extents.size()) != d_) throw Error(ErrorCode::OutOfRange, "extent count != d");
  table.ensure_extents(extents);
  std::size_t size = 1;
  for (int i = d_ - 1; i >= 0; --i) {
    stride_[i] = size;
    size *= static_cast<std::size_t>(extents[static_cast<std::size_t>(i)]) + 1;
  }
  if (size > (std::size_t{1} << 26)) throw Error(ErrorCode::DpBudget, "dense Green view too large");
  values_.resize(size);
  Point v(d_);
  for (std::size_t idx = 0; idx < size; ++idx) {
    std::size_t rest = idx;
    for (int i = 0; i < d_; ++i) {
      v[i] = static_cast<Coord>(rest / stride_[i]);
      rest %= stride_[i];
    }
    values_[idx] = table(v);
  }
}

std::int64_t max_stopped_horizon() noexcept { return 200000; }

std::vector<double> transition_probabilities(const Point& v, std::int64_t n) {
  if (n < 0) throw Error(ErrorCode::OutOfRange, "horizon must be >= 0");
  if (n > max_stopped_horizon())
    throw Error(ErrorCode::DpBudget, "horizon " + std::to_string(n) + " above DP budget");
  const int d = v.dim();
  const auto lf = log_factorials(n);
  const double ln2 = std::numbers::ln2;
  const auto N = static_cast<std::size_t>(n);

  // 1-d walk: P[S_j = a] = C(j, (j+a)/2) 2^{-j}.
  auto one_d = [&](std::int64_t j, Coord a) {
    if (a < 0) a = -a;
    if (a > j || ((j + a) & 1)) return 0.0;
    const auto up = static_cast<std::size_t>((j + a) / 2), down = static_cast<std::size_t>((j - a) / 2);
    return std::exp(lf[static_cast<std::size_t>(j)] - lf[up] - lf[down] - static_cast<double>(j) * ln2);
  };

  // q[m]: probability that the walk restricted to the last `level` axes, run
  // for m of its own steps, sits at the matching coordinates of v.
  std::vector<double> q(N + 1), next(N + 1);
  for (std::size_t m = 0; m <= N; ++m) q[m] = one_d(static_cast<std::int64_t>(m), v[d - 1]);
  for (int level = 2; level <= d; ++level) {
    const double p = 1.0 / level, lp = std::log(p), lq = std::log1p(-p);
    const Coord a = v[d - level];
    std::vector<double> axis(N + 1);
    for (std::size_t j = 0; j <= N; ++j) axis[j] = one_d(static_cast<std::int64_t>(j), a);
    for (std::size_t m = 0; m <= N; ++m) {
      // Binomial(m, p) mass beyond 12 standard deviations is negligible.
      const double mean = static_cast<double>(m) * p;
      const double width = 12.0 * std::sqrt(mean * (1 - p)) + 12.0;
      const auto lo = static_cast<std::size_t>(std::max(0.0, std::floor(mean - width)));
      const auto hi = std::min(m, static_cast<std::size_t>(std::ceil(mean + width)));
      double sum = 0.0;
      for (std::size_t j = lo; j <= hi; ++j) {
        if (axis[j] == 0.0 || q[m - j] == 0.0) continue;
        const double binom = std::exp(lf[m] - lf[j] - lf[m - j] + static_cast<double>(j) * lp +
                                      static_cast<double>(m - j) * lq);
        sum += binom * axis[j] * q[m - j];
      }
      next[m] = sum;
    }
    std::swap(q, next);
  }
  return q;
}

double green_stopped(const Point& x, const Point& y, std::int64_t n) {
  const auto probs = transition_probabilities(canonical_displacement(y - x), n);
  double sum = 0.0;
  for (double p : probs) sum += p;
  return sum;
}

namespace {

// Local-CLT tail: the integral over k >= k0 of (d / 2 pi k)^{d/2} exp(-d r^2 / 2k).
double clt_tail(int d, double r2, double k0) {
  const double half = d / 2.0;
  const double pref = std::pow(d / (2.0 * std::numbers::pi), half);
  const double s = half - 1.0;
  if (r2 == 0.0) return pref * std::pow(k0, -s) / s;
  const double a = d * r2 / 2.0;
  const double z = a / k0;
  // Lower incomplete gamma: gamma(s, z) = z^s sum_m (-z)^m / (m! (s + m)).
  long double term = 1.0L, sum = 1.0L / s;
  for (int m = 1; m < 400; ++m) {
    term *= -z / m;
    const long double add = term / (s + m);
    sum += add;
    if (std::abs(static_cast<double>(add)) < 1e-18 * std::abs(static_cast<double>(sum))) break;
  }
  return pref * std::pow(a, -s) * std::pow(z, s) * static_cast<double>(sum);
}

double extrapolate(const std::vector<double>& probs, std::int64_t n, const Point& v) {
  const int d = v.dim();
  double partial = 0.0;
  for (std::int64_t k = 0; k <= n; ++k) partial += probs[static_cast<std::size_t>(k)];
  double r2 = 0.0;
  for (int i = 0; i < d; ++i) r2 += static_cast<double>(v[i]) * static_cast<double>(v[i]);
  // Only times with the parity of |v|_1 carry mass; each such term stands for
  // a width-2 slab of the integral, so the integral starts at n or n+1.
  const bool next_allowed = ((n + 1 + norm_l1(v)) & 1) == 0;
  const double k0 = static_cast<double>(next_allowed ? n : n + 1);
  return partial + clt_tail(d, r2, k0);
}

}  // namespace

GreenExtrapolation green_extrapolated(const Point& v, std::int64_t n) {
  if (n < 16) throw Error(ErrorCode::OutOfRange, "extrapolation horizon must be >= 16");
  const Point c = canonical_displacement(v);
  const auto probs = transition_probabilities(c, n);
  GreenExtrapolation out;
  for (double p : probs) out.partial_sum += p;
  out.value = extrapolate(probs, n, c);
  out.error_estimate = std::abs(out.value - extrapolate(probs, n / 4, c));
  return out;
}

}  // namespace interlace
