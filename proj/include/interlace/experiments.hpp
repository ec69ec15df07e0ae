#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "interlace/green.hpp"
#include "interlace/lattice.hpp"
#include "interlace/rng.hpp"

namespace interlace {

inline constexpr const char* kVersion = "0.1.0";

enum class ExperimentKind { Shape, Ldp, Connect, Torus, Slab, Vacancy, Lemmas };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_kind(const std::string& name);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Shape;
  int d = 3;
  std::vector<double> u{1.0};
  std::vector<Coord> sizes{20};
  std::int64_t replicas = 10;
  /// First replica index; lets one configuration be split across runs and
  /// merged. Not part of the hash.
  std::int64_t first_replica = 0;
  std::uint64_t seed = 1;
  double kill_eps = 0.5;
  double lambda = 0.5;
  double a = 0.3;  // sausage exponent, in (0, 1/3)

  // shape
  std::vector<Point> directions;
  double halfwidth = 0.125;  // window margin as a fraction of |n x|_inf
  bool stability = true;     // recompute each distance in a window enlarged by 2 lambda
  std::int64_t ray_max = 64;

  // ldp
  std::optional<double> ldp_c;  // nullopt: calibrated at the smallest size

  // connect
  std::int64_t levels = 1;   // grid points on [u_min, u_max]
  double prefix = 0.0;       // m = prefix * n^2; 0 keeps whole (killed) trajectories
  std::optional<double> thin;  // keep the first ceil(thin * n^(d-2)) trajectories

  // torus
  double gamma = 2.0;
  std::int64_t pairs = 20;

  // slab
  std::vector<Coord> k_values{6, 10, 16};
  double eps = 0.5;
  std::int64_t patch = 6;    // evaluated edges along the first axis

  // vacancy
  std::vector<std::string> sets{"point"};

  // lemmas
  std::int64_t instances = 100;

  /// Effective key/value pairs in a fixed order (what the hash covers).
  std::vector<std::pair<std::string, std::string>> canonical() const;
  std::uint64_t hash() const;
};

/// Flat key = value text. Keys before the first [section] apply to every
/// kind; a [kind] section overrides them. Unknown keys, sections and bad values
/// raise ConfigError naming the line.
ExperimentConfig parse_config(const std::string& text, std::optional<ExperimentKind> kind,
                              const std::string& origin = "<config>");
ExperimentConfig load_config(const std::string& path, std::optional<ExperimentKind> kind);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

struct Record {
  std::string experiment;
  std::uint64_t config_hash = 0;
  std::int64_t replica = 0;
  std::string metric;
  double value = 0;
  std::string flag;  // empty, or e.g. "truncated", "saturated", "unstable"
  double wall_ms = 0;
};

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Aggregate {
  std::int64_t count = 0;
  double mean = 0;
  double stderr_mean = 0;
  double min = 0;
  double max = 0;
  std::int64_t flagged = 0;
  /// Set for 0/1 metrics: successes and the Wilson 95% interval.
  std::optional<std::int64_t> successes;
  double ci_low = 0, ci_high = 0;
};

/// Wilson score interval for k successes out of n at normal quantile z.
std::pair<double, double> wilson(std::int64_t k, std::int64_t n, double z = 1.959963984540054);

std::map<std::string, Aggregate> aggregate(const std::vector<Record>& records);

struct RunResult {
  ExperimentConfig config;
  std::vector<Record> records;
  std::vector<Check> checks;
  /// Extra summary values (name -> number), e.g. calibrated constants.
  std::map<std::string, double> values;
  std::vector<std::string> warnings;
};

/// Writes results.csv, summary.json and meta.json into `dir`. Throws Clobber
/// when results.csv exists and `force` is false.
void emit_results(const RunResult& result, const std::string& dir, bool force);

std::string results_csv(const std::vector<Record>& records);
std::vector<Record> parse_results_csv(const std::string& text, const std::string& origin = "<csv>");
std::vector<Record> load_results(const std::string& path);

/// Concatenates result files of one configuration (MixedConfig otherwise);
/// rows are ordered by replica so merging is order independent.
std::vector<Record> merge_results(const std::vector<std::string>& paths);
void emit_merged(const std::vector<Record>& records, const std::string& dir, bool force);

struct RunOptions {
  int threads = 1;
  /// Progress sink; may be empty.
  std::function<void(const std::string&)> log;
};

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::int64_t n, int threads, const std::function<void(std::int64_t)>& fn);

RunResult run_shape(const ExperimentConfig& cfg, GreenTable& green, const RunOptions& opt = {});
RunResult run_ldp(const ExperimentConfig& cfg, GreenTable& green, const RunOptions& opt = {});
RunResult run_connect(const ExperimentConfig& cfg, GreenTable& green, const RunOptions& opt = {});
RunResult run_torus(const ExperimentConfig& cfg, const RunOptions& opt = {});
RunResult run_slab(const ExperimentConfig& cfg, GreenTable& green, const RunOptions& opt = {});
RunResult run_vacancy(const ExperimentConfig& cfg, GreenTable& green, const RunOptions& opt = {});
RunResult run_lemma_suite(const ExperimentConfig& cfg, GreenTable& green, const RunOptions& opt = {});

/// Dispatches on cfg.kind. The torus run ignores `green`.
RunResult run_experiment(const ExperimentConfig& cfg, GreenTable& green, const RunOptions& opt = {});

/// Named test sets for vacancy and capacity runs: point, pair, ball2, ball3,
/// segment8 (S_8), corner (three sites of an L).
std::vector<Point> named_set(const std::string& name, int d);

/// Default shape directions: e_1, e_1+e_2, e_1+e_2+e_3, 2e_1+e_2.
std::vector<Point> default_directions(int d);

/// Torus range of one walk: occupancy of (Z/NZ)^d after floor(u N^d) steps.
std::vector<std::uint8_t> torus_range(int d, Coord side, double u, StreamId id);

}  // namespace interlace
