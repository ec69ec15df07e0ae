#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "interlace/error.hpp"
#include "interlace/experiments.hpp"

namespace interlace {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kHeader = "experiment,config_hash,replica,metric,value,flag,wall_ms";

std::string hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void check_field(const std::string& s) {
  if (s.find_first_of(",\n\r\"") != std::string::npos)
    throw Error(ErrorCode::FormatError, "CSV field contains a separator: " + s);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::FormatError, "cannot write " + path.string());
  out << text;
}

void prepare_dir(const std::string& dir, bool force) {
  const fs::path d(dir);
  fs::create_directories(d);
  if (!force && fs::exists(d / "results.csv"))
    throw Error(ErrorCode::Clobber, (d / "results.csv").string() + " exists; pass --force to overwrite");
}

json aggregates_json(const std::vector<Record>& records) {
  json out = json::object();
  for (const auto& [metric, a] : aggregate(records)) {
    json j = {{"count", a.count}, {"mean", a.mean}, {"stderr", a.stderr_mean},
              {"min", a.min},     {"max", a.max},   {"flagged", a.flagged}};
    if (a.successes) {
      j["successes"] = *a.successes;
      j["ci95"] = {a.ci_low, a.ci_high};
    }
    out[metric] = j;
  }
  return out;
}

std::string iso_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::pair<double, double> wilson(std::int64_t k, std::int64_t n, double z) {
  if (n <= 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1 + z2 / nn;
  const double centre = (p + z2 / (2 * nn)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

std::map<std::string, Aggregate> aggregate(const std::vector<Record>& records) {
  std::map<std::string, std::vector<const Record*>> groups;
  for (const auto& r : records) groups[r.metric].push_back(&r);
  std::map<std::string, Aggregate> out;
  for (const auto& [metric, rs] : groups) {
    Aggregate a;
    a.count = static_cast<std::int64_t>(rs.size());
    double sum = 0;
    bool binary = true;
    a.min = INFINITY;
    a.max = -INFINITY;
    for (const auto* r : rs) {
      sum += r->value;
      a.min = std::min(a.min, r->value);
      a.max = std::max(a.max, r->value);
      binary &= r->value == 0.0 || r->value == 1.0;
      a.flagged += !r->flag.empty();
    }
    a.mean = sum / static_cast<double>(a.count);
    if (a.count > 1) {
      double ss = 0;
      for (const auto* r : rs) ss += (r->value - a.mean) * (r->value - a.mean);
      a.stderr_mean = std::sqrt(ss / static_cast<double>(a.count - 1) / static_cast<double>(a.count));
    }
    if (binary) {
      a.successes = static_cast<std::int64_t>(std::llround(sum));
      std::tie(a.ci_low, a.ci_high) = wilson(*a.successes, a.count);
    }
    out[metric] = a;
  }
  return out;
}

std::string results_csv(const std::vector<Record>& records) {
  std::string out = std::string(kHeader) + "\n";
  char num[64];
  for (const auto& r : records) {
    check_field(r.experiment);
    check_field(r.metric);
    check_field(r.flag);
    out += r.experiment;
    out += ',';
    out += hex(r.config_hash);
    out += ',';
    out += std::to_string(r.replica);
    out += ',';
    out += r.metric;
    out += ',';
    std::snprintf(num, sizeof num, "%.17g", r.value);
    out += num;
    out += ',';
    out += r.flag;
    out += ',';
    std::snprintf(num, sizeof num, "%.3f", r.wall_ms);
    out += num;
    out += '\n';
  }
  return out;
}

std::vector<Record> parse_results_csv(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHeader)
    throw Error(ErrorCode::FormatError, origin + ": missing results header");
  std::vector<Record> out;
  int n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t pos = 0;
    while (true) {
      const auto c = line.find(',', pos);
      f.push_back(line.substr(pos, c == std::string::npos ? std::string::npos : c - pos));
      if (c == std::string::npos) break;
      pos = c + 1;
    }
    if (f.size() != 7) throw Error(ErrorCode::FormatError, origin + ":" + std::to_string(n) + ": expected 7 fields");
    Record r;
    try {
      r.experiment = f[0];
      r.config_hash = std::stoull(f[1], nullptr, 16);
      r.replica = std::stoll(f[2]);
      r.metric = f[3];
      r.value = std::strtod(f[4].c_str(), nullptr);
      r.flag = f[5];
      r.wall_ms = std::stod(f[6]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::FormatError, origin + ":" + std::to_string(n) + ": malformed row");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<Record> load_results(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FormatError, "cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_results_csv(buf.str(), path);
}

void emit_results(const RunResult& result, const std::string& dir, bool force) {
  prepare_dir(dir, force);
  const fs::path d(dir);
  const auto& cfg = result.config;
  write_file(d / "results.csv", results_csv(result.records));

  json checks = json::array();
  for (const auto& c : result.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  json summary = {
      {"experiment", to_string(cfg.kind)},
      {"config_hash", hex(cfg.hash())},
      {"seed", cfg.seed},
      {"version", kVersion},
      {"records", result.records.size()},
      {"aggregates", aggregates_json(result.records)},
      {"checks", checks},
      {"values", result.values},
      {"warnings", result.warnings},
  };
  write_file(d / "summary.json", summary.dump(2) + "\n");

  json echo = json::object();
  for (const auto& [k, v] : cfg.canonical()) echo[k] = v;
  json meta = {
      {"version", kVersion},          {"seed", cfg.seed},         {"start_time", iso_now()},
      {"config_hash", hex(cfg.hash())}, {"first_replica", cfg.first_replica}, {"config", echo},
  };
  write_file(d / "meta.json", meta.dump(2) + "\n");
}

std::vector<Record> merge_results(const std::vector<std::string>& paths) {
  if (paths.empty()) throw Error(ErrorCode::EmptySet, "nothing to merge");
  std::vector<Record> all;
  std::optional<std::uint64_t> hash;
  for (const auto& p : paths) {
    for (auto& r : load_results(p)) {
      if (hash && r.config_hash != *hash)
        throw Error(ErrorCode::MixedConfig, p + " has config hash " + hex(r.config_hash) + ", expected " + hex(*hash));
      hash = r.config_hash;
      all.push_back(std::move(r));
    }
  }
  // Rows of one replica keep their relative order; replicas from different
  // files are disjoint by construction.
  std::stable_sort(all.begin(), all.end(), [](const Record& a, const Record& b) { return a.replica < b.replica; });
  return all;
}

void emit_merged(const std::vector<Record>& records, const std::string& dir, bool force) {
  prepare_dir(dir, force);
  const fs::path d(dir);
  write_file(d / "results.csv", results_csv(records));
  json summary = {
      {"experiment", records.empty() ? "" : records.front().experiment},
      {"config_hash", records.empty() ? "" : hex(records.front().config_hash)},
      {"version", kVersion},
      {"records", records.size()},
      {"aggregates", aggregates_json(records)},
  };
  write_file(d / "summary.json", summary.dump(2) + "\n");
}

void parallel_for(std::int64_t n, int threads, const std::function<void(std::int64_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  const int workers = static_cast<int>(std::min<std::int64_t>(threads, n));
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::int64_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace interlace
