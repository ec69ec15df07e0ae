#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "interlace/error.hpp"
#include "interlace/experiments.hpp"

namespace interlace {

namespace {

struct KindName {
  ExperimentKind kind;
  const char* name;
};
constexpr KindName kKinds[] = {
    {ExperimentKind::Shape, "shape"}, {ExperimentKind::Ldp, "ldp"},         {ExperimentKind::Connect, "connect"},
    {ExperimentKind::Torus, "torus"}, {ExperimentKind::Slab, "slab"},       {ExperimentKind::Vacancy, "vacancy"},
    {ExperimentKind::Lemmas, "lemmas"},
};

const std::set<std::string> kCommonKeys = {"d", "u", "sizes", "replicas", "first_replica", "seed",
                                           "kill_eps", "lambda", "a"};

std::set<std::string> kind_keys(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Shape: return {"directions", "halfwidth", "stability", "ray_max"};
    case ExperimentKind::Ldp: return {"C", "ray_max"};
    case ExperimentKind::Connect: return {"levels", "prefix", "thin"};
    case ExperimentKind::Torus: return {"gamma", "pairs"};
    case ExperimentKind::Slab: return {"K", "eps", "patch"};
    case ExperimentKind::Vacancy: return {"sets"};
    case ExperimentKind::Lemmas: return {"instances"};
  }
  return {};
}

ExperimentConfig defaults_for(ExperimentKind k) {
  ExperimentConfig c;
  c.kind = k;
  switch (k) {
    case ExperimentKind::Shape:
      c.sizes = {20, 40};
      c.replicas = 20;
      c.directions = default_directions(3);
      break;
    case ExperimentKind::Ldp:
      c.sizes = {10, 20, 40};
      c.replicas = 50;
      break;
    case ExperimentKind::Connect:
      c.u = {0.5, 2.0};
      c.levels = 8;
      c.sizes = {20};
      c.replicas = 200;
      c.lambda = 0;
      c.kill_eps = 0.2;
      break;
    case ExperimentKind::Torus:
      c.sizes = {16, 32, 64};
      c.replicas = 100;
      c.pairs = 50;
      break;
    case ExperimentKind::Slab:
      c.d = 5;
      c.u = {0.2};
      c.sizes = {6};
      c.replicas = 100;
      c.lambda = 0;
      break;
    case ExperimentKind::Vacancy:
      c.u = {0.5, 1.0};
      c.sizes = {4};
      c.replicas = 10000;
      c.sets = {"point", "pair", "segment8"};
      break;
    case ExperimentKind::Lemmas:
      c.sizes = {50};
      c.replicas = 1000;
      break;
  }
  return c;
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
  throw Error(ErrorCode::ConfigError, origin + ":" + std::to_string(line) + ": " + msg);
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
bool parse_number(const std::string& s, T& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& v, const char* sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    if constexpr (std::is_same_v<T, double>) out += fmt(v[i]);
    else if constexpr (std::is_same_v<T, std::string>) out += v[i];
    else out += std::to_string(v[i]);
  }
  return out;
}

class Assigner {
 public:
  Assigner(ExperimentConfig& c, const std::string& origin) : c_(c), origin_(origin) {}

  void set(const std::string& key, const std::string& value, int line) {
    line_ = line;
    if (key == "d") c_.d = static_cast<int>(integer(value));
    else if (key == "u") c_.u = reals(value);
    else if (key == "sizes") c_.sizes = integers(value);
    else if (key == "replicas") c_.replicas = integer(value);
    else if (key == "first_replica") c_.first_replica = integer(value);
    else if (key == "seed") {
      std::uint64_t s = 0;
      if (!parse_number(value, s)) bad(key, value);
      c_.seed = s;
    } else if (key == "kill_eps") c_.kill_eps = real(value);
    else if (key == "lambda") c_.lambda = real(value);
    else if (key == "a") c_.a = real(value);
    else if (key == "directions") {
      c_.directions.clear();
      for (const auto& v : split(value, ';')) {
        std::vector<Coord> coords;
        for (const auto& t : split(v, ' ')) coords.push_back(integer(t));
        if (coords.size() < 3 || coords.size() > static_cast<std::size_t>(kMaxDim)) bad(key, value);
        c_.directions.emplace_back(coords);
      }
    } else if (key == "halfwidth") c_.halfwidth = real(value);
    else if (key == "stability") c_.stability = boolean(value);
    else if (key == "ray_max") c_.ray_max = integer(value);
    else if (key == "C") {
      if (value == "auto") c_.ldp_c.reset();
      else c_.ldp_c = real(value);
    } else if (key == "levels") c_.levels = integer(value);
    else if (key == "prefix") c_.prefix = real(value);
    else if (key == "thin") {
      if (value == "none") c_.thin.reset();
      else c_.thin = real(value);
    } else if (key == "gamma") c_.gamma = real(value);
    else if (key == "pairs") c_.pairs = integer(value);
    else if (key == "K") c_.k_values = integers(value);
    else if (key == "eps") c_.eps = real(value);
    else if (key == "patch") c_.patch = integer(value);
    else if (key == "sets") c_.sets = split(value, ',');
    else if (key == "instances") c_.instances = integer(value);
    else fail(origin_, line_, "unknown key '" + key + "'");
  }

 private:
  ExperimentConfig& c_;
  const std::string& origin_;
  int line_ = 0;

  [[noreturn]] void bad(const std::string& key, const std::string& value) {
    fail(origin_, line_, "bad value '" + value + "' for key '" + key + "'");
  }
  std::int64_t integer(const std::string& s) {
    std::int64_t v = 0;
    if (!parse_number(s, v)) bad("integer", s);
    return v;
  }
  double real(const std::string& s) {
    double v = 0;
    if (!parse_number(s, v) || !std::isfinite(v)) bad("number", s);
    return v;
  }
  bool boolean(const std::string& s) {
    if (s == "1" || s == "true" || s == "yes") return true;
    if (s == "0" || s == "false" || s == "no") return false;
    bad("boolean", s);
  }
  std::vector<double> reals(const std::string& s) {
    std::vector<double> out;
    for (const auto& t : split(s, ',')) out.push_back(real(t));
    if (out.empty()) bad("list", s);
    return out;
  }
  std::vector<Coord> integers(const std::string& s) {
    std::vector<Coord> out;
    for (const auto& t : split(s, ',')) out.push_back(integer(t));
    if (out.empty()) bad("list", s);
    return out;
  }
};

void validate(const ExperimentConfig& c, const std::string& origin) {
  auto bad = [&](const std::string& m) { throw Error(ErrorCode::ConfigError, origin + ": " + m); };
  if (c.d < 3 || c.d > kMaxDim) bad("d must be in [3, " + std::to_string(kMaxDim) + "]");
  if (c.replicas < 1) bad("replicas must be >= 1");
  if (c.first_replica < 0) bad("first_replica must be >= 0");
  for (auto n : c.sizes)
    if (n < 4) bad("all sizes must be >= 4");
  for (auto u : c.u)
    if (u < 0) bad("u must be >= 0");
  if (!(c.a > 0 && c.a < 1.0 / 3)) bad("a must lie in (0, 1/3)");
  if (!(c.kill_eps > 0)) bad("kill_eps must be positive");
  if (c.lambda < 0) bad("lambda must be >= 0");
  for (const auto& x : c.directions) {
    if (x.dim() != c.d) bad("direction " + x.str() + " does not have dimension d");
    if (norm_linf(x) == 0) bad("zero direction");
  }
  if (c.kind == ExperimentKind::Connect && !std::is_sorted(c.u.begin(), c.u.end())) bad("u must be increasing");
  if (c.levels < 1) bad("levels must be >= 1");
  if (c.ldp_c && !(*c.ldp_c > 0)) bad("C must be positive");
  if (!(c.eps > 0 && c.eps < 1)) bad("eps must lie in (0, 1)");
  if (c.patch < 2 || c.patch > 62) bad("patch must lie in [2, 62]");
  if (c.prefix < 0) bad("prefix must be >= 0");
  if (c.pairs < 1) bad("pairs must be >= 1");
  for (auto k : c.k_values)
    if (k < 2) bad("K values must be >= 2");
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  for (const auto& k : kKinds)
    if (k.kind == kind) return k.name;
  return "unknown";
}

ExperimentKind parse_kind(const std::string& name) {
  for (const auto& k : kKinds)
    if (name == k.name) return k.kind;
  throw Error(ErrorCode::ConfigError, "unknown experiment kind '" + name + "'");
}

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::canonical() const {
  std::vector<std::pair<std::string, std::string>> kv = {
      {"kind", to_string(kind)},   {"d", std::to_string(d)},           {"u", join(u)},
      {"sizes", join(sizes)},      {"replicas", std::to_string(replicas)}, {"seed", std::to_string(seed)},
      {"kill_eps", fmt(kill_eps)}, {"lambda", fmt(lambda)},             {"a", fmt(a)},
  };
  switch (kind) {
    case ExperimentKind::Shape: {
      std::vector<std::string> dirs;
      for (const auto& x : directions) dirs.push_back(join(x.coords(), " "));
      kv.emplace_back("directions", join(dirs, "; "));
      kv.emplace_back("halfwidth", fmt(halfwidth));
      kv.emplace_back("stability", stability ? "1" : "0");
      kv.emplace_back("ray_max", std::to_string(ray_max));
      break;
    }
    case ExperimentKind::Ldp:
      kv.emplace_back("C", ldp_c ? fmt(*ldp_c) : "auto");
      kv.emplace_back("ray_max", std::to_string(ray_max));
      break;
    case ExperimentKind::Connect:
      kv.emplace_back("levels", std::to_string(levels));
      kv.emplace_back("prefix", fmt(prefix));
      kv.emplace_back("thin", thin ? fmt(*thin) : "none");
      break;
    case ExperimentKind::Torus:
      kv.emplace_back("gamma", fmt(gamma));
      kv.emplace_back("pairs", std::to_string(pairs));
      break;
    case ExperimentKind::Slab:
      kv.emplace_back("K", join(k_values));
      kv.emplace_back("eps", fmt(eps));
      kv.emplace_back("patch", std::to_string(patch));
      break;
    case ExperimentKind::Vacancy: kv.emplace_back("sets", join(sets)); break;
    case ExperimentKind::Lemmas: kv.emplace_back("instances", std::to_string(instances)); break;
  }
  return kv;
}

std::uint64_t ExperimentConfig::hash() const {
  std::string text;
  for (const auto& [k, v] : canonical()) text += k + "=" + v + "\n";
  return fnv1a(text);
}

ExperimentConfig parse_config(const std::string& text, std::optional<ExperimentKind> kind, const std::string& origin) {
  struct Entry {
    std::string key, value;
    int line;
  };
  std::vector<Entry> global;
  std::map<ExperimentKind, std::vector<Entry>> sections;
  std::optional<ExperimentKind> current;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(raw.substr(0, raw.find('#')));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(origin, line, "malformed section header");
      const std::string name = trim(s.substr(1, s.size() - 2));
      bool known = false;
      for (const auto& k : kKinds)
        if (name == k.name) {
          current = k.kind;
          known = true;
        }
      if (!known) fail(origin, line, "unknown section [" + name + "]");
      if (sections.contains(*current)) fail(origin, line, "duplicate section [" + name + "]");
      sections[*current];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(origin, line, "expected key = value");
    Entry e{trim(s.substr(0, eq)), trim(s.substr(eq + 1)), line};
    if (e.key.empty()) fail(origin, line, "empty key");
    if (current) {
      if (!kCommonKeys.contains(e.key) && !kind_keys(*current).contains(e.key))
        fail(origin, line, "unknown key '" + e.key + "' for [" + to_string(*current) + "]");
      sections[*current].push_back(e);
    } else {
      if (!kCommonKeys.contains(e.key)) fail(origin, line, "key '" + e.key + "' must appear inside a section");
      global.push_back(e);
    }
  }
  if (!kind) {
    if (sections.size() != 1)
      throw Error(ErrorCode::ConfigError, origin + ": experiment kind is ambiguous; name it explicitly");
    kind = sections.begin()->first;
  }
  ExperimentConfig c = defaults_for(*kind);
  Assigner assign(c, origin);
  for (const auto& e : global) assign.set(e.key, e.value, e.line);
  if (auto it = sections.find(*kind); it != sections.end())
    for (const auto& e : it->second) assign.set(e.key, e.value, e.line);
  if (c.directions.empty() || c.directions.front().dim() != c.d) {
    bool explicit_dirs = false;
    if (auto it = sections.find(*kind); it != sections.end())
      for (const auto& e : it->second) explicit_dirs |= e.key == "directions";
    if (!explicit_dirs) c.directions = default_directions(c.d);
  }
  validate(c, origin);
  return c;
}

ExperimentConfig load_config(const std::string& path, std::optional<ExperimentKind> kind) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), kind, path);
}

std::vector<Point> default_directions(int d) {
  std::vector<Point> out;
  Point x(d);
  x[0] = 1;
  out.push_back(x);
  x[1] = 1;
  out.push_back(x);
  x[2] = 1;
  out.push_back(x);
  Point y(d);
  y[0] = 2;
  y[1] = 1;
  out.push_back(y);
  return out;
}

}  // namespace interlace
