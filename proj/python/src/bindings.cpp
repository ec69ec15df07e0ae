#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "interlace/chemdist.hpp"
#include "interlace/equilibrium.hpp"
#include "interlace/error.hpp"
#include "interlace/experiments.hpp"
#include "interlace/green.hpp"
#include "interlace/hitting.hpp"
#include "interlace/sampler.hpp"

namespace py = pybind11;
using namespace interlace;

namespace {

using Coords = std::vector<Coord>;

Point to_point(const Coords& c) { return Point(c); }

std::vector<Point> to_points(const std::vector<Coords>& cs) {
  std::vector<Point> out;
  out.reserve(cs.size());
  for (const auto& c : cs) out.emplace_back(c);
  return out;
}

std::vector<Coords> from_points(const std::vector<Point>& ps) {
  std::vector<Coords> out;
  out.reserve(ps.size());
  for (const auto& p : ps) out.push_back(p.coords());
  return out;
}

// One Green table per dimension, shared by every call of the module.
GreenTable& table(int d) {
  static std::map<int, std::unique_ptr<GreenTable>> tables;
  auto& t = tables[d];
  if (!t) t = std::make_unique<GreenTable>(d);
  return *t;
}

Horizon horizon(std::optional<std::int64_t> n) { return n ? Horizon{*n} : Horizon{}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Random interlacements on Z^d: potential theory, sampling, chemical distances";
  m.attr("__version__") = kVersion;

  py::register_exception<Error>(m, "InterlaceError", PyExc_RuntimeError);

  m.def("green", [](const Coords& x) { return table(static_cast<int>(x.size())).get(to_point(x)); }, py::arg("x"),
        "g(0, x) for the simple random walk.");
  m.def("green_stopped", [](const Coords& x, const Coords& y, std::int64_t n) {
    return green_stopped(to_point(x), to_point(y), n);
  }, py::arg("x"), py::arg("y"), py::arg("n"), "Expected visits to y by time n from x.");

  m.def("capacity", [](const std::vector<Coords>& sites) {
    const auto pts = to_points(sites);
    if (pts.empty()) throw Error(ErrorCode::EmptySet, "capacity of an empty set");
    const auto eq = equilibrium(pts, table(pts.front().dim()));
    py::dict out;
    out["cap"] = eq.cap;
    out["residual"] = eq.residual;
    out["sites"] = from_points(eq.sites);
    out["mass"] = eq.mass;
    return out;
  }, py::arg("sites"), "Capacity and equilibrium measure of a finite set.");

  m.def("hit_probability", [](const Coords& x, const std::vector<Coords>& set, std::optional<std::int64_t> n) {
    const auto pts = to_points(set);
    const auto q = hit_prob_exact(to_point(x), pts, horizon(n), table(static_cast<int>(x.size())));
    return py::make_tuple(q.value, q.error_bound);
  }, py::arg("x"), py::arg("set"), py::arg("n") = py::none(), "P_x[H_A <= n] and its error bound.");

  m.def("hit_sandwich", [](const Coords& x, const std::vector<Coords>& set, std::optional<std::int64_t> n) {
    const auto b = hit_sandwich(to_point(x), to_points(set), horizon(n), table(static_cast<int>(x.size())));
    return py::make_tuple(b.lower, b.upper);
  }, py::arg("x"), py::arg("set"), py::arg("n") = py::none());

  m.def("beta", &beta, py::arg("d"), py::arg("h") = 0.0);
  m.def("a_seq", &a_seq, py::arg("d"), py::arg("h"), py::arg("n"));
  m.def("a_closed", &a_closed, py::arg("d"), py::arg("h"), py::arg("n"));

  py::class_<OccupancyField>(m, "Field")
      .def_property_readonly("dim", &OccupancyField::dim)
      .def_property_readonly("u", &OccupancyField::u)
      .def_property_readonly("kill_radius", &OccupancyField::kill_radius)
      .def_property_readonly("bias_budget", &OccupancyField::bias_budget)
      .def_property_readonly("capacity", &OccupancyField::capacity)
      .def_property_readonly("trajectories", [](const OccupancyField& f) { return f.trajectories().size(); })
      .def("sites", [](const OccupancyField& f, std::optional<double> u) { return from_points(f.sites(u.value_or(f.u()))); },
           py::arg("u") = py::none())
      .def("occupied", [](const OccupancyField& f, const Coords& x, std::optional<double> u) {
        return f.occupied(to_point(x), u.value_or(f.u()));
      }, py::arg("x"), py::arg("u") = py::none())
      .def("distance", [](const OccupancyField& f, const Coords& x, const Coords& y, std::optional<double> u) {
        const auto grid = SiteGrid::from_field(f, u.value_or(f.u()));
        const auto r = bfs_distance(grid, to_point(x), to_point(y));
        return py::make_tuple(r.rho ? py::cast(*r.rho) : py::none(), r.flagged);
      }, py::arg("x"), py::arg("y"), py::arg("u") = py::none(), "Chemical distance and the window flag.")
      .def("save", &OccupancyField::save)
      .def_static("load", &OccupancyField::load);

  m.def("sample_ball", [](int d, Coord n, double u, double lambda, double kill_eps, std::uint64_t seed,
                          std::uint64_t replica) {
    FieldOptions fo;
    fo.lambda = lambda;
    fo.kill_eps = kill_eps;
    const FieldSampler s(Domain::ball(Point(d), n), table(d), fo);
    return s.sample(u, seed, replica);
  }, py::arg("d"), py::arg("n"), py::arg("u"), py::arg("lambda_") = 0.5, py::arg("kill_eps") = 0.05,
        py::arg("seed") = 1, py::arg("replica") = 0, "I^u restricted to the enlarged window around B(0, n).");

  m.def("run", [](const std::string& config_text, std::optional<std::string> kind, int threads) {
    const auto cfg = parse_config(config_text, kind ? std::optional{parse_kind(*kind)} : std::nullopt);
    RunOptions opt;
    opt.threads = threads;
    RunResult r;
    {
      py::gil_scoped_release release;
      r = run_experiment(cfg, table(cfg.d), opt);
    }
    py::list checks;
    for (const auto& c : r.checks) checks.append(py::make_tuple(c.name, c.pass, c.detail));
    py::dict out;
    out["checks"] = checks;
    out["values"] = r.values;
    out["warnings"] = r.warnings;
    out["csv"] = results_csv(r.records);
    return out;
  }, py::arg("config"), py::arg("kind") = py::none(), py::arg("threads") = 1,
        "Runs an experiment from config text; returns checks, values and the results CSV.");
}
