#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "wgarray/config.hpp"
#include "wgarray/entanglement.hpp"
#include "wgarray/errors.hpp"
#include "wgarray/experiments.hpp"
#include "wgarray/growth.hpp"
#include "wgarray/moments.hpp"
#include "wgarray/oracle.hpp"
#include "wgarray/reduced.hpp"

namespace py = pybind11;
using namespace wgarray;

namespace {

AnyMoments evolved(const SimParams& p, double z) {
  py::gil_scoped_release release;
  const FlushDenormals ftz;
  return std::visit([&](auto v) -> AnyMoments { return evolve(std::move(v), p, z); },
                    initial_vacuum(p));
}

py::object cell_to_py(const Cell& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return py::int_(*i);
  if (const auto* d = std::get_if<double>(&c)) return py::float_(*d);
  return py::str(std::get<std::string>(c));
}

py::dict table_to_py(const Table& t) {
  py::dict meta;
  for (const auto& [k, v] : t.meta) meta[py::str(k)] = v;
  py::list rows;
  for (const auto& row : t.rows) {
    py::list r;
    for (const auto& c : row) r.append(cell_to_py(c));
    rows.append(r);
  }
  py::dict out;
  out["columns"] = t.columns;
  out["rows"] = rows;
  out["meta"] = meta;
  return out;
}

}  // namespace

PYBIND11_MODULE(_wgarray, m) {
  m.doc() = "Moment dynamics, entanglement and Monte-Carlo checks for pumped waveguide arrays";
  m.attr("__version__") = WGARRAY_VERSION;

  py::register_exception<InvalidParameter>(m, "InvalidParameter", PyExc_ValueError);
  py::register_exception<NumericalFailure>(m, "NumericalFailure", PyExc_ArithmeticError);
  py::register_exception<InvariantViolation>(m, "InvariantViolation", PyExc_ArithmeticError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::enum_<MomentSystem>(m, "MomentSystem")
      .value("degenerate", MomentSystem::Degenerate)
      .value("general", MomentSystem::General);

  py::class_<SimParams>(m, "SimParams")
      .def(py::init([](int n_sites, double c_s, double g, double gamma, double dz, MomentSystem system) {
             SimParams p;
             p.n_sites = n_sites;
             p.c_s = c_s;
             p.g = g;
             p.gamma = gamma;
             p.dz = dz;
             p.system = system;
             p.validate();
             return p;
           }),
           py::arg("n_sites") = 257, py::arg("c_s") = 1.0, py::arg("g") = 0.0,
           py::arg("gamma") = 0.0, py::arg("dz") = 1e-3, py::arg("system") = MomentSystem::Degenerate)
      .def_readwrite("n_sites", &SimParams::n_sites)
      .def_readwrite("c_s", &SimParams::c_s)
      .def_readwrite("g", &SimParams::g)
      .def_readwrite("gamma", &SimParams::gamma)
      .def_readwrite("dz", &SimParams::dz)
      .def_readwrite("system", &SimParams::system)
      .def("validate", &SimParams::validate)
      .def("__repr__", [](const SimParams& p) {
        return "SimParams(n_sites=" + std::to_string(p.n_sites) + ", c_s=" + format_number(p.c_s) +
               ", g=" + format_number(p.g) + ", gamma=" + format_number(p.gamma) +
               ", dz=" + format_number(p.dz) + ", system=" + std::string(to_string(p.system)) + ")";
      });

  m.def("photon_profile",
        [](const SimParams& p, double z) {
          const AnyMoments s = evolved(p, z);
          return std::visit([](const auto& st) { return photon_number_profile(st); }, s);
        },
        py::arg("params"), py::arg("z"), "Mean photon number per guide, sites -M..M, after distance z.");

  m.def("entanglement_map",
        [](const SimParams& p, double z) {
          const AnyMoments s = evolved(p, z);
          return std::visit([](const auto& st) { return entanglement_map(st).values; }, s);
        },
        py::arg("params"), py::arg("z"), "Log-negativity of every pair; entry [m+M, n+M].");

  m.def("pair_log_negativity",
        [](const SimParams& p, double z, int a, int b) {
          const AnyMoments s = evolved(p, z);
          return std::visit([&](const auto& st) { return pair_log_negativity(st, a, b); }, s);
        },
        py::arg("params"), py::arg("z"), py::arg("m"), py::arg("n"));

  m.def("log_negativity",
        [](const Eigen::Matrix4d& sigma) {
          CovMat4 c;
          c.sigma = sigma;
          return log_negativity(c);
        },
        py::arg("sigma"), "Log-negativity of a two-mode covariance matrix (vacuum variance 1/2).");

  m.def("stationary_logneg",
        [](const SimParams& p, int a, int b, double plateau_tol, double window, double z_max) {
          StationaryOptions o;
          o.plateau_tol = plateau_tol;
          o.window = window;
          o.z_max = z_max;
          StationaryResult r;
          {
            py::gil_scoped_release release;
            r = stationary_logneg(p, {a, b}, o);
          }
          py::dict d;
          d["converged"] = r.converged;
          d["above_threshold"] = r.above_threshold;
          d["value"] = r.value;
          d["z_reached"] = r.z_reached;
          return d;
        },
        py::arg("params"), py::arg("m") = 1, py::arg("n") = -1, py::arg("plateau_tol") = 1e-4,
        py::arg("window") = 1.0, py::arg("z_max") = 60.0);

  m.def("survival_distance",
        [](const SimParams& p, int a, int b, double eps, double hold, double z_max) {
          SurvivalOptions o;
          o.eps = eps;
          o.hold = hold;
          o.z_max = z_max;
          SurvivalResult r;
          {
            py::gil_scoped_release release;
            r = survival_distance(p, {a, b}, o);
          }
          py::dict d;
          d["z_tilde"] = r.z_tilde ? py::object(py::float_(*r.z_tilde)) : py::object(py::none());
          d["peak"] = r.peak;
          d["z_peak"] = r.z_peak;
          d["z_reached"] = r.z_reached;
          return d;
        },
        py::arg("params"), py::arg("m") = 1, py::arg("n") = -1, py::arg("eps") = 1e-4,
        py::arg("hold") = 5.0, py::arg("z_max") = 200.0);

  m.def("bessel_j", &bessel_j, py::arg("order"), py::arg("x"));
  m.def("memory_identity_residual", &memory_identity_residual, py::arg("params"), py::arg("z_max"),
        py::call_guard<py::gil_scoped_release>());

  m.def("classify_growth",
        [](const SimParams& p, bool reduced) {
          GrowthFit f;
          {
            py::gil_scoped_release release;
            f = reduced ? classify_reduced_growth(p) : classify_lattice_growth(p);
          }
          py::dict d;
          d["exponential"] = f.growth == GrowthClass::Exponential;
          d["rate"] = f.rate;
          d["r_squared"] = f.r_squared;
          return d;
        },
        py::arg("params"), py::arg("reduced") = false,
        "Growth regime of the central photon number over 2 <= z <= 10.");

  m.def("list_experiments", [] {
    std::vector<std::string> names;
    for (const auto& e : experiment_catalogue()) names.emplace_back(e.name);
    return names;
  });

  m.def("run_experiment",
        [](const std::string& config_text, const std::vector<std::string>& overrides, unsigned workers) {
          auto assignments = parse_config_text(config_text, "<config>");
          for (const auto& s : overrides) assignments.push_back(parse_override(s));
          const Config config = Config::resolve(assignments);
          RunContext ctx;
          ctx.workers = workers;
          std::vector<Table> tables;
          {
            py::gil_scoped_release release;
            tables = run_experiment(config, ctx);
          }
          py::dict out;
          for (const auto& t : tables) out[py::str(t.name)] = table_to_py(t);
          return out;
        },
        py::arg("config"), py::arg("overrides") = std::vector<std::string>{}, py::arg("workers") = 1,
        "Runs a named experiment from config text; returns {table: {columns, rows, meta}}.");
}
