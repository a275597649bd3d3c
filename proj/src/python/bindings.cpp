#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fraclab/acceptance.hpp"
#include "fraclab/config.hpp"
#include "fraclab/domain.hpp"
#include "fraclab/energy.hpp"
#include "fraclab/errors.hpp"
#include "fraclab/fields.hpp"
#include "fraclab/kernel.hpp"
#include "fraclab/regularity.hpp"
#include "fraclab/runner.hpp"

namespace py = pybind11;
using namespace fraclab;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const GridFunction& g) {
    Array a(static_cast<py::ssize_t>(g.size()));
    std::copy(g.values.begin(), g.values.end(), a.mutable_data());
    return a;
}

GridFunction from_array(const Array& a, std::size_t expected) {
    if (a.ndim() != 1 || static_cast<std::size_t>(a.shape(0)) != expected) {
        throw GeometryError("expected a 1-d array of length " + std::to_string(expected));
    }
    return GridFunction(std::vector<double>(a.data(), a.data() + a.shape(0)));
}

Point to_point(const std::vector<double>& x) {
    if (x.empty() || x.size() > 2) {
        throw PreconditionError("points have one or two coordinates");
    }
    return Point{x[0], x.size() > 1 ? x[1] : 0.0};
}

py::dict report_dict(const SolveReport& r) {
    py::dict d;
    d["iterations"] = r.iterations;
    d["energy"] = r.energy;
    d["residual_norm"] = r.residual_norm;
    d["threshold"] = r.threshold;
    d["converged"] = r.converged;
    d["message"] = r.message;
    d["trajectory"] = r.trajectory;
    return d;
}

SolveOptions make_options(double tol, int max_iter) {
    SolveOptions o;
    o.tolerance = tol;
    o.max_iterations = max_iter;
    return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Discrete fractional p-Laplacian: weights, energy solver, pointwise operator, checkers";

    static py::exception<Error> base(m, "FraclabError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<GeometryError>(m, "GeometryError", base.ptr());
    py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
    py::register_exception<SingularCaseError>(m, "SingularCaseError", base.ptr());
    py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
    py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

    py::class_<DomainSpec>(m, "Domain")
        .def_static("interval", &DomainSpec::interval, py::arg("a"), py::arg("b"))
        .def_static("disc", &DomainSpec::disc, py::arg("radius"))
        .def_property_readonly("dim", &DomainSpec::dim)
        .def_property_readonly("diameter", &DomainSpec::diameter)
        .def_property_readonly("measure", &DomainSpec::measure)
        .def("contains", [](const DomainSpec& d, const std::vector<double>& x) { return d.contains(to_point(x)); });

    py::class_<OperatorParams>(m, "Params")
        .def(py::init(&OperatorParams::make), py::arg("p"), py::arg("s"))
        .def_readonly("p", &OperatorParams::p)
        .def_readonly("s", &OperatorParams::s)
        .def_property_readonly("pointwise_valid", &OperatorParams::pointwise_valid)
        .def("__repr__", [](const OperatorParams& o) {
            return "Params(p=" + std::to_string(o.p) + ", s=" + std::to_string(o.s) + ")";
        });

    py::class_<Grid>(m, "Grid")
        .def_readonly("n", &Grid::n)
        .def_readonly("h", &Grid::h)
        .def_readonly("domain", &Grid::domain)
        .def("__len__", &Grid::size)
        .def_property_readonly("nodes", [](const Grid& g) {
            const py::ssize_t n = static_cast<py::ssize_t>(g.size());
            const py::ssize_t dim = g.dim();
            Array a({n, dim});
            auto v = a.mutable_unchecked<2>();
            for (py::ssize_t i = 0; i < n; ++i) {
                for (py::ssize_t k = 0; k < dim; ++k) {
                    v(i, k) = g.nodes[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
                }
            }
            return a;
        })
        .def_property_readonly("volumes", [](const Grid& g) { return to_array(GridFunction(g.volumes)); });

    m.def("build_grid", &build_grid, py::arg("domain"), py::arg("n"));
    m.def("distance_to_complement", [](const Grid& g) { return to_array(distance_to_complement(g)); });

    py::class_<KernelWeights>(m, "Weights")
        .def_readonly("grid", &KernelWeights::grid)
        .def_readonly("params", &KernelWeights::params)
        .def_property_readonly("exterior", [](const KernelWeights& w) { return to_array(GridFunction(w.exterior)); })
        .def("pair", &KernelWeights::W, py::arg("i"), py::arg("j"));

    m.def("assemble_weights", [](const Grid& g, const OperatorParams& p) { return assemble_weights(g, p); },
          py::arg("grid"), py::arg("params"), py::call_guard<py::gil_scoped_release>());

    m.def("discrete_energy", [](const Array& u, const KernelWeights& w, const Array& f) {
        return discrete_energy(from_array(u, w.n), w, from_array(f, w.n));
    });
    m.def("apply_operator", [](const Array& u, const KernelWeights& w) {
        return to_array(apply_operator(from_array(u, w.n), w));
    });
    m.def("residual", [](const Array& u, const KernelWeights& w, const Array& f) {
        return to_array(residual(from_array(u, w.n), w, from_array(f, w.n)));
    });
    m.def(
        "solve",
        [](const KernelWeights& w, const Array& f, double tol, int max_iter) {
            const GridFunction ff = from_array(f, w.n);
            Solution s;
            {
                py::gil_scoped_release release;
                s = solve(w, ff, make_options(tol, max_iter));
            }
            return py::make_tuple(to_array(s.u), report_dict(s.report));
        },
        py::arg("weights"), py::arg("f"), py::arg("tol") = 1e-10, py::arg("max_iter") = 50000);
    m.def(
        "torsion",
        [](const KernelWeights& w, double tol, int max_iter) {
            Solution s;
            {
                py::gil_scoped_release release;
                s = torsion(w, make_options(tol, max_iter));
            }
            return py::make_tuple(to_array(s.u), report_dict(s.report));
        },
        py::arg("weights"), py::arg("tol") = 1e-10, py::arg("max_iter") = 50000);

    m.def("field_names", &fields::names);
    m.def(
        "sample_field",
        [](const std::string& name, const Grid& g, double s, double amplitude) {
            return to_array(sample(fields::by_name(name, g.domain, s, amplitude), g));
        },
        py::arg("name"), py::arg("grid"), py::arg("s"), py::arg("amplitude") = 1.0);
    m.def(
        "eval_pointwise",
        [](const std::string& name, const std::vector<double>& x, const OperatorParams& params,
           const DomainSpec& domain, double amplitude, double far_cutoff, bool override_singular) {
            QuadratureOptions o;
            o.far_cutoff = far_cutoff;
            o.override_singular = override_singular;
            const PointwiseResult r =
                eval_pointwise(fields::by_name(name, domain, params.s, amplitude), to_point(x), params, o);
            py::dict d;
            d["value"] = r.value;
            d["error_bar"] = r.error_bar;
            d["tail_bound"] = r.tail_bound;
            d["eps"] = r.eps;
            d["series"] = r.series;
            d["cauchy_tail"] = r.cauchy_tail;
            d["series_converged"] = r.series_converged;
            return d;
        },
        py::arg("field"), py::arg("x"), py::arg("params"), py::arg("domain") = DomainSpec::interval(-1.0, 1.0),
        py::arg("amplitude") = 1.0, py::arg("far_cutoff") = std::numeric_limits<double>::infinity(), py::arg("override_singular") = false);

    m.def(
        "boundary_ratio",
        [](const Array& u, const Grid& g, const OperatorParams& params, double rho) {
            return boundary_ratio(from_array(u, g.size()), g, params, rho).sup_ratio;
        },
        py::arg("u"), py::arg("grid"), py::arg("params"), py::arg("rho") = 0.0);

    m.def("criterion_ids", &acceptance::criterion_ids);
    m.def(
        "run_criterion",
        [](const std::string& id) {
            acceptance::CriterionResult r;
            {
                py::gil_scoped_release release;
                r = acceptance::run_criterion(id);
            }
            py::dict d;
            d["id"] = r.id;
            d["title"] = r.title;
            d["passed"] = r.passed;
            d["detail"] = r.detail;
            d["seconds"] = r.seconds;
            py::dict metrics;
            for (const auto& [k, v] : r.metrics) {
                metrics[py::str(k)] = v;
            }
            d["metrics"] = metrics;
            return d;
        },
        py::arg("id"));

    m.def(
        "run_config",
        [](const std::string& text, const std::string& subcommand, const std::filesystem::path& out,
           bool override_singular) {
            const cli::ExperimentConfig cfg =
                cli::parse_config(text, cli::parse_subcommand(subcommand), override_singular);
            cli::RunManifest man;
            {
                py::gil_scoped_release release;
                man = cli::run(cfg, out, true);
            }
            return man.exit_code;
        },
        py::arg("text"), py::arg("subcommand"), py::arg("out"), py::arg("override_singular") = false);

    m.attr("__version__") = cli::library_version();
}
