#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>

#include "affinelab/billiards.hpp"
#include "affinelab/errors.hpp"
#include "affinelab/gaps.hpp"
#include "affinelab/homogeneous.hpp"
#include "affinelab/lenses.hpp"
#include "affinelab/stats.hpp"

namespace py = pybind11;
using namespace affinelab;

namespace {

py::tuple vec(Vec2 v) { return py::make_tuple(v.x, v.y); }

std::string repr(const Mat2& m) {
    return "Mat2([[" + std::to_string(m.a) + ", " + std::to_string(m.b) + "], [" + std::to_string(m.c) + ", " +
           std::to_string(m.d) + "]])";
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Affine lattices, billiards with a barrier, lens arrays and gap statistics.";

    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    py::class_<Mat2>(m, "Mat2")
        .def(py::init<double, double, double, double>(), py::arg("a") = 1.0, py::arg("b") = 0.0,
             py::arg("c") = 0.0, py::arg("d") = 1.0)
        .def_readwrite("a", &Mat2::a)
        .def_readwrite("b", &Mat2::b)
        .def_readwrite("c", &Mat2::c)
        .def_readwrite("d", &Mat2::d)
        .def("det", &Mat2::det)
        .def("__mul__", [](const Mat2& x, const Mat2& y) { return x * y; })
        .def("__repr__", &repr);

    py::class_<AffineLatticeClass>(m, "AffineLattice")
        .def(py::init([](const Mat2& h, std::pair<double, double> xi) {
                 return AffineLatticeClass(h, Vec2{xi.first, xi.second});
             }),
             py::arg("h"), py::arg("xi") = std::pair{0.0, 0.0})
        .def_property_readonly("h", [](const AffineLatticeClass& L) { return L.h(); })
        .def_property_readonly("xi", [](const AffineLatticeClass& L) { return vec(L.xi()); })
        .def("canonical", &AffineLatticeClass::canonical)
        .def("geodesic", [](const AffineLatticeClass& L, double t) { return L.acted(geodesic(t)); },
             "a_t applied on the left.")
        .def("horocycle",
             [](const AffineLatticeClass& L, double s1, double s2, double s3) {
                 return L.acted(horocycle(s1, s2, s3));
             })
        .def("alpha0", [](const AffineLatticeClass& L) { return alpha0(L); })
        .def("count_in_disc",
             [](const AffineLatticeClass& L, double radius) { return count_points_in_disc(L, {}, radius); })
        .def("triangle",
             [](const AffineLatticeClass& L, double cap) {
                 const auto f = f_triangle(L, cap);
                 return py::make_tuple(f.value(), std::string(to_string(f.status)));
             },
             py::arg("cap") = 1e6, "Triangle functional value and status.");

    m.def("haar_samples",
          [](std::size_t n, std::uint64_t seed) {
              Stream s(seed, 0);
              std::vector<AffineLatticeClass> out;
              out.reserve(n);
              for (std::size_t i = 0; i < n; ++i) out.push_back(haar_sample(s));
              return out;
          },
          py::arg("n"), py::arg("seed") = 0);

    // Gaps.
    m.def("frac_sqrt", &frac_sqrt);
    m.def("gaps",
          [](double r) {
              auto g = frac_sqrt_gaps(r);
              for (auto& x : g.gaps) x *= static_cast<double>(g.count);
              return g.gaps;
          },
          py::arg("r"), "Gaps of frac(sqrt(n)), n <= r, scaled by floor(r), in increasing order of position.");
    m.def("gap_length",
          [](double r, double s) { return L_r(frac_sqrt_gaps(r), s); }, py::arg("r"), py::arg("s"));
    m.def("gap_length_approx", [](double r, double s, double cap) { return L_prime(r, s, cap); },
          py::arg("r"), py::arg("s"), py::arg("cap") = 1e6);
    m.def("gap_lattice", &gap_lattice, py::arg("r"), py::arg("s"));
    m.def("small_gap_fraction", [](double r) { return plain_gap_distribution(r).frac_le_half; },
          py::arg("r"), "Fraction of normalised gaps at most 1/2.");

    // Billiards.
    py::class_<EllipseTable>(m, "EllipseTable")
        .def(py::init([](double a, double b, double lambda0) {
                 EllipseTable T{a, b, lambda0};
                 T.validate();
                 return T;
             }),
             py::arg("a") = 2.0, py::arg("b") = 1.0, py::arg("lambda0") = 0.5)
        .def_readonly("a", &EllipseTable::a)
        .def_readonly("b", &EllipseTable::b)
        .def_readonly("lambda0", &EllipseTable::lambda0);

    m.def("reduction",
          [](double lambda, const EllipseTable& T) {
              const auto r = reduction_data(lambda, T);
              py::dict d;
              d["case"] = std::string(to_string(r.kind));
              d["l"] = r.l;
              d["w"] = r.w;
              d["d"] = r.d;
              d["det_Mlwd"] = det_Mlwd(r);
              return d;
          },
          py::arg("lambda_"), py::arg("table") = EllipseTable{});
    m.def("det_Mpsi", &det_Mpsi_billiard, py::arg("lambda_"), py::arg("table") = EllipseTable{});
    m.def("billiard_orbit",
          [](double lambda, const EllipseTable& T, std::size_t n, std::uint64_t seed) {
              Stream s(seed, 0);
              SimOptions opt;
              opt.record_crossings = false;
              const auto tr = simulate(start_state(lambda, T, s), T, n, opt);
              py::dict d;
              d["boundary_params"] = tr.boundary_params;
              d["ellipse_hits"] = tr.ellipse_hits;
              d["barrier_hits"] = tr.barrier_hits;
              d["max_lambda_drift"] = tr.max_lambda_drift;
              d["singular"] = tr.singular;
              return d;
          },
          py::arg("lambda_"), py::arg("table") = EllipseTable{}, py::arg("n") = 10000, py::arg("seed") = 0);

    // Lenses.
    m.def("eaton_exit",
          [](std::pair<double, double> p, std::pair<double, double> v, double R) {
              const Ray out = eaton_map({{p.first, p.second}, {v.first, v.second}}, {0.0, 0.0}, R);
              return py::make_tuple(vec(out.p), vec(out.v));
          },
          py::arg("entry"), py::arg("direction"), py::arg("R"), "Exit point and direction for a lens at the origin.");
    m.def("admissible", &admissible, py::arg("h"), py::arg("R"));
    m.def("trapped",
          [](const Mat2& h, double R, double theta, std::size_t events) {
              const Mat2 hr = gauss_reduce(h).h;
              const Trace tr = trace({hr * Vec2{0.5, 0.5}, {std::cos(theta), std::sin(theta)}},
                                     LensGrid{h, R, LensModel::Eaton, theta}, events);
              return !tr.escaped && trapped_classify(tr).trapped;
          },
          py::arg("h"), py::arg("R"), py::arg("theta"), py::arg("events") = 20000);
    m.def("deviation_exponent",
          [](const Mat2& h, double R, double theta, std::size_t returns) {
              return deviation_run(build_skew_iet(h, R, theta), returns).fit.exponent;
          },
          py::arg("h"), py::arg("R"), py::arg("theta"), py::arg("returns") = 1000000);
    m.def("lyapunov_W",
          [](const Mat2& h, double R, double theta, std::size_t steps, std::uint64_t seed) {
              Stream s(seed, 0);
              const auto r = lyapunov_W(build_skew_iet(h, R, theta), steps, s);
              return py::make_tuple(r.exponent, r.unimodular);
          },
          py::arg("h"), py::arg("R"), py::arg("theta"), py::arg("steps") = 100000, py::arg("seed") = 0);

    // Statistics.
    m.def("ks_distance",
          [](std::vector<double> a, std::vector<double> b) { return ks_distance(ECDF(std::move(a)), ECDF(std::move(b))); });
}
