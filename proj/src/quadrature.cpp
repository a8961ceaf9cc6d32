#include "affinelab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "affinelab/errors.hpp"

namespace affinelab {

namespace {

QuadResult run(const std::function<double(double, double)>& g, double lo, double hi,
               const QuadOptions& o, const char* what) {
    boost::math::quadrature::tanh_sinh<double> ts(o.max_levels);
    QuadResult r;
    try {
        r.value = ts.integrate(g, lo, hi, o.tol, &r.error, &r.l1, &r.levels);
    } catch (const std::exception& e) {
        throw QuadratureError(std::string(what) + ": " + e.what());
    }
    if (!std::isfinite(r.value) || r.error > o.accept * std::max(r.l1, 1e-300))
        throw QuadratureError(std::string(what) + ": no convergence (error " +
                              std::to_string(r.error) + ", L1 " + std::to_string(r.l1) + ")");
    return r;
}

}  // namespace

QuadResult integrate_finite(const EndpointFn& f, double lo, double hi, const QuadOptions& o) {
    if (!(hi > lo)) throw QuadratureError("integrate_finite: empty interval");
    const double len = hi - lo;
    // The integrator passes xc = lo - x near lo and xc = hi - x near hi.
    auto g = [&](double x, double xc) {
        double dl, dr;
        if (xc < 0) {
            dl = -xc;
            dr = len - dl;
        } else {
            dr = xc;
            dl = len - dr;
        }
        return f(x, dl, dr);
    };
    return run(g, lo, hi, o, "integrate_finite");
}

QuadResult integrate_lower_tail(const TailFn& gfun, const QuadOptions& o) {
    auto g = [&](double, double xc) {
        double xv, u;
        if (xc < 0) {
            xv = -xc;
            u = 1.0 - xv;
        } else {
            u = xc;
            xv = 1.0 - u;
        }
        return gfun(xv, u);
    };
    return run(g, 0.0, 1.0, o, "integrate_lower_tail");
}

}  // namespace affinelab
