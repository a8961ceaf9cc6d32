#pragma once

// Double-exponential quadrature for integrands with inverse-square-root
// endpoint singularities. The integrand receives the distances to both
// endpoints so that vanishing factors can be formed without cancellation.

#include <cstddef>
#include <functional>

namespace affinelab {

struct QuadOptions {
    double tol = 1e-13;          // termination tolerance passed to the integrator
    double accept = 1e-9;        // reject results whose error estimate exceeds accept * L1
    std::size_t max_levels = 15;
};

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    double l1 = 0.0;
    std::size_t levels = 0;
};

// f(s, dl, dr) with dl = s - lo and dr = hi - s, both accurate near the endpoints.
using EndpointFn = std::function<double(double s, double dl, double dr)>;

// Integral over a finite interval [lo, hi]. Throws QuadratureError.
QuadResult integrate_finite(const EndpointFn& f, double lo, double hi, const QuadOptions& o = {});

// Integral over (-inf, hi] through s = hi - x / (1 - x). The integrand is
// supplied in scaled form g(x, u) = f(s) * ds/dx with u = 1 - x accurate
// near both ends, which lets callers cancel growth analytically.
using TailFn = std::function<double(double x, double u)>;
QuadResult integrate_lower_tail(const TailFn& g, const QuadOptions& o = {});

}  // namespace affinelab
