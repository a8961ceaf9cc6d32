#include "affinelab/homogeneous.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "affinelab/errors.hpp"
#include "affinelab/stats.hpp"

namespace affinelab {

AffineElement compose(const AffineElement& g1, const AffineElement& g2) {
    return {g1.h * g2.h, g1.h * g2.xi + g1.xi};
}

AffineElement inverse(const AffineElement& g) {
    const Mat2 hi = g.h.inverse();
    return {hi, -(hi * g.xi)};
}

AffineElement identity_element() { return {}; }

AffineElement geodesic(double t) { return {Mat2::diag(std::exp(t), std::exp(-t)), {}}; }

AffineElement horocycle(double s1, double s2, double s3) {
    return {Mat2{1.0, s1, 0.0, 1.0}, {s2, s3}};
}

ReducedBasis gauss_reduce(const Mat2& h) {
    ReducedBasis r;
    Vec2 u = h.col1(), v = h.col2();
    // gamma columns track the integer coefficients of u and v.
    std::int64_t g11 = 1, g21 = 0, g12 = 0, g22 = 1;
    auto swap_uv = [&] {
        // (u, v) -> (v, -u) keeps the orientation.
        const Vec2 t = u;
        u = v;
        v = -t;
        const std::int64_t a = g11, c = g21;
        g11 = g12;
        g21 = g22;
        g12 = -a;
        g22 = -c;
    };
    if (u.norm2() > v.norm2()) swap_uv();
    for (int it = 0; it < 4096; ++it) {
        const double uu = u.norm2();
        if (uu == 0.0) break;
        const double mu = std::nearbyint(u.dot(v) / uu);
        if (mu != 0.0) {
            v = v - u * mu;
            const auto m = static_cast<std::int64_t>(mu);
            g12 -= m * g11;
            g22 -= m * g21;
        }
        if (v.norm2() < uu)
            swap_uv();
        else
            break;
    }
    r.h = Mat2::from_columns(u, v);
    r.gamma = {g11, g12, g21, g22};
    return r;
}

Vec2 shortest_vector(const Mat2& h) {
    const ReducedBasis r = gauss_reduce(h);
    const Vec2 u = r.h.col1(), v = r.h.col2();
    const Vec2 cands[] = {u, -u, v, -v, u + v, -(u + v), u - v, v - u};
    double best = std::numeric_limits<double>::infinity();
    for (const Vec2& c : cands) best = std::min(best, c.norm2());
    const double tol = best * 1e-12;
    Vec2 pick{std::numeric_limits<double>::infinity(), 0.0};
    for (const Vec2& c : cands) {
        if (c.norm2() > best + tol) continue;
        if (c.x < pick.x || (c.x == pick.x && c.y < pick.y)) pick = c;
    }
    return pick;
}

double alpha0(const Mat2& h) { return 1.0 / std::sqrt(shortest_vector(h).norm()); }

double alpha0(const AffineLatticeClass& L) { return alpha0(L.h()); }

AffineLatticeClass AffineLatticeClass::canonical() const {
    const ReducedBasis r = gauss_reduce(rep.h);
    const Mat2 inv = r.h.inverse();
    Vec2 c = inv * rep.xi;
    c.x -= std::floor(c.x);
    c.y -= std::floor(c.y);
    return AffineLatticeClass(AffineElement{r.h, r.h * c}, true);
}

namespace {

struct ZetaSearch {
    ReducedBasis red;
    double bound;
    Vec2 center;  // rounded coefficient centre in the reduced basis, scaled by n
};

ZetaSearch zeta_setup(const AffineLatticeClass& L, int n) {
    if (n < 1) throw DomainError("zeta_point: n must be positive");
    ZetaSearch z;
    z.red = gauss_reduce(L.h());
    // alpha0^{-2} = |shortest vector|
    z.bound = shortest_vector(L.h()).norm() / (2.0 * n);
    const Vec2 c = z.red.h.inverse() * L.xi() * static_cast<double>(n);
    z.center = {std::nearbyint(c.x), std::nearbyint(c.y)};
    return z;
}

ZetaHit make_hit(const AffineLatticeClass& L, const ZetaSearch& z, int n, double k1, double k2) {
    const auto& g = z.red.gamma;
    const double inv_n = 1.0 / n;
    const Vec2 xi0{(static_cast<double>(g[0]) * k1 + static_cast<double>(g[1]) * k2) * inv_n,
                   (static_cast<double>(g[2]) * k1 + static_cast<double>(g[3]) * k2) * inv_n};
    const Vec2 p = z.red.h * Vec2{k1 * inv_n, k2 * inv_n};
    return {xi0, (L.xi() - p).norm()};
}

}  // namespace

std::vector<ZetaHit> zeta_candidates(const AffineLatticeClass& L, int n, int radius) {
    const ZetaSearch z = zeta_setup(L, n);
    std::vector<ZetaHit> out;
    for (int i = -radius; i <= radius; ++i)
        for (int j = -radius; j <= radius; ++j) {
            ZetaHit hit = make_hit(L, z, n, z.center.x + i, z.center.y + j);
            if (hit.dist < z.bound) out.push_back(hit);
        }
    return out;
}

std::optional<ZetaHit> zeta_point(const AffineLatticeClass& L, int n) {
    const ZetaSearch z = zeta_setup(L, n);
    std::optional<ZetaHit> best;
    for (int i = -3; i <= 3; ++i)
        for (int j = -3; j <= 3; ++j) {
            ZetaHit hit = make_hit(L, z, n, z.center.x + i, z.center.y + j);
            if (hit.dist < z.bound && (!best || hit.dist < best->dist)) best = hit;
        }
    return best;
}

HeightValue heights(const AffineLatticeClass& L, int n, double t) {
    HeightValue hv;
    hv.n = n;
    hv.t = t;
    hv.alpha0 = alpha0(L);
    const auto z = zeta_point(L, n);
    if (z) {
        hv.zeta = z->xi0;
        const double scale = 1.0 / (hv.alpha0 * hv.alpha0);
        if (z->dist < 1e-12 * scale) {
            hv.infinite = true;
            hv.alphaN = std::numeric_limits<double>::infinity();
            hv.betaN = std::numeric_limits<double>::infinity();
            return hv;
        }
        hv.alphaN = 1.0 / std::sqrt(z->dist);
    }
    hv.betaN = hv.alphaN + 8.0 * n * std::exp(t) * hv.alpha0;
    return hv;
}

bool in_X2(const AffineLatticeClass& L, double tol) {
    const ReducedBasis r = gauss_reduce(L.h());
    const Vec2 c = r.h.inverse() * L.xi();
    const bool on_lattice =
        std::abs(c.x - std::nearbyint(c.x)) <= tol && std::abs(c.y - std::nearbyint(c.y)) <= tol;
    return !on_lattice;
}

AffineLatticeClass haar_sample(Stream& rng) {
    const double y_min = std::sqrt(3.0) / 2.0;
    double x = 0.0, y = 0.0;
    do {
        x = rng.uniform() - 0.5;
        y = y_min / rng.uniform_pos();  // density proportional to y^{-2}
    } while (x * x + y * y < 1.0);
    const double s = 1.0 / std::sqrt(y);
    const Mat2 base = Mat2::from_columns({s, 0.0}, {x * s, y * s});
    const Mat2 h = Mat2::rotation(2.0 * std::numbers::pi * rng.uniform()) * base;
    const double c1 = rng.uniform(), c2 = rng.uniform();
    return AffineLatticeClass(h, h * Vec2{c1, c2});
}

void for_each_point_in_rect(const AffineLatticeClass& L, double xlo, double xhi, double ylo,
                            double yhi, const std::function<void(Vec2)>& fn) {
    const AffineLatticeClass C = L.canonical();
    const Mat2& H = C.h();
    const Mat2 inv = H.inverse();
    const Vec2 xi = C.xi();
    // Coefficient ranges over the rectangle corners.
    double lo1 = std::numeric_limits<double>::infinity(), hi1 = -lo1, lo2 = lo1, hi2 = -lo1;
    for (double px : {xlo, xhi})
        for (double py : {ylo, yhi}) {
            const Vec2 c = inv * (Vec2{px, py} - xi);
            lo1 = std::min(lo1, c.x);
            hi1 = std::max(hi1, c.x);
            lo2 = std::min(lo2, c.y);
            hi2 = std::max(hi2, c.y);
        }
    Vec2 u = H.col1(), v = H.col2();
    // Iterate the outer loop over the coefficient with the shorter range.
    if (hi1 - lo1 < hi2 - lo2) {
        std::swap(u, v);
        std::swap(lo1, lo2);
        std::swap(hi1, hi2);
    }
    const auto n2_lo = static_cast<std::int64_t>(std::floor(lo2)) - 1;
    const auto n2_hi = static_cast<std::int64_t>(std::ceil(hi2)) + 1;
    for (std::int64_t n2 = n2_lo; n2 <= n2_hi; ++n2) {
        const Vec2 base = v * static_cast<double>(n2) + xi;
        double a = -std::numeric_limits<double>::infinity(), b = -a;
        auto clip = [&](double p0, double du, double lo, double hi) {
            if (du == 0.0) {
                if (!(p0 > lo && p0 < hi)) {
                    a = 1.0;
                    b = 0.0;
                }
                return;
            }
            double t0 = (lo - p0) / du, t1 = (hi - p0) / du;
            if (t0 > t1) std::swap(t0, t1);
            a = std::max(a, t0);
            b = std::min(b, t1);
        };
        clip(base.x, u.x, xlo, xhi);
        clip(base.y, u.y, ylo, yhi);
        if (!(a <= b)) continue;
        const auto k_lo = static_cast<std::int64_t>(std::floor(a)) - 1;
        const auto k_hi = static_cast<std::int64_t>(std::ceil(b)) + 1;
        for (std::int64_t k = k_lo; k <= k_hi; ++k) {
            const Vec2 p = base + u * static_cast<double>(k);
            if (p.x > xlo && p.x < xhi && p.y > ylo && p.y < yhi) fn(p);
        }
    }
}

std::size_t count_points_in_disc(const AffineLatticeClass& L, Vec2 center, double radius) {
    std::size_t count = 0;
    const double r2 = radius * radius;
    for_each_point_in_rect(L, center.x - radius, center.x + radius, center.y - radius,
                           center.y + radius, [&](Vec2 p) {
                               if ((p - center).norm2() < r2) ++count;
                           });
    return count;
}

GeodesicFlow::GeodesicFlow(const AffineLatticeClass& x0, double max_step)
    : x_(x0.canonical()), max_step_(max_step) {
    if (!(max_step > 0.0)) throw DomainError("GeodesicFlow: max_step must be positive");
}

void GeodesicFlow::step(double tau) {
    const double e = std::exp(tau), ei = 1.0 / e;
    Mat2 h = x_.h();
    h = {h.a * e, h.b * e, h.c * ei, h.d * ei};
    const Vec2 xi{x_.xi().x * e, x_.xi().y * ei};
    if (++steps_ % 64 == 0) {
        // Rounding drifts det away from 1; pull it back.
        h = h * (1.0 / std::sqrt(h.det()));
    }
    x_ = AffineLatticeClass(h, xi).canonical();
}

void GeodesicFlow::advance(double t) {
    if (t == 0.0) return;
    const auto n = static_cast<std::int64_t>(std::ceil(std::abs(t) / max_step_));
    const double tau = t / static_cast<double>(n);
    for (std::int64_t i = 0; i < n; ++i) step(tau);
    t_ += t;
}

Observable cusp_bump(double c) {
    if (!(c > 1.0 / std::sqrt(2.0))) throw DomainError("cusp_bump: c must exceed 2^{-1/2}");
    return [c](const AffineLatticeClass& L) { return std::max(0.0, 1.0 - alpha0(L) / c); };
}

Observable observable_from_preset(const std::string& preset) {
    const auto colon = preset.find(':');
    const std::string name = preset.substr(0, colon);
    std::string c_val, v_val;
    if (colon != std::string::npos) {
        std::stringstream ss(preset.substr(colon + 1));
        std::string kv;
        while (std::getline(ss, kv, ',')) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw DomainError("observable preset: bad token " + kv);
            const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
            if (k == "c")
                c_val = v;
            else if (k == "v")
                v_val = v;
            else
                throw DomainError("observable preset: unknown key " + k);
        }
    }
    if (name == "cusp_bump") return cusp_bump(c_val.empty() ? 3.0 : std::stod(c_val));
    if (name == "const") {
        const double v = v_val.empty() ? 1.0 : std::stod(v_val);
        return [v](const AffineLatticeClass&) { return v; };
    }
    if (name == "alpha0") return [](const AffineLatticeClass& L) { return alpha0(L); };
    throw DomainError("unknown observable preset: " + preset);
}

BirkhoffResult birkhoff_series(const AffineLatticeClass& x0, const Observable& obs, double T,
                               double dt, std::size_t batches) {
    if (!(T > 0.0) || !(dt > 0.0) || dt > T) throw DomainError("birkhoff: need 0 < dt <= T");
    const auto n = static_cast<std::size_t>(std::llround(T / dt));
    const double step = T / static_cast<double>(n);
    GeodesicFlow flow(x0, std::min(1.0, step));
    std::vector<double> vals;
    vals.reserve(n + 1);
    vals.push_back(obs(flow.state()));
    for (std::size_t i = 0; i < n; ++i) {
        flow.advance(step);
        vals.push_back(obs(flow.state()));
    }
    double sum = 0.0;
    for (double v : vals) sum += v;
    sum -= 0.5 * (vals.front() + vals.back());
    BirkhoffResult r;
    r.mean = sum / static_cast<double>(n);
    vals.pop_back();
    r.se = batch_means(vals, batches).se;
    r.samples = n + 1;
    return r;
}

double birkhoff_average(const AffineLatticeClass& x0, const Observable& obs, double T, double dt) {
    return birkhoff_series(x0, obs, T, dt, 1).mean;
}

AffineElement curve_point(const CurveU& c, double s) {
    if (s < c.lo || s > c.hi) throw DomainError("curve_point: s outside the curve domain");
    return horocycle(s, c.phi(s), 0.0);
}

namespace {

double det3(const std::array<std::array<double, 3>, 3>& m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

}  // namespace

double wronskian_det(const WronskianCurve& psi, double s) {
    if (s < psi.lo || s > psi.hi) throw DomainError("wronskian_det: s outside the domain");
    constexpr int idx[3] = {0, 1, 4};  // h11, h12, v1
    std::array<std::array<double, 3>, 3> m{};
    if (psi.jets) {
        const auto j = psi.jets(s);
        for (int k = 0; k < 3; ++k) {
            m[0][k] = j[idx[k]].v;
            m[1][k] = j[idx[k]].d1;
            m[2][k] = j[idx[k]].d2;
        }
        return det3(m);
    }
    const double h = 1e-4 * (psi.hi - psi.lo);
    // Keep the stencil inside the domain.
    const double c = std::clamp(s, psi.lo + h, psi.hi - h);
    const auto fm = psi.value(c - h), f0 = psi.value(c), fp = psi.value(c + h);
    const auto fs = psi.value(s);
    for (int k = 0; k < 3; ++k) {
        const int i = idx[k];
        m[0][k] = fs[i];
        m[1][k] = (fp[i] - fm[i]) / (2.0 * h);
        m[2][k] = (fp[i] - 2.0 * f0[i] + fm[i]) / (h * h);
    }
    return det3(m);
}

WronskianCurve rotation_curve(double R) {
    WronskianCurve w;
    w.lo = 0.0;
    w.hi = 2.0 * std::numbers::pi;
    w.value = [R](double th) {
        const double c = std::cos(th), s = std::sin(th);
        return std::array<double, 6>{c, -s, s, c, 2.0 * R, 0.0};
    };
    w.jets = [R](double th) {
        const double c = std::cos(th), s = std::sin(th);
        return std::array<Jet2, 6>{Jet2{c, -s, -c}, Jet2{-s, -c, s}, Jet2{s, c, -s},
                                   Jet2{c, -s, -c}, Jet2{2.0 * R, 0.0, 0.0}, Jet2{}};
    };
    return w;
}

}  // namespace affinelab
