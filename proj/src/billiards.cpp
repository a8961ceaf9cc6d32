#include "affinelab/billiards.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "affinelab/errors.hpp"
#include "affinelab/stats.hpp"

namespace affinelab {

namespace {

constexpr double kSingular = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

Jet2 operator*(const Jet2& f, const Jet2& g) {
    return {f.v * g.v, f.d1 * g.v + f.v * g.d1, f.d2 * g.v + 2.0 * f.d1 * g.d1 + f.v * g.d2};
}

Jet2 operator*(double k, const Jet2& f) { return {k * f.v, k * f.d1, k * f.d2}; }

Jet2 reciprocal(const Jet2& g) {
    const double v = 1.0 / g.v;
    return {v, -g.d1 * v * v, 2.0 * g.d1 * g.d1 * v * v * v - g.d2 * v * v};
}

Jet2 jet_sqrt(const Jet2& g) {
    const double r = std::sqrt(g.v);
    return {r, g.d1 / (2.0 * r), g.d2 / (2.0 * r) - g.d1 * g.d1 / (4.0 * g.v * r)};
}

}  // namespace

void EllipseTable::validate() const {
    if (!(b > 0.0 && a > b)) throw DomainError("EllipseTable: need 0 < b < a");
    if (!(lambda0 > 0.0 && lambda0 < b)) throw DomainError("EllipseTable: need 0 < lambda0 < b");
}

double EllipseTable::barrier_lo() const { return std::sqrt(b - lambda0); }
double EllipseTable::barrier_hi() const { return std::sqrt(b); }

double caustic_param(Vec2 p, Vec2 v, const EllipseTable& T) {
    const double m = p.cross(v);
    return T.a * v.y * v.y + T.b * v.x * v.x - m * m;
}

Event next_event(const BilliardState& s, const EllipseTable& T, bool skip_barrier) {
    const Vec2 p = s.p, v = s.v;
    const double A = v.x * v.x / T.a + v.y * v.y / T.b;
    const double B = 2.0 * (p.x * v.x / T.a + p.y * v.y / T.b);
    const double C = p.x * p.x / T.a + p.y * p.y / T.b - 1.0;
    const double D = std::max(0.0, B * B - 4.0 * A * C);
    const double sq = std::sqrt(D);
    // Larger root without cancellation.
    double t = B >= 0.0 ? -2.0 * C / (B + sq) : (-B + sq) / (2.0 * A);
    if (!(t > 0.0)) t = 0.0;

    Event e;
    e.type = EventType::EllipseHit;
    e.time = t;
    e.point = p + v * t;
    const double scale = std::sqrt(e.point.x * e.point.x / T.a + e.point.y * e.point.y / T.b);
    if (scale > 0.0) e.point = e.point * (1.0 / scale);

    if (!skip_barrier && v.x != 0.0 && p.x * v.x < 0.0) {
        const double tb = -p.x / v.x;
        if (tb < t) {
            const double y = p.y + v.y * tb;
            const double lo = T.barrier_lo(), hi = T.barrier_hi();
            if (std::abs(y - lo) < kSingular || std::abs(y - hi) < kSingular) {
                e.type = EventType::BarrierEndpoint;
                e.time = tb;
                e.point = {0.0, y};
            } else if (y > lo && y < hi) {
                e.type = EventType::BarrierHit;
                e.time = tb;
                e.point = {0.0, y};
            }
        }
    }
    return e;
}

BilliardState reflect(const Event& e, const BilliardState& s, const EllipseTable& T) {
    BilliardState out = s;
    out.p = e.point;
    switch (e.type) {
        case EventType::BarrierEndpoint:
            throw DomainError("reflect: barrier endpoint is singular");
        case EventType::BarrierHit:
            out.p.x = 0.0;
            out.v = {-s.v.x, s.v.y};
            break;
        case EventType::EllipseHit: {
            const Vec2 n{e.point.x / T.a, e.point.y / T.b};
            const double k = 2.0 * s.v.dot(n) / n.norm2();
            Vec2 v = s.v - n * k;
            out.v = v * (1.0 / v.norm());
            break;
        }
    }
    out.lambda = caustic_param(out.p, out.v, T);
    return out;
}

double boundary_param(Vec2 p, const EllipseTable& T) {
    double t = std::atan2(p.y / std::sqrt(T.b), p.x / std::sqrt(T.a)) / (2.0 * std::numbers::pi);
    if (t < 0.0) t += 1.0;
    if (t >= 1.0) t -= 1.0;
    return t;
}

Trajectory simulate(const BilliardState& s0, const EllipseTable& T, std::size_t n,
                    const SimOptions& opt) {
    T.validate();
    Trajectory tr;
    BilliardState s = s0;
    const double lambda_ref = caustic_param(s0.p, s0.v, T);
    bool skip = false;
    std::size_t count = 0;
    while (count < n) {
        const Event e = next_event(s, T, skip);
        if (opt.record_crossings) {
            if (e.type == EventType::BarrierHit)
                tr.crossings.push_back({e.point.y, true});
            else if (s.p.x * e.point.x < 0.0 && s.v.x != 0.0)
                tr.crossings.push_back({s.p.y + s.v.y * (-s.p.x / s.v.x), false});
        }
        if (opt.record_points) tr.events.push_back(e);
        if (e.type == EventType::BarrierEndpoint) {
            tr.singular = true;
            break;
        }
        s = reflect(e, s, T);
        tr.max_speed_drift = std::max(tr.max_speed_drift, std::abs(s.v.norm() - 1.0));
        tr.max_lambda_drift = std::max(tr.max_lambda_drift, std::abs(s.lambda - lambda_ref));
        if (e.type == EventType::EllipseHit) {
            ++tr.ellipse_hits;
            if (opt.record_params) tr.boundary_params.push_back(boundary_param(e.point, T));
            skip = false;
            ++count;
        } else {
            ++tr.barrier_hits;
            skip = true;
            if (!opt.count_ellipse_hits_only) ++count;
        }
    }
    tr.final_state = s;
    return tr;
}

BilliardState start_state(double lambda, const EllipseTable& T, Stream& rng) {
    T.validate();
    if (!(lambda > 0.0 && lambda < T.a)) throw DomainError("start_state: need 0 < lambda < a");
    const double sa = std::sqrt(T.a), sb = std::sqrt(T.b);
    for (int attempt = 0; attempt < 100000; ++attempt) {
        const Vec2 p{rng.uniform(-sa, sa), rng.uniform(-sb, sb)};
        if (p.x * p.x / T.a + p.y * p.y / T.b >= 1.0 || p.x == 0.0) continue;
        // lambda(phi) for v = (cos phi, sin phi) is the quadratic form v^T M v.
        const double m11 = T.b - p.y * p.y, m22 = T.a - p.x * p.x, m12 = p.x * p.y;
        const double mean = 0.5 * (m11 + m22);
        const double c = 0.5 * (m11 - m22);
        const double amp = std::hypot(c, m12);
        const double q = (lambda - mean) / amp;
        if (!(amp > 0.0) || std::abs(q) > 1.0) continue;
        const double delta = std::atan2(m12, c);
        double ang = std::acos(q);
        if (rng.uniform() < 0.5) ang = -ang;
        double phi = 0.5 * (ang + delta);
        if (rng.uniform() < 0.5) phi += std::numbers::pi;
        BilliardState s;
        s.p = p;
        s.v = {std::cos(phi), std::sin(phi)};
        s.lambda = caustic_param(s.p, s.v, T);
        return s;
    }
    throw NumericError("start_state: no admissible start found");
}

double integrand_e(double s, double lambda, const EllipseTable& T) {
    const double prod = (T.a - s) * (T.b - s) * (lambda - s);
    if (!(prod != 0.0) || !std::isfinite(prod))
        throw DomainError("integrand_e: (a-s)(b-s)(lambda-s) vanishes");
    return 1.0 / std::sqrt(std::abs(prod));
}

const char* to_string(ReductionCase c) {
    switch (c) {
        case ReductionCase::E: return "E";
        case ReductionCase::EPrime: return "E'";
        case ReductionCase::H: return "H";
    }
    return "?";
}

ReductionCase classify(double lambda, const EllipseTable& T) {
    if (!(lambda > 0.0 && lambda < T.a) || lambda == T.b)
        throw DomainError("classify: need 0 < lambda < a, lambda != b");
    if (lambda <= T.lambda0) return ReductionCase::EPrime;
    if (lambda < T.b) return ReductionCase::E;
    return ReductionCase::H;
}

double e_moment(double lo, double hi, int k, double lambda, const EllipseTable& T,
                const QuadOptions& o, std::size_t* levels) {
    const double roots[3] = {T.a, T.b, lambda};
    QuadResult r;
    if (std::isinf(lo)) {
        // s = hi - x/u: rho - s = g_rho / u with g_rho = (rho - hi) u + x.
        auto g = [&](double x, double u) {
            double prod = 1.0, gl = 0.0;
            for (int i = 0; i < 3; ++i) {
                const double gi = roots[i] == hi ? x : (roots[i] - hi) * u + x;
                prod *= gi;
                if (i == 2) gl = gi;
            }
            double val = std::pow(u, k - 0.5) / std::sqrt(std::abs(prod));
            for (int j = 0; j < k; ++j) val /= gl;
            return val;
        };
        r = integrate_lower_tail(g, o);
    } else {
        auto f = [&](double s, double dl, double dr) {
            double prod = 1.0, gl = 0.0;
            for (int i = 0; i < 3; ++i) {
                double gi;
                if (roots[i] == hi)
                    gi = dr;
                else if (roots[i] == lo)
                    gi = -dl;
                else
                    gi = roots[i] - s;
                prod *= gi;
                if (i == 2) gl = gi;
            }
            double val = 1.0 / std::sqrt(std::abs(prod));
            for (int j = 0; j < k; ++j) val /= gl;
            return val;
        };
        r = integrate_finite(f, lo, hi, o);
    }
    if (levels) *levels = std::max(*levels, r.levels);
    return r.value;
}

ReductionData reduction_data(double lambda, const EllipseTable& T, const QuadOptions& o) {
    T.validate();
    ReductionData r;
    r.lambda = lambda;
    r.kind = classify(lambda, T);
    std::size_t lev = 0;
    auto moments = [&](double lo, double hi, std::array<double, 3>& m) {
        for (int k = 0; k < 3; ++k) m[k] = e_moment(lo, hi, k, lambda, T, o, &lev);
    };
    if (r.kind == ReductionCase::H) {
        moments(-kInf, T.b, r.moments[0]);
        moments(0.0, T.b, r.moments[1]);
        const auto& L = r.moments[0];
        const auto& W = r.moments[1];
        r.l = 2.0 * L[0];
        r.lp = -L[1];
        r.lpp = 1.5 * L[2];
        r.w = 2.0 * W[0];
        r.wp = -W[1];
        r.wpp = 1.5 * W[2];
    } else {
        moments(T.b, T.a, r.moments[0]);
        moments(-kInf, 0.0, r.moments[1]);
        const auto& L = r.moments[0];
        const auto& Wt = r.moments[1];
        r.l = 4.0 * L[0];
        r.lp = -2.0 * L[1];
        r.lpp = 3.0 * L[2];
        // w = l/4 - w~ with w~ the integral over (-inf, 0).
        r.w = 0.25 * r.l - Wt[0];
        r.wp = 0.25 * r.lp + 0.5 * Wt[1];
        r.wpp = 0.25 * r.lpp - 0.75 * Wt[2];
    }
    if (r.kind != ReductionCase::EPrime) {
        moments(0.0, T.lambda0, r.moments[2]);
        const auto& Dm = r.moments[2];
        r.d = Dm[0];
        r.dp = -0.5 * Dm[1];
        r.dpp = 0.75 * Dm[2];
    }
    r.max_levels_used = lev;
    if (!(r.l > 0.0 && r.w > 0.0 && r.d >= 0.0))
        throw NumericError("reduction_data: non-positive polygon dimensions");
    return r;
}

namespace {

std::array<Jet2, 6> psi_jets(const ReductionData& r) {
    const Jet2 l{r.l, r.lp, r.lpp}, w{r.w, r.wp, r.wpp}, d{r.d, r.dp, r.dpp};
    const Jet2 inv_r = reciprocal(2.0 * jet_sqrt(l * w));
    const Jet2 a = l * inv_r, b = 2.0 * (w * inv_r), c = 2.0 * (d * inv_r);
    return {a, -1.0 * b, a, b, -1.0 * c, c};
}

AffineElement psi_from(const ReductionData& r) {
    const double rr = 2.0 * std::sqrt(r.l * r.w);
    AffineElement g;
    g.h = {r.l / rr, -2.0 * r.w / rr, r.l / rr, 2.0 * r.w / rr};
    g.xi = {-2.0 * r.d / rr, 2.0 * r.d / rr};
    return g;
}

}  // namespace

AffineElement psi_curve(double lambda, const EllipseTable& T) {
    return psi_from(reduction_data(lambda, T));
}

WronskianCurve billiard_curve(const EllipseTable& T, double lo, double hi) {
    WronskianCurve c;
    c.lo = lo;
    c.hi = hi;
    c.value = [T](double lambda) {
        const auto g = psi_from(reduction_data(lambda, T));
        return std::array<double, 6>{g.h.a, g.h.b, g.h.c, g.h.d, g.xi.x, g.xi.y};
    };
    c.jets = [T](double lambda) { return psi_jets(reduction_data(lambda, T)); };
    return c;
}

double det_Mpsi_billiard(double lambda, const EllipseTable& T) {
    const auto c = billiard_curve(T, lambda, lambda);
    return wronskian_det(c, lambda);
}

double det_Mlwd(const ReductionData& r) {
    return r.l * (r.wp * r.dpp - r.dp * r.wpp) - r.w * (r.lp * r.dpp - r.dp * r.lpp) +
           r.d * (r.lp * r.wpp - r.wp * r.lpp);
}

void PolygonalModel::validate() const {
    if (!(l > 0.0 && w > 0.0)) throw DomainError("PolygonalModel: need l, w > 0");
    if (kind != Kind::Rectangle && !(d >= 0.0 && d <= w))
        throw DomainError("PolygonalModel: need 0 <= d <= w");
}

PolygonalRun polygonal_simulate(const PolygonalModel& m, const PolygonalStart& st, std::size_t n) {
    m.validate();
    if (!(st.x >= 0.0 && st.x <= m.l && st.y >= 0.0 && st.y <= m.w) ||
        std::abs(st.sx) != 1 || std::abs(st.sy) != 1)
        throw DomainError("polygonal_simulate: start outside the polygon or bad direction");
    const bool cylinder = m.kind == PolygonalModel::Kind::CylinderSlit;
    const bool slit = m.kind != PolygonalModel::Kind::Rectangle && m.d > 0.0;
    const double xs = 0.5 * m.l;
    double x = st.x, y = st.y;
    int sx = st.sx, sy = st.sy;
    PolygonalRun run;
    double prev_c = 0.0;
    // Flow parameter t moves both coordinates by one unit.
    while (run.bottom_x.size() < n) {
        const double ty = sy > 0 ? m.w - y : y;
        const double tx = sx > 0 ? m.l - x : x;
        double ts = kInf;
        if (slit && ((sx > 0 && x < xs) || (sx < 0 && x > xs))) ts = std::abs(xs - x);
        const double t = std::min({ty, tx, ts});
        x += sx * t;
        y += sy * t;
        bool slit_hit = false;
        if (ts == t) {
            x = xs;
            if (std::abs(y - m.d) < kSingular) {
                run.singular = true;
                break;
            }
            slit_hit = y < m.d;
        }
        if (tx == t) {
            if (cylinder) {
                x = sx > 0 ? 0.0 : m.l;
            } else {
                x = sx > 0 ? m.l : 0.0;
                sx = -sx;
                ++run.side_hits;
            }
        }
        if (slit_hit) {
            sx = -sx;
            ++run.slit_hits;
        }
        if (ty == t) {
            const bool bottom = sy < 0;
            y = bottom ? 0.0 : m.w;
            sy = -sy;
            if (bottom) {
                const double X = sx > 0 ? x : 2.0 * m.l - x;
                double c = X / (2.0 * m.l);
                c -= std::floor(c);
                run.bottom_x.push_back(x);
                run.bottom_sx.push_back(sx);
                run.circle.push_back(c);
                if (run.lift.empty()) {
                    run.lift.push_back(c);
                } else {
                    double inc = c - prev_c;
                    inc -= std::floor(inc);
                    run.lift.push_back(run.lift.back() + inc);
                }
                prev_c = c;
            }
        }
    }
    return run;
}

EquidistributionReport equidistribution_report(double lambda, const EllipseTable& T,
                                               const BilliardState& s1, const BilliardState& s2,
                                               std::size_t n, double threshold) {
    SimOptions opt;
    opt.record_crossings = false;
    opt.count_ellipse_hits_only = true;
    const Trajectory t1 = simulate(s1, T, n, opt);
    const Trajectory t2 = simulate(s2, T, n, opt);
    EquidistributionReport rep;
    rep.lambda = lambda;
    rep.singular = t1.singular || t2.singular;
    rep.n1 = t1.boundary_params.size();
    rep.n2 = t2.boundary_params.size();
    rep.max_lambda_drift = std::max(t1.max_lambda_drift, t2.max_lambda_drift);
    if (rep.n1 == 0 || rep.n2 == 0) throw NumericError("equidistribution_report: empty orbit");
    rep.ks = ks_distance(ECDF(t1.boundary_params), ECDF(t2.boundary_params));
    rep.flagged = rep.ks >= threshold;
    return rep;
}

EquidistributionReport equidistribution_report(double lambda, const EllipseTable& T, Stream& rng,
                                               std::size_t n, double threshold) {
    Stream r1 = rng.child(1), r2 = rng.child(2);
    const BilliardState s1 = start_state(lambda, T, r1);
    const BilliardState s2 = start_state(lambda, T, r2);
    return equidistribution_report(lambda, T, s1, s2, n, threshold);
}

}  // namespace affinelab
