#include "affinelab/lenses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "affinelab/errors.hpp"
#include "affinelab/stats.hpp"

namespace affinelab {

namespace {

constexpr double kGraze = 1e-14;
constexpr double kSaddle = 1e-12;

Vec2 perp(Vec2 v) { return {-v.y, v.x}; }

std::array<std::int64_t, 2> lattice_index(const Mat2& hinv, Vec2 p) {
    const Vec2 q = hinv * p;
    return {static_cast<std::int64_t>(std::llround(q.x)), static_cast<std::int64_t>(std::llround(q.y))};
}

double frac(double x) {
    double f = x - std::floor(x);
    return f >= 1.0 ? 0.0 : f;
}

// Extended gcd: returns (r, s) with p s - q r = 1 for coprime p, q.
std::pair<std::int64_t, std::int64_t> complete_basis(std::int64_t p, std::int64_t q) {
    std::int64_t old_r = p, r = q, old_s = 1, s = 0, old_t = 0, t = 1;
    while (r != 0) {
        const std::int64_t k = old_r / r;
        old_r -= k * r;
        std::swap(old_r, r);
        old_s -= k * s;
        std::swap(old_s, s);
        old_t -= k * t;
        std::swap(old_t, t);
    }
    // old_s p + old_t q = old_r = +-1.
    if (old_r < 0) {
        old_s = -old_s;
        old_t = -old_t;
    }
    return {-old_t, old_s};
}

}  // namespace

bool admissible(const Mat2& h, double R) { return R >= 0.0 && 2.0 * R < shortest_vector(h).norm(); }

Ray eaton_map(const Ray& in, Vec2 center, double R) {
    (void)R;
    const Vec2 u = in.p - center;
    const Vec2 refl = in.v * (2.0 * u.dot(in.v)) - u;
    return {center + refl, -in.v};
}

Ray flat_lens_map(const Ray& in, Vec2 center) { return {center * 2.0 - in.p, -in.v}; }

std::optional<LensHit> next_lens_hit(const Ray& ray, const LensGrid& grid, double horizon,
                                     const std::optional<std::array<std::int64_t, 2>>& skip,
                                     std::size_t* grazing) {
    const ReducedBasis rb = gauss_reduce(grid.h);
    const AffineLatticeClass L(rb.h, Vec2{});
    const Mat2 hinv = grid.h.inverse();
    const Vec2 n = perp(ray.v);
    const double R = grid.R;
    const double chunk = 4.0 * std::max(rb.h.col2().norm(), 2.0 * R);
    for (double t0 = 0.0; t0 < horizon; t0 += chunk) {
        const double t1 = std::min(t0 + chunk, horizon);
        const Vec2 a = ray.p + ray.v * t0, b = ray.p + ray.v * t1;
        std::optional<LensHit> best;
        for_each_point_in_rect(L, std::min(a.x, b.x) - R, std::max(a.x, b.x) + R,
                               std::min(a.y, b.y) - R, std::max(a.y, b.y) + R, [&](Vec2 c) {
                                   const Vec2 rel = c - ray.p;
                                   const double tc = rel.dot(ray.v);
                                   const double off = rel.dot(n);
                                   const double disc = R * R - off * off;
                                   if (disc <= 0.0) return;
                                   if (disc < kGraze) {
                                       if (grazing) ++*grazing;
                                       return;
                                   }
                                   const double t = grid.model == LensModel::Eaton
                                                        ? tc - std::sqrt(disc)
                                                        : tc;
                                   if (t <= 0.0 || t > t1) return;
                                   if (best && t >= best->distance) return;
                                   const auto idx = lattice_index(hinv, c);
                                   if (skip && *skip == idx) return;
                                   best = LensHit{idx, c, ray.p + ray.v * t, t};
                               });
        if (best) return best;
    }
    return std::nullopt;
}

Trace trace(const Ray& ray0, const LensGrid& grid, std::size_t events, double free_flight_horizon) {
    if (!admissible(grid.h, grid.R)) throw DomainError("trace: lens grid is not admissible");
    // Flat lenses are only defined for rays along +-theta, where they meet the segments head on.
    if (grid.model == LensModel::Flat &&
        std::abs(ray0.v.cross({std::cos(grid.theta), std::sin(grid.theta)})) > 1e-12)
        throw DomainError("trace: flat lenses need a ray along theta");
    Trace tr;
    tr.events.reserve(events);
    Ray ray = ray0;
    std::optional<std::array<std::int64_t, 2>> skip;
    while (tr.events.size() < events) {
        const auto hit = next_lens_hit(ray, grid, free_flight_horizon, skip, &tr.grazing);
        if (!hit) {
            tr.escaped = true;
            break;
        }
        const Ray in{hit->point, ray.v};
        const Ray out = grid.model == LensModel::Eaton ? eaton_map(in, hit->center, grid.R)
                                                       : flat_lens_map(in, hit->center);
        tr.events.push_back({hit->index, hit->point, out.p, out.v});
        ray = out;
        skip = hit->index;
    }
    tr.final_ray = ray;
    return tr;
}

TrapReport trapped_classify(const std::vector<Vec2>& pts, double plateau, std::size_t min_events) {
    if (pts.size() < min_events) throw DomainError("trapped_classify: horizon too short");
    Vec2 mean;
    for (const auto& p : pts) mean = mean + p;
    mean = mean * (1.0 / static_cast<double>(pts.size()));
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& p : pts) {
        const Vec2 d = p - mean;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    TrapReport rep;
    // Principal axis of the 2x2 covariance.
    const double ang = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    rep.band_dir = {std::cos(ang), std::sin(ang)};
    const Vec2 n = perp(rep.band_dir);
    rep.transverse.resize(pts.size());
    const std::size_t half = pts.size() / 2;
    for (std::size_t k = 0; k < pts.size(); ++k) {
        const double tr = (pts[k] - mean).dot(n);
        rep.transverse[k] = tr;
        rep.sup_all = std::max(rep.sup_all, std::abs(tr));
        if (k < half) rep.sup_first_half = rep.sup_all;
    }
    rep.trapped = rep.sup_all <= (1.0 + plateau) * rep.sup_first_half;
    rep.band_width = 2.0 * rep.sup_all;
    return rep;
}

TrapReport trapped_classify(const Trace& tr, double plateau) {
    std::vector<Vec2> pts;
    pts.reserve(tr.events.size());
    for (const auto& e : tr.events) pts.push_back(e.exit);
    return trapped_classify(pts, plateau);
}

LensGrid rotate_system(const LensGrid& grid, double theta) {
    LensGrid g = grid;
    g.h = Mat2::rotation(std::numbers::pi / 2 - theta) * grid.h;
    g.theta = std::numbers::pi / 2;
    return g;
}

double SkewIET::J_measure() const {
    double m = 0.0;
    for (const auto& [lo, hi] : J) m += hi - lo;
    return m;
}

namespace {

// Number of slits met by the return segment starting at x.
int crossings_at(const SkewIET& s, double x) {
    const double y0 = x + 0.5 * s.beta;
    const double lo = std::ceil(y0 - s.half_shadow), hi = std::floor(y0 + s.half_shadow);
    int n = 0;
    for (double m = lo; m <= hi; m += 1.0)
        if (std::abs(y0 - m) < s.half_shadow) ++n;
    return n;
}

}  // namespace

SkewIET build_skew_iet(const Mat2& h, double R, double theta, bool allow_periodic) {
    if (!(h.is_unimodular(1e-9))) throw DomainError("build_skew_iet: basis is not unimodular");
    if (!admissible(h, R)) throw DomainError("build_skew_iet: (Lambda, R) is not admissible");
    const Mat2 rotated = Mat2::rotation(std::numbers::pi / 2 - theta) * h;
    const ReducedBasis rb = gauss_reduce(rotated);
    // Primitive b1 with R |c| < 1/2, preferring the largest horizontal component.
    double best_a = 0.0;
    Mat2 H;
    for (std::int64_t p = -3; p <= 3; ++p)
        for (std::int64_t q = -3; q <= 3; ++q) {
            if (std::gcd(p, q) != 1) continue;
            const Vec2 b1 = rb.h * Vec2{double(p), double(q)};
            if (!(R * std::abs(b1.y) < 0.5 - 1e-9) || std::abs(b1.x) <= best_a) continue;
            const auto [r, s] = complete_basis(p, q);
            const Vec2 b2 = rb.h * Vec2{double(r), double(s)};
            Mat2 cand = Mat2::from_columns(b1, b2);
            if (b1.x < 0) cand = cand * -1.0;
            best_a = std::abs(b1.x);
            H = cand;
        }
    if (best_a == 0.0) throw DomainError("build_skew_iet: no basis with R|c| < 1/2 found");
    SkewIET s;
    s.H = H;
    s.R = R;
    s.beta = -H.b / H.a;
    s.alpha = frac(s.beta);
    s.return_time = 1.0 / H.a;
    s.half_shadow = R / H.a;
    if (!allow_periodic) {
        // A lattice vector H (p, q) is vertical iff p = beta q.
        double x = s.beta;
        std::int64_t p0 = 1, q0 = 0, p1 = static_cast<std::int64_t>(std::floor(x)), q1 = 1;
        double rem = x - std::floor(x);
        // Convergents with q <= 1e4 are tested; beyond that every direction is
        // within 1e-12 of some long lattice vector.
        for (int k = 0; k < 64 && q1 <= 10000; ++k) {
            if (std::abs(static_cast<double>(q1) * s.beta - static_cast<double>(p1)) <= kSaddle)
                throw DomainError("build_skew_iet: direction is parallel to a lattice vector");
            if (rem < 1e-15) break;
            x = 1.0 / rem;
            const double aq = std::floor(x);
            rem = x - aq;
            if (aq > 1e12) break;
            const auto ai = static_cast<std::int64_t>(aq);
            std::tie(p0, p1) = std::pair{p1, ai * p1 + p0};
            std::tie(q0, q1) = std::pair{q1, ai * q1 + q0};
        }
    }
    // Odd-parity intervals: cut the circle at the parity change points.
    std::vector<double> cuts{0.0, 1.0, frac(-0.5 * s.beta - s.half_shadow),
                             frac(-0.5 * s.beta + s.half_shadow)};
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double lo = cuts[i], hi = cuts[i + 1];
        if (hi - lo <= 0.0) continue;
        if (crossings_at(s, 0.5 * (lo + hi)) % 2 == 1) {
            if (!s.J.empty() && s.J.back().second == lo)
                s.J.back().second = hi;
            else
                s.J.emplace_back(lo, hi);
        }
    }
    return s;
}

namespace {

// One return of the skew product; on_cross(m) is called for every slit in
// flow order before the sheet flip. Returns the number of crossings.
template <class F>
int advance(const SkewIET& iet, DriftStep& st, F&& on_cross) {
    const double y0 = st.x + 0.5 * iet.beta;
    const double r = iet.half_shadow;
    std::int64_t ms[16];
    int n = 0;
    for (double m = std::ceil(y0 - r - 1.0); m <= std::floor(y0 + r + 1.0); m += 1.0) {
        const double dist = std::abs(y0 - m);
        if (std::abs(dist - r) < kSaddle) throw NumericError("skew_step: slit endpoint hit");
        if (dist < r) {
            if (n == 16) throw NumericError("skew_step: too many crossings per return");
            ms[n++] = static_cast<std::int64_t>(m);
        }
    }
    // Flow order is the order of heights -c s a along the return, i.e. by c m.
    if (n > 1 && iet.H.c < 0.0) std::reverse(ms, ms + n);
    for (int i = 0; i < n; ++i) {
        on_cross(ms[i]);
        st.D[0] += 2 * st.sigma * ms[i];
        st.sigma = -st.sigma;
    }
    const double xr = st.x + iet.beta;
    const double k = std::floor(xr);
    st.D[0] += st.sigma * static_cast<std::int64_t>(k);
    st.D[1] += st.sigma;
    st.x = xr - k;
    if (st.x >= 1.0) st.x = 0.0;
    return n;
}

}  // namespace

std::vector<Crossing2> skew_step(const SkewIET& iet, DriftStep& st) {
    std::vector<Crossing2> out;
    advance(iet, st, [&](std::int64_t m) {
        out.push_back({m, {st.sigma * m + st.D[0], st.D[1]}});
    });
    return out;
}

DriftSeries drift_track(const SkewIET& iet, std::size_t returns, double x0) {
    DriftSeries ds;
    ds.d.reserve(returns);
    ds.norm.reserve(returns);
    DriftStep st;
    st.x = frac(x0);
    for (std::size_t k = 0; k < returns; ++k) {
        try {
            ds.toggles += static_cast<std::size_t>(advance(iet, st, [](std::int64_t) {}));
        } catch (const NumericError&) {
            ds.saddle = true;
            break;
        }
        ds.d.push_back(st.D);
        ds.norm.push_back(std::hypot(static_cast<double>(st.D[0]), static_cast<double>(st.D[1])));
    }
    return ds;
}

DeviationRun deviation_run(const SkewIET& iet, std::size_t returns, double x0,
                           std::size_t samples) {
    if (returns < 16 || samples < 4) throw DomainError("deviation_run: horizon too short");
    DeviationRun out;
    // Geometric checkpoints 1 = k_0 < ... < k_S = returns.
    std::vector<std::size_t> marks;
    for (std::size_t i = 0; i < samples; ++i) {
        const double u = std::log(static_cast<double>(returns)) * static_cast<double>(i) /
                         static_cast<double>(samples - 1);
        const auto k = static_cast<std::size_t>(std::llround(std::exp(u)));
        if (marks.empty() || k > marks.back()) marks.push_back(std::min(k, returns));
    }
    DriftStep st;
    st.x = frac(x0);
    double run = 0.0;
    std::size_t next = 0;
    for (std::size_t k = 1; k <= returns; ++k) {
        try {
            out.toggles += static_cast<std::size_t>(advance(iet, st, [](std::int64_t) {}));
        } catch (const NumericError&) {
            out.saddle = true;
            break;
        }
        run = std::max(run, std::hypot(static_cast<double>(st.D[0]), static_cast<double>(st.D[1])));
        out.returns = k;
        if (next < marks.size() && k == marks[next]) {
            out.k.push_back(k);
            out.running_max.push_back(run);
            ++next;
        }
    }
    std::vector<double> lx, ly;
    const double half = 0.5 * std::log(static_cast<double>(out.returns));
    for (std::size_t i = 0; i < out.k.size(); ++i) {
        const double lk = std::log(static_cast<double>(out.k[i]));
        if (lk >= half && out.running_max[i] > 0.0) {
            lx.push_back(lk);
            ly.push_back(std::log(out.running_max[i]));
        }
    }
    if (lx.size() < 2 || ly.back() == ly.front()) {
        out.fit.degenerate = true;
        return out;
    }
    const FitResult f = least_squares(lx, ly);
    out.fit.exponent = f.slope;
    out.fit.residual = f.residual;
    return out;
}

ExponentEstimate deviation_exponent(const std::vector<double>& norms) {
    ExponentEstimate e;
    if (norms.size() < 16) throw DomainError("deviation_exponent: series too short");
    std::vector<double> run(norms.size());
    double m = 0.0;
    for (std::size_t k = 0; k < norms.size(); ++k) run[k] = m = std::max(m, norms[k]);
    const std::size_t start = static_cast<std::size_t>(std::sqrt(static_cast<double>(norms.size())));
    if (run.back() <= 0.0 || run.back() == run[start]) {
        e.degenerate = true;
        return e;
    }
    // The running max is positive from its first nonzero entry on.
    for (auto& x : run) x = std::max(x, 1.0);
    const FitResult f = loglog_exponent(run, 0.5);
    e.exponent = f.slope;
    e.residual = f.residual;
    e.degenerate = f.degenerate;
    return e;
}

namespace {

using P2 = std::array<std::int64_t, 2>;

__int128 cross3(const P2& o, const P2& a, const P2& b) {
    return static_cast<__int128>(a[0] - o[0]) * (b[1] - o[1]) -
           static_cast<__int128>(a[1] - o[1]) * (b[0] - o[0]);
}

std::vector<P2> convex_hull(std::vector<P2> pts) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;
    std::vector<P2> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross3(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross3(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

}  // namespace

StableDirection stable_direction_estimate(const std::vector<std::array<std::int64_t, 2>>& d) {
    StableDirection out;
    if (d.empty()) return out;
    std::vector<P2> pts(d.begin(), d.end());
    pts.push_back({0, 0});
    for (const auto& p : d)
        out.max_norm = std::max(out.max_norm, std::hypot(double(p[0]), double(p[1])));
    const auto hull = convex_hull(pts);
    auto sup = [&](double phi) {
        const double cx = std::cos(phi), cy = std::sin(phi);
        double s = 0.0;
        for (const auto& p : hull) s = std::max(s, std::abs(cx * double(p[0]) + cy * double(p[1])));
        return s;
    };
    const int grid = 720;
    int best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid; ++i) {
        const double v = sup(std::numbers::pi * i / grid);
        if (v < best_val) {
            best_val = v;
            best = i;
        }
    }
    // Golden-section refinement inside the neighbouring grid cells.
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = std::numbers::pi * (best - 1) / grid, hi = std::numbers::pi * (best + 1) / grid;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = sup(x1), f2 = sup(x2);
    for (int it = 0; it < 60; ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = sup(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = sup(x2);
        }
    }
    double phi = 0.5 * (lo + hi);
    double val = sup(phi);
    if (best_val < val) {
        phi = std::numbers::pi * best / grid;
        val = best_val;
    }
    out.zeta = {std::cos(phi), std::sin(phi)};
    out.sup = val;
    out.flagged = out.max_norm > 0.0 && val >= 0.2 * out.max_norm;
    return out;
}

TwistedIET twisted_iet_from(const SkewIET& s) {
    std::vector<double> cuts{0.0, 1.0, 1.0 - s.alpha, frac(-0.5 * s.beta - s.half_shadow),
                             frac(-0.5 * s.beta + s.half_shadow)};
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    TwistedIET T;
    std::vector<int> a_pieces, b_pieces;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double lo = cuts[i], hi = cuts[i + 1];
        const int id = static_cast<int>(T.lambda.size());
        T.lambda.push_back(hi - lo);
        T.eps.push_back(crossings_at(s, 0.5 * (lo + hi)) % 2);
        T.top.push_back(id);
        (hi <= 1.0 - s.alpha ? a_pieces : b_pieces).push_back(id);
    }
    T.bottom = b_pieces;
    T.bottom.insert(T.bottom.end(), a_pieces.begin(), a_pieces.end());
    return T;
}

namespace {

using IMat = std::vector<std::vector<std::int64_t>>;

// Fraction-free Gaussian elimination.
__int128 bareiss_det(IMat m) {
    const std::size_t n = m.size();
    std::vector<std::vector<__int128>> a(n, std::vector<__int128>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a[i][j] = m[i][j];
    __int128 prev = 1;
    int sign = 1;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        if (a[k][k] == 0) {
            std::size_t r = k + 1;
            while (r < n && a[r][k] == 0) ++r;
            if (r == n) return 0;
            std::swap(a[k], a[r]);
            sign = -sign;
        }
        for (std::size_t i = k + 1; i < n; ++i)
            for (std::size_t j = k + 1; j < n; ++j)
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
        prev = a[k][k];
    }
    return sign * a[n - 1][n - 1];
}

}  // namespace

LyapunovResult lyapunov_W(TwistedIET T, std::size_t zorich_steps, Stream& rng, bool check_blocks) {
    const std::size_t d = T.lambda.size();
    if (d < 2 || T.top.size() != d || T.bottom.size() != d || T.eps.size() != d)
        throw DomainError("lyapunov_W: malformed interval exchange");
    LyapunovResult res;
    std::vector<double> y(d);
    double nrm = 0.0;
    for (auto& v : y) {
        v = rng.normal();
        nrm += v * v;
    }
    nrm = std::sqrt(nrm);
    for (auto& v : y) v /= nrm;
    double log_y = 0.0;
    {
        double tot = std::accumulate(T.lambda.begin(), T.lambda.end(), 0.0);
        for (auto& l : T.lambda) l /= tot;
    }
    IMat B(d, std::vector<std::int64_t>(d, 0));
    auto reset_block = [&] {
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) B[i][j] = i == j;
    };
    auto row_add = [&](int dst, int src, std::int64_t k) {
        for (std::size_t j = 0; j < d; ++j) B[dst][j] += k * B[src][j];
    };
    auto row_flip_add = [&](int dst, int src) {  // dst = src - dst
        for (std::size_t j = 0; j < d; ++j) B[dst][j] = B[src][j] - B[dst][j];
    };
    auto move_after = [](std::vector<int>& order, int w) {
        const int l = order.back();
        order.pop_back();
        order.insert(std::find(order.begin(), order.end(), w) + 1, l);
    };

    for (std::size_t z = 0; z < zorich_steps; ++z) {
        reset_block();
        const int wt = T.top.back(), wb = T.bottom.back();
        if (T.lambda[wt] == T.lambda[wb]) throw NumericError("lyapunov_W: Keane condition fails");
        const bool top_type = T.lambda[wt] > T.lambda[wb];
        const int w = top_type ? wt : wb;
        std::vector<int>& order = top_type ? T.bottom : T.top;
        // Letters behind the winner in the loser row cycle through the block.
        const auto pos = std::find(order.begin(), order.end(), w) - order.begin();
        std::vector<int> suffix(order.begin() + pos + 1, order.end());
        double suffix_len = 0.0;
        for (int e : suffix) suffix_len += T.lambda[e];
        if (!(suffix_len > 0.0)) throw NumericError("lyapunov_W: degenerate lengths");
        const double q = std::floor(T.lambda[w] / suffix_len);
        if (q >= 2.0) {
            if (q > 9.0e15) throw NumericError("lyapunov_W: partial quotient overflow");
            const auto m = static_cast<std::int64_t>(q) - 1;
            const bool odd = (m & 1) != 0;
            for (int e : suffix) {
                if (top_type) {
                    // y_e += (-1)^{eps_e} y_w, then eps_e ^= eps_w, m times.
                    const int s = T.eps[e] ? -1 : 1;
                    const std::int64_t coef = T.eps[w] ? (odd ? s : 0) : s * m;
                    y[e] += static_cast<double>(coef) * y[w];
                    if (coef) row_add(e, w, coef);
                    if (T.eps[w] && odd) T.eps[e] ^= 1;
                } else {
                    // y_e = y_w + (-1)^{eps_w} y_e, m times.
                    if (!T.eps[w]) {
                        y[e] += static_cast<double>(m) * y[w];
                        row_add(e, w, m);
                    } else if (odd) {
                        y[e] = y[w] - y[e];
                        row_flip_add(e, w);
                    }
                    if (T.eps[w] && odd) T.eps[e] ^= 1;
                }
            }
            T.lambda[w] -= static_cast<double>(m) * suffix_len;
            res.rv_steps += static_cast<std::uint64_t>(m) * suffix.size();
        }
        // Remaining single steps of the same type.
        for (;;) {
            const int t = T.top.back(), b = T.bottom.back();
            if (T.lambda[t] == T.lambda[b]) throw NumericError("lyapunov_W: Keane condition fails");
            const bool tt = T.lambda[t] > T.lambda[b];
            if (tt != top_type) break;
            const int l = top_type ? b : t;
            if (top_type) {
                const int s = T.eps[l] ? -1 : 1;
                y[l] += s * y[w];
                row_add(l, w, s);
            } else if (!T.eps[w]) {
                y[l] += y[w];
                row_add(l, w, 1);
            } else {
                y[l] = y[w] - y[l];
                row_flip_add(l, w);
            }
            T.eps[l] ^= T.eps[w];
            T.lambda[w] -= T.lambda[l];
            move_after(order, w);
            ++res.rv_steps;
        }
        // Renormalise lengths to total 1 and the vector to norm 1.
        const double tot = std::accumulate(T.lambda.begin(), T.lambda.end(), 0.0);
        if (!(tot > 0.0)) throw NumericError("lyapunov_W: lengths collapsed");
        res.teich_time -= std::log(tot);
        for (auto& l : T.lambda) l /= tot;
        double ny = 0.0;
        for (double v : y) ny += v * v;
        ny = std::sqrt(ny);
        log_y += std::log(ny);
        for (auto& v : y) v /= ny;
        if (check_blocks) {
            const __int128 det = bareiss_det(B);
            if (det != 1 && det != -1) res.unimodular = false;
        }
        ++res.zorich_steps;
    }
    res.exponent = res.teich_time > 0.0 ? log_y / res.teich_time : 0.0;
    return res;
}

LyapunovResult lyapunov_W(const SkewIET& iet, std::size_t zorich_steps, Stream& rng) {
    // Without a slit the cover is trivial and W = 0.
    if (iet.R == 0.0) return {};
    return lyapunov_W(twisted_iet_from(iet), zorich_steps, rng);
}

double eaton_curve_check(double R, double theta) {
    if (!(R >= 0.0)) throw DomainError("eaton_curve_check: need R >= 0");
    return wronskian_det(rotation_curve(R), theta);
}

}  // namespace affinelab
