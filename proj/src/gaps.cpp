#include "affinelab/gaps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "affinelab/errors.hpp"
#include "affinelab/parallel.hpp"

namespace affinelab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kZeroTol = 1e-12;

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t m = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end());
    const double hi = v[m];
    if (v.size() % 2) return hi;
    return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m)));
}

}  // namespace

std::uint64_t isqrt(std::uint64_t n) {
    auto k = static_cast<std::uint64_t>(std::sqrt(static_cast<double>(n)));
    while (k * k > n) --k;
    while ((k + 1) * (k + 1) <= n) ++k;
    return k;
}

double frac_sqrt(std::uint64_t n) {
    const std::uint64_t k = isqrt(n);
    const auto d = static_cast<double>(n - k * k);
    return d == 0.0 ? 0.0 : d / (std::sqrt(static_cast<double>(n)) + static_cast<double>(k));
}

GapSequence frac_sqrt_gaps(double r) {
    if (!(r >= 1.0)) throw DomainError("frac_sqrt_gaps: r must be at least 1");
    if (r > kMaxDirectR) throw DomainError("frac_sqrt_gaps: r too large for direct enumeration");
    GapSequence g;
    g.r = r;
    g.count = static_cast<std::uint64_t>(std::floor(r));
    g.t.resize(g.count + 1);
    for (std::uint64_t n = 1; n <= g.count; ++n) g.t[n - 1] = frac_sqrt(n);
    std::sort(g.t.begin(), g.t.end() - 1);
    g.t.back() = 1.0;
    g.gaps.resize(g.count);
    for (std::size_t k = 0; k < g.count; ++k) g.gaps[k] = g.t[k + 1] - g.t[k];
    return g;
}

double L_r(const GapSequence& seq, double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw DomainError("L_r: s must lie in [0, 1]");
    const auto it = std::upper_bound(seq.t.begin(), seq.t.end(), s);
    const auto k = static_cast<std::size_t>(it - seq.t.begin()) - 1;
    if (k + 1 >= seq.t.size()) return 0.0;
    return static_cast<double>(seq.count) * (seq.t[k + 1] - seq.t[k]);
}

const char* to_string(TriangleStatus s) {
    switch (s) {
        case TriangleStatus::Finite: return "finite";
        case TriangleStatus::Zero: return "zero";
        case TriangleStatus::Overflow: return "overflow";
    }
    return "?";
}

double TriangleFit::value() const {
    switch (status) {
        case TriangleStatus::Zero: return 0.0;
        case TriangleStatus::Overflow: return kInf;
        default: return area;
    }
}

TriangleFit f_triangle(const AffineLatticeClass& L, double cap) {
    const AffineLatticeClass C = L.canonical();
    const Mat2& H = C.h();
    const Mat2 inv = H.inverse();
    const Vec2 xi = C.xi();
    TriangleFit fit;
    // Grow the window until both sides have a candidate, then rescan out to
    // the best slope so no closer point is missed.
    double X = 1.0;
    for (;;) {
        double bp = kInf, bm = -kInf;
        bool zero = false;
        for_each_point_in_rect(C, -X, X, 0.0, 1.0, [&](Vec2 p) {
            if (std::abs(p.x) < 1e-6) {
                const Vec2 c = inv * (p - xi);
                const double scale = std::abs(H.a * c.x) + std::abs(H.b * c.y) + std::abs(xi.x);
                if (std::abs(p.x) <= kZeroTol * scale) {
                    zero = true;
                    return;
                }
            }
            const double ratio = p.x / p.y;
            if (p.x > 0.0)
                bp = std::min(bp, ratio);
            else
                bm = std::max(bm, ratio);
        });
        if (zero) {
            fit.status = TriangleStatus::Zero;
            return fit;
        }
        const double need = std::max(bp, -bm);
        if (need <= X) {
            fit.b_plus = bp;
            fit.b_minus = bm;
            fit.area = 0.5 * (bp - bm);
            return fit;
        }
        if (X >= cap) {
            fit.status = TriangleStatus::Overflow;
            fit.b_plus = bp;
            fit.b_minus = bm;
            return fit;
        }
        X = std::min(cap, std::isfinite(need) ? need : 2.0 * X);
    }
}

AffineLatticeClass gap_lattice(double r, double s) {
    return AffineLatticeClass(compose(geodesic(0.5 * std::log(r)), horocycle(-2.0 * s, -s * s, s)));
}

TriangleFit L_prime_fit(double r, double s, double cap) {
    if (!(r >= 1.0)) throw DomainError("L_prime: r must be at least 1");
    if (!(s > 0.0 && s <= 1.0)) throw DomainError("L_prime: s must lie in (0, 1]");
    return f_triangle(gap_lattice(r, s), cap);
}

double L_prime(double r, double s, double cap) { return L_prime_fit(r, s, cap).value(); }

SandwichCoefficients sandwich_coefficients(double r) {
    if (!(r >= 1.0)) throw DomainError("sandwich: r must be at least 1");
    const double fr = std::floor(r);
    const auto a = static_cast<double>(isqrt(static_cast<std::uint64_t>(fr)));
    return {fr / ((a + 1) * (a + 1)), fr / (a * a)};
}

bool sandwich_check(double r, double s) {
    const auto co = sandwich_coefficients(r);
    const auto a = static_cast<double>(isqrt(static_cast<std::uint64_t>(std::floor(r))));
    const double mid = L_r(frac_sqrt_gaps(r), s);
    const double lo = co.lower * L_r(frac_sqrt_gaps((a + 1) * (a + 1)), s);
    const double hi = co.upper * L_r(frac_sqrt_gaps(a * a), s);
    const double slack = 1e-12 * std::max(1.0, std::abs(mid));
    return lo <= mid + slack && mid <= hi + slack;
}

ApproxRatioStats approx_ratio_stats(std::uint64_t n, const std::vector<double>& s, int A) {
    if (n < 3) throw DomainError("approx_ratio_stats: n must be at least 3");
    if (A < 2) throw DomainError("approx_ratio_stats: A must be at least 2");
    ApproxRatioStats st;
    st.n = n;
    st.A = A;
    st.small_n = n < 100;
    st.band_bound = 1.0 - static_cast<double>((A + 2) * (A - 1) + 2) / static_cast<double>(n - 1);
    const double r = static_cast<double>(n) * static_cast<double>(n);
    const GapSequence seq = frac_sqrt_gaps(r);
    const double lo = (2.0 * A + 1) / (2.0 * A + 2), hi = (2.0 * A + 1) / (2.0 * A);
    std::vector<double> dev;
    std::size_t in_band = 0;
    for (double x : s) {
        const double Lp = L_prime(r, x);
        if (Lp == 0.0 || !std::isfinite(Lp)) {
            ++st.zero_excluded;
            continue;
        }
        const double q = L_r(seq, x) / Lp;
        dev.push_back(std::abs(q - 1.0));
        in_band += (q >= lo && q <= hi);
    }
    st.samples = dev.size();
    st.median_dev = median(dev);
    st.in_band_fraction = dev.empty() ? 0.0 : static_cast<double>(in_band) / static_cast<double>(dev.size());
    return st;
}

ApproxRatioStats approx_ratio_stats(std::uint64_t n, std::size_t samples, Stream& rng, int A) {
    if (n < 3) throw DomainError("approx_ratio_stats: n must be at least 3");
    const double e = 1.0 / static_cast<double>(n - 1);
    std::vector<double> s(samples);
    for (auto& x : s) x = rng.uniform(e, 1.0 - e);
    return approx_ratio_stats(n, s, A);
}

LimitingSample limiting_sample(std::size_t n_samples, Stream& rng, double cap, unsigned workers) {
    // One child stream per block keeps the sample independent of the worker count.
    constexpr std::size_t kBlock = 4096;
    const std::size_t blocks = (n_samples + kBlock - 1) / kBlock;
    const Stream base = rng.child(0x6761707300ULL);
    rng.next_u64();
    auto parts = parallel_map<std::vector<double>>(blocks, workers, [&](std::size_t b) {
        Stream s = base.child(b);
        const std::size_t len = std::min(kBlock, n_samples - b * kBlock);
        std::vector<double> v(len);
        for (auto& x : v) x = f_triangle(haar_sample(s), cap).value();
        return v;
    });
    std::vector<double> all;
    all.reserve(n_samples);
    for (auto& p : parts) all.insert(all.end(), p.begin(), p.end());
    LimitingSample out;
    out.overflow = static_cast<std::size_t>(std::count(all.begin(), all.end(), kInf));
    out.f = ECDF(std::move(all));
    return out;
}

CdfEstimate limiting_cdf(const LimitingSample& mc, double l) {
    if (!(l >= 0.0)) throw DomainError("limiting_cdf: l must be non-negative");
    const double p = mc.f(l);
    const auto n = static_cast<double>(mc.f.size());
    return {p, std::sqrt(p * (1.0 - p) / n)};
}

CdfEstimate limiting_cdf_mc(double l, std::size_t n_samples, Stream& rng, double cap) {
    return limiting_cdf(limiting_sample(n_samples, rng, cap), l);
}

GeometricReport geometric_gap_experiment(const GeometricOptions& opt, const std::vector<double>& s,
                                         Stream& rng) {
    if (!(opt.c >= 1.0)) throw DomainError("geometric_gap_experiment: c must be at least 1");
    if (!(opt.q > 1.0)) throw DomainError("geometric_gap_experiment: q must exceed 1");
    if (opt.N == 0) throw DomainError("geometric_gap_experiment: N must be positive");
    for (double x : s)
        if (!(x > 0.0 && x < 1.0)) throw DomainError("geometric_gap_experiment: s must lie in (0, 1)");
    GeometricReport rep;
    rep.pre_asymptotic = opt.N < 100;
    rep.mc = limiting_sample(opt.mc_samples, rng, opt.cap, opt.workers);

    std::vector<double> rs(opt.N);
    for (std::size_t n = 0; n < opt.N; ++n)
        rs[n] = opt.c * std::pow(opt.q, static_cast<double>(n + 1));
    std::vector<GapSequence> direct;
    if (opt.spot_check)
        for (double r : rs)
            if (r <= 1e6) direct.push_back(frac_sqrt_gaps(r));

    rep.series = parallel_map<GeometricSeries>(s.size(), opt.workers, [&](std::size_t i) {
        GeometricSeries g;
        g.s = s[i];
        g.r = rs;
        g.values.resize(opt.N);
        GeodesicFlow flow(AffineLatticeClass(horocycle(-2.0 * g.s, -g.s * g.s, g.s)));
        flow.advance(0.5 * std::log(opt.c));
        const double dt = 0.5 * std::log(opt.q);
        std::vector<double> dev;
        for (std::size_t n = 0; n < opt.N; ++n) {
            flow.advance(dt);
            const TriangleFit fit = f_triangle(flow.state(), opt.cap);
            g.values[n] = fit.value();
            g.zeros += fit.status == TriangleStatus::Zero;
            g.overflows += fit.status == TriangleStatus::Overflow;
            if (n < direct.size() && fit.status == TriangleStatus::Finite)
                dev.push_back(std::abs(L_r(direct[n], g.s) / fit.area - 1.0));
        }
        g.spot_count = dev.size();
        g.spot_median_dev = median(dev);
        g.ks = ks_distance(ECDF(g.values), rep.mc.f);
        return g;
    });
    for (const auto& g : rep.series) rep.mean_ks += g.ks;
    if (!rep.series.empty()) rep.mean_ks /= static_cast<double>(rep.series.size());
    return rep;
}

PlainGapReport plain_gap_distribution(double r, double hist_hi, std::size_t bins) {
    if (!(r >= 1e3)) throw DomainError("plain_gap_distribution: r must be at least 1000");
    const GapSequence g = frac_sqrt_gaps(r);
    const auto n = static_cast<double>(g.count);
    std::vector<double> norm(g.gaps.size());
    std::size_t low = 0, beyond = 0;
    double sum = 0.0;
    for (std::size_t k = 0; k < norm.size(); ++k) {
        norm[k] = n * g.gaps[k];
        low += norm[k] <= 0.5;
        beyond += norm[k] > 6.0;
        sum += norm[k];
    }
    PlainGapReport rep;
    rep.r = r;
    rep.histogram = histogram(norm, 0.0, hist_hi, bins);
    rep.frac_le_half = static_cast<double>(low) / static_cast<double>(norm.size());
    rep.target = 3.0 / (std::numbers::pi * std::numbers::pi);
    rep.mean = sum / static_cast<double>(norm.size());
    rep.frac_beyond_6 = static_cast<double>(beyond) / static_cast<double>(norm.size());
    return rep;
}

}  // namespace affinelab
