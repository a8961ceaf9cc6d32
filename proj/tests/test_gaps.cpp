#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "affinelab/errors.hpp"
#include "affinelab/gaps.hpp"

using namespace affinelab;

namespace {

constexpr double kPi2 = std::numbers::pi * std::numbers::pi;

// L'_r(s) straight from the triangle picture: the points in the strip are
// (r (M - k^2) / k) at heights k = n + s, n = 0, 1, ..., and for each height
// only the nearest integers M on either side of k^2 matter.
double lprime_oracle(double r, double s) {
    double bp = INFINITY, bm = -INFINITY;
    for (long n = 0; n + s < std::sqrt(r); ++n) {
        const double k = static_cast<double>(n) + s;
        const double e = 2.0 * s * static_cast<double>(n) + s * s;  // k^2 - n^2
        const double fr = e - std::floor(e);
        if (fr == 0.0) return 0.0;
        bp = std::min(bp, r * (1.0 - fr) / k);
        bm = std::max(bm, -r * fr / k);
    }
    return 0.5 * (bp - bm);
}

// Exhaustive coefficient box.
TriangleFit brute_triangle(const AffineLatticeClass& L, int box) {
    double bp = INFINITY, bm = -INFINITY;
    for (int m = -box; m <= box; ++m)
        for (int n = -box; n <= box; ++n) {
            const Vec2 p = L.point(m, n);
            if (!(p.y > 0.0 && p.y < 1.0)) continue;
            if (p.x == 0.0) return {0, 0, 0, TriangleStatus::Zero};
            if (p.x > 0)
                bp = std::min(bp, p.x / p.y);
            else
                bm = std::max(bm, p.x / p.y);
        }
    if (!std::isfinite(bp) || !std::isfinite(bm)) return {bm, bp, 0, TriangleStatus::Overflow};
    return {bm, bp, 0.5 * (bp - bm), TriangleStatus::Finite};
}

}  // namespace

TEST_CASE("fractional parts of square roots") {
    CHECK(isqrt(0) == 0);
    CHECK(isqrt(15) == 3);
    CHECK(isqrt(16) == 4);
    CHECK(isqrt(4000000000000000000ULL) == 2000000000ULL);
    CHECK(isqrt(3999999999999999999ULL) == 1999999999ULL);
    for (std::uint64_t k = 1; k < 2000; ++k) CHECK(frac_sqrt(k * k) == 0.0);
    Stream rng(1, 0);
    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t n = 1 + rng.below(1000000);
        const double x = std::sqrt(static_cast<double>(n));
        CHECK(std::abs(frac_sqrt(n) - (x - std::floor(x))) < 1e-9);
    }
    // Close to a square the direct formula cancels; the rationalized one does not.
    const std::uint64_t big = 1000000000001ULL;  // 10^12 + 1
    CHECK(frac_sqrt(big) == doctest::Approx(1.0 / (std::sqrt(1e12 + 1.0) + 1e6)).epsilon(1e-14));
}

TEST_CASE("gap sequence") {
    const auto g4 = frac_sqrt_gaps(4.7);
    REQUIRE(g4.t.size() == 5);
    CHECK(g4.count == 4);
    CHECK(g4.t[0] == 0.0);
    CHECK(g4.t[1] == 0.0);
    CHECK(g4.t[2] == doctest::Approx(std::sqrt(2.0) - 1));
    CHECK(g4.t[3] == doctest::Approx(std::sqrt(3.0) - 1));
    CHECK(g4.t[4] == 1.0);

    const auto g = frac_sqrt_gaps(1e6);
    CHECK(g.t.size() == 1000001);
    double sum = 0.0;
    for (double d : g.gaps) {
        CHECK(d >= 0.0);
        sum += d;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
    CHECK(std::count(g.t.begin(), g.t.end(), 0.0) == 1000);
    CHECK(std::is_sorted(g.t.begin(), g.t.end()));

    CHECK_THROWS_AS(frac_sqrt_gaps(0.5), DomainError);
    CHECK_THROWS_AS(frac_sqrt_gaps(1e9), DomainError);
}

TEST_CASE("gap containing s") {
    const auto g = frac_sqrt_gaps(10);
    CHECK(L_r(g, 0.5) == doctest::Approx(10 * (std::sqrt(7.0) - std::sqrt(6.0))).epsilon(1e-14));
    // t_1 = 0 and t_2 is the smallest positive fractional part, sqrt(10) - 3.
    CHECK(L_r(g, 0.0) == doctest::Approx(10 * (std::sqrt(10.0) - 3)).epsilon(1e-14));
    // Tie: s equal to a fractional part picks the gap starting there; the
    // next one up is frac(sqrt 3).
    const double t7 = frac_sqrt(7);
    CHECK(L_r(g, t7) == doctest::Approx(10 * (frac_sqrt(3) - t7)).epsilon(1e-14));
    CHECK(L_r(g, 1.0) == 0.0);
    CHECK_THROWS_AS(L_r(g, 1.5), DomainError);

    // Agrees with a linear scan.
    Stream rng(2, 0);
    const auto h = frac_sqrt_gaps(5000);
    for (int i = 0; i < 200; ++i) {
        const double s = rng.uniform();
        double lo = 0.0, hi = 1.0;
        for (std::uint64_t n = 1; n <= 5000; ++n) {
            const double t = frac_sqrt(n);
            if (t <= s) lo = std::max(lo, t);
            else hi = std::min(hi, t);
        }
        CHECK(L_r(h, s) == doctest::Approx(5000 * (hi - lo)).epsilon(1e-12));
    }
}

TEST_CASE("triangle functional examples") {
    const auto zero = f_triangle(AffineLatticeClass(Mat2::identity(), {0.0, 0.5}));
    CHECK(zero.status == TriangleStatus::Zero);
    CHECK(zero.value() == 0.0);

    const AffineLatticeClass half(Mat2::identity(), {0.5, 0.5});
    const auto fit = f_triangle(half);
    REQUIRE(fit.status == TriangleStatus::Finite);
    const auto bf = brute_triangle(half, 50);
    CHECK(fit.b_plus == doctest::Approx(1.0));
    CHECK(fit.b_minus == doctest::Approx(-1.0));
    CHECK(fit.area == doctest::Approx(1.0));
    CHECK(bf.area == doctest::Approx(1.0));

    const auto empty = f_triangle(AffineLatticeClass(Mat2::identity(), {0.3, 0.0}), 1e4);
    CHECK(empty.status == TriangleStatus::Overflow);
    CHECK(std::isinf(empty.value()));
}

TEST_CASE("triangle functional against the brute-force box") {
    Stream rng(3, 0);
    int compared = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto L = haar_sample(rng).canonical();
        const auto fit = f_triangle(L);
        const auto bf = brute_triangle(L, 150);
        // The box is exhaustive only when the reach it needs is well inside it.
        const double reach = std::max(std::abs(fit.b_plus), std::abs(fit.b_minus));
        if (fit.status != TriangleStatus::Finite || reach * std::max(1.0, L.h().inverse().max_abs()) > 100)
            continue;
        ++compared;
        CHECK(bf.status == fit.status);
        CHECK(std::abs(bf.area - fit.area) <= 1e-10 * std::max(1.0, fit.area));
    }
    CHECK(compared > 900);
}

TEST_CASE("triangle functional is a class function") {
    Stream rng(4, 0);
    for (int i = 0; i < 1000; ++i) {
        const auto L = haar_sample(rng);
        // Random element of SL2(Z) from a few elementary moves.
        Mat2 g = Mat2::identity();
        for (int k = 0; k < 4; ++k) {
            const double e = static_cast<double>(static_cast<int>(rng.below(7)) - 3);
            g = g * (k % 2 ? Mat2{1, e, 0, 1} : Mat2{1, 0, e, 1});
        }
        const Vec2 shift{static_cast<double>(static_cast<int>(rng.below(11)) - 5),
                         static_cast<double>(static_cast<int>(rng.below(11)) - 5)};
        const AffineLatticeClass M(L.h() * g, L.xi() + L.h() * shift);
        const auto a = f_triangle(L), b = f_triangle(M);
        CHECK(a.status == b.status);
        // Large areas come from strip points at small height, where x / y
        // amplifies rounding in the representative.
        if (a.status == TriangleStatus::Finite)
            CHECK(std::abs(b.area - a.area) <= 1e-10 * a.area * (1.0 + a.area));
    }
}

TEST_CASE("L prime matches the strip oracle") {
    CHECK(gap_lattice(4.0, 0.3).h().b == doctest::Approx(-2 * 0.3 * 2.0));
    CHECK(gap_lattice(4.0, 0.3).xi().x == doctest::Approx(-0.09 * 2.0));
    CHECK(gap_lattice(4.0, 0.3).xi().y == doctest::Approx(0.15));

    Stream rng(5, 0);
    for (int i = 0; i < 300; ++i) {
        const double r = std::exp(rng.uniform(std::log(10.0), std::log(1e6)));
        const double s = rng.uniform();
        CHECK(L_prime(r, s) == doctest::Approx(lprime_oracle(r, s)).epsilon(1e-8));
    }
    // The zero case: s = 1 puts the lattice point (0, 1/sqrt r) on the segment.
    CHECK(L_prime_fit(100, 1.0).status == TriangleStatus::Zero);
    CHECK(L_prime(100, 1.0) == 0.0);
    CHECK_THROWS_AS(L_prime(100, 0.0), DomainError);

    // r = 100, s = 0.3: the gap of the fractional parts up to 100 containing 0.3.
    const double lp = L_prime(100, 0.3);
    const double l = L_r(frac_sqrt_gaps(100), 0.3);
    CHECK(lp == doctest::Approx(1.5117072061832235).epsilon(1e-10));
    CHECK(l == doctest::Approx(1.5121240788893708).epsilon(1e-12));
    CHECK(l / lp >= 21.0 / 22.0);
    CHECK(l / lp <= 21.0 / 20.0);
}

TEST_CASE("sandwich inequality") {
    Stream rng(6, 0);
    for (int i = 0; i < 1000; ++i) {
        const double r = rng.uniform(10.0, 1e4);
        CHECK(sandwich_check(r, rng.uniform()));
    }
    // On perfect squares the right side is L_r itself.
    const auto co = sandwich_coefficients(400.0);
    CHECK(co.upper == 1.0);
    const auto big = sandwich_coefficients(1e6 + 500);
    CHECK(std::abs(big.lower - 1.0) < 0.003);
    CHECK(std::abs(big.upper - 1.0) < 0.003);
}

TEST_CASE("approximation ratio") {
    Stream rng(7, 0);
    const auto st = approx_ratio_stats(1000, 1000, rng, 10);
    CHECK(st.samples + st.zero_excluded == 1000);
    CHECK(st.median_dev < 0.02);
    CHECK(st.band_bound == doctest::Approx(1.0 - 110.0 / 999.0));
    CHECK(st.in_band_fraction >= st.band_bound);
    CHECK_FALSE(st.small_n);
    const auto small = approx_ratio_stats(10, 200, rng, 10);
    CHECK(small.small_n);
    CHECK(small.band_bound < 0);
}

TEST_CASE("limiting distribution of the triangle functional") {
    Stream rng(8, 0);
    const auto mc = limiting_sample(40000, rng);
    CHECK(mc.overflow == 0);
    CHECK(limiting_cdf(mc, 0.0).estimate == 0.0);
    CHECK(limiting_cdf(mc, 1e6).estimate == doctest::Approx(1.0).epsilon(1e-3));
    double prev = 0.0;
    for (double l = 0.0; l < 20.0; l += 0.1) {
        const double p = limiting_cdf(mc, l).estimate;
        CHECK(p >= prev);
        prev = p;
    }
    // The density t F(t) with F = 6/pi^2 on [0, 1/2].
    for (double l : {0.25, 0.5}) {
        const auto e = limiting_cdf(mc, l);
        CHECK(std::abs(e.estimate - 3.0 * l * l / kPi2) < 3.5 * e.stderr_);
    }
    CHECK_THROWS_AS(limiting_cdf(mc, -1.0), DomainError);

    // Independent of the worker count.
    Stream a(9, 0), b(9, 0);
    const auto s1 = limiting_sample(10000, a, 1e6, 1);
    const auto s2 = limiting_sample(10000, b, 1e6, 3);
    CHECK(s1.f.samples() == s2.f.samples());
}

TEST_CASE("geometric progressions") {
    Stream rng(10, 0);
    GeometricOptions o;
    o.mc_samples = 30000;
    std::vector<double> s;
    for (int i = 0; i < 6; ++i) s.push_back(rng.uniform());
    const auto rep = geometric_gap_experiment(o, s, rng);
    CHECK_FALSE(rep.pre_asymptotic);
    CHECK(rep.mean_ks < 0.05);
    for (const auto& g : rep.series) {
        CHECK(g.values.size() == 2000);
        CHECK(g.overflows == 0);
        CHECK(g.spot_count == 19);
        CHECK(g.spot_median_dev < 1e-2);
    }
    // Two values of s lead to the same limit law.
    int agree = 0, pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = i + 1; j < s.size(); ++j, ++pairs) {
            const double D = ks_distance(ECDF(rep.series[i].values), ECDF(rep.series[j].values));
            agree += ks_two_sample_pvalue(D, 2000, 2000) > 0.01;
        }
    CHECK(agree >= 0.9 * pairs - 1);

    // The early steps reproduce L'_{c q^n}(s) computed from scratch.
    for (std::size_t n = 0; n < 20; ++n)
        CHECK(rep.series[0].values[n] ==
              doctest::Approx(L_prime(rep.series[0].r[n], s[0])).epsilon(1e-6));

    o.N = 10;
    o.mc_samples = 5000;
    const auto early = geometric_gap_experiment(o, {0.3}, rng);
    CHECK(early.pre_asymptotic);
    CHECK(early.series[0].ks > 0.1);

    o.c = 0.5;
    CHECK_THROWS_AS(geometric_gap_experiment(o, {0.3}, rng), DomainError);
}

TEST_CASE("plain gap distribution") {
    const auto rep = plain_gap_distribution(1e5);
    CHECK(rep.mean == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rep.target == doctest::Approx(3.0 / kPi2));
    CHECK(std::abs(rep.frac_le_half - rep.target) < 0.01);
    CHECK(rep.frac_beyond_6 < 0.01);
    CHECK(rep.histogram.total() == 100000);
    CHECK_THROWS_AS(plain_gap_distribution(100), DomainError);
}
