#include <doctest.h>

#include <cmath>
#include <numbers>

#include "affinelab/rng.hpp"
#include "affinelab/stats.hpp"

using namespace affinelab;

namespace {

std::vector<double> uniforms(std::uint64_t seed, std::size_t n) {
    Stream s(seed, 0);
    std::vector<double> v(n);
    for (auto& x : v) x = s.uniform();
    return v;
}

}  // namespace

TEST_CASE("streams are reproducible and independent") {
    Stream a(42, 7), b(42, 7), c(42, 8);
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
        CHECK(x != c.next_u64());
    }
    Stream d(1, 0);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double g = d.normal();
        sum += g;
        sq += g * g;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sq / n - 1.0) < 0.02);
    const auto u = uniforms(3, n);
    CHECK(std::abs(mean_se(u).mean - 0.5) < 0.005);
}

TEST_CASE("ecdf is a right-continuous step function") {
    ECDF e({3.0, 1.0, 2.0, 2.0});
    CHECK(e(0.5) == 0.0);
    CHECK(e(1.0) == 0.25);
    CHECK(e(2.0) == 0.75);
    CHECK(e(2.5) == 0.75);
    CHECK(e(3.0) == 1.0);
    CHECK(e.quantile(0.5) == 2.0);
}

TEST_CASE("ks distance basics") {
    const auto u = uniforms(1, 1000);
    CHECK(ks_distance(ECDF(u), ECDF(u)) == 0.0);
    std::vector<double> shifted(u);
    for (auto& x : shifted) x += 2.0;
    CHECK(ks_distance(ECDF(u), ECDF(shifted)) == doctest::Approx(1.0));

    // Two independent uniform samples: D is of order N^{-1/2}.
    const std::size_t N = 10000;
    const double d = ks_distance(ECDF(uniforms(10, N)), ECDF(uniforms(11, N)));
    CHECK(d > 0.0);
    CHECK(d < 2.0 * std::sqrt(2.0 / N));

    // Against the exact uniform CDF on a grid.
    CdfGrid g;
    for (int k = 0; k <= 1000; ++k) {
        g.x.push_back(k / 1000.0);
        g.F.push_back(k / 1000.0);
    }
    CHECK(ks_distance(ECDF(uniforms(12, N)), g) < 2.0 / std::sqrt(static_cast<double>(N)));
}

TEST_CASE("ks distance is a metric") {
    Stream s(5, 5);
    for (int t = 0; t < 200; ++t) {
        auto draw = [&] {
            std::vector<double> v(5 + s.below(40));
            const double shift = s.uniform(-0.3, 0.3);
            for (auto& x : v) x = s.uniform() + shift;
            return ECDF(v);
        };
        const ECDF a = draw(), b = draw(), c = draw();
        const double ab = ks_distance(a, b), ba = ks_distance(b, a);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
        CHECK(ks_distance(a, c) <= ab + ks_distance(b, c) + 1e-12);
    }
}

TEST_CASE("two-sample p-value matches the Kolmogorov quantile") {
    const std::size_t n = 5000, m = 5000;
    const double ne = 2500.0;
    // 1.3581 is the 95% quantile of the Kolmogorov distribution.
    const double p = ks_two_sample_pvalue(1.3581 / std::sqrt(ne), n, m);
    CHECK(p == doctest::Approx(0.05).epsilon(0.05));
    CHECK(ks_two_sample_pvalue(0.0, n, m) == 1.0);
}

TEST_CASE("star discrepancy") {
    for (int N : {1, 7, 100}) {
        std::vector<double> pts;
        for (int i = 0; i < N; ++i) pts.push_back(static_cast<double>(i) / N);
        CHECK(discrepancy_1d(pts) == doctest::Approx(1.0 / N));
    }
    const auto u = uniforms(8, 10000);
    CHECK(discrepancy_1d(u) < 0.03);
}

TEST_CASE("rotation number of a rigid rotation") {
    const double alpha = (std::sqrt(5.0) - 1.0) / 2.0;
    const int N = 1000;
    std::vector<double> lift;
    double x = 0.1;
    for (int i = 0; i <= N; ++i) {
        lift.push_back(x);
        x += alpha;
    }
    const auto r = rotation_number(lift);
    CHECK(std::abs(r.value - alpha) < 1.0 / N);
    CHECK_FALSE(r.short_series);
    REQUIRE(r.convergents.size() >= 5);
    // Convergents of the golden mean are ratios of Fibonacci numbers.
    CHECK(r.convergents[4].first == 3);
    CHECK(r.convergents[4].second == 5);
    CHECK(rotation_number({0.0, 0.5}).short_series);
}

TEST_CASE("loglog exponent recovers planted power laws") {
    for (double e : {0.3, 0.5, 0.8}) {
        std::vector<double> s;
        for (int k = 1; k <= 100000; ++k) s.push_back(2.0 * std::pow(k, e));
        const auto f = loglog_exponent(s);
        CHECK(std::abs(f.slope - e) < 1e-3);
        CHECK(f.residual >= 0.0);
        CHECK(f.intercept == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    }
    std::vector<double> flat(1000, 1.0);
    CHECK(std::abs(loglog_exponent(flat).slope) < 1e-12);
}

TEST_CASE("least squares and histogram") {
    const auto f = least_squares({0, 1, 2, 3}, {1, 3, 5, 7});
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
    CHECK(f.residual == doctest::Approx(0.0));
    CHECK(least_squares({1, 1}, {0, 1}).degenerate);

    const auto h = histogram({-1.0, 0.1, 0.2, 0.95, 1.0, 5.0}, 0.0, 1.0, 10);
    CHECK(h.underflow == 1);
    CHECK(h.overflow == 2);
    CHECK(h.counts[1] == 1);
    CHECK(h.counts[2] == 1);
    CHECK(h.counts[9] == 1);
    CHECK(h.total() == 6);
}

TEST_CASE("batch means inflate the error of a correlated series") {
    Stream s(9, 9);
    std::vector<double> ar(100000);
    double x = 0.0;
    for (auto& v : ar) {
        x = 0.95 * x + s.normal();
        v = x;
    }
    const auto naive = mean_se(ar);
    const auto batched = batch_means(ar, 50);
    CHECK(batched.se > 3.0 * naive.se);
    CHECK(naive.mean == doctest::Approx(batched.mean).epsilon(1e-9));
}
