// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>

#include "affinelab/billiards.hpp"
#include "affinelab/errors.hpp"
#include "affinelab/gaps.hpp"
#include "affinelab/homogeneous.hpp"
#include "affinelab/lenses.hpp"
#include "affinelab/parallel.hpp"
#include "affinelab/stats.hpp"

using namespace affinelab;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();
const EllipseTable kTable{2.0, 1.0, 0.5};
const unsigned kWorkers = default_workers();

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Outcome caustic_drift() {
    const Stream base(101, 0);
    auto drift = parallel_map<double>(20, kWorkers, [&](std::size_t k) {
        Stream s = base.child(k);
        const double lambda = s.uniform(0.02, 1.98);
        SimOptions opt;
        opt.record_crossings = false;
        opt.record_params = false;
        const auto tr = simulate(start_state(lambda, kTable, s), kTable, 100000, opt);
        return tr.singular ? kInf : tr.max_lambda_drift;
    });
    const double worst = *std::max_element(drift.begin(), drift.end());
    return {worst < 1e-7, fmt("max drift %.3g over 20 orbits", worst)};
}

Outcome quadrature_identities() {
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        const double lambda = 0.01 + 0.98 * i / 49.0;
        const auto r = reduction_data(lambda, kTable);
        const double lhs = 4.0 * e_moment(kTable.b, kTable.a, 0, lambda, kTable);
        const double rhs = 4.0 * e_moment(-kInf, lambda, 0, lambda, kTable);
        const double w = e_moment(0.0, lambda, 0, lambda, kTable);
        const double wt = e_moment(-kInf, 0.0, 0, lambda, kTable);
        worst = std::max({worst, std::abs(lhs - rhs), std::abs(w - (r.l / 4.0 - wt)), std::abs(w - r.w)});
    }
    return {worst < 1e-8, fmt("max identity error %.3g", worst)};
}

Outcome determinant_sign() {
    bool ok = true;
    std::string detail;
    for (auto [lo, hi] : {std::pair{kTable.lambda0, kTable.b}, std::pair{kTable.b, kTable.a}}) {
        auto d = parallel_map<double>(100, kWorkers, [&, lo = lo, hi = hi](std::size_t i) {
            return det_Mpsi_billiard(lo + (hi - lo) * (static_cast<double>(i) + 0.5) / 100.0, kTable);
        });
        const bool pos = std::all_of(d.begin(), d.end(), [](double x) { return x > 0.0; });
        const bool neg = std::all_of(d.begin(), d.end(), [](double x) { return x < 0.0; });
        double mn = kInf;
        for (double x : d) mn = std::min(mn, std::abs(x));
        ok = ok && (pos || neg);
        detail += fmt("(%.2g,%.2g): %s min|det| %.3g; ", lo, hi, pos ? "+" : neg ? "-" : "mixed", mn);
    }
    return {ok, detail};
}

Outcome billiard_equidistribution() {
    const Stream base(104, 0);
    auto reps = parallel_map<EquidistributionReport>(20, kWorkers, [&](std::size_t k) {
        Stream s = base.child(k);
        double l;
        do l = s.uniform(0.02 * kTable.a, 0.98 * kTable.a);
        while (std::abs(l - kTable.b) < 0.01 || std::abs(l - kTable.lambda0) < 0.01);
        return equidistribution_report(l, kTable, s, 1000000, 0.02);
    });
    int pass = 0;
    double worst = 0.0;
    for (const auto& r : reps) {
        pass += !r.flagged && !r.singular;
        worst = std::max(worst, r.ks);
    }
    return {pass >= 18, fmt("%d/20 below 0.02, max KS %.4f", pass, worst)};
}

Outcome gap_constant() {
    const auto rep = plain_gap_distribution(1e6);
    const double target = 3.0 / (kPi * kPi);
    return {std::abs(rep.frac_le_half - target) <= 0.005,
            fmt("fraction %.5f, target %.5f", rep.frac_le_half, target)};
}

Outcome triangle_approximation() {
    Stream rng(106, 0);
    const auto st = approx_ratio_stats(1000, 1000, rng, 10);
    const double bound = 1.0 - 110.0 / 999.0;
    return {st.median_dev < 0.02 && st.in_band_fraction >= bound,
            fmt("median |L/L'-1| %.3g, in band %.4f (need %.4f)", st.median_dev, st.in_band_fraction, bound)};
}

LimitingSample& limiting_reference() {
    static LimitingSample mc = [] {
        Stream rng(107, 0);
        return limiting_sample(100000, rng, 1e6, kWorkers);
    }();
    return mc;
}

Outcome geometric_law() {
    Stream rng(107, 1);
    std::vector<double> s(50);
    for (auto& x : s) x = rng.uniform();
    GeometricOptions opt;
    opt.c = 1.0;
    opt.q = 2.0;
    opt.N = 2000;
    opt.mc_samples = 100000;
    opt.spot_check = false;
    opt.workers = kWorkers;
    Stream mc_rng(107, 2);
    const auto rep = geometric_gap_experiment(opt, s, mc_rng);
    return {rep.mean_ks < 0.05, fmt("mean KS %.4f over %zu points", rep.mean_ks, rep.series.size())};
}

Outcome limiting_anchor() {
    const auto e = limiting_cdf(limiting_reference(), 0.5);
    const double target = 0.75 / (kPi * kPi);
    return {std::abs(e.estimate - target) < 3.0 * e.stderr_,
            fmt("P(f<=1/2) %.5f, target %.5f, SE %.5f", e.estimate, target, e.stderr_)};
}

Outcome trapping_scan() {
    const Mat2 h = Mat2::identity();
    const double R = 0.25;
    const Vec2 p0 = h * Vec2{0.5, 0.5};
    const Stream base(109, 0);
    auto trapped = parallel_map<int>(100, kWorkers, [&](std::size_t k) {
        Stream s = base.child(k);
        const double th = s.uniform(0.0, 2.0 * kPi);
        const Trace tr = trace({p0, {std::cos(th), std::sin(th)}}, LensGrid{h, R, LensModel::Eaton, th}, 100000);
        return tr.escaped ? 0 : static_cast<int>(trapped_classify(tr).trapped);
    });
    int n = 0;
    for (int t : trapped) n += t;
    return {n >= 90, fmt("%d/100 trapped", n)};
}

// Ray in the index profile sqrt(2R/r - 1): x'' = -R x / r^3 at unit speed on the rim.
Vec2 ode_exit(Vec2 entry, Vec2 v, double R) {
    namespace odeint = boost::numeric::odeint;
    using State = std::array<double, 4>;
    auto rhs = [R](const State& s, State& ds, double) {
        const double r = std::hypot(s[0], s[1]);
        const double k = -R / (r * r * r);
        ds = {s[2], s[3], k * s[0], k * s[1]};
    };
    auto stepper = odeint::make_dense_output(1e-13, 1e-13, odeint::runge_kutta_dopri5<State>());
    stepper.initialize(State{entry.x, entry.y, v.x, v.y}, 0.0, 1e-4 * R);
    bool inside = false;
    for (int it = 0; it < 10000000; ++it) {
        const auto [t0, t1] = stepper.do_step(rhs);
        const State& cur = stepper.current_state();
        const double r = std::hypot(cur[0], cur[1]);
        if (r < R * (1.0 - 1e-6)) inside = true;
        if (inside && r >= R) {
            double lo = t0, hi = t1;
            State mid;
            for (int k = 0; k < 100; ++k) {
                const double tm = 0.5 * (lo + hi);
                stepper.calc_state(tm, mid);
                (std::hypot(mid[0], mid[1]) < R ? lo : hi) = tm;
            }
            stepper.calc_state(0.5 * (lo + hi), mid);
            return {mid[0], mid[1]};
        }
    }
    throw NumericError("ode_exit: no exit");
}

Outcome eaton_vs_ode() {
    Stream rng(110, 0);
    const double R = 0.25;
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
        const double b = rng.uniform(0.02, 0.98) * R;
        const Vec2 entry{-std::sqrt(R * R - b * b), b};
        const Vec2 exact = eaton_map({entry, {1.0, 0.0}}, {0.0, 0.0}, R).p;
        worst = std::max(worst, (ode_exit(entry, {1.0, 0.0}, R) - exact).norm());
    }
    return {worst < 1e-5, fmt("max exit error %.3g", worst)};
}

// Directions are redrawn while the skew product is periodic.
SkewIET random_iet(const Mat2& h, double R, Stream& s) {
    for (;;) {
        try {
            return build_skew_iet(h, R, s.uniform(0.0, 2.0 * kPi));
        } catch (const DomainError&) {
        }
    }
}

Outcome deviation_median() {
    const Stream base(111, 0);
    auto ex = parallel_map<double>(20, kWorkers, [&](std::size_t k) {
        Stream s = base.child(k);
        const SkewIET iet = random_iet(Mat2::identity(), 0.25, s);
        return deviation_run(iet, 10000000, s.uniform()).fit.exponent;
    });
    std::sort(ex.begin(), ex.end());
    const double med = 0.5 * (ex[9] + ex[10]);
    return {med >= 0.4 && med <= 0.6, fmt("median exponent %.4f (range %.3f..%.3f)", med, ex.front(), ex.back())};
}

Outcome lyapunov_mean() {
    const Stream base(112, 0);
    auto res = parallel_map<LyapunovResult>(10, kWorkers, [&](std::size_t k) {
        Stream s = base.child(k);
        const SkewIET iet = random_iet(Mat2::identity(), 0.25, s);
        return lyapunov_W(iet, 1000000, s);
    });
    double mean = 0.0;
    bool unimodular = true;
    for (const auto& r : res) {
        mean += r.exponent / 10.0;
        unimodular = unimodular && r.unimodular;
    }
    return {std::abs(mean - 0.5) <= 0.05 && unimodular,
            fmt("mean exponent %.4f, unimodular %s", mean, unimodular ? "yes" : "no")};
}

Outcome birkhoff_genericity() {
    const Observable obs = cusp_bump(3.0);
    const Stream hb(113, 1);
    auto haar = parallel_map<std::vector<double>>(25, kWorkers, [&](std::size_t b) {
        Stream s = hb.child(b);
        std::vector<double> v(4000);
        for (auto& x : v) x = obs(haar_sample(s));
        return v;
    });
    std::vector<double> all;
    for (auto& v : haar) all.insert(all.end(), v.begin(), v.end());
    const auto ref = mean_se(all);

    const CurveU curve{[](double s) { return s * s; }, [](double s) { return 2.0 * s; }, 0.0, 1.0};
    const Stream base(113, 0);
    auto ok = parallel_map<int>(20, kWorkers, [&](std::size_t k) {
        Stream s = base.child(k);
        const auto r = birkhoff_series(AffineLatticeClass(curve_point(curve, s.uniform())), obs, 1e4);
        return static_cast<int>(std::abs(r.mean - ref.mean) < 3.0 * std::hypot(r.se, ref.se));
    });
    int n = 0;
    for (int x : ok) n += x;
    return {n >= 18, fmt("%d/20 within 3 SE of Haar mean %.5f", n, ref.mean)};
}

Outcome siegel_disc() {
    const double rad = std::sqrt(0.5 / kPi);
    Stream rng(114, 0);
    std::vector<double> counts(100000);
    for (auto& c : counts) c = static_cast<double>(count_points_in_disc(haar_sample(rng), {}, rad));
    const auto m = mean_se(counts);
    return {std::abs(m.mean - 0.5) <= 0.01, fmt("mean count %.5f, SE %.5f", m.mean, m.se)};
}

Outcome alpha0_contraction() {
    Stream rng(115, 0);
    boost::math::quadrature::gauss_kronrod<double, 31> gk;
    const double t = 20.0;
    const double bound_t = 2.0 * std::exp(t);
    int holds = 0;
    double deepest = 0.0;
    for (int k = 0; k < 100; ++k) {
        AffineLatticeClass x = haar_sample(rng);
        // A fifth of the points sit in the cusp: a rotated basis with one vector of
        // length e^{-tau}, so alpha0 = e^{tau/2}, reaching 1e6 on the last point.
        if (k % 5 == 4) {
            const double tau = k == 99 ? std::log(1e12) : rng.uniform(0.0, std::log(1e12));
            const Mat2 h = Mat2::rotation(rng.uniform(0.0, 2.0 * kPi)) * Mat2::diag(std::exp(-tau), std::exp(tau)) *
                           Mat2{1.0, rng.uniform(-0.5, 0.5), 0.0, 1.0};
            x = AffineLatticeClass(h, {rng.uniform(), rng.uniform()});
        }
        const double a = alpha0(x);
        deepest = std::max(deepest, a);
        auto integrand = [&](double u) {
            GeodesicFlow f(x.acted(horocycle(u, 0.0, 0.0)));
            f.advance(t);
            return alpha0(f.state());
        };
        const double I = gk.integrate(integrand, -1.0, 1.0, 12, 1e-6);
        holds += I < a / 4.0 + bound_t;
    }
    return {holds == 100, fmt("%d/100 hold, max alpha0 %.3g", holds, deepest)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"caustic conservation", caustic_drift},
        {"quadrature identities", quadrature_identities},
        {"curve determinant sign", determinant_sign},
        {"billiard two-start KS", billiard_equidistribution},
        {"gap constant at r=1e6", gap_constant},
        {"L vs triangle approximation", triangle_approximation},
        {"geometric progression law", geometric_law},
        {"limiting CDF at 1/2", limiting_anchor},
        {"Eaton trapping scan", trapping_scan},
        {"Eaton closed form vs ODE", eaton_vs_ode},
        {"deviation exponent median", deviation_median},
        {"twisted Lyapunov exponent", lyapunov_mean},
        {"Birkhoff genericity along s^2", birkhoff_genericity},
        {"Siegel disc mean", siegel_disc},
        {"alpha0 contraction", alpha0_contraction},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %2zu %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
