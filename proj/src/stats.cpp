#include "affinelab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace affinelab {

ECDF::ECDF(std::vector<double> samples) : xs_(std::move(samples)) {
    std::sort(xs_.begin(), xs_.end());
}

double ECDF::operator()(double x) const {
    if (xs_.empty()) return 0.0;
    auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    return static_cast<double>(it - xs_.begin()) / static_cast<double>(xs_.size());
}

double ECDF::quantile(double p) const {
    if (xs_.empty()) throw std::invalid_argument("quantile of empty ECDF");
    p = std::clamp(p, 0.0, 1.0);
    auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(xs_.size())));
    return xs_[k == 0 ? 0 : k - 1];
}

CdfGrid make_grid(const ECDF& e, const std::vector<double>& xs) {
    CdfGrid g;
    g.x = xs;
    g.F.reserve(xs.size());
    for (double x : xs) g.F.push_back(e(x));
    return g;
}

double ks_distance(const ECDF& e1, const ECDF& e2) {
    if (e1.empty() || e2.empty()) throw std::invalid_argument("ks_distance: empty sample");
    // Both are step functions; the difference is constant between merged
    // jump points, so it suffices to evaluate just after every jump.
    const auto& a = e1.samples();
    const auto& b = e2.samples();
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() || j < b.size()) {
        double x;
        if (j >= b.size() || (i < a.size() && a[i] <= b[j]))
            x = a[i];
        else
            x = b[j];
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

double ks_distance(const ECDF& e, const CdfGrid& g) {
    if (e.empty() || g.x.empty()) throw std::invalid_argument("ks_distance: empty input");
    double d = 0.0;
    for (std::size_t k = 0; k < g.x.size(); ++k) d = std::max(d, std::abs(e(g.x[k]) - g.F[k]));
    return d;
}

double ks_two_sample_pvalue(double D, std::size_t n, std::size_t m) {
    if (D <= 0.0) return 1.0;
    const double ne = static_cast<double>(n) * static_cast<double>(m) /
                      static_cast<double>(n + m);
    const double sn = std::sqrt(ne);
    // Kolmogorov tail series with the Stephens small-sample correction.
    const double lam = (sn + 0.12 + 0.11 / sn) * D;
    if (lam < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lam * lam);
        sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(sum, 0.0, 1.0);
}

double discrepancy_1d(std::vector<double> samples) {
    if (samples.empty()) return 1.0;
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double x = samples[i];
        d = std::max({d, static_cast<double>(i + 1) / n - x, x - static_cast<double>(i) / n});
    }
    return d;
}

std::vector<std::pair<std::int64_t, std::int64_t>> convergents(double x, int count, double tol) {
    std::vector<std::pair<std::int64_t, std::int64_t>> out;
    std::int64_t p0 = 1, q0 = 0, p1 = static_cast<std::int64_t>(std::floor(x)), q1 = 1;
    out.emplace_back(p1, q1);
    double frac = x - std::floor(x);
    for (int k = 1; k < count && frac > tol; ++k) {
        const double inv = 1.0 / frac;
        const auto ak = static_cast<std::int64_t>(std::floor(inv));
        frac = inv - static_cast<double>(ak);
        const std::int64_t p2 = ak * p1 + p0, q2 = ak * q1 + q0;
        if (q2 > (std::int64_t{1} << 40)) break;
        out.emplace_back(p2, q2);
        p0 = p1; q0 = q1; p1 = p2; q1 = q2;
    }
    return out;
}

RotationNumber rotation_number(const std::vector<double>& lift, int max_convergents) {
    RotationNumber r;
    if (lift.size() < 2) {
        r.short_series = true;
        return r;
    }
    const auto n = static_cast<double>(lift.size() - 1);
    r.value = (lift.back() - lift.front()) / n;
    r.short_series = lift.size() < 100;
    r.convergents = convergents(r.value, max_convergents, 1.0 / n);
    return r;
}

FitResult least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    FitResult f;
    const std::size_t n = std::min(x.size(), y.size());
    f.window = {0, n};
    if (n < 2) {
        f.degenerate = true;
        return f;
    }
    const double mx = std::accumulate(x.begin(), x.begin() + n, 0.0) / n;
    const double my = std::accumulate(y.begin(), y.begin() + n, 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0) {
        f.degenerate = true;
        f.intercept = my;
        return f;
    }
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - (f.intercept + f.slope * x[i]);
        ss += e * e;
    }
    f.residual = std::sqrt(ss / n);
    return f;
}

FitResult loglog_exponent(const std::vector<double>& series, double frac, std::size_t points) {
    FitResult f;
    const std::size_t n = series.size();
    if (n < 4) {
        f.degenerate = true;
        return f;
    }
    const double logn = std::log(static_cast<double>(n));
    const double lo = logn * (1.0 - frac);
    std::vector<double> lx, ly;
    std::size_t last = 0, first = 0;
    for (std::size_t i = 0; i < points; ++i) {
        const double u = lo + (logn - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
        auto k = static_cast<std::size_t>(std::llround(std::exp(u)));
        k = std::clamp<std::size_t>(k, 1, n);
        if (!lx.empty() && k == last) continue;
        if (lx.empty()) first = k;
        last = k;
        const double y = series[k - 1];
        if (!(y > 0.0)) continue;
        lx.push_back(std::log(static_cast<double>(k)));
        ly.push_back(std::log(y));
    }
    f = least_squares(lx, ly);
    f.window = {first, last};
    if (lx.size() < 2) f.degenerate = true;
    return f;
}

std::size_t Histogram::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0}) + underflow + overflow;
}

Histogram histogram(const std::vector<double>& samples, double lo, double hi, std::size_t bins) {
    if (!(hi > lo) || bins == 0) throw std::invalid_argument("histogram: bad range");
    Histogram h;
    h.lo = lo;
    h.hi = hi;
    h.counts.assign(bins, 0);
    const double w = (hi - lo) / static_cast<double>(bins);
    for (double x : samples) {
        if (x < lo) {
            ++h.underflow;
        } else if (x >= hi) {
            ++h.overflow;
        } else {
            auto k = static_cast<std::size_t>((x - lo) / w);
            h.counts[std::min(k, bins - 1)]++;
        }
    }
    return h;
}

MeanSE mean_se(const std::vector<double>& xs) {
    MeanSE r;
    if (xs.empty()) return r;
    const double n = static_cast<double>(xs.size());
    r.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    if (xs.size() < 2) return r;
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.se = std::sqrt(ss / (n - 1.0) / n);
    return r;
}

MeanSE batch_means(const std::vector<double>& xs, std::size_t batches) {
    if (batches < 2 || xs.size() < batches) return mean_se(xs);
    const std::size_t len = xs.size() / batches;
    std::vector<double> means;
    means.reserve(batches);
    for (std::size_t b = 0; b < batches; ++b) {
        const auto first = xs.begin() + static_cast<std::ptrdiff_t>(b * len);
        means.push_back(std::accumulate(first, first + static_cast<std::ptrdiff_t>(len), 0.0) /
                        static_cast<double>(len));
    }
    return mean_se(means);
}

}  // namespace affinelab
