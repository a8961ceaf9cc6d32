#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace affinelab {

// Right-continuous empirical distribution function.
class ECDF {
public:
    ECDF() = default;
    explicit ECDF(std::vector<double> samples);

    double operator()(double x) const;
    std::size_t size() const { return xs_.size(); }
    bool empty() const { return xs_.empty(); }
    const std::vector<double>& samples() const { return xs_; }
    double quantile(double p) const;

private:
    std::vector<double> xs_;
};

// A CDF known on a grid of abscissae, e.g. a Monte-Carlo reference.
struct CdfGrid {
    std::vector<double> x;
    std::vector<double> F;
};

CdfGrid make_grid(const ECDF& e, const std::vector<double>& xs);

double ks_distance(const ECDF& e1, const ECDF& e2);
double ks_distance(const ECDF& e, const CdfGrid& g);

// Asymptotic two-sample KS p-value for sample sizes n, m.
double ks_two_sample_pvalue(double D, std::size_t n, std::size_t m);

// Star discrepancy of points in [0,1).
double discrepancy_1d(std::vector<double> samples);

struct RotationNumber {
    double value = 0.0;
    std::vector<std::pair<std::int64_t, std::int64_t>> convergents;
    bool short_series = false;
};

// (lift_N - lift_0) / N for a lifted circle-map orbit.
RotationNumber rotation_number(const std::vector<double>& lift, int max_convergents = 8);

std::vector<std::pair<std::int64_t, std::int64_t>> convergents(double x, int count,
                                                               double tol = 1e-12);

struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // RMS of fit residuals
    std::pair<std::size_t, std::size_t> window{0, 0};
    bool degenerate = false;
};

FitResult least_squares(const std::vector<double>& x, const std::vector<double>& y);

// Fit log y_k against log k (k = 1..n). The fit window is the upper part
// of the log-k range, [n^(1-frac), n], sampled at geometric spacing so the
// long tail does not dominate the regression.
FitResult loglog_exponent(const std::vector<double>& series, double frac = 0.5,
                          std::size_t points = 256);

struct Histogram {
    double lo = 0.0, hi = 1.0;
    std::vector<std::size_t> counts;
    std::size_t underflow = 0, overflow = 0;
    double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
    std::size_t total() const;
};

Histogram histogram(const std::vector<double>& samples, double lo, double hi, std::size_t bins);

struct MeanSE {
    double mean = 0.0;
    double se = 0.0;
};

MeanSE mean_se(const std::vector<double>& xs);

// Standard error of the mean of a correlated series via non-overlapping batches.
MeanSE batch_means(const std::vector<double>& xs, std::size_t batches);

}  // namespace affinelab
