#pragma once

// Gaps of the fractional parts of sqrt(n), the gap containing a point s,
// and its approximation by a triangle functional on affine lattices.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "affinelab/homogeneous.hpp"
#include "affinelab/rng.hpp"
#include "affinelab/stats.hpp"

namespace affinelab {

// frac(sqrt(n)) computed as (n - k^2) / (sqrt(n) + k) with k = isqrt(n);
// exactly 0 on perfect squares.
double frac_sqrt(std::uint64_t n);
std::uint64_t isqrt(std::uint64_t n);

struct GapSequence {
    double r = 1.0;
    std::uint64_t count = 0;   // floor(r)
    std::vector<double> t;     // sorted fractional parts plus the sentinel 1
    std::vector<double> gaps;  // successive differences, count entries
};

// Largest r accepted by frac_sqrt_gaps; beyond it use L_prime.
inline constexpr double kMaxDirectR = 5e7;

GapSequence frac_sqrt_gaps(double r);

// floor(r) (t_{k+1} - t_k) with k the largest index such that t_k <= s.
// At s = 1 the gap is empty and the value is 0.
double L_r(const GapSequence& seq, double s);

enum class TriangleStatus { Finite, Zero, Overflow };

const char* to_string(TriangleStatus s);

struct TriangleFit {
    double b_minus = 0.0;
    double b_plus = 0.0;
    double area = 0.0;
    TriangleStatus status = TriangleStatus::Finite;

    // 0 for Zero, +inf for Overflow.
    double value() const;
};

// Largest triangle with apex 0 and base on y = 1 whose interior contains
// {0} x (0, 1) and no point of L.
TriangleFit f_triangle(const AffineLatticeClass& L, double cap = 1e6);

// a_{log sqrt r} u(-2s, -s^2, s) Z^2.
AffineLatticeClass gap_lattice(double r, double s);

TriangleFit L_prime_fit(double r, double s, double cap = 1e6);
double L_prime(double r, double s, double cap = 1e6);

struct SandwichCoefficients {
    double lower;  // floor(r) / (floor(sqrt r) + 1)^2
    double upper;  // floor(r) / floor(sqrt r)^2
};

SandwichCoefficients sandwich_coefficients(double r);

// Bracketing of L_r(s) by the values at the neighbouring perfect squares.
bool sandwich_check(double r, double s);

struct ApproxRatioStats {
    std::uint64_t n = 0;
    int A = 0;
    std::size_t samples = 0;
    std::size_t zero_excluded = 0;
    double median_dev = 0.0;       // median |L / L' - 1|
    double in_band_fraction = 0.0; // (2A+1)/(2A+2) <= L / L' <= (2A+1)/(2A)
    double band_bound = 0.0;       // 1 - ((A+2)(A-1)+2)/(n-1)
    bool small_n = false;
};

// Compares L and L' at r = n^2 for the given s values.
ApproxRatioStats approx_ratio_stats(std::uint64_t n, const std::vector<double>& s, int A = 10);
// Same with s uniform on [1/(n-1), 1 - 1/(n-1)].
ApproxRatioStats approx_ratio_stats(std::uint64_t n, std::size_t samples, Stream& rng, int A = 10);

// Haar samples of f; overflow samples are stored as +inf.
struct LimitingSample {
    ECDF f;
    std::size_t overflow = 0;
};

LimitingSample limiting_sample(std::size_t n_samples, Stream& rng, double cap = 1e6,
                               unsigned workers = 1);

struct CdfEstimate {
    double estimate = 0.0;
    double stderr_ = 0.0;
};

CdfEstimate limiting_cdf_mc(double l, std::size_t n_samples, Stream& rng, double cap = 1e6);
CdfEstimate limiting_cdf(const LimitingSample& mc, double l);

struct GeometricOptions {
    double c = 1.0;
    double q = 2.0;
    std::size_t N = 2000;
    std::size_t mc_samples = 100000;
    double cap = 1e6;
    bool spot_check = true;  // compare with direct L_r for r <= 1e6
    unsigned workers = 1;
};

struct GeometricSeries {
    double s = 0.0;
    std::vector<double> r;
    std::vector<double> values;  // L'_{c q^n}(s), n = 1..N
    std::size_t zeros = 0;
    std::size_t overflows = 0;
    double ks = 0.0;
    std::size_t spot_count = 0;
    double spot_median_dev = 0.0;  // median |L / L' - 1| over r <= 1e6
};

struct GeometricReport {
    std::vector<GeometricSeries> series;
    double mean_ks = 0.0;
    bool pre_asymptotic = false;  // N too small for the limit law to show
    LimitingSample mc;
};

// The values along n are read off one geodesic orbit advanced by log sqrt q per step.
GeometricReport geometric_gap_experiment(const GeometricOptions& opt, const std::vector<double>& s,
                                         Stream& rng);

struct PlainGapReport {
    double r = 0.0;
    Histogram histogram;
    double frac_le_half = 0.0;
    double target = 0.0;     // 3 / pi^2
    double mean = 0.0;       // mean normalized gap
    double frac_beyond_6 = 0.0;
};

PlainGapReport plain_gap_distribution(double r, double hist_hi = 6.0, std::size_t bins = 60);

}  // namespace affinelab
