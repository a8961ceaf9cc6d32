#pragma once

// Periodic arrays of Eaton and flat lenses, trap detection, and the double
// slit torus M(Lambda, R) seen as a Z/2 skew product over a rotation.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "affinelab/homogeneous.hpp"
#include "affinelab/rng.hpp"

namespace affinelab {

enum class LensModel { Eaton, Flat };

struct LensGrid {
    Mat2 h;                    // unimodular basis, lens centres at h Z^2
    double R = 0.25;
    LensModel model = LensModel::Eaton;
    double theta = 0.0;        // flat lenses are perpendicular to (cos theta, sin theta)
};

bool admissible(const Mat2& h, double R);

struct Ray {
    Vec2 p;
    Vec2 v;
};

// Entry point on the lens circle with v pointing inward. The exit point is
// the mirror image of the entry across the line through c parallel to v.
Ray eaton_map(const Ray& in, Vec2 center, double R);

// Hit point on the segment; the ray is turned by pi about the centre.
Ray flat_lens_map(const Ray& in, Vec2 center);

struct LensHit {
    std::array<std::int64_t, 2> index{0, 0};  // lattice coordinates of the centre
    Vec2 center;
    Vec2 point;          // entry point (disc) or hit point (segment)
    double distance = 0.0;
};

// First lens met within the given path length, skipping the lens `skip`.
// Near-tangent intersections are treated as misses and counted in *grazing.
std::optional<LensHit> next_lens_hit(const Ray& ray, const LensGrid& grid, double horizon,
                                     const std::optional<std::array<std::int64_t, 2>>& skip = {},
                                     std::size_t* grazing = nullptr);

struct LensEvent {
    std::array<std::int64_t, 2> index{0, 0};
    Vec2 entry;
    Vec2 exit;
    Vec2 direction;  // outgoing direction
};

struct Trace {
    std::vector<LensEvent> events;
    bool escaped = false;          // no lens within the free-flight horizon
    std::size_t grazing = 0;       // near-tangent intersections treated as misses
    Ray final_ray;
};

// Flat grids require ray0.v parallel to (cos theta, sin theta).
Trace trace(const Ray& ray0, const LensGrid& grid, std::size_t events,
            double free_flight_horizon = 1e6);

struct TrapReport {
    bool trapped = false;
    Vec2 band_dir{1.0, 0.0};
    double band_width = 0.0;
    double sup_first_half = 0.0;
    double sup_all = 0.0;
    std::vector<double> transverse;
};

// Principal direction of the point cloud, transverse deviations from the
// fitted line and the plateau test: trapped iff the sup over the whole
// series exceeds the sup over its first half by less than `plateau`.
TrapReport trapped_classify(const std::vector<Vec2>& positions, double plateau = 0.05,
                            std::size_t min_events = 1000);

TrapReport trapped_classify(const Trace& tr, double plateau = 0.05);

LensGrid rotate_system(const LensGrid& grid, double theta);

// Skew product: vertical flow on R^2 / H Z^2 with the horizontal slit
// [-R, R] x {0}. Points of the transversal are (x, -1/2) in lattice
// coordinates; the return map is x -> x + beta.
struct SkewIET {
    Mat2 H;                 // det 1, H = [[a, b], [c, d]], a > 0, R |c| < 1/2
    double R = 0.0;
    double beta = 0.0;      // -b / a
    double alpha = 0.0;     // frac(beta)
    double return_time = 0.0;
    double half_shadow = 0.0;  // R / a
    // Circle intervals on which the number of slit crossings per return is odd.
    std::vector<std::pair<double, double>> J;
    double J_measure() const;
};

// Rejects directions parallel to a lattice vector unless allow_periodic.
SkewIET build_skew_iet(const Mat2& h, double R, double theta, bool allow_periodic = false);

struct DriftStep {
    double x = 0.0;
    int sigma = 1;
    std::array<std::int64_t, 2> D{0, 0};
};

struct Crossing2 {
    std::int64_t m = 0;        // slit at lattice point (m, 0) of the current return
    std::array<std::int64_t, 2> center{0, 0};  // lens centre in plane lattice coordinates
};

// One return: crossings in flow order, sheet flips and drift update.
// Throws NumericError on a slit-endpoint hit.
std::vector<Crossing2> skew_step(const SkewIET& iet, DriftStep& s);

struct DriftSeries {
    std::vector<std::array<std::int64_t, 2>> d;
    std::vector<double> norm;   // |d(k)|
    std::size_t toggles = 0;
    bool saddle = false;
};

DriftSeries drift_track(const SkewIET& iet, std::size_t returns, double x0 = 0.123456789);

struct ExponentEstimate {
    double exponent = 0.0;
    double residual = 0.0;
    bool degenerate = false;
};

// Slope of log max_{j<=k} |d(j)| against log k over the upper half of the range.
ExponentEstimate deviation_exponent(const std::vector<double>& norms);

// Same estimate computed on the fly for long horizons: the running max is
// kept at geometric checkpoints instead of storing the series.
struct DeviationRun {
    std::vector<std::size_t> k;
    std::vector<double> running_max;
    std::size_t returns = 0;
    std::size_t toggles = 0;
    bool saddle = false;
    ExponentEstimate fit;
};

DeviationRun deviation_run(const SkewIET& iet, std::size_t returns, double x0 = 0.123456789,
                           std::size_t samples = 512);

struct StableDirection {
    Vec2 zeta;
    double sup = 0.0;
    double max_norm = 0.0;
    bool flagged = false;  // no direction with a small sup compared to the growth
};

StableDirection stable_direction_estimate(const std::vector<std::array<std::int64_t, 2>>& d);

// Interval exchange with Z/2 labels given by lengths, top/bottom orders and parities.
struct TwistedIET {
    std::vector<double> lambda;
    std::vector<int> top, bottom;
    std::vector<int> eps;
};

TwistedIET twisted_iet_from(const SkewIET& iet);

struct LyapunovResult {
    double exponent = 0.0;
    double teich_time = 0.0;
    std::size_t zorich_steps = 0;
    std::uint64_t rv_steps = 0;
    bool unimodular = true;   // every Zorich block has determinant +-1
};

// Rauzy-Veech induction with Zorich blocks, tracking the twisted height cocycle.
LyapunovResult lyapunov_W(TwistedIET T, std::size_t zorich_steps, Stream& rng,
                          bool check_blocks = true);
LyapunovResult lyapunov_W(const SkewIET& iet, std::size_t zorich_steps, Stream& rng);

// Wronskian determinant of theta -> (r_theta, (2R, 0)); equals -2R.
double eaton_curve_check(double R, double theta = 0.5);

}  // namespace affinelab
