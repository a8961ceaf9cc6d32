#pragma once

// Billiard in the ellipse x^2/a + y^2/b = 1 with a vertical barrier on the
// upper half of the minor axis, its caustic invariant, the elliptic-integral
// data (l, w, d) of the equivalent polygonal billiard, and the polygonal
// models themselves.

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "affinelab/homogeneous.hpp"
#include "affinelab/quadrature.hpp"
#include "affinelab/rng.hpp"

namespace affinelab {

struct EllipseTable {
    double a = 2.0;        // squared semi-major axis
    double b = 1.0;        // squared semi-minor axis
    double lambda0 = 0.5;  // barrier parameter

    void validate() const;
    double barrier_lo() const;  // sqrt(b - lambda0)
    double barrier_hi() const;  // sqrt(b)
    double barrier_length() const { return barrier_hi() - barrier_lo(); }
};

struct BilliardState {
    Vec2 p;
    Vec2 v;
    double lambda = 0.0;
};

enum class EventType { EllipseHit, BarrierHit, BarrierEndpoint };

struct Event {
    EventType type = EventType::EllipseHit;
    Vec2 point;
    double time = 0.0;
};

// lambda such that the line p + t v is tangent to the confocal conic
// x^2/(a - lambda) + y^2/(b - lambda) = 1.
double caustic_param(Vec2 p, Vec2 v, const EllipseTable& T);

// Earliest event along the ray. skip_barrier suppresses the barrier test
// right after a barrier reflection (the ray starts on it).
Event next_event(const BilliardState& s, const EllipseTable& T, bool skip_barrier = false);

// Post-collision state. Throws DomainError for endpoint events.
BilliardState reflect(const Event& e, const BilliardState& s, const EllipseTable& T);

struct Crossing {
    double y = 0.0;        // height where the path meets the line x = 0
    bool barrier = false;  // the crossing was stopped by the barrier
};

struct SimOptions {
    bool record_points = false;
    bool record_crossings = true;
    bool record_params = true;
    bool count_ellipse_hits_only = false;  // n counts ellipse hits rather than all events
};

struct Trajectory {
    std::vector<Event> events;             // when record_points
    std::vector<Crossing> crossings;
    std::vector<double> boundary_params;   // elliptic angle / 2 pi of ellipse hits, in [0, 1)
    std::size_t ellipse_hits = 0;
    std::size_t barrier_hits = 0;
    double max_lambda_drift = 0.0;
    double max_speed_drift = 0.0;
    bool singular = false;                 // stopped at a barrier endpoint
    BilliardState final_state;
};

Trajectory simulate(const BilliardState& s0, const EllipseTable& T, std::size_t n,
                    const SimOptions& opt = {});

// Elliptic angle of a boundary point, normalised to [0, 1).
double boundary_param(Vec2 p, const EllipseTable& T);

// Random initial state inside the table whose caustic parameter is lambda.
BilliardState start_state(double lambda, const EllipseTable& T, Stream& rng);

double integrand_e(double s, double lambda, const EllipseTable& T);

enum class ReductionCase { E, EPrime, H };

const char* to_string(ReductionCase c);

struct ReductionData {
    double lambda = 0.0;
    double l = 0.0, w = 0.0, d = 0.0;
    double lp = 0.0, wp = 0.0, dp = 0.0;
    double lpp = 0.0, wpp = 0.0, dpp = 0.0;
    ReductionCase kind = ReductionCase::E;
    // moments[i][j] = integral over A_i of e / (lambda - s)^j, with
    // A = {(b,a), (-inf,0), (0,lambda0)} in cases E, E' and
    // A = {(-inf,b), (0,b), (0,lambda0)} in case H.
    std::array<std::array<double, 3>, 3> moments{};
    std::size_t max_levels_used = 0;
};

ReductionCase classify(double lambda, const EllipseTable& T);

ReductionData reduction_data(double lambda, const EllipseTable& T, const QuadOptions& o = {});

// Integral of e(s) / (lambda - s)^k over [lo, hi]; lo may be -infinity.
double e_moment(double lo, double hi, int k, double lambda, const EllipseTable& T,
                const QuadOptions& o = {}, std::size_t* levels = nullptr);

AffineElement psi_curve(double lambda, const EllipseTable& T);

// The curve lambda -> psi(lambda) with analytic jets from the reduction data.
WronskianCurve billiard_curve(const EllipseTable& T, double lo, double hi);

double det_Mpsi_billiard(double lambda, const EllipseTable& T);

// det of the Wronskian of (l, w, d) itself.
double det_Mlwd(const ReductionData& r);

struct PolygonalModel {
    enum class Kind { CylinderSlit, RectangleSlit, Rectangle };
    Kind kind = Kind::Rectangle;
    double l = 1.0, w = 1.0, d = 0.0;

    void validate() const;
};

struct PolygonalStart {
    double x = 0.0, y = 0.0;
    int sx = 1, sy = 1;  // direction (sx, sy) / sqrt(2)
};

struct PolygonalRun {
    std::vector<double> bottom_x;    // x of successive bottom-side hits
    std::vector<int> bottom_sx;      // horizontal direction at those hits
    std::vector<double> circle;      // circle coordinate X / (2l) in [0, 1)
    std::vector<double> lift;        // unwrapped circle coordinate
    std::size_t slit_hits = 0;
    std::size_t side_hits = 0;
    bool singular = false;
};

// n bottom-side returns of the diagonal flow.
PolygonalRun polygonal_simulate(const PolygonalModel& m, const PolygonalStart& s, std::size_t n);

struct EquidistributionReport {
    double lambda = 0.0;
    double ks = 0.0;
    bool flagged = false;   // ks at or above the threshold
    bool singular = false;  // an orbit hit a barrier endpoint
    std::size_t n1 = 0, n2 = 0;
    double max_lambda_drift = 0.0;
};

EquidistributionReport equidistribution_report(double lambda, const EllipseTable& T,
                                               const BilliardState& s1, const BilliardState& s2,
                                               std::size_t n, double threshold = 0.02);

EquidistributionReport equidistribution_report(double lambda, const EllipseTable& T, Stream& rng,
                                               std::size_t n, double threshold = 0.02);

}  // namespace affinelab
