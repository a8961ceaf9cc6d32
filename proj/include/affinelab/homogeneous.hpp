#pragma once

// Affine lattices: the group ASL2(R), its geodesic and horocycle subgroups,
// lattice invariants and Haar sampling on X = ASL2(R)/ASL2(Z).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "affinelab/rng.hpp"

namespace affinelab {

struct Vec2 {
    double x = 0.0, y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator-() const { return {-x, -y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double cross(Vec2 o) const { return x * o.y - y * o.x; }
    double norm2() const { return x * x + y * y; }
    double norm() const { return std::hypot(x, y); }
    bool operator==(const Vec2&) const = default;
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

// Row-major [[a, b], [c, d]]. Lattice bases are stored as columns.
struct Mat2 {
    double a = 1.0, b = 0.0, c = 0.0, d = 1.0;

    static Mat2 identity() { return {}; }
    static Mat2 diag(double p, double q) { return {p, 0.0, 0.0, q}; }
    static Mat2 rotation(double theta) {
        const double cs = std::cos(theta), sn = std::sin(theta);
        return {cs, -sn, sn, cs};
    }
    static Mat2 from_columns(Vec2 u, Vec2 v) { return {u.x, v.x, u.y, v.y}; }

    double det() const { return a * d - b * c; }
    Vec2 col1() const { return {a, c}; }
    Vec2 col2() const { return {b, d}; }
    Mat2 operator*(const Mat2& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
    }
    Vec2 operator*(Vec2 v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
    Mat2 operator*(double s) const { return {a * s, b * s, c * s, d * s}; }
    Mat2 inverse() const {
        const double k = 1.0 / det();
        return {d * k, -b * k, -c * k, a * k};
    }
    bool is_unimodular(double tol = 1e-12) const { return std::abs(det() - 1.0) <= tol; }
    double max_abs() const { return std::max({std::abs(a), std::abs(b), std::abs(c), std::abs(d)}); }
    bool operator==(const Mat2&) const = default;
};

// (h, xi) acting on the plane by p -> h p + xi.
struct AffineElement {
    Mat2 h;
    Vec2 xi;

    Vec2 apply(Vec2 p) const { return h * p + xi; }
};

AffineElement compose(const AffineElement& g1, const AffineElement& g2);
AffineElement inverse(const AffineElement& g);
AffineElement identity_element();
AffineElement geodesic(double t);
AffineElement horocycle(double s1, double s2, double s3);

// The affine lattice {h m + xi : m in Z^2}, i.e. the coset (h, xi) ASL2(Z).
struct AffineLatticeClass {
    AffineElement rep;
    bool reduced = false;

    AffineLatticeClass() = default;
    explicit AffineLatticeClass(AffineElement g, bool is_reduced = false)
        : rep(g), reduced(is_reduced) {}
    AffineLatticeClass(Mat2 h, Vec2 xi) : rep{h, xi} {}

    const Mat2& h() const { return rep.h; }
    const Vec2& xi() const { return rep.xi; }
    Vec2 point(std::int64_t m, std::int64_t n) const {
        return rep.h * Vec2{static_cast<double>(m), static_cast<double>(n)} + rep.xi;
    }
    // Gauss-reduced basis and xi moved into the fundamental parallelogram.
    AffineLatticeClass canonical() const;
    // Left action g . x.
    AffineLatticeClass acted(const AffineElement& g) const {
        return AffineLatticeClass(compose(g, rep));
    }
};

struct ReducedBasis {
    Mat2 h;                                   // h_in * gamma
    std::array<std::int64_t, 4> gamma{1, 0, 0, 1};  // row-major, in SL2(Z) up to sign
};

// Lagrange-Gauss reduction of the column basis: |col1| <= |col2| and
// |<col1, col2>| <= |col1|^2 / 2.
ReducedBasis gauss_reduce(const Mat2& h);

// Nonzero vector of h Z^2 of minimal norm, lexicographically smallest on ties.
Vec2 shortest_vector(const Mat2& h);

double alpha0(const AffineLatticeClass& L);
double alpha0(const Mat2& h);

struct ZetaHit {
    Vec2 xi0;       // element of (1/n) Z^2 in the coordinates of the given representative
    double dist;    // |xi - h xi0|
};

// The unique xi0 in (1/n)Z^2 with |xi - h xi0| < alpha0^{-2} / (2n), if any.
std::optional<ZetaHit> zeta_point(const AffineLatticeClass& L, int n);

// Every point of h (1/n) Z^2 within the search box satisfying the strict bound.
std::vector<ZetaHit> zeta_candidates(const AffineLatticeClass& L, int n, int radius = 3);

struct HeightValue {
    double alpha0 = 1.0;
    double alphaN = 1.0;
    double betaN = 0.0;
    bool infinite = false;
    int n = 1;
    double t = 0.0;
    std::optional<Vec2> zeta;
};

HeightValue heights(const AffineLatticeClass& L, int n, double t);

// True iff xi is not a lattice point of h Z^2.
bool in_X2(const AffineLatticeClass& L, double tol = 1e-12);

// Haar-random affine lattice.
AffineLatticeClass haar_sample(Stream& rng);

// Calls fn(p) for every p = h m + xi with xlo < p.x < xhi and ylo < p.y < yhi.
// Iterates over the coefficient with fewer admissible values.
void for_each_point_in_rect(const AffineLatticeClass& L, double xlo, double xhi, double ylo,
                            double yhi, const std::function<void(Vec2)>& fn);

std::size_t count_points_in_disc(const AffineLatticeClass& L, Vec2 center, double radius);

// Geodesic flow with periodic basis reduction. Long flow times are split
// into unit steps so matrix entries stay bounded; the state is a reduced
// representative of a_t x.
class GeodesicFlow {
public:
    explicit GeodesicFlow(const AffineLatticeClass& x0, double max_step = 1.0);
    void advance(double t);
    const AffineLatticeClass& state() const { return x_; }
    double time() const { return t_; }

private:
    void step(double tau);
    AffineLatticeClass x_;
    double max_step_;
    double t_ = 0.0;
    std::uint64_t steps_ = 0;
};

using Observable = std::function<double(const AffineLatticeClass&)>;

Observable cusp_bump(double c);

// Parses presets such as "cusp_bump:c=3" or "const:v=1".
Observable observable_from_preset(const std::string& preset);

struct BirkhoffResult {
    double mean = 0.0;
    double se = 0.0;        // batch-means standard error
    std::size_t samples = 0;
};

double birkhoff_average(const AffineLatticeClass& x0, const Observable& obs, double T,
                        double dt = 0.01);

BirkhoffResult birkhoff_series(const AffineLatticeClass& x0, const Observable& obs, double T,
                               double dt = 0.01, std::size_t batches = 50);

struct CurveU {
    std::function<double(double)> phi;
    std::function<double(double)> dphi;
    double lo = 0.0, hi = 1.0;
};

AffineElement curve_point(const CurveU& c, double s);

// Value and first two derivatives of a scalar function.
struct Jet2 {
    double v = 0.0, d1 = 0.0, d2 = 0.0;
};

// Curve s -> (h(s), v(s)) with components ordered h11, h12, h21, h22, v1, v2.
struct WronskianCurve {
    std::function<std::array<double, 6>(double)> value;
    std::function<std::array<Jet2, 6>(double)> jets;  // optional analytic derivatives
    double lo = 0.0, hi = 1.0;
};

// det of the rows (h11, h12, v1), first and second derivatives.
double wronskian_det(const WronskianCurve& psi, double s);

WronskianCurve rotation_curve(double R);

}  // namespace affinelab
