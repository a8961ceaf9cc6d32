#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <variant>

#include "affinelab/billiards.hpp"
#include "affinelab/errors.hpp"
#include "affinelab/gaps.hpp"
#include "affinelab/homogeneous.hpp"
#include "affinelab/lenses.hpp"
#include "affinelab/parallel.hpp"
#include "affinelab/stats.hpp"

namespace affinelab::cli {

namespace {

using json = nlohmann::ordered_json;
using Cell = std::variant<std::int64_t, double, std::string, bool>;
namespace fs = std::filesystem;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> r) {
        if (r.size() != columns.size()) throw std::logic_error("table " + name + ": row width");
        rows.push_back(std::move(r));
    }
};

struct Plot {
    std::string name;
    std::string title;
    std::vector<double> x, y;
    bool bars = false;
};

struct Output {
    std::vector<Table> tables;
    std::vector<Plot> plots;
    json summary = json::object();
};

struct Globals {
    std::uint64_t seed = 1;
    unsigned workers = 1;
    std::string out = ".";
    std::string format = "csv";
    bool svg = false;
};

std::string fmt_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string csv_cell(const Cell& c) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>)
                return fmt_double(v);
            else if constexpr (std::is_same_v<T, bool>)
                return v ? "true" : "false";
            else if constexpr (std::is_same_v<T, std::string>)
                return v.find_first_of(",\"\n") == std::string::npos ? v : "\"" + v + "\"";
            else
                return std::to_string(v);
        },
        c);
}

json json_cell(const Cell& c) {
    return std::visit(
        [](const auto& v) -> json {
            using T = std::decay_t<decltype(v)>;
            // JSON has no infinities; they are written as strings.
            if constexpr (std::is_same_v<T, double>)
                return std::isfinite(v) ? json(v) : json(fmt_double(v));
            else
                return json(v);
        },
        c);
}

std::string write_table(const fs::path& dir, const Table& t, const std::string& format) {
    const std::string file = t.name + (format == "csv" ? ".csv" : ".jsonl");
    std::ofstream os(dir / file, std::ios::binary);
    if (!os) throw DomainError("cannot write " + (dir / file).string());
    if (format == "csv") {
        for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
        os << '\n';
        for (const auto& r : t.rows) {
            for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << csv_cell(r[i]);
            os << '\n';
        }
    } else {
        for (const auto& r : t.rows) {
            json o = json::object();
            for (std::size_t i = 0; i < r.size(); ++i) o[t.columns[i]] = json_cell(r[i]);
            os << o.dump() << '\n';
        }
    }
    return file;
}

// Minimal line or bar chart.
std::string svg_render(const Plot& p) {
    const double W = 640, H = 400, M = 50;
    double x0 = *std::min_element(p.x.begin(), p.x.end()), x1 = *std::max_element(p.x.begin(), p.x.end());
    double y1 = *std::max_element(p.y.begin(), p.y.end());
    if (x1 <= x0) x1 = x0 + 1;
    if (y1 <= 0) y1 = 1;
    auto X = [&](double x) { return M + (x - x0) / (x1 - x0) * (W - 2 * M); };
    auto Y = [&](double y) { return H - M - y / y1 * (H - 2 * M); };
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    s << "<text x=\"" << M << "\" y=\"" << M / 2 << "\" font-family=\"sans-serif\" font-size=\"14\">"
      << p.title << "</text>\n";
    s << "<line x1=\"" << M << "\" y1=\"" << H - M << "\" x2=\"" << W - M << "\" y2=\"" << H - M
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << M << "\" y1=\"" << M << "\" x2=\"" << M << "\" y2=\"" << H - M
      << "\" stroke=\"black\"/>\n";
    if (p.bars) {
        const double bw = p.x.size() > 1 ? X(p.x[1]) - X(p.x[0]) : 10.0;
        for (std::size_t i = 0; i < p.x.size(); ++i)
            s << "<rect x=\"" << X(p.x[i]) << "\" y=\"" << Y(p.y[i]) << "\" width=\"" << bw
              << "\" height=\"" << Y(0) - Y(p.y[i]) << "\" fill=\"steelblue\"/>\n";
    } else {
        s << "<polyline fill=\"none\" stroke=\"steelblue\" points=\"";
        for (std::size_t i = 0; i < p.x.size(); ++i) s << X(p.x[i]) << ',' << Y(p.y[i]) << ' ';
        s << "\"/>\n";
    }
    s << "<text x=\"" << M << "\" y=\"" << H - M / 3 << "\" font-size=\"11\">" << fmt_double(x0)
      << "</text><text x=\"" << W - M << "\" y=\"" << H - M / 3 << "\" font-size=\"11\">"
      << fmt_double(x1) << "</text>\n</svg>\n";
    return s.str();
}

std::size_t as_count(double v, const char* what) {
    if (!(v >= 1.0) || v != std::floor(v) || v > 1e15)
        throw DomainError(std::string(what) + " must be a positive integer");
    return static_cast<std::size_t>(v);
}

Mat2 parse_lattice(const std::string& s) {
    if (s == "square" || s == "Z2") return Mat2::identity();
    if (s == "hex") {
        const double c = std::pow(4.0 / 3.0, 0.25);
        return Mat2::from_columns({c, 0.0}, {c / 2.0, c * std::sqrt(3.0) / 2.0});
    }
    // Row-major a,b,c,d.
    std::vector<double> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            v.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw DomainError("lattice: bad entry '" + tok + "'");
        }
    }
    if (v.size() != 4) throw DomainError("lattice: expected square, hex or a,b,c,d");
    const Mat2 h{v[0], v[1], v[2], v[3]};
    if (std::abs(h.det() - 1.0) > 1e-9) throw DomainError("lattice: basis must have determinant 1");
    return h;
}

void require_admissible(const Mat2& h, double R) {
    if (!admissible(h, R)) {
        std::ostringstream os;
        os << "R=" << R << " is not admissible: need 0 <= R < s/2 = " << shortest_vector(h).norm() / 2
           << " (s = shortest lattice vector)";
        throw DomainError(os.str());
    }
}

CurveU phi_curve(const std::string& name) {
    if (name == "s^2") return {[](double s) { return s * s; }, [](double s) { return 2 * s; }, 0, 1};
    if (name == "s^3") return {[](double s) { return s * s * s; }, [](double s) { return 3 * s * s; }, 0, 1};
    if (name == "s") return {[](double s) { return s; }, [](double) { return 1.0; }, 0, 1};
    if (name == "0") return {[](double) { return 0.0; }, [](double) { return 0.0; }, 0, 1};
    throw DomainError("phi: expected one of s^2, s^3, s, 0");
}

// Sign constancy and the smallest |value| of a scan.
void sign_summary(json& j, const std::string& key, const std::vector<double>& v) {
    bool pos = true, neg = true;
    double mn = INFINITY;
    for (double x : v) {
        pos = pos && x > 0;
        neg = neg && x < 0;
        mn = std::min(mn, std::abs(x));
    }
    j[key + "_sign_constant"] = pos || neg;
    j[key + "_min_abs"] = mn;
}

// --------------------------------------------------------------------------
// Subcommands

struct BilliardArgs {
    double a = 2.0, b = 1.0, lambda0 = 0.5;
    double grid = 100, lambdas = 4, collisions = 1e5;
    double lambda = 0.75;
    EllipseTable table() const {
        EllipseTable T{a, b, lambda0};
        T.validate();
        return T;
    }
};

Output billiard_scan(const BilliardArgs& A, const Globals& g) {
    const EllipseTable T = A.table();
    const std::size_t N = as_count(A.grid, "grid");
    Output out;
    Table det{"det_grid", {"region", "lambda", "det_Mpsi", "det_Mlwd"}, {}};
    for (const auto& [region, lo, hi] :
         {std::tuple<std::string, double, double>{"E", T.lambda0, T.b}, {"H", T.b, T.a}}) {
        auto rows = parallel_map<std::array<double, 3>>(N, g.workers, [&, lo = lo, hi = hi](std::size_t i) {
            const double l = lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(N);
            return std::array<double, 3>{l, det_Mpsi_billiard(l, T), det_Mlwd(reduction_data(l, T))};
        });
        std::vector<double> d;
        for (const auto& r : rows) {
            det.add({region, r[0], r[1], r[2]});
            d.push_back(r[1]);
        }
        sign_summary(out.summary, "det_Mpsi_" + region, d);
    }
    out.tables.push_back(std::move(det));

    const std::size_t K = static_cast<std::size_t>(A.lambdas);
    const std::size_t n = as_count(A.collisions, "collisions");
    const Stream base(g.seed, 1);
    auto reps = parallel_map<EquidistributionReport>(K, g.workers, [&](std::size_t k) {
        Stream s = base.child(k);
        double l;
        do l = s.uniform(0.02 * T.a, 0.98 * T.a);
        while (std::abs(l - T.b) < 0.01 || std::abs(l - T.lambda0) < 0.01);
        return equidistribution_report(l, T, s, n);
    });
    Table eq{"equidistribution", {"lambda", "ks", "flagged", "singular", "n1", "n2", "max_lambda_drift"}, {}};
    std::size_t pass = 0;
    for (const auto& r : reps) {
        eq.add({r.lambda, r.ks, r.flagged, r.singular, static_cast<std::int64_t>(r.n1),
                static_cast<std::int64_t>(r.n2), r.max_lambda_drift});
        pass += !r.flagged && !r.singular;
    }
    out.summary["equidistribution_pass"] = pass;
    out.summary["equidistribution_total"] = K;
    out.tables.push_back(std::move(eq));
    return out;
}

Output billiard_reduce(const BilliardArgs& A, const Globals&) {
    const EllipseTable T = A.table();
    const ReductionData r = reduction_data(A.lambda, T);
    Output out;
    Table t{"reduction",
            {"lambda", "case", "l", "w", "d", "lp", "wp", "dp", "lpp", "wpp", "dpp", "det_Mlwd", "det_Mpsi"},
            {}};
    t.add({r.lambda, std::string(to_string(r.kind)), r.l, r.w, r.d, r.lp, r.wp, r.dp, r.lpp, r.wpp, r.dpp,
           det_Mlwd(r), det_Mpsi_billiard(A.lambda, T)});
    out.tables.push_back(std::move(t));
    out.summary["case"] = to_string(r.kind);
    out.summary["ratio_l_over_2w"] = r.l / (2.0 * r.w);
    return out;
}

struct LatticeArgs {
    std::string phi = "s^2";
    double s = -1.0, T = 1e4, dt = 0.01, haar_samples = 1e4, batches = 50;
    std::string observable = "cusp_bump:c=3";
    double n = 1e5, area = 0.5;
    std::string curve = "rotation";
    double grid = 100, R = 0.25;
    BilliardArgs billiard;
};

std::vector<double> haar_values(std::size_t n, std::uint64_t seed, std::uint64_t task, unsigned workers,
                                const std::function<double(const AffineLatticeClass&)>& f) {
    constexpr std::size_t kBlock = 4096;
    const std::size_t blocks = (n + kBlock - 1) / kBlock;
    const Stream base(seed, task);
    auto parts = parallel_map<std::vector<double>>(blocks, workers, [&](std::size_t b) {
        Stream s = base.child(b);
        std::vector<double> v(std::min(kBlock, n - b * kBlock));
        for (auto& x : v) x = f(haar_sample(s));
        return v;
    });
    std::vector<double> all;
    all.reserve(n);
    for (auto& p : parts) all.insert(all.end(), p.begin(), p.end());
    return all;
}

Output lattice_flow(const LatticeArgs& A, const Globals& g) {
    const CurveU c = phi_curve(A.phi);
    // Rational s lies on a divergent orbit; the default draws s from the seed.
    double sv = A.s;
    if (sv < 0.0) {
        Stream rng(g.seed, 9);
        sv = rng.uniform(c.lo, c.hi);
    }
    if (!(sv >= c.lo && sv <= c.hi)) throw DomainError("s must lie in [0, 1]");
    if (!(A.T > 0) || !(A.dt > 0) || A.dt > A.T) throw DomainError("need 0 < dt <= T");
    const Observable obs = observable_from_preset(A.observable);
    const auto r = birkhoff_series(AffineLatticeClass(curve_point(c, sv)), obs, A.T, A.dt,
                                   as_count(A.batches, "batches"));
    const auto ref = mean_se(haar_values(as_count(A.haar_samples, "haar-samples"), g.seed, 2, g.workers, obs));
    const double z = (r.mean - ref.mean) / std::hypot(r.se, ref.se);
    Output out;
    Table t{"flow", {"phi", "s", "T", "dt", "mean", "se", "haar_mean", "haar_se", "z"}, {}};
    t.add({A.phi, sv, A.T, A.dt, r.mean, r.se, ref.mean, ref.se, z});
    out.tables.push_back(std::move(t));
    out.summary["orbit_mean"] = r.mean;
    out.summary["haar_mean"] = ref.mean;
    out.summary["z"] = z;
    return out;
}

Output lattice_haar(const LatticeArgs& A, const Globals& g) {
    if (!(A.area > 0)) throw DomainError("area must be positive");
    const double rad = std::sqrt(A.area / std::numbers::pi);
    const auto counts = haar_values(as_count(A.n, "n"), g.seed, 3, g.workers, [rad](const AffineLatticeClass& L) {
        return static_cast<double>(count_points_in_disc(L, {}, rad));
    });
    const auto m = mean_se(counts);
    Output out;
    Table t{"siegel", {"area", "samples", "mean", "se", "z"}, {}};
    t.add({A.area, static_cast<std::int64_t>(counts.size()), m.mean, m.se, (m.mean - A.area) / m.se});
    out.tables.push_back(std::move(t));
    out.summary["mean"] = m.mean;
    out.summary["se"] = m.se;
    return out;
}

Output lattice_curve_check(const LatticeArgs& A, const Globals& g) {
    const std::size_t N = as_count(A.grid, "grid");
    Output out;
    Table t{"curve_check", {"curve", "s", "det"}, {}};
    auto scan = [&](const std::string& name, double lo, double hi, const std::function<double(double)>& f) {
        const auto v = parallel_map<double>(N, g.workers, [&](std::size_t i) {
            return f(lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(N));
        });
        for (std::size_t i = 0; i < N; ++i)
            t.add({name, lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(N), v[i]});
        sign_summary(out.summary, name, v);
    };
    if (A.curve == "rotation") {
        if (!(A.R > 0)) throw DomainError("R must be positive");
        const WronskianCurve w = rotation_curve(A.R);
        scan("rotation", w.lo, w.hi, [&](double s) { return wronskian_det(w, s); });
        out.summary["expected"] = -2.0 * A.R;
    } else if (A.curve == "billiard") {
        const EllipseTable T = A.billiard.table();
        scan("billiard_E", T.lambda0, T.b, [&](double l) { return det_Mpsi_billiard(l, T); });
        scan("billiard_H", T.b, T.a, [&](double l) { return det_Mpsi_billiard(l, T); });
    } else if (A.curve == "phi") {
        // Rows (1, s, phi), their derivatives: det = phi''.
        const CurveU c = phi_curve(A.phi);
        WronskianCurve w;
        w.lo = c.lo;
        w.hi = c.hi;
        w.value = [c](double s) { return std::array<double, 6>{1.0, s, 0.0, 1.0, c.phi(s), 0.0}; };
        scan("phi", c.lo, c.hi, [&](double s) { return wronskian_det(w, s); });
    } else {
        throw DomainError("curve: expected rotation, billiard or phi");
    }
    out.tables.push_back(std::move(t));
    return out;
}

struct EatonArgs {
    std::string lattice = "square";
    double R = 0.25;
    double thetas = 100, horizon = 1e5, plateau = 0.05;
    std::string model = "eaton";
    double configs = 10, steps = 1e6;
    double theta = -1.0;  // negative: drawn from the seed
    double returns = 1e6, samples = 512;
};

Output eaton_scan(const EatonArgs& A, const Globals& g) {
    const Mat2 h = parse_lattice(A.lattice);
    require_admissible(h, A.R);
    if (A.model != "eaton" && A.model != "flat") throw DomainError("model: expected eaton or flat");
    const LensModel model = A.model == "eaton" ? LensModel::Eaton : LensModel::Flat;
    const std::size_t K = as_count(A.thetas, "thetas");
    const std::size_t events = as_count(A.horizon, "horizon");
    const Mat2 hr = gauss_reduce(h).h;
    // Centre of a reduced cell: farther than R from every lens.
    const Vec2 p0 = hr * Vec2{0.5, 0.5};
    const Stream base(g.seed, 4);
    struct Row {
        double theta;
        TrapReport rep;
        std::size_t events;
        bool escaped;
        std::size_t grazing;
    };
    auto rows = parallel_map<Row>(K, g.workers, [&](std::size_t k) {
        Stream s = base.child(k);
        const double th = s.uniform(0.0, kTwoPi);
        const Vec2 v{std::cos(th), std::sin(th)};
        const Trace tr = trace({p0, v}, LensGrid{h, A.R, model, th}, events);
        Row r{th, {}, tr.events.size(), tr.escaped, tr.grazing};
        if (tr.escaped) {
            r.rep.trapped = false;
        } else {
            r.rep = trapped_classify(tr, A.plateau);
            r.rep.transverse.clear();
        }
        return r;
    });
    Output out;
    Table t{"trap", {"theta", "trapped", "band_width", "sup_first_half", "sup_all", "events", "escaped", "grazing"}, {}};
    std::size_t trapped = 0;
    for (const auto& r : rows) {
        t.add({r.theta, r.rep.trapped, r.rep.band_width, r.rep.sup_first_half, r.rep.sup_all,
               static_cast<std::int64_t>(r.events), r.escaped, static_cast<std::int64_t>(r.grazing)});
        trapped += r.rep.trapped;
    }
    out.tables.push_back(std::move(t));
    out.summary["trapped"] = trapped;
    out.summary["total"] = K;
    out.summary["trapped_fraction"] = static_cast<double>(trapped) / static_cast<double>(K);
    return out;
}

// Directions are redrawn until the skew product is defined (not periodic).
SkewIET random_iet(const Mat2& h, double R, Stream& s, double& theta) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        theta = s.uniform(0.0, kTwoPi);
        try {
            return build_skew_iet(h, R, theta);
        } catch (const DomainError&) {
        }
    }
    throw NumericError("no non-periodic direction found");
}

Output eaton_lyapunov(const EatonArgs& A, const Globals& g) {
    const Mat2 h = parse_lattice(A.lattice);
    require_admissible(h, A.R);
    const std::size_t K = as_count(A.configs, "configs");
    const std::size_t steps = as_count(A.steps, "steps");
    const Stream base(g.seed, 5);
    struct Row {
        double theta;
        LyapunovResult r;
    };
    auto rows = parallel_map<Row>(K, g.workers, [&](std::size_t k) {
        Stream s = base.child(k);
        double th = 0.0;
        const SkewIET iet = random_iet(h, A.R, s, th);
        return Row{th, lyapunov_W(iet, steps, s)};
    });
    Output out;
    Table t{"lyapunov", {"theta", "exponent", "teich_time", "zorich_steps", "rv_steps", "unimodular"}, {}};
    std::vector<double> ex;
    bool unimodular = true;
    for (const auto& r : rows) {
        t.add({r.theta, r.r.exponent, r.r.teich_time, static_cast<std::int64_t>(r.r.zorich_steps),
               static_cast<std::int64_t>(r.r.rv_steps), r.r.unimodular});
        ex.push_back(r.r.exponent);
        unimodular = unimodular && r.r.unimodular;
    }
    out.tables.push_back(std::move(t));
    const auto m = mean_se(ex);
    out.summary["mean_exponent"] = m.mean;
    out.summary["se"] = m.se;
    out.summary["all_unimodular"] = unimodular;
    return out;
}

Output eaton_drift(const EatonArgs& A, const Globals& g) {
    const Mat2 h = parse_lattice(A.lattice);
    require_admissible(h, A.R);
    Stream s(g.seed, 6);
    double th = A.theta;
    const SkewIET iet = th < 0 ? random_iet(h, A.R, s, th) : build_skew_iet(h, A.R, th);
    const std::size_t N = as_count(A.returns, "returns");
    const auto run = deviation_run(iet, N, s.uniform(), as_count(A.samples, "samples"));
    Output out;
    Table t{"deviation", {"k", "running_max"}, {}};
    for (std::size_t i = 0; i < run.k.size(); ++i)
        t.add({static_cast<std::int64_t>(run.k[i]), run.running_max[i]});
    out.tables.push_back(std::move(t));
    out.summary["theta"] = th;
    out.summary["alpha"] = iet.alpha;
    out.summary["exponent"] = run.fit.exponent;
    out.summary["degenerate"] = run.fit.degenerate;
    out.summary["toggles"] = run.toggles;
    out.summary["saddle"] = run.saddle;
    // The stored series is needed for the stable direction; keep it bounded.
    if (N <= 2000000) {
        const auto ds = drift_track(iet, N);
        const auto sd = stable_direction_estimate(ds.d);
        out.summary["zeta"] = {sd.zeta.x, sd.zeta.y};
        out.summary["zeta_sup"] = sd.sup;
        out.summary["max_norm"] = sd.max_norm;
        out.summary["zeta_flagged"] = sd.flagged;
    }
    out.plots.push_back({"deviation", "running max |d(k)|", {}, {}, false});
    for (std::size_t i = 0; i < run.k.size(); ++i) {
        out.plots.back().x.push_back(std::log10(static_cast<double>(run.k[i])));
        out.plots.back().y.push_back(std::log10(std::max(1.0, run.running_max[i])));
    }
    return out;
}

struct GapsArgs {
    double r = 1e6, bins = 60, hist_hi = 6.0;
    double s = -1.0, samples = 1;
    double c = 1.0, q = 2.0, N = 2000, mc = 1e5, cap = 1e6;
    double s_count = 50;
};

Output gaps_direct(const GapsArgs& A, const Globals&) {
    const auto rep = plain_gap_distribution(A.r, A.hist_hi, as_count(A.bins, "bins"));
    Output out;
    Table t{"histogram", {"bin_lo", "bin_hi", "count"}, {}};
    Plot p{"histogram", "normalized gaps", {}, {}, true};
    const double w = rep.histogram.bin_width();
    for (std::size_t i = 0; i < rep.histogram.counts.size(); ++i) {
        const double lo = rep.histogram.lo + w * static_cast<double>(i);
        t.add({lo, lo + w, static_cast<std::int64_t>(rep.histogram.counts[i])});
        p.x.push_back(lo);
        p.y.push_back(static_cast<double>(rep.histogram.counts[i]));
    }
    out.tables.push_back(std::move(t));
    out.plots.push_back(std::move(p));
    out.summary["frac_le_half"] = rep.frac_le_half;
    out.summary["target"] = rep.target;
    out.summary["mean"] = rep.mean;
    out.summary["frac_beyond_6"] = rep.frac_beyond_6;
    out.summary["overflow"] = rep.histogram.overflow;
    return out;
}

Output gaps_lattice(const GapsArgs& A, const Globals& g) {
    if (!(A.r >= 1.0)) throw DomainError("r must be at least 1");
    std::vector<double> ss;
    if (A.s >= 0.0) {
        if (!(A.s > 0.0 && A.s <= 1.0)) throw DomainError("s must lie in (0, 1]");
        ss.push_back(A.s);
    } else {
        Stream rng(g.seed, 7);
        for (std::size_t i = 0, n = as_count(A.samples, "samples"); i < n; ++i) ss.push_back(rng.uniform_pos());
    }
    const bool direct = A.r <= kMaxDirectR;
    GapSequence seq;
    if (direct) seq = frac_sqrt_gaps(A.r);
    Output out;
    Table t{"lattice", {"n", "r", "s", "L", "Lprime", "status"}, {}};
    std::vector<double> dev;
    for (std::size_t i = 0; i < ss.size(); ++i) {
        const TriangleFit f = L_prime_fit(A.r, ss[i], A.cap);
        const double L = direct ? L_r(seq, ss[i]) : NAN;
        t.add({static_cast<std::int64_t>(i), A.r, ss[i], L, f.value(), std::string(to_string(f.status))});
        if (direct && f.status == TriangleStatus::Finite) dev.push_back(std::abs(L / f.area - 1));
    }
    out.tables.push_back(std::move(t));
    if (!dev.empty()) {
        std::sort(dev.begin(), dev.end());
        out.summary["median_abs_ratio_dev"] = dev[dev.size() / 2];
    }
    if (direct && ss.size() == 1) out.summary["sandwich"] = sandwich_check(A.r, ss[0]);
    return out;
}

Output gaps_geometric(const GapsArgs& A, const Globals& g) {
    GeometricOptions o;
    o.c = A.c;
    o.q = A.q;
    o.N = as_count(A.N, "N");
    o.mc_samples = as_count(A.mc, "mc");
    o.cap = A.cap;
    o.workers = g.workers;
    Stream rng(g.seed, 8);
    std::vector<double> ss;
    for (std::size_t i = 0, n = as_count(A.s_count, "samples"); i < n; ++i) ss.push_back(rng.uniform_pos());
    std::replace(ss.begin(), ss.end(), 1.0, 0.5);
    const auto rep = geometric_gap_experiment(o, ss, rng);
    Output out;
    Table ks{"ks", {"s", "ks", "zeros", "overflows", "spot_count", "spot_median_dev"}, {}};
    Table series{"series", {"n", "r", "s", "Lprime"}, {}};
    for (const auto& se : rep.series) {
        ks.add({se.s, se.ks, static_cast<std::int64_t>(se.zeros), static_cast<std::int64_t>(se.overflows),
                static_cast<std::int64_t>(se.spot_count), se.spot_median_dev});
        for (std::size_t n = 0; n < se.values.size(); ++n)
            series.add({static_cast<std::int64_t>(n + 1), se.r[n], se.s, se.values[n]});
    }
    Table cdf{"cdf", {"l", "mc_estimate", "stderr"}, {}};
    Plot p{"cdf", "limiting CDF of f", {}, {}, false};
    for (int i = 0; i <= 400; ++i) {
        const double l = 0.05 * i;
        const auto e = limiting_cdf(rep.mc, l);
        cdf.add({l, e.estimate, e.stderr_});
        p.x.push_back(l);
        p.y.push_back(e.estimate);
    }
    out.tables.push_back(std::move(ks));
    out.tables.push_back(std::move(series));
    out.tables.push_back(std::move(cdf));
    out.plots.push_back(std::move(p));
    out.summary["mean_ks"] = rep.mean_ks;
    out.summary["pre_asymptotic"] = rep.pre_asymptotic;
    out.summary["mc_overflow"] = rep.mc.overflow;
    return out;
}

// --------------------------------------------------------------------------

std::string env_name(const std::string& opt) {
    std::string e = "AFFINELAB_";
    for (char c : opt) e += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return e;
}

// Options of each subcommand, recorded for the manifest.
class Recorder {
public:
    template <class T>
    CLI::Option* add(CLI::App* app, const std::string& name, T& var, const std::string& desc) {
        entries_[app].push_back({name, [&var] { return json(var); }});
        return app->add_option("--" + name, var, desc)->capture_default_str()->envname(env_name(name));
    }
    json resolve(CLI::App* app) const {
        json j = json::object();
        const auto it = entries_.find(app);
        if (it != entries_.end())
            for (const auto& [k, f] : it->second) j[k] = f();
        return j;
    }

private:
    std::map<CLI::App*, std::vector<std::pair<std::string, std::function<json()>>>> entries_;
};

int execute(std::vector<std::string> args) {
    CLI::App app{"affinelab: affine lattice dynamics laboratory", "affinelab"};
    app.require_subcommand(1);
    // Global flags may follow the subcommand.
    app.fallthrough();
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.config_formatter(std::make_shared<CLI::ConfigINI>());
    app.set_config("--config", "", "INI file of key=value settings; flags override it");

    Globals g;
    app.add_option("--seed", g.seed, "Master seed")->capture_default_str()->envname("AFFINELAB_SEED");
    app.add_option("--workers", g.workers, "Worker threads")
        ->capture_default_str()
        ->check(CLI::Range(1u, 1024u))
        ->envname("AFFINELAB_WORKERS");
    app.add_option("--out", g.out, "Output directory")->capture_default_str()->envname("AFFINELAB_OUT");
    app.add_option("--format", g.format, "Table format")
        ->capture_default_str()
        ->check(CLI::IsMember({"csv", "jsonl"}))
        ->envname("AFFINELAB_FORMAT");
    app.add_flag("--svg", g.svg, "Also write SVG plots")->envname("AFFINELAB_SVG");

    Recorder rec;
    std::map<CLI::App*, std::function<Output()>> handlers;

    BilliardArgs ba;
    auto* bil = app.add_subcommand("billiard", "Elliptical billiard with a barrier")->require_subcommand(1);
    auto table_opts = [&](CLI::App* s) {
        rec.add(s, "a", ba.a, "Semi-axis parameter a");
        rec.add(s, "b", ba.b, "Semi-axis parameter b");
        rec.add(s, "lambda0", ba.lambda0, "Barrier parameter");
    };
    auto* bscan = bil->add_subcommand("scan", "Determinant grids and two-start equidistribution");
    table_opts(bscan);
    rec.add(bscan, "grid", ba.grid, "Grid points per region");
    rec.add(bscan, "lambdas", ba.lambdas, "Random caustic parameters for equidistribution");
    rec.add(bscan, "collisions", ba.collisions, "Collisions per start");
    handlers[bscan] = [&] { return billiard_scan(ba, g); };
    auto* bred = bil->add_subcommand("reduce", "Reduction lengths and derivatives at one lambda");
    table_opts(bred);
    rec.add(bred, "lambda", ba.lambda, "Caustic parameter");
    handlers[bred] = [&] { return billiard_reduce(ba, g); };

    LatticeArgs la;
    auto* lat = app.add_subcommand("lattice", "Affine lattices and the geodesic flow")->require_subcommand(1);
    auto* lflow = lat->add_subcommand("flow", "Orbit average along a curve point vs Haar mean");
    rec.add(lflow, "phi", la.phi, "Curve function: s^2, s^3, s or 0");
    rec.add(lflow, "s", la.s, "Curve parameter; negative draws one from the seed");
    rec.add(lflow, "T", la.T, "Flow time");
    rec.add(lflow, "dt", la.dt, "Sampling step");
    rec.add(lflow, "observable", la.observable, "Observable preset");
    rec.add(lflow, "haar-samples", la.haar_samples, "Haar samples for the reference mean");
    rec.add(lflow, "batches", la.batches, "Batches for the standard error");
    handlers[lflow] = [&] { return lattice_flow(la, g); };
    auto* lhaar = lat->add_subcommand("haar", "Siegel mean of Haar samples in a disc");
    rec.add(lhaar, "n", la.n, "Samples");
    rec.add(lhaar, "area", la.area, "Disc area");
    handlers[lhaar] = [&] { return lattice_haar(la, g); };
    auto* lcurve = lat->add_subcommand("curve-check", "Wronskian determinant scans");
    rec.add(lcurve, "curve", la.curve, "rotation, billiard or phi");
    rec.add(lcurve, "grid", la.grid, "Grid points");
    rec.add(lcurve, "R", la.R, "Radius for the rotation curve");
    rec.add(lcurve, "phi", la.phi, "Curve function for the phi curve");
    rec.add(lcurve, "a", la.billiard.a, "Billiard a");
    rec.add(lcurve, "b", la.billiard.b, "Billiard b");
    rec.add(lcurve, "lambda0", la.billiard.lambda0, "Billiard barrier parameter");
    handlers[lcurve] = [&] { return lattice_curve_check(la, g); };

    EatonArgs ea;
    auto* eat = app.add_subcommand("eaton", "Periodic lens arrays")->require_subcommand(1);
    auto lens_opts = [&](CLI::App* s) {
        rec.add(s, "lattice", ea.lattice, "square, hex or a,b,c,d (row-major, det 1)");
        rec.add(s, "R", ea.R, "Lens radius");
    };
    auto* escan = eat->add_subcommand("scan", "Trapping scan over random directions");
    lens_opts(escan);
    rec.add(escan, "thetas", ea.thetas, "Number of directions");
    rec.add(escan, "horizon", ea.horizon, "Lens events per ray");
    rec.add(escan, "model", ea.model, "eaton or flat");
    rec.add(escan, "plateau", ea.plateau, "Plateau tolerance of the trap test");
    handlers[escan] = [&] { return eaton_scan(ea, g); };
    auto* elyap = eat->add_subcommand("lyapunov", "Twisted Rauzy-Veech exponent");
    lens_opts(elyap);
    rec.add(elyap, "configs", ea.configs, "Random directions");
    rec.add(elyap, "steps", ea.steps, "Zorich steps");
    handlers[elyap] = [&] { return eaton_lyapunov(ea, g); };
    auto* edrift = eat->add_subcommand("drift", "Homology drift of the double-slit torus");
    lens_opts(edrift);
    rec.add(edrift, "theta", ea.theta, "Direction; negative draws one from the seed");
    rec.add(edrift, "returns", ea.returns, "Returns to the transversal");
    rec.add(edrift, "samples", ea.samples, "Checkpoints of the running max");
    handlers[edrift] = [&] { return eaton_drift(ea, g); };

    GapsArgs ga;
    auto* gap = app.add_subcommand("gaps", "Gaps of fractional parts of square roots")->require_subcommand(1);
    auto* gdir = gap->add_subcommand("direct", "Normalized gap histogram");
    rec.add(gdir, "r", ga.r, "Upper limit of n");
    rec.add(gdir, "bins", ga.bins, "Histogram bins");
    rec.add(gdir, "hist-hi", ga.hist_hi, "Upper edge of the histogram");
    handlers[gdir] = [&] { return gaps_direct(ga, g); };
    auto* glat = gap->add_subcommand("lattice", "Gap containing s and its triangle approximation");
    rec.add(glat, "r", ga.r, "Upper limit of n");
    rec.add(glat, "s", ga.s, "Point in (0, 1]; negative draws --samples values");
    rec.add(glat, "samples", ga.samples, "Random s values when --s is negative");
    rec.add(glat, "cap", ga.cap, "Overflow cap of the triangle search");
    handlers[glat] = [&] { return gaps_lattice(ga, g); };
    auto* ggeo = gap->add_subcommand("geometric", "Gap law along r = c q^n");
    rec.add(ggeo, "c", ga.c, "Scale c >= 1");
    rec.add(ggeo, "q", ga.q, "Ratio q > 1");
    rec.add(ggeo, "N", ga.N, "Terms per s");
    rec.add(ggeo, "samples", ga.s_count, "Random s values");
    rec.add(ggeo, "mc", ga.mc, "Haar samples for the limiting CDF");
    rec.add(ggeo, "cap", ga.cap, "Overflow cap of the triangle search");
    handlers[ggeo] = [&] { return gaps_geometric(ga, g); };

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    CLI::App* leaf = nullptr;
    std::string path;
    for (CLI::App* cur = &app;;) {
        const auto subs = cur->get_subcommands();
        if (subs.empty()) break;
        cur = subs.front();
        path += (path.empty() ? "" : " ") + cur->get_name();
        leaf = cur;
    }
    const Output out = handlers.at(leaf)();

    const fs::path dir(g.out);
    fs::create_directories(dir);
    json manifest;
    manifest["program"] = "affinelab";
    manifest["subcommand"] = path;
    manifest["seed"] = g.seed;
    manifest["workers"] = g.workers;
    manifest["format"] = g.format;
    manifest["params"] = rec.resolve(leaf);
    json files = json::array();
    for (const auto& t : out.tables) files.push_back(write_table(dir, t, g.format));
    if (g.svg)
        for (const auto& p : out.plots)
            if (!p.x.empty()) {
                std::ofstream(dir / (p.name + ".svg"), std::ios::binary) << svg_render(p);
                files.push_back(p.name + ".svg");
            }
    manifest["outputs"] = files;
    manifest["summary"] = out.summary;
    std::ofstream(dir / "manifest.json", std::ios::binary) << manifest.dump(2) << '\n';
    for (const auto& [k, v] : out.summary.items()) std::cout << k << ": " << v.dump() << '\n';
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    try {
        return execute(args);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kNumeric;
    }
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

}  // namespace affinelab::cli
