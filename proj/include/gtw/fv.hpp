#pragma once
/**
 * Explicit reference schemes for U_t + A(U) U_x = B(U) on a uniform cell grid,
 * written directly on the quasilinear form. They only see A and B, so they
 * share no code with the characteristic and travelling-wave constructions.
 *
 *   lax_friedrichs:  U_i^{n+1} = (U_{i-1} + U_{i+1})/2 - dt/(2h) A(U_i)(U_{i+1} - U_{i-1})
 *                    + dt B(U_i + dt/2 B(U_i))
 *   maccormack:      half source step, forward predictor / backward corrector
 *                    with A(U*) in the corrector, half source step (RK2 each)
 *
 * Non-conservative stepping is only meaningful for smooth solutions.
 */

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "gtw/field.hpp"
#include "gtw/system.hpp"

namespace gtw::fv {

enum class Scheme { lax_friedrichs, maccormack };
enum class Boundary { exact_dirichlet, extrapolation };

inline Scheme parse_scheme(const std::string& s) {
    if (s == "a" || s == "lax_friedrichs") return Scheme::lax_friedrichs;
    if (s == "b" || s == "maccormack") return Scheme::maccormack;
    throw ConfigError("unknown scheme '" + s + "' (expected a | lax_friedrichs | b | maccormack)");
}

inline std::string scheme_name(Scheme s) { return s == Scheme::lax_friedrichs ? "lax_friedrichs" : "maccormack"; }

struct GridSpec {
    double x_min = 0.0, x_max = 1.0;
    std::size_t cells = 64;
    double cfl = 0.45;
    double t_end = 0.0;
    double fixed_dt = 0.0;  ///< > 0: use this step and fail if it breaks the CFL bound
    Boundary boundary = Boundary::extrapolation;
    FieldFunction exact;    ///< boundary data for exact_dirichlet

    double h() const { return (x_max - x_min) / static_cast<double>(cells); }
    double center(std::size_t i) const { return x_min + (static_cast<double>(i) + 0.5) * h(); }

    std::vector<double> centers() const {
        std::vector<double> c(cells);
        for (std::size_t i = 0; i < cells; ++i) c[i] = center(i);
        return c;
    }

    void validate() const {
        if (!(cfl > 0 && cfl < 1)) throw ConfigError("CFL number must lie in (0, 1)");
        if (cells < 16) throw ConfigError("at least 16 cells are required");
        if (!(x_max > x_min)) throw ConfigError("grid needs x_max > x_min");
        if (!(t_end >= 0)) throw ConfigError("end time must be nonnegative");
        if (boundary == Boundary::exact_dirichlet && !exact)
            throw ConfigError("exact Dirichlet boundaries need an exact solution");
    }
};

struct ReferenceRun {
    Scheme scheme = Scheme::maccormack;
    GridSpec spec;
    std::vector<double> x;              ///< cell centers
    std::vector<FieldVector> state;     ///< final cell values
    std::vector<double> max_speed;      ///< per step
    std::vector<double> dt;             ///< per step
    double t = 0.0;
    double l2_error = -1.0, max_error = -1.0;  ///< vs spec.exact at t_end when available

    std::size_t steps() const { return dt.size(); }

    GridField final_field(const std::vector<std::string>& names) const {
        GridField g(x, {t}, names);
        for (std::size_t i = 0; i < x.size(); ++i) g.set(i, 0, state[i]);
        return g;
    }
};

namespace detail {

using Cells = std::vector<FieldVector>;

inline double max_speed(const HyperbolicSystem& sys, const Cells& u) {
    double m = 0.0;
    for (const FieldVector& c : u) m = std::max(m, characteristic_speeds(sys, c).cwiseAbs().maxCoeff());
    return m;
}

inline void check_admissible(const HyperbolicSystem& sys, const Cells& u, double t) {
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!sys.is_admissible(u[i])) {
            std::ostringstream os;
            os << "cell " << i << " lost admissibility (" << sys.admissible_description << ") at t = " << t;
            throw InadmissibleState(os.str());
        }
    }
}

/// RK2 (midpoint) source sub-step of length dt.
inline FieldVector source_step(const HyperbolicSystem& sys, const FieldVector& u, double dt) {
    if (!sys.source) return u;
    const FieldVector mid = u + 0.5 * dt * sys.source(u);
    return u + dt * sys.source(mid);
}

/// Interior cells with one ghost on each side.
inline Cells with_ghosts(const Cells& u, const FieldVector& left, const FieldVector& right) {
    Cells g;
    g.reserve(u.size() + 2);
    g.push_back(left);
    g.insert(g.end(), u.begin(), u.end());
    g.push_back(right);
    return g;
}

}  // namespace detail

/** Marches U0 (cell-center values) to spec.t_end. */
inline ReferenceRun advance(const HyperbolicSystem& sys, const std::vector<FieldVector>& u0, const GridSpec& spec,
                            Scheme scheme) {
    spec.validate();
    if (u0.size() != spec.cells) throw ConfigError("initial data does not match the cell count");
    ReferenceRun run;
    run.scheme = scheme;
    run.spec = spec;
    run.x = spec.centers();
    detail::Cells u = u0;
    detail::check_admissible(sys, u, 0.0);
    const double h = spec.h();
    const std::size_t n = spec.cells;
    double t = 0.0;

    auto ghosts = [&](const detail::Cells& cur, double time, double pre_source) {
        if (spec.boundary == Boundary::exact_dirichlet) {
            FieldVector l = spec.exact(spec.x_min - 0.5 * h, time), r = spec.exact(spec.x_max + 0.5 * h, time);
            if (pre_source > 0) {
                l = detail::source_step(sys, l, pre_source);
                r = detail::source_step(sys, r, pre_source);
            }
            return detail::with_ghosts(cur, l, r);
        }
        return detail::with_ghosts(cur, 2 * cur[0] - cur[1], 2 * cur[n - 1] - cur[n - 2]);
    };

    while (t < spec.t_end) {
        const double smax = detail::max_speed(sys, u);
        if (!std::isfinite(smax)) throw CFLViolation("non-finite characteristic speed");
        double dt;
        if (spec.fixed_dt > 0) {
            dt = spec.fixed_dt;
            if (dt * smax > h) {
                std::ostringstream os;
                os << "fixed time step " << dt << " violates the CFL bound (max |lambda| = " << smax << ", h = " << h
                   << ")";
                throw CFLViolation(os.str());
            }
        } else {
            dt = smax > 0 ? spec.cfl * h / smax : spec.t_end - t;
        }
        if (t + dt > spec.t_end || spec.t_end - (t + dt) < 1e-14 * std::max(1.0, spec.t_end)) dt = spec.t_end - t;
        const double lam = dt / h;

        detail::Cells next(n);
        if (scheme == Scheme::lax_friedrichs) {
            const detail::Cells g = ghosts(u, t, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const FieldVector& um = g[i];
                const FieldVector& uc = g[i + 1];
                const FieldVector& up = g[i + 2];
                FieldVector v = 0.5 * (um + up) - 0.5 * lam * sys.matrix(uc) * (up - um);
                if (sys.source) v += dt * sys.source(uc + 0.5 * dt * sys.source(uc));
                next[i] = v;
            }
        } else {
            detail::Cells half(n);
            for (std::size_t i = 0; i < n; ++i) half[i] = detail::source_step(sys, u[i], 0.5 * dt);
            const detail::Cells g = ghosts(half, t, 0.5 * dt);
            detail::Cells pred(n + 1);  // predictor on ghost 0 .. cell n-1
            for (std::size_t i = 0; i <= n; ++i) pred[i] = g[i] - lam * sys.matrix(g[i]) * (g[i + 1] - g[i]);
            for (std::size_t i = 0; i < n; ++i) {
                const FieldVector& ps = pred[i + 1];
                const FieldVector corr = ps - lam * sys.matrix(ps) * (ps - pred[i]);
                next[i] = detail::source_step(sys, 0.5 * (g[i + 1] + corr), 0.5 * dt);
            }
        }
        u.swap(next);
        t += dt;
        run.max_speed.push_back(smax);
        run.dt.push_back(dt);
        detail::check_admissible(sys, u, t);
    }
    run.t = t;
    run.state = u;
    if (spec.exact) {
        double sq = 0.0, mx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = (u[i] - spec.exact(run.x[i], t)).norm();
            sq += e * e;
            mx = std::max(mx, e);
        }
        run.l2_error = std::sqrt(h * sq);
        run.max_error = mx;
    }
    return run;
}

/** Cell-center samples of a field at time t. */
inline std::vector<FieldVector> sample_cells(const GridSpec& spec, const FieldFunction& f, double t) {
    std::vector<FieldVector> u(spec.cells);
    for (std::size_t i = 0; i < spec.cells; ++i) u[i] = f(spec.center(i), t);
    return u;
}

struct ConvergenceRow {
    std::size_t cells = 0;
    double h = 0.0, l2 = 0.0, linf = 0.0;
    std::size_t steps = 0;
};

struct ConvergenceTable {
    Scheme scheme = Scheme::maccormack;
    std::vector<ConvergenceRow> rows;
    double order = std::numeric_limits<double>::quiet_NaN();
    bool order_skipped = false;  ///< errors at rounding level: no meaningful fit

    json to_json() const {
        json j;
        j["scheme"] = scheme_name(scheme);
        j["order"] = std::isfinite(order) ? json(order) : json(nullptr);
        j["order_skipped"] = order_skipped;
        for (const auto& r : rows)
            j["rows"].push_back({{"cells", r.cells}, {"h", r.h}, {"l2", r.l2}, {"linf", r.linf}, {"steps", r.steps}});
        return j;
    }
};

/** Least-squares slope of log(e) against log(h). */
inline double fitted_order(const std::vector<double>& h, const std::vector<double>& e) {
    const std::size_t n = h.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lx = std::log(h[i]), ly = std::log(e[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double nn = static_cast<double>(n);
    return (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
}

/**
 * Runs the scheme from exact(x, 0) on each cell count and fits the L2 error
 * order. `base` supplies the domain, CFL, end time and boundary mode.
 */
inline ConvergenceTable convergence_study(const HyperbolicSystem& sys, const FieldFunction& exact, GridSpec base,
                                          const std::vector<std::size_t>& ladder, Scheme scheme) {
    if (ladder.size() < 2) throw ConfigError("a convergence ladder needs at least two resolutions");
    ConvergenceTable tab;
    tab.scheme = scheme;
    base.exact = exact;
    std::vector<double> hs, es;
    bool tiny = true;
    for (std::size_t cells : ladder) {
        GridSpec spec = base;
        spec.cells = cells;
        const ReferenceRun run = advance(sys, sample_cells(spec, exact, 0.0), spec, scheme);
        tab.rows.push_back({cells, spec.h(), run.l2_error, run.max_error, run.steps()});
        hs.push_back(spec.h());
        es.push_back(run.l2_error);
        if (run.l2_error > 1e-13) tiny = false;
    }
    if (tiny) {
        tab.order_skipped = true;
    } else {
        tab.order = fitted_order(hs, es);
    }
    return tab;
}

}  // namespace gtw::fv
