#pragma once
/**
 * Generalized travelling waves.
 *
 * Solutions of U_t + A(U) U_x = B(U) that also satisfy U_t + s U_x = F(U).
 * Expanding U_x = pi_j d^j on the right eigenvectors gives
 *
 *     pi_i = l^i . (B - F) / (lambda^i - s),
 *     U_x  = pi_j d^j,      U_t = F - s pi_j d^j,
 *
 * and the two relations are compatible when, for every s-index,
 *
 *     F_i dpi_s/du_i = l^s_k (dF_k/du_i d^j_i - dd^j_k/du_i F_i) pi_j .
 *
 * Both right-hand sides depend on U only, so the solution is assembled from
 * autonomous ODEs: a profile in x at t = 0, then one line in t per x node.
 */

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

#include "gtw/field.hpp"
#include "gtw/gradient.hpp"
#include "gtw/ode.hpp"
#include "gtw/system.hpp"

namespace gtw {

/** Speed s and constraint source F(U); an empty F is the classical travelling wave. */
struct TravellingFrame {
    double s = 0.0;
    std::function<FieldVector(const FieldVector&)> F;
    std::function<Matrix(const FieldVector&)> F_jacobian;

    static TravellingFrame classical(double speed) { return {speed, {}, {}}; }

    bool exact_tw() const { return !F; }

    FieldVector source(const FieldVector& u) const { return F ? F(u) : FieldVector::Zero(u.size()); }
};

struct GtwOptions {
    double sonic_tol = -1.0;          ///< negative: 1e-8 (1 + |s|)
    double classification_tol = -1.0;  ///< negative: 1e-6 (1 + |s|)
    double compat_tol = 1e-5;
    bool check_compatibility = true;
    GradientOperator grad = GradientOperator::central();
    ode::Options ode;

    double sonic(double s) const { return sonic_tol >= 0 ? sonic_tol : 1e-8 * (1 + std::abs(s)); }
    double classify(double s) const {
        return classification_tol >= 0 ? classification_tol : 1e-6 * (1 + std::abs(s));
    }
};

struct PiCoefficients {
    FieldVector pi;
    FieldVector gap;         ///< lambda^i - s
    FieldVector numerator;   ///< l^i . (B - F)
    FieldVector ux;          ///< sum_j pi_j d^j
    std::vector<bool> removable;
    double identity_defect = 0.0;  ///< max_i |(lambda^i - s) pi_i - l^i.(B - F)| over regular families
};

namespace detail {

inline PiCoefficients raw_pi(const HyperbolicSystem& sys, const TravellingFrame& frame, const FieldVector& u,
                             const SpectralDecomposition& sd) {
    const FieldVector r = source_or_zero(sys, u) - frame.source(u);
    PiCoefficients pc;
    const auto n = static_cast<Eigen::Index>(sys.n);
    pc.pi.resize(n);
    pc.gap = sd.lambdas.array() - frame.s;
    pc.numerator = sd.left * r;
    pc.removable.assign(sys.n, false);
    for (Eigen::Index i = 0; i < n; ++i) pc.pi[i] = pc.numerator[i] / pc.gap[i];
    return pc;
}

}  // namespace detail

/**
 * Coefficients pi_i of U_x on the right eigenvectors. Throws
 * SubShockSingularity when lambda^i = s while l^i.(B - F) does not vanish; when
 * both vanish the limit is taken by one-sided extrapolation and flagged.
 */
inline PiCoefficients pi_coefficients(const HyperbolicSystem& sys, const TravellingFrame& frame, const FieldVector& u,
                                      const GtwOptions& opt = {}) {
    const SpectralDecomposition sd = decompose(sys, u);
    PiCoefficients pc = detail::raw_pi(sys, frame, u, sd);
    const double tol = opt.sonic(frame.s);
    for (std::size_t i = 0; i < sys.n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        if (std::abs(pc.gap[ii]) > tol) continue;
        if (std::abs(pc.numerator[ii]) > tol) {
            std::ostringstream os;
            os << "sub-shock: lambda^" << i << " = s = " << frame.s << " at U = (" << u.transpose()
               << ") while l^" << i << ".(B - F) = " << pc.numerator[ii];
            throw SubShockSingularity(i, u, os.str());
        }
        // Removable: march off the sonic locus along grad(lambda^i) and extrapolate.
        auto lam_i = [&](const FieldVector& p) { return decompose(sys, p).lambda(i); };
        FieldVector dir = grad_scalar(lam_i, u, opt.grad, [&sys](const FieldVector& p) { return sys.is_admissible(p); });
        if (dir.norm() == 0.0) dir = FieldVector::Unit(u.size(), 0);
        dir.normalize();
        const double delta = 1e-5 * std::max(1.0, u.norm());
        double value = 0.0;
        bool done = false;
        for (double sign : {1.0, -1.0}) {
            const FieldVector p1 = u + sign * delta * dir, p2 = u + sign * 2 * delta * dir;
            if (!sys.is_admissible(p1) || !sys.is_admissible(p2)) continue;
            const auto pi1 = detail::raw_pi(sys, frame, p1, decompose(sys, p1));
            const auto pi2 = detail::raw_pi(sys, frame, p2, decompose(sys, p2));
            value = 2 * pi1.pi[ii] - pi2.pi[ii];
            done = true;
            break;
        }
        if (!done) throw InadmissibleState("no admissible one-sided stencil at removable sonic point");
        pc.pi[ii] = value;
        pc.removable[i] = true;
    }
    pc.ux = sd.right * pc.pi;
    for (std::size_t i = 0; i < sys.n; ++i) {
        if (pc.removable[i]) continue;
        const auto ii = static_cast<Eigen::Index>(i);
        pc.identity_defect = std::max(pc.identity_defect, std::abs(pc.gap[ii] * pc.pi[ii] - pc.numerator[ii]));
    }
    return pc;
}

/**
 * Residual of the compatibility condition between U_x = pi_j d^j and
 * U_t = F - s pi_j d^j, one entry per family s (repeated i, j, k summed).
 */
inline FieldVector gtw_compat_residual(const HyperbolicSystem& sys, const TravellingFrame& frame, const FieldVector& u,
                                       const GtwOptions& opt = {}) {
    const auto n = static_cast<Eigen::Index>(sys.n);
    const AdmissibleSet adm = [&sys](const FieldVector& p) { return sys.is_admissible(p); };
    const PiCoefficients pc = pi_coefficients(sys, frame, u, opt);
    const FieldVector f = frame.source(u);
    if (frame.exact_tw()) return FieldVector::Zero(n);

    const GradientOperator numeric{GradientOperator::Mode::central_difference, opt.grad.relative_step, opt.grad.order};
    const Matrix dpi = grad_vector([&](const FieldVector& p) { return pi_coefficients(sys, frame, p, opt).pi; }, u,
                                   numeric, adm);
    const Matrix df = grad_vector(frame.F, u, opt.grad, adm, frame.F_jacobian);
    const SpectralJet jet = spectral_jet(sys, u, numeric);

    FieldVector res(n);
    for (Eigen::Index s = 0; s < n; ++s) {
        const FieldVector ls = jet.at.l(static_cast<std::size_t>(s));
        double rhs = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto jj = static_cast<std::size_t>(j);
            const FieldVector term = df * jet.at.d(jj) - jet.dd_along(jj, f);
            rhs += ls.dot(term) * pc.pi[j];
        }
        res[s] = f.dot(dpi.row(s).transpose()) - rhs;
    }
    return res;
}

struct GtwWindow {
    double x_min = -1.0, x_max = 1.0, t_max = 1.0;
    std::size_t nx = 101, nt = 51;
};

/** Sampled generalized travelling wave with interpolation between grid nodes. */
struct GtwSolution {
    double s = 0.0;
    bool exact_tw = false;
    FieldVector anchor;
    double x0 = 0.0;
    GridField grid;
    double path_defect = 0.0;             ///< x-then-t vs t-then-x at the far corners
    double max_compat_residual = 0.0;     ///< over all checked grid states
    double max_identity_defect = 0.0;

    FieldVector operator()(double x, double t) const { return grid(x, t); }
};

enum class PathOrder { x_then_t, t_then_x };

namespace detail {

struct GtwFields {
    const HyperbolicSystem& sys;
    const TravellingFrame& frame;
    const GtwOptions& opt;
    mutable double last_x = 0.0, last_t = 0.0;

    void dx(double x, const ode::Vector& u, ode::Vector& du) const {
        last_x = x;
        du = pi_coefficients(sys, frame, u, opt).ux;
    }
    void dt(double t, const ode::Vector& u, ode::Vector& du) const {
        last_t = t;
        du = frame.source(u) - frame.s * pi_coefficients(sys, frame, u, opt).ux;
    }
};

}  // namespace detail

/** Value at (x, t) reached from the anchor along one of the two coordinate paths. */
inline FieldVector integrate_gtw_point(const HyperbolicSystem& sys, const TravellingFrame& frame,
                                       const FieldVector& anchor, double x0, double x, double t, PathOrder order,
                                       const GtwOptions& opt = {}) {
    detail::GtwFields fields{sys, frame, opt};
    const ode::Rhs fx = [&](double s, const ode::Vector& u, ode::Vector& du) { fields.dx(s, u, du); };
    const ode::Rhs ft = [&](double s, const ode::Vector& u, ode::Vector& du) { fields.dt(s, u, du); };
    if (order == PathOrder::x_then_t) {
        const FieldVector mid = ode::integrate(fx, x0, anchor, x, opt.ode);
        return ode::integrate(ft, 0.0, mid, t, opt.ode);
    }
    const FieldVector mid = ode::integrate(ft, 0.0, anchor, t, opt.ode);
    return ode::integrate(fx, x0, mid, x, opt.ode);
}

/**
 * Builds U(x, t) on the window from U(x0, 0) = anchor: the x-profile at t = 0
 * first, then each t-line. Compatibility is checked at every grid state
 * unless disabled; sonic singularities abort with their location.
 */
inline GtwSolution integrate_gtw(const HyperbolicSystem& sys, const TravellingFrame& frame, const FieldVector& anchor,
                                 double x0, const GtwWindow& win, const GtwOptions& opt = {}) {
    if (!(win.x_max > win.x_min) || !(win.t_max > 0) || win.nx < 2 || win.nt < 2)
        throw ConfigError("integration window must have x_max > x_min, t_max > 0 and at least 2 nodes per axis");
    sys.require_admissible(anchor);

    GtwSolution sol;
    sol.s = frame.s;
    sol.exact_tw = frame.exact_tw();
    sol.anchor = anchor;
    sol.x0 = x0;
    const auto xs = linspace(win.x_min, win.x_max, win.nx);
    const auto ts = linspace(0.0, win.t_max, win.nt);
    sol.grid = GridField(xs, ts, sys.names);

    detail::GtwFields fields{sys, frame, opt};
    const ode::Rhs fx = [&](double s, const ode::Vector& u, ode::Vector& du) { fields.dx(s, u, du); };
    const ode::Rhs ft = [&](double s, const ode::Vector& u, ode::Vector& du) { fields.dt(s, u, du); };

    auto check_state = [&](const FieldVector& u, double x, double t) {
        const PiCoefficients pc = pi_coefficients(sys, frame, u, opt);
        sol.max_identity_defect = std::max(sol.max_identity_defect, pc.identity_defect);
        if (!opt.check_compatibility || frame.exact_tw()) return;
        const double r = gtw_compat_residual(sys, frame, u, opt).cwiseAbs().maxCoeff();
        sol.max_compat_residual = std::max(sol.max_compat_residual, r);
        if (r > opt.compat_tol) {
            std::ostringstream os;
            os << "compatibility residual " << r << " exceeds " << opt.compat_tol << " at (x, t) = (" << x << ", "
               << t << "), U = (" << u.transpose() << ")";
            throw CompatibilityViolation(r, os.str());
        }
    };

    auto locate = [&](SubShockSingularity& e, double x, double t) {
        e.x = x;
        e.t = t;
        e.located = true;
    };

    std::vector<FieldVector> profile(xs.size());
    try {
        check_state(anchor, x0, 0.0);
        ode::TwoSidedSolution xprof(fx, x0, anchor, std::min(x0, win.x_min), std::max(x0, win.x_max), opt.ode);
        for (std::size_t i = 0; i < xs.size(); ++i) profile[i] = xprof(xs[i]);
    } catch (SubShockSingularity& e) {
        locate(e, fields.last_x, 0.0);
        throw;
    }

    for (std::size_t i = 0; i < xs.size(); ++i) {
        std::vector<FieldVector> line;
        try {
            line = ode::integrate_at(ft, 0.0, profile[i], ts, opt.ode);
        } catch (SubShockSingularity& e) {
            locate(e, xs[i], fields.last_t);
            throw;
        }
        for (std::size_t j = 0; j < ts.size(); ++j) {
            sol.grid.set(i, j, line[j]);
            check_state(line[j], xs[i], ts[j]);
        }
    }

    for (double xc : {win.x_min, win.x_max}) {
        const std::size_t i = xc == win.x_min ? 0 : xs.size() - 1;
        const FieldVector alt = integrate_gtw_point(sys, frame, anchor, x0, xc, win.t_max, PathOrder::t_then_x, opt);
        sol.path_defect = std::max(sol.path_defect, (alt - sol.grid.at(i, ts.size() - 1)).cwiseAbs().maxCoeff());
    }

    sol.grid.metadata["s"] = frame.s;
    sol.grid.metadata["exact_tw"] = frame.exact_tw();
    sol.grid.metadata["path_defect"] = sol.path_defect;
    sol.grid.metadata["max_compat_residual"] = sol.max_compat_residual;
    return sol;
}

struct SonicHit {
    std::size_t family = 0;
    FieldVector state;
    double projection = 0.0;  ///< l^i . (B - F) at the locus point
    bool sub_shock = false;   ///< false: removable
};

/**
 * Scans a state-space box for the loci lambda^i(U) = s (sign changes along
 * grid edges, refined by bisection) and classifies each point as a sub-shock
 * or a removable singularity.
 */
inline std::vector<SonicHit> detect_sonic_locus(const HyperbolicSystem& sys, const TravellingFrame& frame,
                                                const FieldVector& lo, const FieldVector& hi,
                                                std::size_t samples_per_axis = 41, const GtwOptions& opt = {}) {
    const std::size_t n = sys.n;
    std::vector<SonicHit> hits;
    if (samples_per_axis < 2) return hits;
    std::size_t total = 1;
    for (std::size_t d = 0; d < n; ++d) total *= samples_per_axis;

    auto node = [&](std::size_t flat) {
        FieldVector p(static_cast<Eigen::Index>(n));
        for (std::size_t d = 0; d < n; ++d) {
            const std::size_t idx = flat % samples_per_axis;
            flat /= samples_per_axis;
            const auto dd = static_cast<Eigen::Index>(d);
            p[dd] = lo[dd] + (hi[dd] - lo[dd]) * static_cast<double>(idx) / static_cast<double>(samples_per_axis - 1);
        }
        return p;
    };
    auto gaps = [&](const FieldVector& p, FieldVector& out) {
        try {
            out = decompose(sys, p).lambdas.array() - frame.s;
            return true;
        } catch (const Error&) {
            return false;
        }
    };
    auto classify = [&](std::size_t fam, const FieldVector& p) {
        SonicHit h;
        h.family = fam;
        h.state = p;
        const SpectralDecomposition sd = decompose(sys, p);
        h.projection = sd.l(fam).dot(source_or_zero(sys, p) - frame.source(p));
        h.sub_shock = std::abs(h.projection) > opt.classify(frame.s);
        return h;
    };

    std::vector<FieldVector> g(total);
    std::vector<bool> ok(total);
    for (std::size_t f = 0; f < total; ++f) ok[f] = gaps(node(f), g[f]);

    std::size_t stride = 1;
    for (std::size_t d = 0; d < n; ++d, stride *= samples_per_axis) {
        for (std::size_t f = 0; f < total; ++f) {
            const std::size_t idx = (f / stride) % samples_per_axis;
            if (idx + 1 >= samples_per_axis) continue;
            const std::size_t nb = f + stride;
            if (!ok[f] || !ok[nb]) continue;
            for (std::size_t fam = 0; fam < n; ++fam) {
                const auto ff = static_cast<Eigen::Index>(fam);
                const double ga = g[f][ff], gb = g[nb][ff];
                if (ga == 0.0) {
                    hits.push_back(classify(fam, node(f)));
                    continue;
                }
                if (ga * gb >= 0) continue;
                FieldVector a = node(f), b = node(nb);
                double fa = ga;
                for (int it = 0; it < 80; ++it) {
                    const FieldVector m = 0.5 * (a + b);
                    FieldVector gm;
                    if (!gaps(m, gm)) break;
                    if (gm[ff] == 0.0) {
                        a = b = m;
                        break;
                    }
                    if ((gm[ff] < 0) == (fa < 0)) {
                        a = m;
                        fa = gm[ff];
                    } else {
                        b = m;
                    }
                }
                hits.push_back(classify(fam, 0.5 * (a + b)));
            }
        }
    }
    return hits;
}

}  // namespace gtw
