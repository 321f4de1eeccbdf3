#pragma once
/**
 * Differential constraints  l^i . U_x = q^i(x, t, U)  attached to a
 * quasilinear system, the compatibility conditions that put the combined
 * system in involution, and their Riemann-invariant form.
 *
 * All conditions are evaluated as pointwise residuals; a residual that
 * vanishes on a region means the condition holds there.
 */

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include "gtw/field.hpp"
#include "gtw/gradient.hpp"
#include "gtw/interpolation.hpp"
#include "gtw/ode.hpp"
#include "gtw/system.hpp"

namespace gtw {

/** M constraint sources attached to distinct characteristic families (0-based). */
struct ConstraintSet {
    std::vector<std::size_t> families;
    std::function<FieldVector(double, double, const FieldVector&)> q;  ///< empty: q = 0

    std::size_t size() const { return families.size(); }

    FieldVector values(double x, double t, const FieldVector& u) const {
        if (!q) return FieldVector::Zero(static_cast<Eigen::Index>(size()));
        FieldVector v = q(x, t, u);
        if (static_cast<std::size_t>(v.size()) != size())
            throw ConfigError("constraint source returned " + std::to_string(v.size()) + " values, expected " +
                              std::to_string(size()));
        return v;
    }

    void validate(std::size_t n) const {
        if (size() >= n && n > 0) throw ConfigError("at most N-1 constraints may be attached");
        for (std::size_t a = 0; a < size(); ++a) {
            if (families[a] >= n) throw ConfigError("constraint family index out of range");
            for (std::size_t b = a + 1; b < size(); ++b)
                if (families[a] == families[b]) throw ConfigError("constraint families must be distinct");
        }
    }

    /// The one family left free when M = N - 1.
    std::size_t free_family(std::size_t n) const {
        validate(n);
        if (size() + 1 != n) throw ConfigError("exactly N-1 constraints are required here");
        for (std::size_t k = 0; k < n; ++k)
            if (std::find(families.begin(), families.end(), k) == families.end()) return k;
        return n - 1;
    }

    /// q = 0 on every family except `free_family`.
    static ConstraintSet homogeneous(std::size_t n, std::size_t free_family) {
        ConstraintSet cs;
        for (std::size_t k = 0; k < n; ++k)
            if (k != free_family) cs.families.push_back(k);
        return cs;
    }
};

/** Difference-operator settings for residual evaluation. */
struct ResidualProbe {
    GradientOperator grad = GradientOperator::central(1e-4, 4);
    double xt_step = 1e-4;  ///< relative step for explicit x and t derivatives of q

    double step(double c) const { return xt_step * std::max(1.0, std::abs(c)); }
};

namespace detail {

/// 4th-order central derivative of a vector function of one real variable.
template <class G>
FieldVector d1(G&& g, double c, double h) {
    return (8.0 * (g(c + h) - g(c - h)) - (g(c + 2 * h) - g(c - 2 * h))) / (12.0 * h);
}

inline AdmissibleSet admissible_of(const HyperbolicSystem& sys) {
    return [&sys](const FieldVector& p) { return sys.is_admissible(p); };
}

}  // namespace detail

/**
 * Left-hand sides of the two involution conditions for M = N - 1 constraints,
 * one entry per attached family i (sums over attached j, k):
 *
 *   res1 = q^i_t + lambda^i q^i_x + grad q^i (B - q^j (lambda^j - lambda^i) d^j)
 *        + q^j q^k (lambda^j - lambda^k) l^i (grad d^j) d^k
 *        + q^k (l^i ((grad d^k) B - (grad B) d^k) + q^i (grad lambda^i) d^k)
 *
 *   res2 = (lambda^i - lambda^N) grad q^i d^N
 *        + q^k (lambda^k - lambda^N) l^i ((grad d^k) d^N - (grad d^N) d^k)
 *        + l^i ((grad d^N) B - (grad B) d^N) + q^i (grad lambda^i) d^N
 */
inline std::pair<FieldVector, FieldVector> involutiveness_residual(const HyperbolicSystem& sys,
                                                                   const ConstraintSet& cs, const FieldVector& u,
                                                                   double x = 0.0, double t = 0.0,
                                                                   const ResidualProbe& probe = {}) {
    const std::size_t nf = cs.free_family(sys.n);
    const std::size_t m = cs.size();
    const SpectralJet jet = spectral_jet(sys, u, probe.grad);
    const SpectralDecomposition& sd = jet.at;
    const FieldVector b = source_or_zero(sys, u);
    const Matrix db = source_jacobian(sys, u, probe.grad);
    const FieldVector q = cs.values(x, t, u);
    const auto adm = detail::admissible_of(sys);

    Matrix dq = Matrix::Zero(static_cast<Eigen::Index>(m), u.size());
    FieldVector qx = FieldVector::Zero(static_cast<Eigen::Index>(m)), qt = qx;
    if (cs.q) {
        dq = grad_vector([&](const FieldVector& p) { return cs.values(x, t, p); }, u,
                         GradientOperator::central(probe.grad.relative_step, probe.grad.order), adm);
        qx = detail::d1([&](double xx) { return cs.values(xx, t, u); }, x, probe.step(x));
        qt = detail::d1([&](double tt) { return cs.values(x, tt, u); }, t, probe.step(t));
    }

    const FieldVector dn = sd.d(nf);
    const double lam_n = sd.lambda(nf);
    FieldVector res1(static_cast<Eigen::Index>(m)), res2(static_cast<Eigen::Index>(m));
    for (std::size_t a = 0; a < m; ++a) {
        const std::size_t i = cs.families[a];
        const auto ai = static_cast<Eigen::Index>(a);
        const FieldVector li = sd.l(i);
        const double lam_i = sd.lambda(i);
        const FieldVector grad_lam_i = jet.dlambda.row(static_cast<Eigen::Index>(i)).transpose();

        FieldVector drift = b;
        for (std::size_t c = 0; c < m; ++c) {
            const std::size_t j = cs.families[c];
            drift -= q[static_cast<Eigen::Index>(c)] * (sd.lambda(j) - lam_i) * sd.d(j);
        }
        double r1 = qt[ai] + lam_i * qx[ai] + dq.row(ai).dot(drift);
        for (std::size_t c = 0; c < m; ++c) {
            const std::size_t j = cs.families[c];
            for (std::size_t e = 0; e < m; ++e) {
                const std::size_t k = cs.families[e];
                r1 += q[static_cast<Eigen::Index>(c)] * q[static_cast<Eigen::Index>(e)] *
                      (sd.lambda(j) - sd.lambda(k)) * li.dot(jet.dd_along(j, sd.d(k)));
            }
        }
        for (std::size_t e = 0; e < m; ++e) {
            const std::size_t k = cs.families[e];
            const FieldVector dk = sd.d(k);
            r1 += q[static_cast<Eigen::Index>(e)] *
                  (li.dot(jet.dd_along(k, b) - db * dk) + q[ai] * grad_lam_i.dot(dk));
        }
        res1[ai] = r1;

        double r2 = (lam_i - lam_n) * dq.row(ai).dot(dn);
        for (std::size_t e = 0; e < m; ++e) {
            const std::size_t k = cs.families[e];
            const FieldVector dk = sd.d(k);
            r2 += q[static_cast<Eigen::Index>(e)] * (sd.lambda(k) - lam_n) *
                  li.dot(jet.dd_along(k, dn) - jet.dd_along(nf, dk));
        }
        r2 += li.dot(jet.dd_along(nf, b) - db * dn) + q[ai] * grad_lam_i.dot(dn);
        res2[ai] = r2;
    }
    return {res1, res2};
}

struct ChartOptions {
    double reference = 1.0;                ///< value of the curve parameter at which R is read off
    std::optional<std::size_t> retained;   ///< index j of v = u_j; default: the curve parameter
    ode::Options ode = tight();
    double det_tol = 1e-10;

    static ode::Options tight() {
        ode::Options o;
        o.abs_tol = 1e-13;
        o.rel_tol = 1e-12;
        return o;
    }
};

/**
 * Riemann invariants R^alpha(U) of one family together with the retained
 * coordinate v = u_j, giving the change of variables U <-> (R, v).
 */
class RiemannChart {
public:
    using Invariants = std::function<FieldVector(const FieldVector&)>;
    using InvariantGradient = std::function<Matrix(const FieldVector&)>;
    using Inverse = std::function<FieldVector(const FieldVector&, double)>;

    /// Chart from user-supplied invariants. Missing gradients are differenced and
    /// a missing inverse is replaced by Newton iteration started from `guess`.
    static RiemannChart user(HyperbolicSystem sys, std::size_t family, std::size_t retained, Invariants r,
                             InvariantGradient grad = {}, Inverse inverse = {}, FieldVector guess = {}) {
        RiemannChart c;
        c.family_ = family;
        c.retained_ = retained;
        c.r_ = std::move(r);
        c.grad_ = std::move(grad);
        c.inverse_ = std::move(inverse);
        c.guess_ = std::move(guess);
        c.sys_ = std::move(sys);
        if (c.family_ >= c.sys_.n || c.retained_ >= c.sys_.n) throw ConfigError("chart indices out of range");
        return c;
    }

    const HyperbolicSystem& system() const { return sys_; }
    std::size_t n() const { return sys_.n; }
    std::size_t family() const { return family_; }
    std::size_t retained() const { return retained_; }
    std::size_t count() const { return sys_.n - 1; }

    /// Families other than the distinguished one, ascending.
    std::vector<std::size_t> other_families() const {
        std::vector<std::size_t> o;
        for (std::size_t k = 0; k < sys_.n; ++k)
            if (k != family_) o.push_back(k);
        return o;
    }

    FieldVector invariants(const FieldVector& u) const { return r_(u); }

    /// Row alpha = grad R^alpha.
    Matrix gradient(const FieldVector& u) const {
        if (grad_) return grad_(u);
        return grad_vector(r_, u, GradientOperator::central(1e-5, 4), detail::admissible_of(sys_));
    }

    /// sigma(alpha, beta) with grad R^alpha = sigma^alpha_beta l^beta, beta over the other families.
    Matrix sigma(const FieldVector& u) const { return sigma(u, decompose(sys_, u)); }

    Matrix sigma(const FieldVector& u, const SpectralDecomposition& sd) const {
        const Matrix g = gradient(u);
        const auto others = other_families();
        const auto m = static_cast<Eigen::Index>(count());
        Matrix s(m, m);
        for (Eigen::Index b = 0; b < m; ++b) s.col(b) = g * sd.d(others[static_cast<std::size_t>(b)]);
        return s;
    }

    /// Rows grad R^alpha followed by e_j: the Jacobian of U -> (R, v).
    Matrix jacobian(const FieldVector& u) const {
        const auto nn = static_cast<Eigen::Index>(sys_.n);
        Matrix j = Matrix::Zero(nn, nn);
        j.topRows(nn - 1) = gradient(u);
        j(nn - 1, static_cast<Eigen::Index>(retained_)) = 1.0;
        return j;
    }

    /// Columns dU/dR^alpha, then dU/dv.
    Matrix inverse_jacobian(const FieldVector& u) const {
        const Matrix j = jacobian(u);
        const double det = j.determinant();
        if (!(std::abs(det) > det_tol_)) {
            std::ostringstream os;
            os << "chart (R, v) is singular at U = (" << u.transpose() << "), det = " << det;
            throw ChartInversionFailure(os.str());
        }
        return j.inverse();
    }

    /// Residual grad R^alpha . d^N (zero for genuine invariants).
    FieldVector invariance_defect(const FieldVector& u) const {
        return gradient(u) * decompose(sys_, u).d(family_);
    }

    /// U with invariants R and retained coordinate v.
    FieldVector state(const FieldVector& r, double v) const {
        FieldVector u;
        try {
            u = inverse_ ? inverse_(r, v) : newton(r, v);
        } catch (const ChartInversionFailure&) {
            throw;
        } catch (const Error& e) {
            throw ChartInversionFailure(std::string("chart inversion failed: ") + e.what());
        }
        if (!sys_.is_admissible(u)) {
            std::ostringstream os;
            os << "chart inversion at R = (" << r.transpose() << "), v = " << v << " left the admissible set";
            throw ChartInversionFailure(os.str());
        }
        return u;
    }

    /// U(R, v) for fixed R as a function of v on [v_lo, v_hi].
    std::function<FieldVector(double)> fiber(const FieldVector& r, double v_lo, double v_hi) const {
        if (fiber_) return fiber_(r, v_lo, v_hi);
        RiemannChart self = *this;
        return [self, r](double v) { return self.state(r, v); };
    }

    double det_tol() const { return det_tol_; }

private:
    friend RiemannChart riemann_chart(const HyperbolicSystem&, std::size_t, const FieldVector&, const ChartOptions&);

    FieldVector newton(const FieldVector& r, double v) const {
        FieldVector u = guess_.size() == static_cast<Eigen::Index>(sys_.n) ? guess_
                                                                            : FieldVector::Ones(static_cast<Eigen::Index>(sys_.n));
        u[static_cast<Eigen::Index>(retained_)] = v;
        const auto nn = static_cast<Eigen::Index>(sys_.n);
        for (int it = 0; it < 60; ++it) {
            FieldVector f(nn);
            f.head(nn - 1) = r_(u) - r;
            f[nn - 1] = u[static_cast<Eigen::Index>(retained_)] - v;
            if (f.cwiseAbs().maxCoeff() <= 1e-13 * std::max(1.0, r.cwiseAbs().maxCoeff())) return u;
            u -= jacobian(u).fullPivLu().solve(f);
            if (!u.allFinite()) break;
        }
        throw ChartInversionFailure("Newton iteration for the chart inverse did not converge");
    }

    HyperbolicSystem sys_;
    std::size_t family_ = 0, retained_ = 0;
    Invariants r_;
    InvariantGradient grad_;
    Inverse inverse_;
    std::function<std::function<FieldVector(double)>(const FieldVector&, double, double)> fiber_;
    FieldVector guess_;
    double det_tol_ = 1e-10;
};

/**
 * Riemann invariant of `family` for a 2x2 system by quadrature along the
 * integral curves of d^N. The curve through U is followed in the coordinate p
 * (the first significant component of d^N at `seed`) until u_p reaches the
 * reference value; R(U) is the other coordinate there. Hence R = u_o on the
 * line u_p = reference.
 */
inline RiemannChart riemann_chart(const HyperbolicSystem& sys, std::size_t family, const FieldVector& seed,
                                  const ChartOptions& opt = {}) {
    if (sys.n != 2)
        throw ConfigError("automatic Riemann invariants are available for N = 2 only; supply them for larger N");
    if (family >= 2) throw ConfigError("family index out of range");
    const SpectralDecomposition sd0 = decompose(sys, seed);
    const FieldVector d0 = sd0.d(family);
    const Eigen::Index p = std::abs(d0[0]) > 1e-12 ? 0 : 1;
    const Eigen::Index o = 1 - p;
    const double ref = opt.reference;
    const ode::Options odeopt = opt.ode;

    // slope of the curve in the chosen parameter coordinate: du_o/du_p (param == p) or du_p/du_o
    auto slope = [sys, family, p, o](const FieldVector& u, bool param_is_p) {
        const FieldVector d = decompose(sys, u).d(family);
        const double num = param_is_p ? d[o] : d[p];
        const double den = param_is_p ? d[p] : d[o];
        if (std::abs(den) <= 1e-14 * std::max(1.0, std::abs(num))) {
            std::ostringstream os;
            os << "integral curve of d^" << family << " turns vertical at U = (" << u.transpose() << ")";
            throw QuadratureFailure(os.str());
        }
        return num / den;
    };
    auto point = [p, o](double up, double uo) {
        FieldVector u(2);
        u[p] = up;
        u[o] = uo;
        return u;
    };

    // (u_o, J) along the curve parameterized by u_p; J = d u_o(ref) / d u_o(start).
    auto curve_rhs = [slope, point](double up, const ode::Vector& y, ode::Vector& dy) {
        const double h = 1e-6 * std::max(1.0, std::abs(y[0]));
        const double g = slope(point(up, y[0]), true);
        const double gp = slope(point(up, y[0] + h), true), gm = slope(point(up, y[0] - h), true);
        dy.resize(2);
        dy[0] = g;
        dy[1] = (gp - gm) / (2 * h) * y[1];
    };
    auto follow = [curve_rhs, odeopt, ref](const FieldVector& u, Eigen::Index pp, Eigen::Index oo) {
        ode::Vector y(2);
        y << u[oo], 1.0;
        try {
            return ode::integrate(curve_rhs, u[pp], y, ref, odeopt);
        } catch (const QuadratureFailure&) {
            throw;
        } catch (const Error& e) {
            throw QuadratureFailure(std::string("Riemann-invariant quadrature failed: ") + e.what());
        }
    };

    const std::size_t j = opt.retained.value_or(static_cast<std::size_t>(p));
    if (j > 1) throw ConfigError("retained coordinate index out of range");
    const bool param_is_p = static_cast<Eigen::Index>(j) == p;

    RiemannChart chart;
    chart.sys_ = sys;
    chart.family_ = family;
    chart.retained_ = j;
    chart.det_tol_ = opt.det_tol;
    chart.r_ = [follow, p, o](const FieldVector& u) { return FieldVector::Constant(1, follow(u, p, o)[0]); };
    chart.grad_ = [follow, slope, p, o](const FieldVector& u) {
        const ode::Vector y = follow(u, p, o);
        Matrix g(1, 2);
        g(0, o) = y[1];
        g(0, p) = -slope(u, true) * y[1];
        return g;
    };
    // Along the fiber R = const the retained coordinate is the curve parameter.
    auto fiber_rhs = [slope, point, param_is_p](double s, const ode::Vector& y, ode::Vector& dy) {
        dy.resize(1);
        const FieldVector u = param_is_p ? point(s, y[0]) : point(y[0], s);
        dy[0] = slope(u, param_is_p);
    };
    auto start = [ref, param_is_p](const FieldVector& r) {
        return param_is_p ? std::pair<double, double>{ref, r[0]} : std::pair<double, double>{r[0], ref};
    };
    chart.inverse_ = [fiber_rhs, start, point, odeopt, param_is_p](const FieldVector& r, double v) {
        const auto [s0, y0] = start(r);
        const double other = ode::integrate(fiber_rhs, s0, ode::Vector::Constant(1, y0), v, odeopt)[0];
        return param_is_p ? point(v, other) : point(other, v);
    };
    chart.fiber_ = [fiber_rhs, start, point, odeopt, param_is_p](const FieldVector& r, double lo, double hi) {
        const auto [s0, y0] = start(r);
        auto sol = std::make_shared<ode::TwoSidedSolution>(fiber_rhs, s0, ode::Vector::Constant(1, y0),
                                                           std::min(lo, s0), std::max(hi, s0), odeopt);
        return std::function<FieldVector(double)>([sol, point, param_is_p](double v) {
            const double other = (*sol)(v)[0];
            return param_is_p ? point(v, other) : point(other, v);
        });
    };
    chart.inverse_jacobian(seed);
    return chart;
}

/** Outcome of a structural condition scan. */
struct StructuralReport {
    bool holds = false;
    double tolerance = 0.0;
    std::vector<double> variation;          ///< per alpha: max over R of the spread along v
    std::vector<FieldVector> r_nodes;       ///< sampled invariants
    std::vector<FieldVector> f_values;      ///< F^alpha(R) (mean over v) at each node
    double max_residual = 0.0;              ///< case ii: max of the residuals below
    double definition_f = 0.0, definition_g = 0.0, bracket = 0.0;

    double max_variation() const {
        double m = 0.0;
        for (double v : variation) m = std::max(m, v);
        return m;
    }

    /// Tabulated F^alpha(R) for a single invariant with ascending nodes.
    interp::CubicTable table(std::size_t alpha = 0) const {
        std::vector<double> r, f;
        for (std::size_t k = 0; k < r_nodes.size(); ++k) {
            r.push_back(r_nodes[k][0]);
            f.push_back(f_values[k][static_cast<Eigen::Index>(alpha)]);
        }
        return {r, f};
    }

    json to_json() const {
        json j;
        j["holds"] = holds;
        j["tolerance"] = tolerance;
        j["variation"] = variation;
        if (max_residual > 0 || definition_f > 0 || bracket > 0) {
            j["definition_F"] = definition_f;
            j["definition_G"] = definition_g;
            j["bracket"] = bracket;
        }
        return j;
    }
};

namespace detail {

/// sigma^alpha_beta l^beta . B, beta over the non-distinguished families.
inline FieldVector projected_source(const RiemannChart& chart, const FieldVector& u) {
    const HyperbolicSystem& sys = chart.system();
    const SpectralDecomposition sd = decompose(sys, u);
    const auto others = chart.other_families();
    const FieldVector b = source_or_zero(sys, u);
    FieldVector lb(static_cast<Eigen::Index>(others.size()));
    for (std::size_t a = 0; a < others.size(); ++a) lb[static_cast<Eigen::Index>(a)] = sd.l(others[a]).dot(b);
    return chart.sigma(u, sd) * lb;
}

}  // namespace detail

/**
 * Checks that sigma^alpha_beta l^beta . B depends on R alone by sampling it on
 * the (R, v) grid. `tol` is relative to max(1, max |F|).
 */
inline StructuralReport structural_case_i(const RiemannChart& chart, const std::vector<FieldVector>& r_nodes,
                                          const std::vector<double>& v_nodes, double tol = 1e-8) {
    if (r_nodes.empty() || v_nodes.empty()) throw ConfigError("structural scan needs R and v samples");
    const std::size_t m = chart.count();
    StructuralReport rep;
    rep.variation.assign(m, 0.0);
    rep.r_nodes = r_nodes;
    double scale = 1.0;
    for (const FieldVector& r : r_nodes) {
        FieldVector lo = FieldVector::Constant(static_cast<Eigen::Index>(m), std::numeric_limits<double>::infinity());
        FieldVector hi = -lo, sum = FieldVector::Zero(static_cast<Eigen::Index>(m));
        for (double v : v_nodes) {
            const FieldVector f = detail::projected_source(chart, chart.state(r, v));
            lo = lo.cwiseMin(f);
            hi = hi.cwiseMax(f);
            sum += f;
            scale = std::max(scale, f.cwiseAbs().maxCoeff());
        }
        for (std::size_t a = 0; a < m; ++a)
            rep.variation[a] = std::max(rep.variation[a], hi[static_cast<Eigen::Index>(a)] - lo[static_cast<Eigen::Index>(a)]);
        rep.f_values.push_back(sum / static_cast<double>(v_nodes.size()));
    }
    rep.tolerance = tol * scale;
    rep.holds = rep.max_variation() <= rep.tolerance;
    return rep;
}

using InvariantField = std::function<FieldVector(const FieldVector&)>;

/** dG^alpha/dR^beta F^beta - dF^alpha/dR^beta G^beta at R (4th-order differences). */
inline FieldVector case_ii_bracket(const InvariantField& f, const InvariantField& g, const FieldVector& r,
                                   double rel_step = 1e-4) {
    const FieldVector fv = f(r), gv = g(r);
    FieldVector out = FieldVector::Zero(fv.size());
    for (Eigen::Index b = 0; b < r.size(); ++b) {
        const double h = rel_step * std::max(1.0, std::abs(r[b]));
        auto along = [&](const InvariantField& fn) {
            return detail::d1(
                [&](double c) {
                    FieldVector q = r;
                    q[b] = c;
                    return fn(q);
                },
                r[b], h);
        };
        out += along(g) * fv[b] - along(f) * gv[b];
    }
    return out;
}

/**
 * Case ii: with sigma q = G(R) (which fixes q) checks
 * sigma (l.B - lambda^beta q^beta) = F(R) on the (R, v) grid and the bracket
 * condition at each R node.
 */
inline StructuralReport structural_case_ii(const RiemannChart& chart, const InvariantField& f, const InvariantField& g,
                                           const std::vector<FieldVector>& r_nodes, const std::vector<double>& v_nodes,
                                           double tol = 1e-7) {
    const HyperbolicSystem& sys = chart.system();
    const auto others = chart.other_families();
    const auto m = static_cast<Eigen::Index>(chart.count());
    StructuralReport rep;
    rep.variation.assign(static_cast<std::size_t>(m), 0.0);
    rep.r_nodes = r_nodes;
    double scale = 1.0;
    for (const FieldVector& r : r_nodes) {
        const FieldVector fr = f(r), gr = g(r);
        scale = std::max({scale, fr.cwiseAbs().maxCoeff(), gr.cwiseAbs().maxCoeff()});
        rep.bracket = std::max(rep.bracket, case_ii_bracket(f, g, r).cwiseAbs().maxCoeff());
        for (double v : v_nodes) {
            const FieldVector u = chart.state(r, v);
            const SpectralDecomposition sd = decompose(sys, u);
            const Matrix sig = chart.sigma(u, sd);
            const FieldVector q = sig.fullPivLu().solve(gr);
            const FieldVector b = source_or_zero(sys, u);
            FieldVector inner(m);
            for (Eigen::Index a = 0; a < m; ++a) {
                const std::size_t fam = others[static_cast<std::size_t>(a)];
                inner[a] = sd.l(fam).dot(b) - sd.lambda(fam) * q[a];
            }
            const FieldVector df = sig * inner - fr;
            rep.definition_f = std::max(rep.definition_f, df.cwiseAbs().maxCoeff());
            rep.definition_g = std::max(rep.definition_g, (sig * q - gr).cwiseAbs().maxCoeff());
            for (Eigen::Index a = 0; a < m; ++a)
                rep.variation[static_cast<std::size_t>(a)] =
                    std::max(rep.variation[static_cast<std::size_t>(a)], std::abs(df[a]));
        }
        rep.f_values.push_back(fr);
    }
    rep.max_residual = std::max({rep.definition_f, rep.definition_g, rep.bracket});
    rep.tolerance = tol * scale;
    rep.holds = rep.max_residual <= rep.tolerance;
    return rep;
}

/**
 * Compatibility of  R^alpha_x = w^alpha,  R^alpha_t = z^alpha  with the
 * v-equation, where w = sigma q and z = sigma l.B - lambda^beta sigma q
 * (summation over beta throughout):
 *
 *   res_c1 = (lambda^beta - lambda^N) sigma q^beta_v
 *          - ((lambda^N - lambda^beta) sigma_v - sigma lambda^beta_v) q^beta - (sigma l^beta . B)_v
 *   res_c2 = w_R z - z_R w + w_v (B_j + (lambda^N - lambda^gamma) q^gamma d^gamma_j) + w_t - z_x
 *
 * Derivatives in v and R are taken at fixed (R, v) through the chart
 * Jacobian; the last two terms vanish for q independent of x and t.
 */
inline std::pair<FieldVector, FieldVector> riemann_compat_residual(const RiemannChart& chart, const ConstraintSet& cs,
                                                                   const FieldVector& u, double x = 0.0,
                                                                   double t = 0.0, const ResidualProbe& probe = {}) {
    const HyperbolicSystem& sys = chart.system();
    const auto others = chart.other_families();
    if (cs.size() != others.size() || !std::equal(others.begin(), others.end(), cs.families.begin()))
        throw ConfigError("constraints must be attached to every family except the chart's");
    const auto m = static_cast<Eigen::Index>(others.size());
    const auto nf = chart.family();
    const auto jj = static_cast<Eigen::Index>(chart.retained());
    const auto adm = detail::admissible_of(sys);

    // Packed U-dependent quantities: q (m), sigma (m*m, column-major), lambda_beta (m), sigma l.B (m).
    auto pack = [&](double xx, double tt, const FieldVector& p) {
        const SpectralDecomposition sd = decompose(sys, p);
        const Matrix sig = chart.sigma(p, sd);
        const FieldVector b = source_or_zero(sys, p);
        FieldVector lb(m), lam(m);
        for (Eigen::Index a = 0; a < m; ++a) {
            lb[a] = sd.l(others[static_cast<std::size_t>(a)]).dot(b);
            lam[a] = sd.lambda(others[static_cast<std::size_t>(a)]);
        }
        FieldVector out(3 * m + m * m);
        out.head(m) = cs.values(xx, tt, p);
        out.segment(m, m * m) = Eigen::Map<const FieldVector>(sig.data(), m * m);
        out.segment(m + m * m, m) = lam;
        out.tail(m) = sig * lb;
        return out;
    };
    struct Parts {
        FieldVector q, lam, slb, w, z;
        Matrix sig;
    };
    auto split = [m](const FieldVector& pk) {
        Parts p;
        p.q = pk.head(m);
        p.sig = Eigen::Map<const Matrix>(pk.data() + m, m, m);
        p.lam = pk.segment(m + m * m, m);
        p.slb = pk.tail(m);
        p.w = p.sig * p.q;
        p.z = p.slb - p.sig * p.lam.cwiseProduct(p.q);
        return p;
    };

    const SpectralDecomposition sd = decompose(sys, u);
    const double lam_n = sd.lambda(nf);
    const FieldVector pk = pack(x, t, u);
    const Parts at = split(pk);
    const Matrix dpk = detail::stencil_jacobian([&](const FieldVector& p) { return pack(x, t, p); }, u, probe.grad, adm);
    const Matrix dudrv = chart.inverse_jacobian(u);  // columns dU/dR^gamma, dU/dv
    const Matrix dpk_rv = dpk * dudrv;               // packed derivatives w.r.t. (R, v)

    auto parts_derivative = [&](Eigen::Index col) { return dpk_rv.col(col); };
    // derivative of w and z along one (R, v) direction, by the product rule on the packed parts
    auto wz_derivative = [&](const FieldVector& dp, FieldVector& dw, FieldVector& dz) {
        const FieldVector dq = dp.head(m);
        const Matrix dsig = Eigen::Map<const Matrix>(dp.data() + m, m, m);
        const FieldVector dlam = dp.segment(m + m * m, m);
        const FieldVector dslb = dp.tail(m);
        dw = dsig * at.q + at.sig * dq;
        dz = dslb - dsig * at.lam.cwiseProduct(at.q) - at.sig * (dlam.cwiseProduct(at.q) + at.lam.cwiseProduct(dq));
    };

    const FieldVector dv = parts_derivative(m);
    const FieldVector q_v = dv.head(m);
    const Matrix sig_v = Eigen::Map<const Matrix>(dv.data() + m, m, m);
    const FieldVector lam_v = dv.segment(m + m * m, m);
    const FieldVector slb_v = dv.tail(m);

    FieldVector res1(m);
    for (Eigen::Index a = 0; a < m; ++a) {
        double r = 0.0;
        for (Eigen::Index b = 0; b < m; ++b) {
            r += (at.lam[b] - lam_n) * at.sig(a, b) * q_v[b];
            r -= ((lam_n - at.lam[b]) * sig_v(a, b) - at.sig(a, b) * lam_v[b]) * at.q[b];
        }
        res1[a] = r - slb_v[a];
    }

    FieldVector w_v, z_v;
    wz_derivative(dv, w_v, z_v);
    double h = source_or_zero(sys, u)[jj];
    for (Eigen::Index g = 0; g < m; ++g)
        h += (lam_n - at.lam[g]) * at.q[g] * sd.d(others[static_cast<std::size_t>(g)])[jj];

    FieldVector res2 = w_v * h;
    for (Eigen::Index g = 0; g < m; ++g) {
        FieldVector w_r, z_r;
        wz_derivative(parts_derivative(g), w_r, z_r);
        res2 += w_r * at.z[g] - z_r * at.w[g];
    }
    if (cs.q) {
        auto wz_at = [&](double xx, double tt, bool want_w) {
            const Parts p = split(pack(xx, tt, u));
            return want_w ? p.w : p.z;
        };
        res2 += detail::d1([&](double tt) { return wz_at(x, tt, true); }, t, probe.step(t));
        res2 -= detail::d1([&](double xx) { return wz_at(xx, t, false); }, x, probe.step(x));
    }
    return {res1, res2};
}

}  // namespace gtw
