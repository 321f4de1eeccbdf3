#pragma once
/**
 * Method of characteristics for the reduced systems:
 *
 *  - N-1 constraints l^i . U_x = q^i:  along dx/dt = lambda^N,
 *        dU/dt = B + q^i (lambda^N - lambda^i) d^i
 *  - case i:  dR/dt = F(R), then  v_t + lambda^N(v, R(t)) v_x = B_j(v, R(t))
 *  - case ii: R_t + lambda^N R_x = F + lambda^N G with R_x = G and lambda^N = lambda^N(R)
 *  - simple waves:  R = k,  v = v0(xi),  x = lambda^N(v0(xi), k) t + xi
 */

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "gtw/constraints.hpp"
#include "gtw/field.hpp"
#include "gtw/ode.hpp"
#include "gtw/system.hpp"

namespace gtw {

using InitialData = std::function<FieldVector(double)>;
using ScalarData = std::function<double(double)>;

struct MocOptions {
    ode::Options ode;
    double constraint_tol = 1e-6;   ///< initial-data constraint residual
    double involution_tol = 1e-5;   ///< involution residual at sampled initial states
    double structural_tol = 1e-7;   ///< case i / ii structure along the solution (relative)
    double decoupling_tol = 1e-8;   ///< case ii: |d lambda^N / dv| relative to 1 + |lambda^N|
    bool check_involution = true;
    bool throw_on_crossing = true;
    std::size_t involution_samples = 16;
    double data_step = 1e-3;        ///< relative step for derivatives of initial data
    ResidualProbe probe;
};

namespace detail {

inline double data_step(const MocOptions& opt, double x) { return opt.data_step * std::max(1.0, std::abs(x)); }

inline void finish_lattice(CharacteristicLattice& lat, const MocOptions& opt) {
    lat.first_crossing = lat.detect_crossing();
    lat.metadata["first_crossing"] = std::isfinite(lat.first_crossing) ? json(lat.first_crossing) : json(nullptr);
    if (opt.throw_on_crossing && std::isfinite(lat.first_crossing)) {
        std::ostringstream os;
        os << "characteristics cross by t = " << lat.first_crossing << " (gradient catastrophe)";
        throw CharacteristicCrossing(lat.first_crossing, os.str());
    }
}

inline void require_increasing(const std::vector<double>& v, const char* what) {
    if (v.size() < 2 || !interp::strictly_increasing(v))
        throw ConfigError(std::string(what) + " must hold at least two strictly increasing values");
}

}  // namespace detail

/** max_i |l^i(U0) . U0'(x) - q^i(x, 0, U0)| at each seed. */
inline std::vector<double> initial_constraint_residual(const HyperbolicSystem& sys, const ConstraintSet& cs,
                                                       const InitialData& u0, const std::vector<double>& seeds,
                                                       const MocOptions& opt = {}) {
    std::vector<double> out;
    out.reserve(seeds.size());
    for (double x : seeds) {
        const FieldVector u = u0(x);
        const FieldVector ux = detail::d1(u0, x, detail::data_step(opt, x));
        const SpectralDecomposition sd = decompose(sys, u);
        const FieldVector q = cs.values(x, 0.0, u);
        double r = 0.0;
        for (std::size_t a = 0; a < cs.size(); ++a)
            r = std::max(r, std::abs(sd.l(cs.families[a]).dot(ux) - q[static_cast<Eigen::Index>(a)]));
        out.push_back(r);
    }
    return out;
}

/**
 * Constraint residual max_i |l^i . U_x - q^i| per output time, with U_x taken
 * along the lattice (U_xi / x_xi) at interior seeds.
 */
inline std::vector<double> constraint_drift(const HyperbolicSystem& sys, const ConstraintSet& cs,
                                            const CharacteristicLattice& lat) {
    std::vector<double> out(lat.nt(), 0.0);
    if (lat.ns() < 3) return out;
    for (std::size_t j = 0; j < lat.nt(); ++j) {
        for (std::size_t k = 1; k + 1 < lat.ns(); ++k) {
            const double s0 = lat.seeds[k - 1], s1 = lat.seeds[k], s2 = lat.seeds[k + 1];
            const double x_xi = interp::central_derivative(s0, s1, s2, lat.x(j, k - 1), lat.x(j, k), lat.x(j, k + 1));
            const FieldVector& u = lat.u(j, k);
            FieldVector ux(u.size());
            for (Eigen::Index c = 0; c < u.size(); ++c)
                ux[c] = interp::central_derivative(s0, s1, s2, lat.u(j, k - 1)[c], u[c], lat.u(j, k + 1)[c]) / x_xi;
            const SpectralDecomposition sd = decompose(sys, u);
            const FieldVector q = cs.values(lat.x(j, k), lat.times[j], u);
            for (std::size_t a = 0; a < cs.size(); ++a)
                out[j] = std::max(out[j], std::abs(sd.l(cs.families[a]).dot(ux) - q[static_cast<Eigen::Index>(a)]));
        }
    }
    return out;
}

/**
 * Integrates the system constrained by N-1 relations l^i . U_x = q^i along the
 * characteristics of the free family, from U0 at the given seeds.
 */
inline CharacteristicLattice integrate_constrained(const HyperbolicSystem& sys, const ConstraintSet& cs,
                                                   const InitialData& u0, const std::vector<double>& seeds,
                                                   const std::vector<double>& times, const MocOptions& opt = {}) {
    detail::require_increasing(seeds, "seeds");
    if (times.empty() || times.front() != 0.0 || !interp::strictly_increasing(times))
        throw ConfigError("output times must start at 0 and increase strictly");
    const std::size_t nf = sys.n == 1 ? 0 : cs.free_family(sys.n);
    if (sys.n == 1 && cs.size() != 0) throw ConfigError("a scalar law takes no constraints here");

    const std::vector<double> init = initial_constraint_residual(sys, cs, u0, seeds, opt);
    for (std::size_t k = 0; k < seeds.size(); ++k) {
        if (init[k] > opt.constraint_tol) {
            std::ostringstream os;
            os << "initial data violates the constraints at x = " << seeds[k] << " (residual " << init[k] << " > "
               << opt.constraint_tol << ")";
            throw InitialDataViolatesConstraints(init[k], seeds[k], os.str());
        }
    }
    if (opt.check_involution && cs.size() > 0) {
        const std::size_t stride = std::max<std::size_t>(1, seeds.size() / std::max<std::size_t>(1, opt.involution_samples));
        for (std::size_t k = 0; k < seeds.size(); k += stride) {
            const auto [r1, r2] = involutiveness_residual(sys, cs, u0(seeds[k]), seeds[k], 0.0, opt.probe);
            const double r = std::max(r1.cwiseAbs().maxCoeff(), r2.cwiseAbs().maxCoeff());
            if (r > opt.involution_tol) {
                std::ostringstream os;
                os << "constraints are not in involution at x = " << seeds[k] << " (residual " << r << ")";
                throw CompatibilityViolation(r, os.str());
            }
        }
    }

    const auto n = static_cast<Eigen::Index>(sys.n);
    const ode::Rhs rhs = [&](double t, const ode::Vector& y, ode::Vector& dy) {
        const FieldVector u = y.tail(n);
        const SpectralDecomposition sd = decompose(sys, u);
        const double lam = sd.lambda(nf);
        FieldVector du = source_or_zero(sys, u);
        const FieldVector q = cs.values(y[0], t, u);
        for (std::size_t a = 0; a < cs.size(); ++a) {
            const std::size_t i = cs.families[a];
            du += q[static_cast<Eigen::Index>(a)] * (lam - sd.lambda(i)) * sd.d(i);
        }
        dy.resize(n + 1);
        dy[0] = lam;
        dy.tail(n) = du;
    };

    CharacteristicLattice lat;
    lat.components = sys.names;
    lat.seeds = seeds;
    lat.times = times;
    lat.xs.assign(times.size() * seeds.size(), 0.0);
    lat.states.assign(times.size() * seeds.size(), FieldVector());
    for (std::size_t k = 0; k < seeds.size(); ++k) {
        ode::Vector y0(n + 1);
        y0[0] = seeds[k];
        y0.tail(n) = u0(seeds[k]);
        sys.require_admissible(y0.tail(n));
        const auto line = ode::integrate_at(rhs, 0.0, y0, times, opt.ode);
        for (std::size_t j = 0; j < times.size(); ++j) {
            lat.xs[j * seeds.size() + k] = line[j][0];
            lat.states[j * seeds.size() + k] = line[j].tail(n);
        }
    }
    lat.metadata["initial_constraint_residual"] = *std::max_element(init.begin(), init.end());
    detail::finish_lattice(lat, opt);
    return lat;
}

struct SimpleWaveOptions {
    std::size_t seeds = 2048;   ///< dense xi sampling for breaking time and root bracketing
    double x_tol = 1e-12;
    double slope_step = 1e-6;   ///< relative to the xi range
};

/**
 * Simple wave of family N with frozen invariants R = k and profile v0(xi) on
 * [xi_min, xi_max]. Evaluation solves x = lambda^N(v0(xi), k) t + xi.
 */
class SimpleWave {
public:
    SimpleWave(const RiemannChart& chart, FieldVector k, ScalarData v0, double xi_min, double xi_max,
               SimpleWaveOptions opt = {})
        : sys_(chart.system()), family_(chart.family()), k_(std::move(k)), v0_(std::move(v0)), xi_min_(xi_min),
          xi_max_(xi_max), opt_(opt) {
        if (!(xi_max > xi_min)) throw ConfigError("simple wave needs xi_max > xi_min");
        if (opt_.seeds < 2) throw ConfigError("simple wave needs at least two seeds");
        xi_ = linspace(xi_min, xi_max, opt_.seeds);
        double vlo = std::numeric_limits<double>::infinity(), vhi = -vlo;
        const double h = opt_.slope_step * (xi_max - xi_min);
        for (double xi : xi_) {
            for (double s : {xi - 2 * h, xi, xi + 2 * h}) {
                vlo = std::min(vlo, v0_(s));
                vhi = std::max(vhi, v0_(s));
            }
        }
        const double pad = 1e-6 * std::max(1.0, vhi - vlo);
        fiber_ = chart.fiber(k_, vlo - pad, vhi + pad);
        lam_.resize(xi_.size());
        slope_.resize(xi_.size());
        t_b_ = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < xi_.size(); ++i) {
            lam_[i] = speed(xi_[i]);
            slope_[i] = (8 * (speed(xi_[i] + h) - speed(xi_[i] - h)) - (speed(xi_[i] + 2 * h) - speed(xi_[i] - 2 * h))) /
                        (12 * h);
            if (slope_[i] < 0) t_b_ = std::min(t_b_, -1.0 / slope_[i]);
        }
    }

    double breaking_time() const { return t_b_; }
    const FieldVector& invariants() const { return k_; }
    double xi_min() const { return xi_min_; }
    double xi_max() const { return xi_max_; }

    /// lambda^N along the initial profile
    double speed(double xi) const { return decompose(sys_, fiber_(v0_(xi))).lambda(family_); }

    FieldVector state_of_v(double v) const { return fiber_(v); }

    /// x-interval reached by the seeded characteristics at time t.
    std::pair<double, double> coverage(double t) const {
        return {xi_.front() + lam_.front() * t, xi_.back() + lam_.back() * t};
    }

    /// Foot xi of the characteristic through (x, t).
    double foot(double x, double t) const {
        if (t >= t_b_) {
            std::ostringstream os;
            os << "simple wave queried at t = " << t << " >= breaking time " << t_b_;
            throw PostBreakingQuery(t_b_, os.str());
        }
        auto g = [&](double xi) { return xi + speed(xi) * t - x; };
        // bracket among the seeds; x_k = xi_k + lambda_k t increases in k before breaking
        std::vector<double> xk(xi_.size());
        for (std::size_t i = 0; i < xi_.size(); ++i) xk[i] = xi_[i] + lam_[i] * t;
        const double tol = opt_.x_tol * std::max(1.0, std::abs(x));
        if (x < xk.front() - tol || x > xk.back() + tol) {
            std::ostringstream os;
            os << "point (" << x << ", " << t << ") is not reached by characteristics from [" << xi_min_ << ", "
               << xi_max_ << "]";
            throw DomainError(os.str());
        }
        const std::size_t c = interp::locate(xk, x);
        double a = xi_[c], b = xi_[c + 1];
        double fa = g(a), fb = g(b);
        if (std::abs(fa) <= tol) return a;
        if (std::abs(fb) <= tol) return b;
        if (fa * fb > 0) {
            a = xi_.front();
            b = xi_.back();
            fa = g(a);
            fb = g(b);
        }
        std::uintmax_t iters = 200;
        const auto r = boost::math::tools::toms748_solve(
            g, a, b, fa, fb, [](double lo, double hi) { return std::abs(hi - lo) <= 1e-14 * std::max(1.0, std::abs(lo)); },
            iters);
        return 0.5 * (r.first + r.second);
    }

    FieldVector operator()(double x, double t) const { return fiber_(v0_(foot(x, t))); }

    GridField field(const std::vector<double>& xs, const std::vector<double>& ts) const {
        GridField g = sample([this](double x, double t) { return (*this)(x, t); }, xs, ts, sys_.names);
        g.metadata["breaking_time"] = std::isfinite(t_b_) ? json(t_b_) : json(nullptr);
        return g;
    }

    /// Straight characteristics from the given seeds, sampled at `times`.
    CharacteristicLattice lattice(const std::vector<double>& seeds, const std::vector<double>& times) const {
        CharacteristicLattice lat;
        lat.components = sys_.names;
        lat.seeds = seeds;
        lat.times = times;
        for (double t : times) {
            for (double xi : seeds) {
                lat.xs.push_back(xi + speed(xi) * t);
                lat.states.push_back(fiber_(v0_(xi)));
            }
        }
        lat.first_crossing = lat.detect_crossing();
        return lat;
    }

private:
    HyperbolicSystem sys_;
    std::size_t family_;
    FieldVector k_;
    ScalarData v0_;
    double xi_min_, xi_max_;
    SimpleWaveOptions opt_;
    std::function<FieldVector(double)> fiber_;
    std::vector<double> xi_, lam_, slope_;
    double t_b_;
};

/** Case i output: the lattice plus the invariant trajectory R(t). */
struct CaseISolution {
    CharacteristicLattice lattice;
    ode::DenseSolution invariants;  ///< R(t)
};

/**
 * Case i: dR/dt = F(R) from R0, then characteristics of the scalar law for v
 * with R = R(t) frozen into the chart. F must agree with
 * sigma^alpha_beta l^beta . B along the solution.
 */
inline CaseISolution case_i_solve(const RiemannChart& chart, const InvariantField& f, const FieldVector& r0,
                                  const ScalarData& v0, const std::vector<double>& seeds,
                                  const std::vector<double>& times, const MocOptions& opt = {}) {
    detail::require_increasing(seeds, "seeds");
    if (times.empty() || times.front() != 0.0 || !interp::strictly_increasing(times))
        throw ConfigError("output times must start at 0 and increase strictly");
    const HyperbolicSystem& sys = chart.system();
    const std::size_t nf = chart.family();
    const auto j = static_cast<Eigen::Index>(chart.retained());
    const auto n = static_cast<Eigen::Index>(sys.n);

    CaseISolution out;
    const ode::Rhs rdot = [&f](double, const ode::Vector& r, ode::Vector& dr) { dr = f(r); };
    out.invariants = ode::integrate_dense(rdot, 0.0, r0, times.back(), opt.ode);
    const ode::DenseSolution& rt = out.invariants;

    const ode::Rhs rhs = [&](double t, const ode::Vector& y, ode::Vector& dy) {
        const FieldVector u = chart.state(rt(t), y[1]);
        dy.resize(2);
        dy[0] = decompose(sys, u).lambda(nf);
        dy[1] = source_or_zero(sys, u)[j];
    };

    CharacteristicLattice& lat = out.lattice;
    lat.components = sys.names;
    lat.seeds = seeds;
    lat.times = times;
    lat.xs.assign(times.size() * seeds.size(), 0.0);
    lat.states.assign(times.size() * seeds.size(), FieldVector(n));
    double worst = 0.0;
    for (std::size_t k = 0; k < seeds.size(); ++k) {
        ode::Vector y0(2);
        y0 << seeds[k], v0(seeds[k]);
        const auto line = ode::integrate_at(rhs, 0.0, y0, times, opt.ode);
        for (std::size_t i = 0; i < times.size(); ++i) {
            const FieldVector r = rt(times[i]);
            const FieldVector u = chart.state(r, line[i][1]);
            lat.xs[i * seeds.size() + k] = line[i][0];
            lat.states[i * seeds.size() + k] = u;
            const FieldVector fr = f(r);
            const double dev = (detail::projected_source(chart, u) - fr).cwiseAbs().maxCoeff();
            worst = std::max(worst, dev / std::max(1.0, fr.cwiseAbs().maxCoeff()));
        }
    }
    lat.metadata["structural_deviation"] = worst;
    if (worst > opt.structural_tol) {
        std::ostringstream os;
        os << "sigma l.B differs from F(R) by " << worst << " along the solution: structural condition fails";
        throw CompatibilityViolation(worst, os.str());
    }
    detail::finish_lattice(lat, opt);
    return out;
}

/**
 * Case ii with lambda^N depending on R only: characteristics carry
 * dR/dt = F + lambda^N G and dv/dt = B_j + (lambda^N - lambda^gamma) q^gamma d^gamma_j,
 * where sigma q = G. Initial data must satisfy R0' = G(R0).
 */
inline CharacteristicLattice case_ii_solve(const RiemannChart& chart, const InvariantField& f, const InvariantField& g,
                                           const InitialData& r0, const ScalarData& v0,
                                           const std::vector<double>& seeds, const std::vector<double>& times,
                                           const MocOptions& opt = {}) {
    detail::require_increasing(seeds, "seeds");
    if (times.empty() || times.front() != 0.0 || !interp::strictly_increasing(times))
        throw ConfigError("output times must start at 0 and increase strictly");
    const HyperbolicSystem& sys = chart.system();
    const std::size_t nf = chart.family();
    const auto others = chart.other_families();
    const auto m = static_cast<Eigen::Index>(chart.count());
    const auto j = static_cast<Eigen::Index>(chart.retained());
    const auto adm = detail::admissible_of(sys);

    for (double xi : seeds) {
        const FieldVector r = r0(xi);
        const FieldVector u = chart.state(r, v0(xi));
        const FieldVector grad_lam = grad_scalar([&](const FieldVector& p) { return decompose(sys, p).lambda(nf); }, u,
                                                 GradientOperator::central(1e-5, 4), adm);
        const double dlam_dv = grad_lam.dot(chart.inverse_jacobian(u).col(m));
        const double lam = decompose(sys, u).lambda(nf);
        if (std::abs(dlam_dv) > opt.decoupling_tol * (1 + std::abs(lam))) {
            std::ostringstream os;
            os << "lambda^" << nf << " varies with v (d lambda/dv = " << dlam_dv << " at x = " << xi
               << "): the R-equations do not decouple";
            throw NotDecoupled(os.str());
        }
        const FieldVector dr = detail::d1(r0, xi, detail::data_step(opt, xi));
        const double res = (dr - g(r)).cwiseAbs().maxCoeff();
        if (res > opt.constraint_tol) {
            std::ostringstream os;
            os << "initial invariants violate R_x = G(R) at x = " << xi << " (residual " << res << ")";
            throw InitialDataViolatesConstraints(res, xi, os.str());
        }
    }

    const ode::Rhs rhs = [&](double, const ode::Vector& y, ode::Vector& dy) {
        const FieldVector r = y.segment(1, m);
        const FieldVector u = chart.state(r, y[m + 1]);
        const SpectralDecomposition sd = decompose(sys, u);
        const double lam = sd.lambda(nf);
        const FieldVector gr = g(r);
        const FieldVector q = chart.sigma(u, sd).fullPivLu().solve(gr);
        double vdot = source_or_zero(sys, u)[j];
        for (Eigen::Index a = 0; a < m; ++a) {
            const std::size_t fam = others[static_cast<std::size_t>(a)];
            vdot += (lam - sd.lambda(fam)) * q[a] * sd.d(fam)[j];
        }
        dy.resize(m + 2);
        dy[0] = lam;
        dy.segment(1, m) = f(r) + lam * gr;
        dy[m + 1] = vdot;
    };

    CharacteristicLattice lat;
    lat.components = sys.names;
    lat.seeds = seeds;
    lat.times = times;
    lat.xs.assign(times.size() * seeds.size(), 0.0);
    lat.states.assign(times.size() * seeds.size(), FieldVector());
    for (std::size_t k = 0; k < seeds.size(); ++k) {
        ode::Vector y0(m + 2);
        y0[0] = seeds[k];
        y0.segment(1, m) = r0(seeds[k]);
        y0[m + 1] = v0(seeds[k]);
        const auto line = ode::integrate_at(rhs, 0.0, y0, times, opt.ode);
        for (std::size_t i = 0; i < times.size(); ++i) {
            lat.xs[i * seeds.size() + k] = line[i][0];
            lat.states[i * seeds.size() + k] = chart.state(line[i].segment(1, m), line[i][m + 1]);
        }
    }
    detail::finish_lattice(lat, opt);
    return lat;
}

}  // namespace gtw
