#pragma once
/**
 * Adaptive Dormand-Prince 5(4) integrator with continuous (dense) output.
 *
 * Every accepted step keeps the coefficients of the order-4 continuous
 * extension, so a finished integration can be evaluated at any point of the
 * covered interval without re-integrating. Integration may run backwards
 * (t1 < t0).
 */

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gtw/errors.hpp"

namespace gtw::ode {

using Vector = Eigen::VectorXd;
using Rhs = std::function<void(double, const Vector&, Vector&)>;

struct Options {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    double initial_step = 0.0;  ///< 0 selects a heuristic start
    double max_step = std::numeric_limits<double>::infinity();
    bool fixed_step = false;    ///< no error control; step = fixed_step_size
    double fixed_step_size = 1e-3;
    std::size_t max_steps = 2'000'000;
};

namespace detail {
// Butcher tableau (Dormand & Prince 1980) and dense-output weights (Hairer, Norsett & Wanner).
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                        a75 = -2187.0 / 6784, a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
}  // namespace detail

/** One accepted step with its continuous extension. */
struct Segment {
    double t0 = 0.0, h = 0.0;
    Vector r1, r2, r3, r4, r5;

    Vector operator()(double t) const {
        const double th = (t - t0) / h;
        const double th1 = 1.0 - th;
        return r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
    }
};

/** Piecewise dense solution on [min(t0,t1), max(t0,t1)]. */
class DenseSolution {
public:
    DenseSolution() = default;
    DenseSolution(double t0, double t1, std::vector<Segment> segs)
        : t_begin_(t0), t_end_(t1), segments_(std::move(segs)) {}

    double t_begin() const { return t_begin_; }
    double t_end() const { return t_end_; }
    std::size_t steps() const { return segments_.size(); }
    bool covers(double t) const {
        const double lo = std::min(t_begin_, t_end_), hi = std::max(t_begin_, t_end_);
        const double slack = 1e-13 * std::max(1.0, std::abs(hi - lo));
        return t >= lo - slack && t <= hi + slack;
    }

    Vector operator()(double t) const {
        if (segments_.empty()) throw DomainError("empty dense solution");
        if (!covers(t))
            throw DomainError("dense output queried at " + std::to_string(t) + " outside [" +
                              std::to_string(t_begin_) + ", " + std::to_string(t_end_) + "]");
        const bool forward = t_end_ >= t_begin_;
        // Segments are ordered in integration direction.
        auto it = std::lower_bound(segments_.begin(), segments_.end(), t,
                                   [forward](const Segment& s, double tq) {
                                       const double end = s.t0 + s.h;
                                       return forward ? end < tq : end > tq;
                                   });
        if (it == segments_.end()) --it;
        return (*it)(t);
    }

    Vector final_state() const { return (*this)(t_end_); }

private:
    double t_begin_ = 0.0, t_end_ = 0.0;
    std::vector<Segment> segments_;
};

namespace detail {

inline double error_norm(const Vector& err, const Vector& y0, const Vector& y1, const Options& o) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
        const double sc = o.abs_tol + o.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        acc += (err[i] / sc) * (err[i] / sc);
    }
    return std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(1, err.size())));
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

template <class Sink>
void drive(const Rhs& f, double t0, const Vector& y0, double t1, const Options& opt, Sink&& sink) {
    const double span = t1 - t0;
    if (span == 0.0) return;
    const double dir = span > 0 ? 1.0 : -1.0;
    const Eigen::Index n = y0.size();

    Vector y = y0, k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n);
    f(t0, y, k1);
    if (!all_finite(k1)) throw IntegrationFailure("non-finite derivative at t=" + std::to_string(t0));

    double h;
    if (opt.fixed_step) {
        h = dir * std::min(opt.fixed_step_size, std::abs(span));
    } else if (opt.initial_step > 0) {
        h = dir * std::min(opt.initial_step, std::abs(span));
    } else {
        double d0 = 0.0, d1 = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double sc = opt.abs_tol + opt.rel_tol * std::abs(y[i]);
            d0 += (y[i] / sc) * (y[i] / sc);
            d1 += (k1[i] / sc) * (k1[i] / sc);
        }
        d0 = std::sqrt(d0 / n);
        d1 = std::sqrt(d1 / n);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min({h0, std::abs(span), opt.max_step});
        h0 = std::max(h0, 1e-10 * std::abs(span));
        h = dir * h0;
    }

    double t = t0;
    std::size_t steps = 0;
    const double tiny = 1e-14 * std::max({1.0, std::abs(t0), std::abs(t1)});
    while (dir * (t1 - t) > tiny) {
        if (++steps > opt.max_steps) throw IntegrationFailure("step budget exhausted");
        if (dir * (t + h - t1) > 0) h = t1 - t;
        if (std::abs(h) > opt.max_step) h = dir * opt.max_step;

        bool stage_inadmissible = false;
        std::string stage_reason;
        try {
        ytmp = y + h * a21 * k1;
        f(t + c2 * h, ytmp, k2);
        ytmp = y + h * (a31 * k1 + a32 * k2);
        f(t + c3 * h, ytmp, k3);
        ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
        f(t + c4 * h, ytmp, k4);
        ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        f(t + c5 * h, ytmp, k5);
        ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        f(t + h, ytmp, k6);
        ynew = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        f(t + h, ynew, k7);
        } catch (const InadmissibleState& e) {
            // A trial stage left the admissible set; retry with a shorter step.
            stage_inadmissible = true;
            stage_reason = e.what();
        }

        bool accept = !stage_inadmissible && all_finite(ynew) && all_finite(k7);
        double err = 0.0;
        if (accept && !opt.fixed_step) {
            const Vector e = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            err = error_norm(e, y, ynew, opt);
            accept = err <= 1.0;
        }
        if (!accept) {
            if (opt.fixed_step && stage_inadmissible)
                throw ProfileBlowup("fixed-step integration left the admissible set at t=" +
                                    std::to_string(t) + ": " + stage_reason);
            if (opt.fixed_step)
                throw IntegrationFailure("non-finite state in fixed-step integration at t=" +
                                         std::to_string(t));
            const double fac = (!stage_inadmissible && all_finite(ynew))
                                   ? std::max(0.2, 0.9 * std::pow(err, -0.2))
                                   : 0.25;
            h *= std::min(1.0, fac);
            if (std::abs(h) < tiny) {
                if (stage_inadmissible)
                    throw ProfileBlowup("solution leaves the admissible set near t=" +
                                        std::to_string(t) + ": " + stage_reason);
                throw IntegrationFailure("step size underflow at t=" + std::to_string(t));
            }
            continue;
        }

        Segment seg;
        seg.t0 = t;
        seg.h = h;
        seg.r1 = y;
        seg.r2 = ynew - y;
        seg.r3 = h * k1 - seg.r2;
        seg.r4 = seg.r2 - h * k7 - seg.r3;
        seg.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        sink(seg);

        t += h;
        y = ynew;
        k1 = k7;
        if (!opt.fixed_step) {
            const double fac = err == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2)));
            h *= fac;
        }
    }
}

}  // namespace detail

/** Integrates y' = f(t, y) from t0 to t1, keeping the dense interpolant. */
inline DenseSolution integrate_dense(const Rhs& f, double t0, const Vector& y0, double t1,
                                     const Options& opt = {}) {
    std::vector<Segment> segs;
    detail::drive(f, t0, y0, t1, opt, [&](const Segment& s) { segs.push_back(s); });
    if (segs.empty()) {
        Segment s;
        s.t0 = t0;
        s.h = t1 != t0 ? t1 - t0 : 1.0;
        s.r1 = y0;
        s.r2 = s.r3 = s.r4 = s.r5 = Vector::Zero(y0.size());
        segs.push_back(s);
    }
    return {t0, t1, std::move(segs)};
}

/**
 * Dense solution anchored at an interior point t0 and integrated both ways,
 * covering [t_lo, t_hi].
 */
class TwoSidedSolution {
public:
    TwoSidedSolution() = default;
    TwoSidedSolution(const Rhs& f, double t0, const Vector& y0, double t_lo, double t_hi,
                     const Options& opt = {})
        : t0_(t0), y0_(y0),
          forward_(integrate_dense(f, t0, y0, std::max(t0, t_hi), opt)),
          backward_(integrate_dense(f, t0, y0, std::min(t0, t_lo), opt)) {}

    double t_lo() const { return backward_.t_end(); }
    double t_hi() const { return forward_.t_end(); }
    double anchor() const { return t0_; }

    Vector operator()(double t) const { return t >= t0_ ? forward_(t) : backward_(t); }

private:
    double t0_ = 0.0;
    Vector y0_;
    DenseSolution forward_, backward_;
};

/** End state only; no interpolant is stored. */
inline Vector integrate(const Rhs& f, double t0, const Vector& y0, double t1, const Options& opt = {}) {
    Segment last;
    bool moved = false;
    detail::drive(f, t0, y0, t1, opt, [&](const Segment& s) { last = s, moved = true; });
    return moved ? Vector(last.r1 + last.r2) : y0;
}

/** Samples y at each of `times` (must be monotone in the integration direction). */
inline std::vector<Vector> integrate_at(const Rhs& f, double t0, const Vector& y0,
                                        const std::vector<double>& times, const Options& opt = {}) {
    std::vector<Vector> out;
    out.reserve(times.size());
    if (times.empty()) return out;
    const double t1 = times.back();
    std::size_t next = 0;
    while (next < times.size() && times[next] == t0) out.push_back(y0), ++next;
    if (next == times.size()) return out;
    Segment last;
    last.r1 = y0;
    last.r2 = Vector::Zero(y0.size());
    detail::drive(f, t0, y0, t1, opt, [&](const Segment& s) {
        last = s;
        const double end = s.t0 + s.h;
        const bool forward = s.h > 0;
        while (next < times.size() && (forward ? times[next] <= end : times[next] >= end)) {
            out.push_back(s(times[next]));
            ++next;
        }
    });
    while (out.size() < times.size()) out.push_back(last.r1 + last.r2);
    return out;
}

}  // namespace gtw::ode
