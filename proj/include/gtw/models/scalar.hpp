#pragma once
/**
 * Scalar balance law  u_t + a(u) u_x = f(u)  and its travelling waves
 * u = U(x - s t), whose profile obeys (a(U) - s) U' = f(U).
 */

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "gtw/ode.hpp"
#include "gtw/system.hpp"

namespace gtw::models {

using ScalarFn = std::function<double(double)>;

inline HyperbolicSystem scalar_system(ScalarFn a, ScalarFn f, std::string name = "u") {
    HyperbolicSystem sys;
    sys.n = 1;
    sys.names = {std::move(name)};
    sys.matrix = [a](const FieldVector& q) { return Matrix::Constant(1, 1, a(q[0])); };
    sys.source = [f](const FieldVector& q) { return FieldVector::Constant(1, f ? f(q[0]) : 0.0); };
    return sys;
}

/** Travelling-wave profile U(sigma) on [sigma_min, sigma_max] with U(0) = u0. */
class ScalarProfile {
public:
    ScalarProfile(ScalarFn a, ScalarFn f, double s, double u0, double sigma_min, double sigma_max,
                  ode::Options opt = {}, double sonic_tol = 1e-8)
        : s_(s), u0_(u0), constant_(!f) {
        if (constant_) return;
        double closest = std::numeric_limits<double>::infinity(), closest_sigma = 0.0, closest_u = u0;
        auto sonic = [&](double sigma, double u) {
            std::ostringstream os;
            os << "sonic point a(U) = s reached at sigma ~ " << sigma << " (U = " << u << ")";
            return SonicPoint(sigma, os.str());
        };
        auto rhs = [&, a, f, s, sonic_tol](double sigma, const ode::Vector& y, ode::Vector& dy) {
            const double gap = a(y[0]) - s;
            if (std::abs(gap) < closest) {
                closest = std::abs(gap);
                closest_sigma = sigma;
                closest_u = y[0];
            }
            if (std::abs(gap) <= sonic_tol * (1 + std::abs(s))) throw sonic(sigma, y[0]);
            dy.resize(1);
            dy[0] = f(y[0]) / gap;
        };
        try {
            profile_ = ode::TwoSidedSolution(rhs, 0.0, ode::Vector::Constant(1, u0), sigma_min, sigma_max, opt);
        } catch (const IntegrationFailure&) {
            // U' ~ 1/(a(U) - s) stalls the stepper shortly before the locus is reached
            if (closest <= 1e-3 * (1 + std::abs(s))) throw sonic(closest_sigma, closest_u);
            throw;
        }
    }

    double operator()(double sigma) const { return constant_ ? u0_ : profile_(sigma)[0]; }
    double speed() const { return s_; }

    /// u(x, t) = U(x - s t)
    double wave(double x, double t) const { return (*this)(x - s_ * t); }

private:
    double s_, u0_;
    bool constant_;
    ode::TwoSidedSolution profile_;
};

/** Travelling wave of the scalar law; a null `f` denotes the homogeneous case. */
inline ScalarProfile scalar_demo(ScalarFn a, ScalarFn f, double s, double u0, double sigma_min,
                                 double sigma_max, ode::Options opt = {}) {
    return ScalarProfile(std::move(a), std::move(f), s, u0, sigma_min, sigma_max, opt);
}

}  // namespace gtw::models
