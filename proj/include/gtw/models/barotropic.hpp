#pragma once
/**
 * Barotropic Euler equations
 *
 *     rho_t + u rho_x + rho u_x          = 0
 *     u_t   + u u_x   + (c^2/rho) rho_x  = f(rho, u),    c^2 = p'(rho)
 *
 * with the force family that admits generalized travelling waves,
 *
 *     f = k1 (u - s) + k1 (c beta / rho) ((u - s)^2 - c^2),
 *
 * and the closed-form solution built on the profile dR/dsigma = -k1 c(R) beta(R).
 */

#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>

#include "gtw/ode.hpp"
#include "gtw/system.hpp"

namespace gtw::models {

class PressureLaw {
public:
    enum class Kind { polytropic, isothermal, user };

    static PressureLaw polytropic(double kappa, double gamma) {
        if (!(kappa > 0) || !(gamma > 1)) throw ConfigError("polytropic law needs kappa > 0 and gamma > 1");
        PressureLaw law;
        law.kind_ = Kind::polytropic;
        law.kappa_ = kappa;
        law.gamma_ = gamma;
        return law;
    }

    static PressureLaw isothermal(double a) {
        if (!(a > 0)) throw ConfigError("isothermal law needs a > 0");
        PressureLaw law;
        law.kind_ = Kind::isothermal;
        law.a_ = a;
        return law;
    }

    /// p and p' are required; p'' is differenced when absent.
    static PressureLaw user(std::function<double(double)> p, std::function<double(double)> dp,
                            std::function<double(double)> d2p = {}) {
        PressureLaw law;
        law.kind_ = Kind::user;
        law.p_ = std::move(p);
        law.dp_ = std::move(dp);
        law.d2p_ = std::move(d2p);
        return law;
    }

    Kind kind() const { return kind_; }
    double kappa() const { return kappa_; }
    double gamma() const { return gamma_; }
    double isothermal_speed() const { return a_; }

    double pressure(double rho) const {
        switch (kind_) {
            case Kind::polytropic: return kappa_ * std::pow(rho, gamma_);
            case Kind::isothermal: return a_ * a_ * rho;
            case Kind::user: return p_(rho);
        }
        return 0.0;
    }

    double dpdrho(double rho) const {
        switch (kind_) {
            case Kind::polytropic: return kappa_ * gamma_ * std::pow(rho, gamma_ - 1);
            case Kind::isothermal: return a_ * a_;
            case Kind::user: return dp_(rho);
        }
        return 0.0;
    }

    double sound_speed(double rho) const {
        const double dp = dpdrho(rho);
        if (!(dp > 0)) {
            std::ostringstream os;
            os << "p'(rho) = " << dp << " <= 0 at rho = " << rho << ": sound speed is not real";
            throw ComplexEigenvalues(os.str());
        }
        return std::sqrt(dp);
    }

    /// dc/drho
    double sound_speed_slope(double rho) const {
        switch (kind_) {
            case Kind::polytropic: return 0.5 * (gamma_ - 1) * sound_speed(rho) / rho;
            case Kind::isothermal: return 0.0;
            case Kind::user: {
                double d2;
                if (d2p_) {
                    d2 = d2p_(rho);
                } else {
                    const double h = 1e-5 * std::max(1e-3, std::abs(rho));
                    d2 = (dp_(rho + h) - dp_(rho - h)) / (2 * h);
                }
                return d2 / (2 * sound_speed(rho));
            }
        }
        return 0.0;
    }

    std::string describe() const {
        std::ostringstream os;
        switch (kind_) {
            case Kind::polytropic: os << "polytropic(kappa=" << kappa_ << ", gamma=" << gamma_ << ")"; break;
            case Kind::isothermal: os << "isothermal(a=" << a_ << ")"; break;
            case Kind::user: os << "user"; break;
        }
        return os.str();
    }

private:
    Kind kind_ = Kind::polytropic;
    double kappa_ = 1.0, gamma_ = 2.0, a_ = 1.0;
    std::function<double(double)> p_, dp_, d2p_;
};

/** The free function beta(rho) of the force family. */
struct Beta {
    enum class Kind { rho_over_c, constant, user };
    Kind kind = Kind::rho_over_c;
    double value = 1.0;
    std::function<double(double)> fn;

    static Beta rho_over_c() { return {}; }
    static Beta constant(double b) { return {Kind::constant, b, {}}; }
    static Beta user(std::function<double(double)> f) { return {Kind::user, 0.0, std::move(f)}; }

    double operator()(double rho, double c) const {
        switch (kind) {
            case Kind::rho_over_c: return rho / c;
            case Kind::constant: return value;
            case Kind::user: return fn(rho);
        }
        return 0.0;
    }
};

struct ForceSpec {
    enum class Kind { none, gtw_family, user };
    Kind kind = Kind::none;
    double k1 = 0.0, s = 0.0;
    Beta beta;
    std::function<double(double, double)> f;                  ///< user f(rho, u)
    std::function<FieldVector(double, double)> gradient;       ///< optional (df/drho, df/du)

    static ForceSpec none() { return {}; }
    static ForceSpec gtw_family(double k1, double s, Beta beta = Beta::rho_over_c()) {
        ForceSpec fs;
        fs.kind = Kind::gtw_family;
        fs.k1 = k1;
        fs.s = s;
        fs.beta = std::move(beta);
        return fs;
    }
    static ForceSpec user(std::function<double(double, double)> f,
                          std::function<FieldVector(double, double)> grad = {}) {
        ForceSpec fs;
        fs.kind = Kind::user;
        fs.f = std::move(f);
        fs.gradient = std::move(grad);
        return fs;
    }
};

/** Closed-form characteristic data of the barotropic system. */
inline SpectralDecomposition barotropic_eigenstructure(double rho, double u, const PressureLaw& law) {
    if (!(rho > 0)) {
        std::ostringstream os;
        os << "nonpositive density rho = " << rho;
        throw InadmissibleState(os.str());
    }
    const double c = law.sound_speed(rho);
    SpectralDecomposition sd;
    sd.lambdas.resize(2);
    sd.lambdas << u - c, u + c;
    sd.left.resize(2, 2);
    sd.left << 0.5, -0.5 * rho / c,
               0.5,  0.5 * rho / c;
    sd.right.resize(2, 2);
    sd.right << 1.0, 1.0,
                -c / rho, c / rho;
    return sd;
}

class BarotropicModel {
public:
    BarotropicModel(PressureLaw law, ForceSpec force, double rho_min = 1e-10)
        : law_(std::move(law)), force_(std::move(force)), rho_min_(rho_min) {}

    const PressureLaw& pressure() const { return law_; }
    const ForceSpec& force() const { return force_; }
    double rho_min() const { return rho_min_; }

    double sound_speed(double rho) const { return law_.sound_speed(rho); }

    double force_value(double rho, double u) const {
        switch (force_.kind) {
            case ForceSpec::Kind::none: return 0.0;
            case ForceSpec::Kind::user: return force_.f(rho, u);
            case ForceSpec::Kind::gtw_family: {
                const double c = law_.sound_speed(rho);
                const double w = u - force_.s;
                const double phi = c * force_.beta(rho, c) / rho;
                return force_.k1 * w + force_.k1 * phi * (w * w - c * c);
            }
        }
        return 0.0;
    }

    /// (df/drho, df/du)
    FieldVector force_gradient(double rho, double u) const {
        FieldVector g = FieldVector::Zero(2);
        switch (force_.kind) {
            case ForceSpec::Kind::none: break;
            case ForceSpec::Kind::user:
                if (force_.gradient) return force_.gradient(rho, u);
                {
                    const double hr = 1e-6 * std::max(1.0, rho), hu = 1e-6 * std::max(1.0, std::abs(u));
                    g << (force_.f(rho + hr, u) - force_.f(rho - hr, u)) / (2 * hr),
                        (force_.f(rho, u + hu) - force_.f(rho, u - hu)) / (2 * hu);
                }
                break;
            case ForceSpec::Kind::gtw_family: {
                const double k1 = force_.k1;
                const double c = law_.sound_speed(rho);
                const double dc = law_.sound_speed_slope(rho);
                const double w = u - force_.s;
                auto phi_of = [&](double r) {
                    const double cr = law_.sound_speed(r);
                    return cr * force_.beta(r, cr) / r;
                };
                const double phi = phi_of(rho);
                double dphi = 0.0;
                if (force_.beta.kind == Beta::Kind::constant) {
                    dphi = force_.beta.value * (dc * rho - c) / (rho * rho);
                } else if (force_.beta.kind == Beta::Kind::user) {
                    const double h = 1e-6 * std::max(1.0, rho);
                    dphi = (phi_of(rho + h) - phi_of(rho - h)) / (2 * h);
                }
                g << k1 * (dphi * (w * w - c * c) - 2 * phi * c * dc), k1 + 2 * k1 * phi * w;
                break;
            }
        }
        return g;
    }

    HyperbolicSystem system() const {
        HyperbolicSystem sys;
        sys.n = 2;
        sys.names = {"rho", "u"};
        const PressureLaw law = law_;
        const double floor = rho_min_;
        const BarotropicModel self = *this;
        sys.matrix = [law](const FieldVector& q) {
            const double c = law.sound_speed(q[0]);
            Matrix a(2, 2);
            a << q[1], q[0], c * c / q[0], q[1];
            return a;
        };
        sys.source = [self](const FieldVector& q) {
            FieldVector b(2);
            b << 0.0, self.force_value(q[0], q[1]);
            return b;
        };
        sys.source_jacobian = [self](const FieldVector& q) {
            Matrix j = Matrix::Zero(2, 2);
            j.row(1) = self.force_gradient(q[0], q[1]).transpose();
            return j;
        };
        sys.eigenstructure = [law](const FieldVector& q) { return barotropic_eigenstructure(q[0], q[1], law); };
        sys.admissible = [floor](const FieldVector& q) { return q[0] > floor; };
        std::ostringstream os;
        os << "rho > " << rho_min_;
        sys.admissible_description = os.str();
        return sys;
    }

private:
    PressureLaw law_;
    ForceSpec force_;
    double rho_min_;
};

/** Parameters of the generalized travelling wave  rho = R(x - s t),  u = s + a0 e^{k1 t} / R. */
struct GtwParameters {
    double k1 = 0.5;
    double s = 1.0;
    double a0 = 0.1;
    double rho0 = 1.0;
};

/** Value and first partial derivatives of a field at a point. */
struct FieldJet {
    FieldVector u, ux, ut;
};

/**
 * Closed-form generalized travelling wave of the barotropic model.
 *
 * With beta = rho/c the profile is R = rho0 exp(-k1 sigma) for every pressure
 * law, and substituting back gives
 *
 *     u = s + (a0/rho0) exp(k1 (x - (s - 1) t)).
 *
 * Other beta choices integrate dR/dsigma = -k1 c(R) beta(R) numerically with
 * dense output over [sigma_min, sigma_max].
 */
class GtwClosedForm {
public:
    GtwClosedForm(GtwParameters p, PressureLaw law, Beta beta = Beta::rho_over_c(),
                  double sigma_min = -20.0, double sigma_max = 20.0, ode::Options opt = profile_options())
        : p_(p), law_(std::move(law)), beta_(std::move(beta)) {
        if (!(p_.rho0 > 0)) throw ConfigError("rho0 must be positive");
        if (beta_.kind != Beta::Kind::rho_over_c && p_.k1 != 0.0) {
            const PressureLaw law_copy = law_;
            const Beta beta_copy = beta_;
            const double k1 = p_.k1;
            auto rhs = [law_copy, beta_copy, k1](double, const ode::Vector& y, ode::Vector& dy) {
                if (!(y[0] > 0) || !std::isfinite(y[0]))
                    throw InadmissibleState("profile density left (0, inf)");
                const double c = law_copy.sound_speed(y[0]);
                dy.resize(1);
                dy[0] = -k1 * c * beta_copy(y[0], c);
            };
            try {
                profile_ = ode::TwoSidedSolution(rhs, 0.0, ode::Vector::Constant(1, p_.rho0), sigma_min,
                                                 sigma_max, opt);
            } catch (const IntegrationFailure& e) {
                throw ProfileBlowup(std::string("density profile blows up: ") + e.what());
            }
        }
    }

    static ode::Options profile_options() {
        ode::Options o;
        o.abs_tol = 1e-12;
        o.rel_tol = 1e-10;
        return o;
    }

    const GtwParameters& parameters() const { return p_; }
    const PressureLaw& pressure() const { return law_; }
    const Beta& beta() const { return beta_; }
    bool analytic_profile() const { return !profile_.has_value(); }

    double profile(double sigma) const {
        if (!profile_) return p_.rho0 * std::exp(-p_.k1 * sigma);
        const double r = (*profile_)(sigma)[0];
        if (!(r > 0)) throw ProfileBlowup("density profile is not positive at sigma=" + std::to_string(sigma));
        return r;
    }

    /// dR/dsigma, exact given R
    double profile_slope(double sigma) const {
        const double r = profile(sigma);
        const double c = law_.sound_speed(r);
        return -p_.k1 * c * beta_(r, c);
    }

    FieldVector state(double x, double t) const { return jet(x, t).u; }

    FieldJet jet(double x, double t) const {
        const double sigma = x - p_.s * t;
        const double r = profile(sigma);
        const double dr = profile_slope(sigma);
        const double g = p_.a0 * std::exp(p_.k1 * t);
        FieldJet j;
        j.u.resize(2);
        j.ux.resize(2);
        j.ut.resize(2);
        j.u << r, p_.s + g / r;
        j.ux << dr, -g * dr / (r * r);
        j.ut << -p_.s * dr, p_.k1 * g / r + p_.s * g * dr / (r * r);
        return j;
    }

    /// F(U) = (0, k1 (u - s)) of the constraint U_t + s U_x = F(U)
    FieldVector constraint_source(const FieldVector& q) const {
        FieldVector f(2);
        f << 0.0, p_.k1 * (q[1] - p_.s);
        return f;
    }

    BarotropicModel model() const { return {law_, ForceSpec::gtw_family(p_.k1, p_.s, beta_)}; }

private:
    GtwParameters p_;
    PressureLaw law_;
    Beta beta_;
    std::optional<ode::TwoSidedSolution> profile_;
};

inline FieldVector gtw_exact_solution(const GtwClosedForm& cf, double x, double t) { return cf.state(x, t); }

}  // namespace gtw::models
