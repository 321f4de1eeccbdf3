#include <gtest/gtest.h>

#include <cmath>

#include "gtw/models/barotropic.hpp"
#include "gtw/models/scalar.hpp"
#include "gtw/moc.hpp"

using namespace gtw;
using models::BarotropicModel;
using models::ForceSpec;
using models::PressureLaw;

namespace {

FieldVector vec(double a, double b) {
    FieldVector v(2);
    v << a, b;
    return v;
}

double r_gamma2(double rho, double u) { return u - 2 * std::sqrt(2 * rho) + 2 * std::sqrt(2.0); }

HyperbolicSystem barotropic(ForceSpec force = ForceSpec::none()) {
    return BarotropicModel(PressureLaw::polytropic(1, 2), std::move(force)).system();
}

RiemannChart fast_chart(const HyperbolicSystem& sys) {
    ChartOptions co;
    co.retained = 1;
    return riemann_chart(sys, 1, vec(1, 0), co);
}

/// Fast speed on the fiber R = 0 of p = rho^2: c = (u + 2 sqrt 2) / 2.
double fast_speed_r0(double u) { return 1.5 * u + std::sqrt(2.0); }

double ramp(double xi) { return 0.5 - 0.2 * std::tanh(xi); }

/// u1_t - 2 u1_x = b(u1), u2_t + (1 + u1) u2_x = 0; R = u1 is the invariant of family 1.
HyperbolicSystem mock(std::function<double(double)> b) {
    HyperbolicSystem sys;
    sys.n = 2;
    sys.names = {"u1", "u2"};
    sys.matrix = [](const FieldVector& q) {
        Matrix a = Matrix::Zero(2, 2);
        a(0, 0) = -2;
        a(1, 1) = 1 + q[0];
        return a;
    };
    sys.source = [b](const FieldVector& q) { return vec(b(q[0]), 0); };
    sys.admissible = [](const FieldVector& q) { return q[0] > -2.5; };
    return sys;
}

RiemannChart mock_chart(const HyperbolicSystem& sys) {
    return RiemannChart::user(
        sys, 1, 1, [](const FieldVector& q) { return FieldVector::Constant(1, q[0]); },
        [](const FieldVector&) {
            Matrix g(1, 2);
            g << 1, 0;
            return g;
        },
        [](const FieldVector& r, double v) { return vec(r[0], v); });
}

FieldVector one(double a) { return FieldVector::Constant(1, a); }

}  // namespace

TEST(Constrained, ConstantDataStaysConstant) {
    const auto sys = barotropic();
    const auto lat = integrate_constrained(sys, ConstraintSet::homogeneous(2, 1), [](double) { return vec(1.5, 0.3); },
                                           linspace(-1, 1, 11), linspace(0, 1, 6));
    const double lam = 0.3 + std::sqrt(3.0);
    for (std::size_t j = 0; j < lat.nt(); ++j)
        for (std::size_t k = 0; k < lat.ns(); ++k) {
            EXPECT_LE((lat.u(j, k) - vec(1.5, 0.3)).cwiseAbs().maxCoeff(), 1e-14);
            EXPECT_NEAR(lat.x(j, k), lat.seeds[k] + lam * lat.times[j], 1e-12);
        }
}

TEST(Constrained, HomogeneousMatchesSimpleWave) {
    const auto sys = barotropic();
    const auto chart = fast_chart(sys);
    const SimpleWave sw(chart, one(0), ramp, -4, 4);
    const auto lat = integrate_constrained(sys, ConstraintSet::homogeneous(2, 1),
                                           [&](double xi) { return chart.state(one(0), ramp(xi)); },
                                           linspace(-2, 2, 41), linspace(0, 2, 11));
    double worst = 0;
    for (std::size_t j = 0; j < lat.nt(); ++j)
        for (std::size_t k = 0; k < lat.ns(); ++k)
            worst = std::max(worst, (lat.u(j, k) - sw(lat.x(j, k), lat.times[j])).cwiseAbs().maxCoeff());
    EXPECT_LE(worst, 1e-8);
}

TEST(Constrained, ScalarLawFollowsTravellingProfile) {
    const auto a = [](double u) { return u; };
    const auto f = [](double u) { return 1 - u; };
    const auto prof = models::scalar_demo(a, f, 0.2, 0.5, -0.05, 3);
    const auto sys = models::scalar_system(a, f);
    const auto lat = integrate_constrained(sys, ConstraintSet{}, [&](double xi) { return one(prof(xi)); },
                                           linspace(0, 2, 41), linspace(0, 0.5, 11));
    double worst = 0;
    for (std::size_t j = 0; j < lat.nt(); ++j)
        for (std::size_t k = 0; k < lat.ns(); ++k)
            worst = std::max(worst, std::abs(lat.u(j, k)[0] - prof.wave(lat.x(j, k), lat.times[j])));
    EXPECT_LE(worst, 1e-8);
}

TEST(Constrained, InitialDataViolatingConstraintIsRejected) {
    const auto sys = barotropic();
    // varying density at constant velocity changes the fast invariant
    const auto bad = [](double xi) { return vec(1 + 0.1 * std::sin(xi), 0); };
    EXPECT_THROW(integrate_constrained(sys, ConstraintSet::homogeneous(2, 1), bad, linspace(-1, 1, 11), linspace(0, 1, 3)),
                 InitialDataViolatesConstraints);
}

TEST(Constrained, CrossingIsReported) {
    const auto sys = barotropic();
    const auto chart = fast_chart(sys);
    const auto u0 = [&](double xi) { return chart.state(one(0), ramp(xi)); };
    const auto seeds = linspace(-2, 2, 81);
    const auto times = linspace(0, 5, 11);
    EXPECT_THROW(integrate_constrained(sys, ConstraintSet::homogeneous(2, 1), u0, seeds, times), CharacteristicCrossing);
    MocOptions opt;
    opt.throw_on_crossing = false;
    const auto lat = integrate_constrained(sys, ConstraintSet::homogeneous(2, 1), u0, seeds, times, opt);
    EXPECT_TRUE(std::isfinite(lat.first_crossing));
    EXPECT_GE(lat.first_crossing, 1 / 0.3);
}

TEST(Constrained, DriftStaysBounded) {
    const auto sys = barotropic();
    const auto chart = fast_chart(sys);
    const auto cs = ConstraintSet::homogeneous(2, 1);
    const auto lat = integrate_constrained(sys, cs, [&](double xi) { return chart.state(one(0), ramp(xi)); },
                                           linspace(-2, 2, 41), linspace(0, 2, 11));
    const auto drift = constraint_drift(sys, cs, lat);
    for (double d : drift) EXPECT_LE(d, 10 * drift.front() + 1e-12);
}

TEST(Constrained, LatticeSolvesThePde) {
    const auto sys = barotropic();
    const auto chart = fast_chart(sys);
    const auto lat = integrate_constrained(sys, ConstraintSet::homogeneous(2, 1),
                                           [&](double xi) { return chart.state(one(0), ramp(xi)); },
                                           linspace(-2, 2, 81), linspace(0, 2, 41));
    EXPECT_LE(lattice_residual(sys, lat, 4).max, 1e-6);
}

TEST(SimpleWave, ConstantProfileNeverBreaks) {
    const SimpleWave sw(fast_chart(barotropic()), one(0), [](double) { return 0.4; }, -1, 1);
    EXPECT_TRUE(std::isinf(sw.breaking_time()));
    EXPECT_LE((sw(0.3 + 2 * 0.5, 0.5) - sw(0.3, 0)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(SimpleWave, ExpansionNeverBreaks) {
    const SimpleWave sw(fast_chart(barotropic()), one(0), [](double xi) { return 0.2 * std::tanh(xi); }, -3, 3);
    EXPECT_TRUE(std::isinf(sw.breaking_time()));
}

TEST(SimpleWave, BreakingTimeMatchesDenseSampling) {
    const SimpleWave sw(fast_chart(barotropic()), one(0), ramp, -4, 4);
    double steepest = 0;
    const auto xs = linspace(-4, 4, 200001);
    for (std::size_t i = 0; i + 1 < xs.size(); ++i)
        steepest = std::min(steepest, (fast_speed_r0(ramp(xs[i + 1])) - fast_speed_r0(ramp(xs[i]))) / (xs[i + 1] - xs[i]));
    const double oracle = -1 / steepest;
    EXPECT_NEAR(sw.breaking_time(), oracle, 0.01 * oracle);
    EXPECT_NEAR(sw.breaking_time(), 1 / 0.3, 1e-4);
}

TEST(SimpleWave, InvariantIsConstant) {
    const auto chart = fast_chart(barotropic());
    const SimpleWave sw(chart, one(0), ramp, -4, 4);
    double worst = 0;
    for (double t : {0.0, 0.7, 1.5, 3.0})
        for (double x : linspace(-1, 1, 21)) worst = std::max(worst, std::abs(chart.invariants(sw(x + 2 * t, t))[0]));
    EXPECT_LE(worst, 1e-8);
}

TEST(SimpleWave, SpeedOnFiberMatchesHandFormula) {
    const SimpleWave sw(fast_chart(barotropic()), one(0), ramp, -4, 4);
    for (double xi : {-2.0, 0.0, 1.3}) EXPECT_NEAR(sw.speed(xi), fast_speed_r0(ramp(xi)), 1e-9);
}

TEST(SimpleWave, CharacteristicsMonotoneBeforeBreaking) {
    const SimpleWave sw(fast_chart(barotropic()), one(0), ramp, -4, 4);
    const auto lat = sw.lattice(linspace(-4, 4, 401), linspace(0, 0.99 * sw.breaking_time(), 20));
    EXPECT_TRUE(std::isinf(lat.first_crossing));
    const auto late = sw.lattice(linspace(-4, 4, 401), {0.0, 1.2 * sw.breaking_time()});
    EXPECT_TRUE(std::isfinite(late.first_crossing));
}

TEST(SimpleWave, PostBreakingQueryThrows) {
    const SimpleWave sw(fast_chart(barotropic()), one(0), ramp, -4, 4);
    EXPECT_THROW(sw(0.0, sw.breaking_time() + 0.1), PostBreakingQuery);
    EXPECT_THROW(sw(100.0, 0.5), DomainError);
}

TEST(SimpleWave, FootSolvesCharacteristicEquation) {
    const SimpleWave sw(fast_chart(barotropic()), one(0), ramp, -4, 4);
    const double t = 2.5;
    for (double x : {-1.0 + 2 * t, 0.5 + 2 * t, 2.0 + 2 * t}) {
        const double xi = sw.foot(x, t);
        EXPECT_NEAR(xi + fast_speed_r0(ramp(xi)) * t, x, 1e-10);
    }
}

TEST(CaseI, ZeroForcingIsSimpleWave) {
    const auto sys = barotropic();
    const auto chart = fast_chart(sys);
    const SimpleWave sw(chart, one(0), ramp, -4, 4);
    const auto sol = case_i_solve(chart, [](const FieldVector& r) { return FieldVector::Zero(r.size()); }, one(0), ramp,
                                  linspace(-2, 2, 21), linspace(0, 2, 11));
    double worst = 0;
    const auto& lat = sol.lattice;
    for (std::size_t j = 0; j < lat.nt(); ++j)
        for (std::size_t k = 0; k < lat.ns(); ++k)
            worst = std::max(worst, (lat.u(j, k) - sw(lat.x(j, k), lat.times[j])).cwiseAbs().maxCoeff());
    EXPECT_LE(worst, 1e-8);
}

TEST(CaseI, LinearDecayOnMockSystem) {
    const auto sys = mock([](double u1) { return -u1; });
    const auto chart = mock_chart(sys);
    const double r0 = 0.4;
    const auto v0 = [](double xi) { return std::sin(xi); };
    MocOptions opt;
    opt.ode.rel_tol = 1e-12;
    opt.ode.abs_tol = 1e-14;
    const auto sol = case_i_solve(chart, [](const FieldVector& r) { return FieldVector(-r); }, one(r0), v0,
                                  linspace(-1, 1, 11), linspace(0, 2, 9), opt);
    double worst = 0;
    const auto& lat = sol.lattice;
    for (std::size_t j = 0; j < lat.nt(); ++j)
        for (std::size_t k = 0; k < lat.ns(); ++k) {
            const double t = lat.times[j], xi = lat.seeds[k];
            const double r = r0 * std::exp(-t);
            const double x = xi + t + r0 * (1 - std::exp(-t));
            worst = std::max({worst, std::abs(lat.x(j, k) - x), (lat.u(j, k) - vec(r, v0(xi))).cwiseAbs().maxCoeff()});
        }
    EXPECT_LE(worst, 1e-9);
    EXPECT_NEAR(sol.invariants(2.0)[0], r0 * std::exp(-2.0), 1e-10);
}

TEST(CaseI, InvariantForcedBarotropicSolvesThePde) {
    const double k = -0.3;
    const auto sys = barotropic(ForceSpec::user([k](double rho, double u) { return k * r_gamma2(rho, u); }));
    const auto chart = fast_chart(sys);
    const auto sol = case_i_solve(chart, [k](const FieldVector& r) { return FieldVector(k * r); }, one(0.2),
                                  [](double xi) { return 0.1 * std::tanh(xi); }, linspace(-2, 2, 81), linspace(0, 1, 41));
    EXPECT_LE(lattice_residual(sys, sol.lattice, 4).max, 1e-6);
    EXPECT_LE(sol.lattice.metadata.at("structural_deviation").get<double>(), 1e-7);
}

TEST(CaseI, WrongForcingIsRejected) {
    const auto sys = barotropic(ForceSpec::user([](double rho, double u) { return -0.3 * r_gamma2(rho, u); }));
    const auto chart = fast_chart(sys);
    EXPECT_THROW(case_i_solve(chart, [](const FieldVector& r) { return FieldVector(-0.6 * r); }, one(0.2),
                              [](double) { return 0.1; }, linspace(-1, 1, 5), linspace(0, 1, 5)),
                 CompatibilityViolation);
}

TEST(CaseII, ZeroFieldsGiveSimpleWave) {
    const auto sys = mock([](double) { return 0.0; });
    const auto chart = mock_chart(sys);
    const auto zero = [](const FieldVector& r) { return FieldVector::Zero(r.size()); };
    const auto v0 = [](double xi) { return std::cos(xi); };
    const auto lat = case_ii_solve(chart, zero, zero, [](double) { return one(0.3); }, v0, linspace(-1, 1, 11),
                                   linspace(0, 1, 5));
    for (std::size_t j = 0; j < lat.nt(); ++j)
        for (std::size_t k = 0; k < lat.ns(); ++k) {
            EXPECT_NEAR(lat.x(j, k), lat.seeds[k] + 1.3 * lat.times[j], 1e-10);
            EXPECT_LE((lat.u(j, k) - vec(0.3, v0(lat.seeds[k]))).cwiseAbs().maxCoeff(), 1e-12);
        }
}

TEST(CaseII, ConstantGradientMatchesHandCharacteristics) {
    const double g = 0.1;
    const auto sys = mock([g](double) { return -2 * g; });
    const auto chart = mock_chart(sys);
    const auto lat = case_ii_solve(
        chart, [](const FieldVector& r) { return FieldVector::Zero(r.size()); },
        [g](const FieldVector& r) { return FieldVector::Constant(r.size(), g); }, [g](double xi) { return one(g * xi); },
        [](double xi) { return 1 + xi * xi; }, linspace(-1, 1, 11), linspace(0, 1, 6));
    double worst = 0;
    for (std::size_t j = 0; j < lat.nt(); ++j)
        for (std::size_t k = 0; k < lat.ns(); ++k) {
            const double t = lat.times[j], xi = lat.seeds[k], r0 = g * xi;
            const double e = std::exp(g * t);
            const double x = xi + (1 + r0) * (e - 1) / g;
            worst = std::max({worst, std::abs(lat.x(j, k) - x),
                              (lat.u(j, k) - vec((1 + r0) * e - 1, 1 + xi * xi)).cwiseAbs().maxCoeff()});
        }
    EXPECT_LE(worst, 1e-9);
}

TEST(CaseII, ProportionalFieldsSolveThePde) {
    const double f = -0.1, g = 0.2;
    const auto sys = mock([=](double u1) { return (f - 2 * g) * (1 + u1); });
    const auto chart = mock_chart(sys);
    const auto fr = [f](const FieldVector& r) { return FieldVector(f * (1 + r.array()).matrix()); };
    const auto gr = [g](const FieldVector& r) { return FieldVector(g * (1 + r.array()).matrix()); };
    const auto r0 = [g](double xi) { return one(1.2 * std::exp(g * xi) - 1); };
    const auto lat = case_ii_solve(chart, fr, gr, r0, [](double xi) { return std::sin(xi); }, linspace(-1, 1, 41),
                                   linspace(0, 1, 21));
    EXPECT_LE(lattice_residual(sys, lat, 4).max, 1e-7);
    ConstraintSet cs{{0}, [g](double, double, const FieldVector& u) { return one(g * (1 + u[0])); }};
    const auto drift = constraint_drift(sys, cs, lat);
    for (double d : drift) EXPECT_LE(d, 10 * drift.front() + 1e-12);
}

TEST(CaseII, CoupledSpeedIsRejected) {
    const auto sys = barotropic();
    const auto chart = fast_chart(sys);
    const auto zero = [](const FieldVector& r) { return FieldVector::Zero(r.size()); };
    EXPECT_THROW(case_ii_solve(chart, zero, zero, [](double) { return one(0); }, [](double) { return 0.1; },
                               linspace(-1, 1, 5), linspace(0, 1, 3)),
                 NotDecoupled);
}

TEST(CaseII, InitialInvariantsMustSatisfyConstraint) {
    const auto sys = mock([](double) { return -0.2; });
    const auto chart = mock_chart(sys);
    EXPECT_THROW(case_ii_solve(
                     chart, [](const FieldVector& r) { return FieldVector::Zero(r.size()); },
                     [](const FieldVector& r) { return FieldVector::Constant(r.size(), 0.1); },
                     [](double xi) { return one(0.3 * xi); }, [](double) { return 0.0; }, linspace(-1, 1, 5),
                     linspace(0, 1, 3)),
                 InitialDataViolatesConstraints);
}
