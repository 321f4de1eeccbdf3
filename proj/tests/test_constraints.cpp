#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gtw/constraints.hpp"
#include "gtw/models/barotropic.hpp"
#include "gtw/reduction.hpp"

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

ChartOptions keep_u() {
    ChartOptions co;
    co.retained = 1;
    return co;
}

/// Fast-family invariant of p = rho^2 with R(1, u) = u.
double r_gamma2(double rho, double u) { return u - 2 * std::sqrt(2 * rho) + 2 * std::sqrt(2.0); }

HyperbolicSystem forced_by_invariant(double k) {
    return BarotropicModel(PressureLaw::polytropic(1, 2),
                           ForceSpec::user([k](double r, double u) { return k * r_gamma2(r, u); }))
        .system();
}

HyperbolicSystem unforced(PressureLaw law = PressureLaw::polytropic(1, 2)) {
    return BarotropicModel(std::move(law), ForceSpec::none()).system();
}

/// A_11 = u1, A_12 = 1, A_22 = 2 + u2: eigenvectors depend on the state.
HyperbolicSystem triangular() {
    HyperbolicSystem sys;
    sys.n = 2;
    sys.names = {"u1", "u2"};
    sys.matrix = [](const FieldVector& q) {
        Matrix a(2, 2);
        a << q[0], 1, 0, 2 + q[1];
        return a;
    };
    sys.admissible = [](const FieldVector& q) { return 2 + q[1] - q[0] > 0.5; };
    return sys;
}

std::vector<FieldVector> states(int count, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> rho(0.3, 3), u(-1, 1);
    std::vector<FieldVector> out;
    for (int k = 0; k < count; ++k) out.push_back(vec(rho(rng), u(rng)));
    return out;
}

double max_abs(const std::pair<FieldVector, FieldVector>& r) {
    return std::max(r.first.cwiseAbs().maxCoeff(), r.second.cwiseAbs().maxCoeff());
}

}  // namespace

TEST(ConstraintSet, Validation) {
    ConstraintSet cs{{0, 1}, {}};
    EXPECT_THROW(cs.validate(2), ConfigError);
    ConstraintSet dup{{0, 0}, {}};
    EXPECT_THROW(dup.validate(3), ConfigError);
    EXPECT_EQ(ConstraintSet::homogeneous(3, 1).families, (std::vector<std::size_t>{0, 2}));
}

TEST(Involutiveness, HomogeneousIsIdenticallySatisfied) {
    const auto hom = ConstraintSet::homogeneous(2, 1);
    for (const auto& sys : {unforced(), unforced(PressureLaw::isothermal(1.2)), unforced(PressureLaw::polytropic(2, 1.4))})
        for (const auto& u : states(20, 1)) EXPECT_LE(max_abs(involutiveness_residual(sys, hom, u)), 1e-12);
    const auto tri = triangular();
    for (const auto& u : {vec(0.1, 0.3), vec(-1, 0.5), vec(0.4, -0.2)}) {
        EXPECT_LE(max_abs(involutiveness_residual(tri, ConstraintSet::homogeneous(2, 0), u)), 1e-12);
        EXPECT_LE(max_abs(involutiveness_residual(tri, ConstraintSet::homogeneous(2, 1), u)), 1e-12);
    }
}

TEST(Involutiveness, PerturbedConstraintDetected) {
    ConstraintSet cs{{0}, [](double, double, const FieldVector&) { return FieldVector::Constant(1, 0.1); }};
    double worst = 0;
    for (const auto& u : states(20, 2)) worst = std::max(worst, max_abs(involutiveness_residual(unforced(), cs, u)));
    EXPECT_GT(worst, 1e-3);
}

TEST(Involutiveness, CaseOneDataIsInvolutive) {
    // q = 0 with a force depending on the invariant alone
    const auto sys = forced_by_invariant(-0.3);
    for (const auto& u : states(20, 3))
        EXPECT_LE(max_abs(involutiveness_residual(sys, ConstraintSet::homogeneous(2, 1), u)), 1e-7);
}

TEST(Involutiveness, DensityForceIsNotInvolutive) {
    const auto sys = BarotropicModel(PressureLaw::polytropic(1, 2), ForceSpec::user([](double r, double) { return -0.3 * r; })).system();
    double worst = 0;
    for (const auto& u : states(20, 4))
        worst = std::max(worst, max_abs(involutiveness_residual(sys, ConstraintSet::homogeneous(2, 1), u)));
    EXPECT_GT(worst, 1e-3);
}

TEST(Involutiveness, ExplicitCoordinateDependence) {
    // q depending on x and t enters through q_t + lambda q_x
    ConstraintSet a{{0}, [](double x, double t, const FieldVector&) { return FieldVector::Constant(1, 1e-3 * (x + 2 * t)); }};
    ConstraintSet b{{0}, [](double x, double t, const FieldVector&) { return FieldVector::Constant(1, 1e-3 * (x + 2 * t) + 1e-3); }};
    const FieldVector u = vec(1.2, 0.3);
    const auto sd = decompose(unforced(), u);
    const auto ra = involutiveness_residual(unforced(), a, u, 0.0, 0.0);
    // at x = t = 0 the state-independent part of res1 is q_t + lambda^0 q_x
    EXPECT_NEAR(ra.first[0], 1e-3 * (2 + sd.lambda(0)), 1e-9);
    const auto rb = involutiveness_residual(unforced(), b, u, 0.0, 0.0);
    EXPECT_GT(std::abs(rb.first[0] - ra.first[0]), 1e-7);
}

TEST(Involutiveness, TravellingWaveConstraintAloneIsNotInvolutive) {
    // l^0 . U_x = pi_0 holds on every generalized travelling wave, but on its own
    // it does not close: the wave needs the full set U_t + s U_x = F.
    const models::GtwClosedForm cf({0.5, 1, 0.1, 1}, PressureLaw::polytropic(1, 2));
    const auto sys = cf.model().system();
    const TravellingFrame fr{1.0, [&](const FieldVector& q) { return cf.constraint_source(q); }, {}};
    ConstraintSet cs{{0}, [&](double, double, const FieldVector& q) {
                         return FieldVector::Constant(1, pi_coefficients(sys, fr, q).pi[0]);
                     }};
    // the constraint is satisfied along the closed-form wave
    for (double x : {-1.0, 0.0, 1.5}) {
        const auto j = cf.jet(x, 0.4);
        EXPECT_NEAR(decompose(sys, j.u).l(0).dot(j.ux), cs.values(x, 0.4, j.u)[0], 1e-12);
    }
    double worst = 0;
    for (const auto& u : {vec(0.5, 1.3), vec(1.0, 1.3), vec(2.0, 1.3)})
        worst = std::max(worst, max_abs(involutiveness_residual(sys, cs, u)));
    EXPECT_GT(worst, 1e-3);
}

TEST(RiemannChart, PolytropicMatchesClosedForm) {
    for (double gamma : {1.4, 2.0, 3.0}) {
        const auto law = PressureLaw::polytropic(1, gamma);
        const auto chart = riemann_chart(unforced(law), 1, vec(1, 0), keep_u());
        auto c = [gamma](double r) { return std::sqrt(gamma * std::pow(r, gamma - 1)); };
        for (const auto& u : states(10, 5)) {
            const double exact = u[1] - 2 * (c(u[0]) - c(1)) / (gamma - 1);
            EXPECT_NEAR(chart.invariants(u)[0], exact, 1e-9) << "gamma " << gamma;
            EXPECT_LE(chart.invariance_defect(u).cwiseAbs().maxCoeff(), 1e-9);
        }
    }
}

TEST(RiemannChart, IsothermalLogarithm) {
    const double a = 0.7;
    const auto chart = riemann_chart(unforced(PressureLaw::isothermal(a)), 1, vec(1, 0), keep_u());
    for (const auto& u : states(10, 6)) {
        EXPECT_NEAR(chart.invariants(u)[0], u[1] - a * std::log(u[0]), 1e-9);
        EXPECT_LE(chart.invariance_defect(u).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(RiemannChart, SlowFamily) {
    const auto chart = riemann_chart(unforced(), 0, vec(1, 0), keep_u());
    for (const auto& u : states(10, 7)) {
        EXPECT_NEAR(chart.invariants(u)[0], u[1] + 2 * std::sqrt(2 * u[0]) - 2 * std::sqrt(2.0), 1e-9);
        EXPECT_LE(chart.invariance_defect(u).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(RiemannChart, DiagonalConstantSpeeds) {
    HyperbolicSystem sys;
    sys.n = 2;
    sys.names = {"u1", "u2"};
    sys.matrix = [](const FieldVector&) {
        Matrix a = Matrix::Zero(2, 2);
        a(0, 0) = -1;
        a(1, 1) = 3;
        return a;
    };
    const auto chart = riemann_chart(sys, 1, vec(0, 0));
    for (const auto& u : {vec(0.3, -2), vec(-5, 7), vec(2, 2)}) EXPECT_NEAR(chart.invariants(u)[0], u[0], 1e-12);
}

TEST(RiemannChart, SigmaAndInverse) {
    const auto chart = riemann_chart(unforced(), 1, vec(1, 0), keep_u());
    for (const auto& u : states(10, 8)) {
        // grad R = sigma l^0 with sigma = -2c/rho
        const double c = std::sqrt(2 * u[0]);
        EXPECT_NEAR(chart.sigma(u)(0, 0), -2 * c / u[0], 1e-8);
        const FieldVector back = chart.state(chart.invariants(u), u[1]);
        EXPECT_LE((back - u).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_GT(std::abs(chart.jacobian(u).determinant()), 1e-10);
    }
}

TEST(RiemannChart, UserChartNewtonInverse) {
    const auto sys = unforced();
    const auto chart = RiemannChart::user(
        sys, 1, 1, [](const FieldVector& q) { return FieldVector::Constant(1, r_gamma2(q[0], q[1])); }, {}, {}, vec(1, 0));
    const FieldVector u = vec(2.3, -0.4);
    EXPECT_LE((chart.state(chart.invariants(u), u[1]) - u).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE(chart.invariance_defect(u).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(RiemannChart, LargerSystemsNeedUserInvariants) {
    HyperbolicSystem sys;
    sys.n = 3;
    sys.names = {"a", "b", "c"};
    sys.matrix = [](const FieldVector&) { return Matrix(Eigen::Vector3d(1, 2, 3).asDiagonal()); };
    EXPECT_THROW(riemann_chart(sys, 2, FieldVector::Zero(3)), ConfigError);
}

TEST(StructuralCaseI, UnforcedHoldsWithZeroF) {
    const auto chart = riemann_chart(unforced(), 1, vec(1, 0), keep_u());
    std::vector<FieldVector> rn;
    for (double r : linspace(-0.5, 0.5, 5)) rn.push_back(FieldVector::Constant(1, r));
    const auto rep = structural_case_i(chart, rn, linspace(0.2, 1.8, 5));
    EXPECT_TRUE(rep.holds);
    for (const auto& f : rep.f_values) EXPECT_EQ(f[0], 0.0);
}

TEST(StructuralCaseI, DensityForceFailsWithVariation) {
    const auto sys = BarotropicModel(PressureLaw::polytropic(1, 2), ForceSpec::user([](double r, double) { return -0.3 * r; })).system();
    const auto chart = riemann_chart(sys, 1, vec(1, 0), keep_u());
    std::vector<FieldVector> rn;
    for (double r : linspace(-1, 0.5, 7)) rn.push_back(FieldVector::Constant(1, r));
    const auto rep = structural_case_i(chart, rn, {-0.5, 0, 0.5, 1.0});
    EXPECT_FALSE(rep.holds);
    EXPECT_GT(rep.max_variation(), 0.1);
}

TEST(StructuralCaseI, ManufacturedSourceRoundTrip) {
    // f = F(R(U)) pushed through the chart gives sigma l^0 . B = F(R)
    const auto sys = BarotropicModel(PressureLaw::polytropic(1, 2),
                                     ForceSpec::user([](double r, double u) { return std::sin(r_gamma2(r, u)); }))
                         .system();
    const auto chart = riemann_chart(sys, 1, vec(1, 0), keep_u());
    std::vector<FieldVector> rn;
    for (double r : linspace(-0.5, 0.5, 11)) rn.push_back(FieldVector::Constant(1, r));
    const auto rep = structural_case_i(chart, rn, linspace(0.2, 1.8, 9));
    EXPECT_TRUE(rep.holds);
    EXPECT_LE(rep.max_variation(), 1e-8);
    for (std::size_t k = 0; k < rn.size(); ++k) EXPECT_NEAR(rep.f_values[k][0], std::sin(rn[k][0]), 1e-8);
    const auto table = rep.table();
    EXPECT_NEAR(table(0.05), std::sin(0.05), 1e-4);
}

TEST(StructuralCaseII, ProportionalFieldsCommute) {
    const InvariantField f = [](const FieldVector& r) { return FieldVector(r.array().sin()); };
    const InvariantField g = [](const FieldVector& r) { return FieldVector(2.5 * r.array().sin()); };
    for (double r : {-1.0, 0.2, 3.0}) EXPECT_LE(case_ii_bracket(f, g, FieldVector::Constant(1, r)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(StructuralCaseII, HandExpandedBracket) {
    // F = (R1, 0), G = (R1^2, 0):  dG/dR F - dF/dR G = (2 R1 R1 - R1^2, 0) = (R1^2, 0)
    const InvariantField f = [](const FieldVector& r) { return vec(r[0], 0); };
    const InvariantField g = [](const FieldVector& r) { return vec(r[0] * r[0], 0); };
    for (const auto& r : {vec(0.5, 1), vec(-2, 3), vec(1.5, -1)}) {
        const FieldVector b = case_ii_bracket(f, g, r);
        EXPECT_NEAR(b[0], r[0] * r[0], 1e-9);
        EXPECT_NEAR(b[1], 0.0, 1e-12);
    }
    // a genuinely two-invariant pair: F = (R2, R1), G = (R1 R2, 1)
    const InvariantField f2 = [](const FieldVector& r) { return vec(r[1], r[0]); };
    const InvariantField g2 = [](const FieldVector& r) { return vec(r[0] * r[1], 1); };
    const FieldVector r = vec(0.7, -1.3);
    // dG F = (R2 R2 + R1 R1, 0);  dF G = (1, R1 R2)
    const FieldVector b = case_ii_bracket(f2, g2, r);
    EXPECT_NEAR(b[0], r[1] * r[1] + r[0] * r[0] - 1, 1e-9);
    EXPECT_NEAR(b[1], -r[0] * r[1], 1e-9);
}

TEST(StructuralCaseII, ZeroFHasZeroBracket) {
    const InvariantField f = [](const FieldVector& r) { return FieldVector(FieldVector::Zero(r.size())); };
    const InvariantField g = [](const FieldVector& r) { return FieldVector(r.array().exp()); };
    EXPECT_EQ(case_ii_bracket(f, g, vec(0.3, 0.4)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(StructuralCaseII, DecoupledMockHolds) {
    // A = diag(-2, 1 + u1), B = (-2 g, 0): R = u1, sigma = 1, q = G = g, F = sigma (l.B - lambda q) = 0
    const double gconst = 0.1;
    HyperbolicSystem sys;
    sys.n = 2;
    sys.names = {"u1", "u2"};
    sys.matrix = [](const FieldVector& q) {
        Matrix a = Matrix::Zero(2, 2);
        a(0, 0) = -2;
        a(1, 1) = 1 + q[0];
        return a;
    };
    sys.source = [gconst](const FieldVector&) { return vec(-2 * gconst, 0); };
    sys.admissible = [](const FieldVector& q) { return 1 + q[0] > -2 + 0.1; };
    const auto chart = riemann_chart(sys, 1, vec(1, 0), keep_u());
    const InvariantField f = [](const FieldVector& r) { return FieldVector(FieldVector::Zero(r.size())); };
    const InvariantField g = [gconst](const FieldVector& r) { return FieldVector(FieldVector::Constant(r.size(), gconst)); };
    std::vector<FieldVector> rn;
    for (double r : linspace(-0.5, 0.5, 5)) rn.push_back(FieldVector::Constant(1, r));
    const auto rep = structural_case_ii(chart, f, g, rn, linspace(-1, 1, 5));
    EXPECT_TRUE(rep.holds);
    EXPECT_LE(rep.max_residual, 1e-10);

    const InvariantField wrong = [](const FieldVector& r) { return FieldVector(FieldVector::Constant(r.size(), 0.3)); };
    EXPECT_FALSE(structural_case_ii(chart, wrong, g, rn, linspace(-1, 1, 5)).holds);
}

TEST(RiemannCompat, HomogeneousIsZero) {
    for (auto law : {PressureLaw::polytropic(1, 2), PressureLaw::isothermal(1)}) {
        const auto sys = unforced(law);
        const auto chart = riemann_chart(sys, 1, vec(1, 0), keep_u());
        for (const auto& u : states(20, 9)) EXPECT_LE(max_abs(riemann_compat_residual(chart, ConstraintSet::homogeneous(2, 1), u)), 1e-12);
    }
}

TEST(RiemannCompat, CaseOneDataIsConsistent) {
    const auto sys = forced_by_invariant(-0.3);
    const auto chart = riemann_chart(sys, 1, vec(1, 0), keep_u());
    for (const auto& u : states(20, 10))
        EXPECT_LE(max_abs(riemann_compat_residual(chart, ConstraintSet::homogeneous(2, 1), u)), 1e-7);
}

TEST(RiemannCompat, ViolatingConstraintReported) {
    const auto sys = unforced();
    const auto chart = riemann_chart(sys, 1, vec(1, 0), keep_u());
    ConstraintSet cs{{0}, [](double, double, const FieldVector& q) { return FieldVector::Constant(1, 0.1 + 0.2 * q[1] * q[0]); }};
    double worst = 0;
    for (const auto& u : states(20, 11)) worst = std::max(worst, riemann_compat_residual(chart, cs, u).first.cwiseAbs().maxCoeff());
    EXPECT_GT(worst, 1e-3);
}

TEST(RiemannCompat, PerturbedHomogeneousDetected) {
    const auto chart = riemann_chart(unforced(), 1, vec(1, 0), keep_u());
    ConstraintSet cs{{0}, [](double, double, const FieldVector&) { return FieldVector::Constant(1, 0.1); }};
    double worst = 0;
    for (const auto& u : states(20, 12)) worst = std::max(worst, max_abs(riemann_compat_residual(chart, cs, u)));
    EXPECT_GT(worst, 1e-3);
}

TEST(RiemannCompatProperty, FirstConditionLinearInQ) {
    const auto chart = riemann_chart(unforced(), 1, vec(1, 0), keep_u());
    auto make = [](double scale) {
        return ConstraintSet{{0}, [scale](double, double, const FieldVector& q) {
                                 return FieldVector::Constant(1, scale * (0.3 * q[0] - 0.1 * q[1] * q[1]));
                             }};
    };
    for (const auto& u : states(10, 13)) {
        const double one = riemann_compat_residual(chart, make(1), u).first[0];
        const double two = riemann_compat_residual(chart, make(2), u).first[0];
        EXPECT_NEAR(two, 2 * one, 1e-8 * (1 + std::abs(one)));
    }
}
