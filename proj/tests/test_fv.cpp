#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gtw/constraints.hpp"
#include "gtw/fv.hpp"
#include "gtw/models/barotropic.hpp"
#include "gtw/models/scalar.hpp"
#include "gtw/moc.hpp"

using namespace gtw;
using models::PressureLaw;

namespace {

FieldVector vec(double a, double b) {
    FieldVector v(2);
    v << a, b;
    return v;
}

const models::GtwClosedForm& flagship() {
    static const models::GtwClosedForm cf({0.5, 1, 0.1, 1}, PressureLaw::polytropic(1, 2));
    return cf;
}

FieldVector flagship_exact(double x, double t) { return flagship().state(x, t); }

fv::GridSpec window(double x_min, double x_max, double t_end) {
    fv::GridSpec g;
    g.x_min = x_min;
    g.x_max = x_max;
    g.t_end = t_end;
    g.boundary = fv::Boundary::exact_dirichlet;
    return g;
}

const std::vector<std::size_t> ladder{256, 512, 1024, 2048};

}  // namespace

TEST(Advance, ConstantStatePreserved) {
    const auto sys = models::BarotropicModel(PressureLaw::polytropic(1, 2), {}).system();
    fv::GridSpec g;
    g.cells = 64;
    g.t_end = 0.7;
    for (auto scheme : {fv::Scheme::lax_friedrichs, fv::Scheme::maccormack}) {
        const auto run = fv::advance(sys, std::vector<FieldVector>(64, vec(1.3, -0.2)), g, scheme);
        for (const auto& u : run.state) EXPECT_LE((u - vec(1.3, -0.2)).cwiseAbs().maxCoeff(), 1e-15);
        EXPECT_DOUBLE_EQ(run.t, 0.7);
    }
}

TEST(Advance, StepRespectsCflEveryStep) {
    const auto sys = flagship().model().system();
    auto g = window(-2, 2, 0.5);
    g.cells = 128;
    g.exact = flagship_exact;
    const auto run = fv::advance(sys, fv::sample_cells(g, flagship_exact, 0), g, fv::Scheme::maccormack);
    ASSERT_FALSE(run.dt.empty());
    for (std::size_t k = 0; k < run.dt.size(); ++k) EXPECT_LE(run.dt[k] * run.max_speed[k], g.cfl * g.h() * (1 + 1e-12));
}

TEST(Advance, FixedStepBeyondCflThrows) {
    const auto sys = flagship().model().system();
    auto g = window(-2, 2, 0.5);
    g.cells = 64;
    g.exact = flagship_exact;
    g.fixed_dt = 0.1;
    EXPECT_THROW(fv::advance(sys, fv::sample_cells(g, flagship_exact, 0), g, fv::Scheme::lax_friedrichs), CFLViolation);
}

TEST(Advance, GridValidation) {
    const auto sys = flagship().model().system();
    fv::GridSpec g;
    g.cfl = 1.2;
    EXPECT_THROW(fv::advance(sys, std::vector<FieldVector>(64, vec(1, 0)), g, fv::Scheme::maccormack), ConfigError);
    g.cfl = 0.45;
    g.cells = 8;
    EXPECT_THROW(fv::advance(sys, std::vector<FieldVector>(8, vec(1, 0)), g, fv::Scheme::maccormack), ConfigError);
    g.cells = 32;
    g.boundary = fv::Boundary::exact_dirichlet;
    EXPECT_THROW(fv::advance(sys, std::vector<FieldVector>(32, vec(1, 0)), g, fv::Scheme::maccormack), ConfigError);
}

TEST(Advance, InadmissibleInitialDataThrows) {
    const auto sys = flagship().model().system();
    fv::GridSpec g;
    g.cells = 32;
    g.t_end = 0.1;
    std::vector<FieldVector> u0(32, vec(1, 0));
    u0[5] = vec(-0.1, 0);
    EXPECT_THROW(fv::advance(sys, u0, g, fv::Scheme::maccormack), InadmissibleState);
}

TEST(Convergence, ScalarAdvectionMatchesSchemeOrder) {
    const auto sys = models::scalar_system([](double) { return 1.0; }, nullptr);
    const auto exact = [](double x, double t) {
        return FieldVector::Constant(1, std::sin(2 * std::numbers::pi * (x - t)));
    };
    const auto g = window(0, 1, 0.25);
    const auto a = fv::convergence_study(sys, exact, g, {64, 128, 256, 512}, fv::Scheme::lax_friedrichs);
    const auto b = fv::convergence_study(sys, exact, g, {64, 128, 256, 512}, fv::Scheme::maccormack);
    EXPECT_GE(a.order, 0.9);
    EXPECT_GE(b.order, 1.7);
    EXPECT_LE(b.order, 2.2);
    for (std::size_t k = 1; k < b.rows.size(); ++k) EXPECT_LT(b.rows[k].l2, b.rows[k - 1].l2);
}

TEST(Convergence, FrozenLinearSystemIsSecondOrder) {
    // u1_t + u2_x = 0, u2_t + u1_x = 0: w = u1 +- u2 travel at +-1
    HyperbolicSystem sys;
    sys.n = 2;
    sys.names = {"u1", "u2"};
    sys.matrix = [](const FieldVector&) {
        Matrix a(2, 2);
        a << 0, 1, 1, 0;
        return a;
    };
    const auto wp = [](double x) { return std::sin(2 * std::numbers::pi * x); };
    const auto wm = [](double x) { return 0.5 * std::cos(2 * std::numbers::pi * x); };
    const auto exact = [&](double x, double t) { return vec(0.5 * (wp(x - t) + wm(x + t)), 0.5 * (wp(x - t) - wm(x + t))); };
    const auto b = fv::convergence_study(sys, exact, window(0, 1, 0.3), {64, 128, 256, 512}, fv::Scheme::maccormack);
    EXPECT_GE(b.order, 1.7);
    EXPECT_LE(b.order, 2.2);
}

TEST(Convergence, FlagshipFirstOrderScheme) {
    const auto tab = fv::convergence_study(flagship().model().system(), flagship_exact, window(-2, 2, 0.5), ladder,
                                           fv::Scheme::lax_friedrichs);
    EXPECT_GE(tab.order, 0.9);
}

TEST(Convergence, FlagshipSecondOrderScheme) {
    const auto tab = fv::convergence_study(flagship().model().system(), flagship_exact, window(-2, 2, 0.5), ladder,
                                           fv::Scheme::maccormack);
    EXPECT_GE(tab.order, 1.7);
    EXPECT_LE(tab.order, 2.2);
    EXPECT_LE(tab.rows.back().l2, 1e-4);
    EXPECT_EQ(tab.rows.size(), 4u);
}

TEST(Convergence, ConstantExactSkipsFit) {
    const auto sys = models::BarotropicModel(PressureLaw::polytropic(1, 2), {}).system();
    const auto tab = fv::convergence_study(sys, [](double, double) { return vec(2, 0.5); }, window(0, 1, 0.2),
                                           {32, 64, 128, 256}, fv::Scheme::maccormack);
    EXPECT_TRUE(tab.order_skipped);
    EXPECT_TRUE(std::isnan(tab.order));
    for (const auto& r : tab.rows) EXPECT_LE(r.l2, 1e-13);
}

TEST(Convergence, SimpleWaveBeforeBreaking) {
    const auto sys = models::BarotropicModel(PressureLaw::polytropic(1, 2), {}).system();
    ChartOptions co;
    co.retained = 1;
    const auto chart = riemann_chart(sys, 1, vec(1, 0), co);
    const SimpleWave sw(chart, FieldVector::Zero(1), [](double xi) { return 0.5 - 0.2 * std::tanh(xi); }, -6, 6);
    ASSERT_GT(sw.breaking_time(), 1.0);
    const auto tab = fv::convergence_study(
        sys, [&sw](double x, double t) { return sw(x, t); }, window(-2, 2, 1.0), {128, 256, 512, 1024},
        fv::Scheme::maccormack);
    EXPECT_GE(tab.order, 1.7);
    EXPECT_LE(tab.order, 2.2);
}

TEST(Boundary, ExactDirichletHasNoSpikes) {
    const auto sys = flagship().model().system();
    auto g = window(-2, 2, 0.5);
    g.cells = 512;
    g.exact = flagship_exact;
    const auto run = fv::advance(sys, fv::sample_cells(g, flagship_exact, 0), g, fv::Scheme::maccormack);
    std::vector<double> err;
    for (std::size_t i = 0; i < g.cells; ++i) err.push_back((run.state[i] - flagship_exact(run.x[i], run.t)).norm());
    std::vector<double> sorted = err;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];
    for (std::size_t i : {std::size_t{0}, std::size_t{1}, std::size_t{2}, g.cells - 3, g.cells - 2, g.cells - 1})
        EXPECT_LE(err[i], 3 * median) << "cell " << i;
}
