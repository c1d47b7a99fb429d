#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "holder_hj/gallery.hpp"
#include "holder_hj/holder_metrics.hpp"

using namespace holder_hj;

namespace {

GridFunction2D space_profile(double (*f)(double), double lo, double hi, std::size_t nx) {
    return GridFunction2D::sample(lo, hi, nx, 0.0, 1.0, 3, [f](double x, double) { return f(x); });
}

double abs_x(double x) { return std::abs(x); }
double sqrt_abs(double x) { return std::sqrt(std::abs(x)); }

}  // namespace

TEST(HolderSeminorm, AbsoluteValueIsOneLipschitz) {
    const auto u = space_profile(abs_x, -1.0, 1.0, 2001);
    const double s = holder_seminorm(u, 1.0, Direction::space, Region{}, default_scale_window(u, Direction::space));
    EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(HolderSeminorm, SquareRootHasUnitHalfSeminorm) {
    const auto u = space_profile(sqrt_abs, -1.0, 1.0, 2001);
    const double s = holder_seminorm(u, 0.5, Direction::space, Region{}, default_scale_window(u, Direction::space));
    EXPECT_NEAR(s, 1.0, 0.02);
}

TEST(HolderSeminorm, ParabolaSolutionGradient) {
    const auto u = GridFunction2D::sample(0.05, 0.5, 451, 1.1, 2.0, 91,
                                          [](double x, double t) { return parabola_solution(x, t); });
    const Region region{0.05, 0.5, 1.1, 2.0};
    const double s = holder_seminorm(u, 1.0, Direction::space, region, {u.dx(), 10.0 * u.dx()});
    double grad = 0.0;
    for (double t : u.t_grid()) {
        const double edge = std::min(0.5, std::sqrt(t - 1.0));
        grad = std::max(grad, 2.0 * edge / (t - 1.0));
    }
    EXPECT_NEAR(s, grad, 0.05 * grad);
}

TEST(HolderSeminorm, ScalesWithAmplitude) {
    auto u = GridFunction2D::sample(-1.0, 1.0, 401, 0.0, 1.0, 101,
                                    [](double x, double t) { return std::sin(3.0 * x) * std::cos(2.0 * t); });
    auto v = u;
    for (std::size_t k = 0; k < v.nt(); ++k) {
        for (std::size_t i = 0; i < v.nx(); ++i) {
            v.at(k, i) *= -2.5;
        }
    }
    for (Direction d : {Direction::space, Direction::time}) {
        const auto w = default_scale_window(u, d);
        EXPECT_NEAR(holder_seminorm(v, 0.4, d, Region{}, w), 2.5 * holder_seminorm(u, 0.4, d, Region{}, w), 1e-12);
        EXPECT_NEAR(lipschitz_constant(v, d, Region{}), 2.5 * lipschitz_constant(u, d, Region{}), 1e-12);
    }
}

TEST(HolderSeminorm, NondecreasingInAlphaOnSubUnitScales) {
    const auto u = GridFunction2D::sample(-1.0, 1.0, 401, 0.0, 1.0, 51,
                                          [](double x, double t) { return std::abs(x - 0.2 * t) + x * x; });
    const ScaleWindow w{0.05, 0.8};
    double prev = 0.0;
    for (double alpha : {0.1, 0.25, 0.5, 0.75, 1.0}) {
        const double s = holder_seminorm(u, alpha, Direction::space, Region{}, w);
        EXPECT_GE(s, prev);
        prev = s;
    }
}

TEST(HolderSeminorm, RejectsBadInput) {
    const auto u = space_profile(abs_x, -1.0, 1.0, 101);
    const ScaleWindow w{0.1, 0.2};
    EXPECT_THROW(holder_seminorm(u, 0.0, Direction::space, Region{}, w), precondition_error);
    EXPECT_THROW(holder_seminorm(u, 1.5, Direction::space, Region{}, w), precondition_error);
    EXPECT_THROW(holder_seminorm(u, 0.5, Direction::space, Region{}, {0.001, 0.2}), precondition_error);
    EXPECT_THROW(holder_seminorm(u, 0.5, Direction::space, Region{5.0, 6.0, 0.0, 1.0}, w), precondition_error);
    // region narrower than the smallest separation: no pairs
    EXPECT_THROW(holder_seminorm(u, 0.5, Direction::space, Region{0.0, 0.05, 0.0, 1.0}, w), precondition_error);
}

TEST(FitHolderExponent, RecoversExactPowerLaws) {
    for (double alpha : {0.2, 0.3, 0.5, 0.8, 1.0}) {
        const auto u = GridFunction2D::sample(-1.0, 1.0, 2001, 0.0, 1.0, 3,
                                              [alpha](double x, double) { return std::pow(std::abs(x), alpha); });
        const auto fit = fit_holder_exponent(u, Direction::space, Region{}, {0.01, 0.5});
        EXPECT_NEAR(fit.exponent, alpha, 0.02) << "alpha=" << alpha;
        EXPECT_FALSE(fit.poor_fit);
        EXPECT_GE(fit.scales, 5u);
        EXPECT_GT(fit.fit_residual, 0.99);
    }
}

TEST(FitHolderExponent, ConstantDataIsFlaggedNotFitted) {
    const auto u = GridFunction2D::sample(-1.0, 1.0, 201, 0.0, 1.0, 3, [](double, double) { return 2.0; });
    const auto fit = fit_holder_exponent(u, Direction::space, Region{}, {0.1, 1.0});
    EXPECT_TRUE(fit.poor_fit);
}

TEST(FitHolderExponent, RequiresFiveScales) {
    const auto u = space_profile(abs_x, -1.0, 1.0, 21);
    EXPECT_THROW(fit_holder_exponent(u, Direction::space, Region{}, {0.1, 0.3}), precondition_error);
    EXPECT_THROW(fit_holder_exponent(u, Direction::space, Region{}, {0.1, 1.0}, 4), precondition_error);
}

TEST(LipschitzConstant, ConstantAndLinear) {
    const auto c = GridFunction2D::sample(-1.0, 1.0, 51, 0.0, 1.0, 11, [](double, double) { return 7.0; });
    EXPECT_EQ(lipschitz_constant(c, Direction::space, Region{}), 0.0);
    EXPECT_EQ(lipschitz_constant(c, Direction::time, Region{}), 0.0);
    const auto l = GridFunction2D::sample(-1.0, 1.0, 51, 0.0, 1.0, 11, [](double x, double) { return 3.0 * x; });
    EXPECT_NEAR(lipschitz_constant(l, Direction::space, Region{}), 3.0, 1e-12);
    EXPECT_EQ(lipschitz_constant(l, Direction::time, Region{}), 0.0);
}

TEST(LipschitzConstant, RestrictedToRegion) {
    const auto u = GridFunction2D::sample(-1.0, 1.0, 201, 0.0, 1.0, 3,
                                          [](double x, double) { return x < 0.5 ? x : 0.5 + 10.0 * (x - 0.5); });
    EXPECT_NEAR(lipschitz_constant(u, Direction::space, Region{-1.0, 0.4, 0.0, 1.0}), 1.0, 1e-9);
    EXPECT_NEAR(lipschitz_constant(u, Direction::space, Region{}), 10.0, 1e-9);
}

TEST(TheoremExponents, Examples) {
    const auto e = theorem_exponents(1.0 + std::sqrt(2.0), 2.0);
    EXPECT_NEAR(e.space, 1.0 - 1.0 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(e.space, 0.292893, 1e-6);
    EXPECT_NEAR(e.time, 3.0 - 2.0 * std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(e.time, 0.171573, 1e-6);

    for (double p : {1.1, 1.5, 2.0, 3.7}) {
        const auto r = theorem_exponents(2.0 * p, p);
        EXPECT_NEAR(r.space, p / (2.0 * p - 1.0), 1e-15);
        EXPECT_NEAR(r.time, 0.5, 1e-15);
    }
    const auto f = theorem_exponents(4.0, 2.0);
    EXPECT_NEAR(f.space, 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(f.time, 0.5, 1e-15);
}

TEST(TheoremExponents, OrderedInsideUnitInterval) {
    for (double p = 1.05; p < 5.0; p += 0.17) {
        for (double gap = 1e-3; gap < 100.0; gap *= 1.9) {
            const auto e = theorem_exponents(p + gap, p);
            EXPECT_GT(e.time, 0.0);
            EXPECT_LT(e.time, e.space);
            EXPECT_LT(e.space, 1.0);
        }
    }
}

TEST(TheoremExponents, RejectsThetaNotAboveP) {
    EXPECT_THROW(theorem_exponents(2.0, 2.0), precondition_error);
    EXPECT_THROW(theorem_exponents(1.5, 2.0), precondition_error);
    EXPECT_THROW(theorem_exponents(2.0, 1.0), precondition_error);
}

TEST(ArcEnergyCheck, ConstantArcHasZeroEnergy) {
    const auto u = GridFunction2D::sample(-1.0, 1.0, 21, 0.0, 1.0, 101, [](double, double) { return 0.0; });
    DiscreteArc arc;
    for (double t : u.t_grid()) {
        arc.times.push_back(t);
        arc.positions.push_back(0.3);
    }
    const auto env = derive_conjugates(2.0, 1.0);
    const auto rep = arc_energy_check(arc, u, env, 1.25, 4.0);
    EXPECT_EQ(rep.energy_min_slack, 0.0);
    EXPECT_EQ(rep.reverse_min_slack, 0.0);
    EXPECT_GE(rep.energy_margin, 0.0);
    EXPECT_GE(rep.reverse_margin, 0.0);
    EXPECT_TRUE(rep.decay_degenerate);
}

// Closed-form quadratic value (x-1)^2/(2-t) along its linear optimal arc x = t/2:
// u(0,0) - u(t/2,t) = t/4 and the energy is t/4, so c_plus E / budget = 1/4.
TEST(ArcEnergyCheck, LinearArcClosedForm) {
    const auto u = GridFunction2D::sample(-2.0, 2.0, 4001, 0.0, 1.0, 201,
                                          [](double x, double t) { return (x - 1.0) * (x - 1.0) / (2.0 - t); });
    DiscreteArc arc;
    for (double t : u.t_grid()) {
        arc.times.push_back(t);
        arc.positions.push_back(0.5 * t);
    }
    const auto env = derive_conjugates(2.0, 1.0);
    const auto rep = arc_energy_check(arc, u, env, 1.25, 4.0);
    EXPECT_NEAR(rep.energy_min_slack, 0.25, 1e-3);
    EXPECT_NEAR(rep.reverse_min_slack, 1.0, 1e-9);
    EXPECT_GE(rep.reverse_margin, 0.0);
    EXPECT_NEAR(rep.decay_exponent, 1.0, 1e-9);
    EXPECT_NEAR(rep.decay_predicted, 0.75, 1e-15);
}

TEST(ArcEnergyCheck, RejectsMismatchedArc) {
    const auto u = GridFunction2D::sample(-1.0, 1.0, 21, 0.0, 1.0, 11, [](double, double) { return 0.0; });
    const auto env = derive_conjugates(2.0, 1.0);
    DiscreteArc off_grid{{0.0, 0.05, 0.1}, {0.0, 0.0, 0.0}};
    EXPECT_THROW(arc_energy_check(off_grid, u, env, 1.25, 4.0), precondition_error);
    DiscreteArc outside{{0.0, 0.1, 0.2}, {0.0, 3.0, 0.0}};
    EXPECT_THROW(arc_energy_check(outside, u, env, 1.25, 4.0), precondition_error);
    DiscreteArc fine{{0.0, 0.1, 0.2}, {0.0, 0.0, 0.0}};
    EXPECT_THROW(arc_energy_check(fine, u, env, 0.9, 4.0), precondition_error);
}
