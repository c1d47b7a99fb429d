#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "holder_hj/value_solver.hpp"

using namespace holder_hj;

namespace {

VariationalProblem quadratic_problem() {
    VariationalProblem p;
    p.running_coefficient = [](double, double) { return 1.0; };
    p.terminal_cost = [](double x) { return (x - 1.0) * (x - 1.0); };
    return p;
}

VariationalProblem zero_problem() {
    VariationalProblem p;
    p.running_coefficient = [](double, double) { return 1.0; };
    p.terminal_cost = [](double) { return 0.0; };
    return p;
}

double quadratic_exact(double x, double t) { return (x - 1.0) * (x - 1.0) / (2.0 - t); }

}  // namespace

TEST(SolveValueFunction, ZeroTerminalCostGivesZero) {
    const auto sol = solve_value_function(zero_problem(), 41, 21);
    for (double v : sol.u.values()) {
        EXPECT_EQ(v, 0.0);
    }
    EXPECT_FALSE(sol.flags.any());
}

TEST(SolveValueFunction, QuadraticBenchmarkAt401) {
    const auto sol = solve_value_function(quadratic_problem(), 401, 401);
    const auto& u = sol.u;
    double err = 0.0;
    for (std::size_t k = 0; k < u.nt(); ++k) {
        for (std::size_t i = 0; i < u.nx(); ++i) {
            err = std::max(err, std::abs(u.at(k, i) - quadratic_exact(u.x_grid()[i], u.t_grid()[k])));
        }
    }
    EXPECT_LE(err, 0.02);
    EXPECT_NEAR(u.interpolate(0, 0.0), 0.5, 0.02);
}

TEST(SolveValueFunction, TerminalRowIsTerminalCost) {
    const auto p = quadratic_problem();
    const auto sol = solve_value_function(p, 51, 11);
    for (std::size_t i = 0; i < sol.u.nx(); ++i) {
        EXPECT_EQ(sol.u.at(10, i), p.terminal_cost(sol.u.x_grid()[i]));
    }
}

TEST(SolveValueFunction, BoundedByMaxTerminalCost) {
    const auto p = counterexample_problem({4, 0.75, 1.5});
    const auto sol = solve_value_function(p, 201, 101);
    for (double v : sol.u.values()) {
        EXPECT_GE(v, -1e-12);
        EXPECT_LE(v, 1.5 + 1e-12);
    }
}

TEST(SolveValueFunction, RejectsDegenerateGrids) {
    EXPECT_THROW(solve_value_function(quadratic_problem(), 2, 10), precondition_error);
    EXPECT_THROW(solve_value_function(quadratic_problem(), 10, 2), precondition_error);
    auto bad = quadratic_problem();
    bad.x_max = bad.x_min;
    EXPECT_THROW(solve_value_function(bad, 10, 10), precondition_error);
}

TEST(SolveValueFunction, FlagsWindowThatIsTooSmall) {
    auto p = quadratic_problem();
    p.x_min = -0.5;
    p.x_max = 0.3;  // the minimizers want to move toward 1
    const auto sol = solve_value_function(p, 81, 41);
    EXPECT_TRUE(sol.flags.any());
    EXPECT_GT(sol.flags.state_window_hits, 0u);
}

// Independent pass: at every interior node the stored value is the minimum of
// the one-step cost over a dense y sample (never below, and close to it).
TEST(SolveValueFunction, DynamicProgrammingConsistency) {
    const auto p = counterexample_problem({8, 0.75, 1.5});
    const auto sol = solve_value_function(p, 161, 41);
    const auto& u = sol.u;
    const double dt = u.dt();
    for (std::size_t k = 0; k + 1 < u.nt(); k += 5) {
        for (std::size_t i = 20; i + 20 < u.nx(); i += 7) {
            const double x = u.x_grid()[i];
            const double a = p.running_coefficient(x, u.t_grid()[k]);
            double best = 1e300;
            for (int j = -20000; j <= 20000; ++j) {
                const double y = x + 1e-5 * j;
                const double c = dt * a * ((y - x) / dt) * ((y - x) / dt) + u.interpolate(k + 1, y);
                best = std::min(best, c);
            }
            EXPECT_LE(u.at(k, i), best + 1e-12);
            EXPECT_NEAR(u.at(k, i), best, 1e-6);
        }
    }
}

TEST(SolveValueFunction, MonotoneInData) {
    auto lo = counterexample_problem({4, 0.75, 1.5});
    auto hi = lo;
    hi.running_coefficient = [a = lo.running_coefficient](double x, double t) { return std::min(2.0, a(x, t) + 0.1); };
    hi.terminal_cost = [g = lo.terminal_cost](double x) { return g(x) + 0.05 * std::abs(std::sin(3.0 * x)); };
    const auto ulo = solve_value_function(lo, 201, 51);
    const auto uhi = solve_value_function(hi, 201, 51);
    for (std::size_t j = 0; j < ulo.u.values().size(); ++j) {
        EXPECT_LE(ulo.u.values()[j], uhi.u.values()[j] + 1e-14);
    }
}

TEST(SolveValueFunction, CounterexampleFamilyIsMonotoneInN) {
    std::vector<ValueSolution> sols;
    for (int n : {4, 8, 16}) {
        sols.push_back(solve_value_function(counterexample_problem({n, 0.75, 1.5}), 401, 101));
    }
    for (std::size_t m = 0; m + 1 < sols.size(); ++m) {
        const auto& a = sols[m].u.values();
        const auto& b = sols[m + 1].u.values();
        for (std::size_t j = 0; j < a.size(); ++j) {
            ASSERT_LE(a[j], b[j] + 1e-14);
        }
    }
}

TEST(SolveValueFunction, CounterexampleN8StaysBelowLimitFunctional) {
    const CounterexampleSpec spec{8, 0.75, 1.5};
    const auto sol = solve_value_function(counterexample_problem(spec), 3201, 801);
    EXPECT_LE(sol.u.at(0, 1600), spec.limit_value());
    EXPECT_NEAR(sol.u.x_grid()[1600], 0.0, 1e-15);
}

TEST(SolveValueFunction, RefinementChangesShrink) {
    const auto p = quadratic_problem();
    const auto u1 = solve_value_function(p, 101, 101).u;
    const auto u2 = solve_value_function(p, 201, 201).u;
    const auto u4 = solve_value_function(p, 401, 401).u;
    double d12 = 0.0;
    double d24 = 0.0;
    for (std::size_t k = 0; k < u1.nt(); ++k) {
        for (std::size_t i = 0; i < u1.nx(); ++i) {
            const double a = u1.at(k, i);
            const double b = u2.at(2 * k, 2 * i);
            const double c = u4.at(4 * k, 4 * i);
            d12 = std::max(d12, std::abs(b - a));
            d24 = std::max(d24, std::abs(c - b));
        }
    }
    EXPECT_GT(d12, 0.0);
    EXPECT_LE(d24, d12);
}

TEST(EvaluateFunctional, ZeroSpeedArcEndingAtOne) {
    const CounterexampleSpec spec{4, 0.75, 1.5};
    const auto p = counterexample_problem(spec);
    DiscreteArc arc{{0.0, 0.5, 1.0}, {1.0, 1.0, 1.0}};
    EXPECT_EQ(evaluate_functional(p, arc), 0.0);

    const auto lim = limit_coefficients(spec);
    VariationalProblem lp;
    lp.running_coefficient = lim.a;
    lp.terminal_cost = lim.g;
    EXPECT_EQ(evaluate_functional(lp, arc), 0.0);
}

TEST(EvaluateFunctional, StraightLineWithCoefficientTwo) {
    VariationalProblem p;
    p.running_coefficient = [](double, double) { return 2.0; };
    p.terminal_cost = [](double) { return 0.0; };
    DiscreteArc arc;
    for (int k = 0; k <= 100; ++k) {
        arc.times.push_back(k / 100.0);
        arc.positions.push_back(k / 100.0);
    }
    EXPECT_NEAR(evaluate_functional(p, arc), 2.0, 1e-12);
}

TEST(EvaluateFunctional, NonnegativeForNonnegativeTerminalCost) {
    const auto p = counterexample_problem({16, 0.75, 1.5});
    DiscreteArc arc{{0.0, 0.3, 0.6, 1.0}, {-0.4, 0.9, 0.1, 1.7}};
    EXPECT_GE(evaluate_functional(p, arc), 0.0);
}

TEST(EvaluateFunctional, RejectsArcsNotSpanningHorizon) {
    const auto p = zero_problem();
    DiscreteArc shortarc{{0.0, 0.5}, {0.0, 0.0}};
    EXPECT_THROW(evaluate_functional(p, shortarc), precondition_error);
    DiscreteArc backwards{{0.0, 0.7, 0.6, 1.0}, {0.0, 0.0, 0.0, 0.0}};
    EXPECT_THROW(evaluate_functional(p, backwards), precondition_error);
}

TEST(ExtractOptimalArc, ZeroCostGivesConstantArc) {
    const auto p = zero_problem();
    const auto sol = solve_value_function(p, 41, 21);
    const auto ex = extract_optimal_arc(sol, p, 0.35, 0.0);
    ASSERT_EQ(ex.arc.size(), 21u);
    for (double v : ex.arc.speeds()) {
        EXPECT_EQ(v, 0.0);
    }
}

TEST(ExtractOptimalArc, QuadraticArcIsLinearToOneHalf) {
    const auto p = quadratic_problem();
    const auto sol = solve_value_function(p, 401, 401);
    const auto ex = extract_optimal_arc(sol, p, 0.0, 0.0);
    EXPECT_NEAR(ex.arc.positions.back(), 0.5, 0.01);
    for (std::size_t k = 0; k < ex.arc.size(); ++k) {
        EXPECT_NEAR(ex.arc.positions[k], 0.5 * ex.arc.times[k], 0.01);
    }
    EXPECT_LE(ex.optimality_defect, 1e-9);
    EXPECT_FALSE(ex.flags.any());
    EXPECT_NEAR(evaluate_functional(p, ex.arc), 0.5, 0.02);
}

TEST(ExtractOptimalArc, OptimalityPrincipleHoldsAlongArc) {
    const auto p = counterexample_problem({16, 0.75, 1.5});
    const auto sol = solve_value_function(p, 801, 201);
    const auto ex = extract_optimal_arc(sol, p, 0.0, 0.0);
    EXPECT_LE(ex.optimality_defect, 1e-9);
    EXPECT_EQ(ex.step_values.size() + 1, ex.arc.size());
}

TEST(ExtractOptimalArc, CounterexampleArcTracksXi0) {
    const CounterexampleSpec spec{32, 0.75, 1.5};
    const auto p = counterexample_problem(spec);
    const auto sol = solve_value_function(p, 3201, 801);
    const auto ex = extract_optimal_arc(sol, p, 0.0, 0.0);
    double dist = 0.0;
    for (std::size_t k = 0; k < ex.arc.size(); ++k) {
        dist = std::max(dist, std::abs(ex.arc.positions[k] - std::pow(ex.arc.times[k], spec.gamma)));
    }
    EXPECT_LE(dist, 0.1);
    EXPECT_FALSE(ex.flags.any());
}

TEST(ExtractOptimalArc, RejectsOffGridStart) {
    const auto p = zero_problem();
    const auto sol = solve_value_function(p, 41, 21);
    EXPECT_THROW(extract_optimal_arc(sol, p, 0.0, 0.0123), precondition_error);
    EXPECT_THROW(extract_optimal_arc(sol, p, 5.0, 0.0), precondition_error);
}

TEST(CounterexampleCoefficients, Examples) {
    for (int n : {1, 4, 9}) {
        const auto c = counterexample_coefficients({n, 0.75, 1.5});
        for (double t : {0.0, 0.1, 0.5, 1.0}) {
            EXPECT_NEAR(c.a(std::pow(t, 0.75), t), 1.0 - std::pow(2.0, -n), 1e-15);
        }
        EXPECT_EQ(c.g(1.0), 0.0);
    }
    const auto c4 = counterexample_coefficients({4, 0.75, 1.5});
    EXPECT_EQ(c4.a(std::pow(0.3, 0.75) + 1.0, 0.3), 2.0);
    EXPECT_NEAR(c4.a(std::pow(0.3, 0.75) + 0.01, 0.3), 0.04 + 15.0 / 16.0, 1e-12);
    EXPECT_EQ(c4.g(-3.0), 1.5);
    EXPECT_NEAR(c4.g(1.1), 0.4, 1e-12);
}

TEST(CounterexampleCoefficients, RangeAndMonotoneInN) {
    std::vector<CoefficientPair> fam;
    for (int n = 1; n <= 40; ++n) {
        fam.push_back(counterexample_coefficients({n, 0.75, 1.5}));
    }
    for (double x = -2.0; x <= 2.0; x += 0.0371) {
        for (double t = 0.0; t <= 1.0; t += 0.0493) {
            for (std::size_t m = 0; m < fam.size(); ++m) {
                const double a = fam[m].a(x, t);
                ASSERT_GE(a, 0.5);
                ASSERT_LE(a, 2.0);
                const double g = fam[m].g(x);
                ASSERT_GE(g, 0.0);
                ASSERT_LE(g, 1.5);
                if (m + 1 < fam.size()) {
                    ASSERT_LE(a, fam[m + 1].a(x, t));
                    ASSERT_LE(g, fam[m + 1].g(x));
                }
            }
        }
    }
}

TEST(CounterexampleSpec, RejectsInvalidParameters) {
    EXPECT_THROW(counterexample_coefficients({0, 0.75, 1.5}), precondition_error);
    EXPECT_THROW(counterexample_coefficients({4, 0.5, 1.5}), precondition_error);
    EXPECT_THROW(counterexample_coefficients({4, 1.0, 1.5}), precondition_error);
    EXPECT_THROW(counterexample_coefficients({4, 0.75, 1.125}), precondition_error);
    EXPECT_NO_THROW(counterexample_coefficients({4, 0.6, 3.0}));
    EXPECT_DOUBLE_EQ((CounterexampleSpec{1, 0.75, 1.5}.limit_value()), 1.125);
}

TEST(BruteForceOracle, ZeroCost) {
    const auto r = brute_force_oracle(zero_problem(), 0.0, 4, 11, -1.0, 1.0);
    EXPECT_EQ(r.value, 0.0);
    for (double x : r.arc.positions) {
        EXPECT_EQ(x, 0.0);
    }
}

TEST(BruteForceOracle, QuadraticFromOrigin) {
    const auto r = brute_force_oracle(quadratic_problem(), 0.0, 6, 21, -0.5, 1.5);
    EXPECT_NEAR(r.value, 0.5, 0.05);
    EXPECT_NEAR(r.arc.positions.back(), 0.5, 0.1 + 1e-12);
}

TEST(BruteForceOracle, AgreesWithSolverAtItsResolution) {
    const auto p = counterexample_problem({4, 0.75, 1.5});
    const auto oracle = brute_force_oracle(p, 0.0, 6, 21, 0.0, 1.0);
    const auto sol = solve_value_function(p, 81, 6);  // dx = 0.05, dt = 0.2
    const double solver = sol.u.at(0, 40);
    EXPECT_NEAR(oracle.value, solver, 0.1);
    EXPECT_GE(oracle.value, solver - 1e-9);
}

TEST(BruteForceOracle, RejectsOversizeInstances) {
    EXPECT_THROW(brute_force_oracle(zero_problem(), 0.0, 7, 5, 0.0, 1.0), precondition_error);
    EXPECT_THROW(brute_force_oracle(zero_problem(), 0.0, 3, 22, 0.0, 1.0), precondition_error);
    EXPECT_THROW(brute_force_oracle(zero_problem(), 0.0, 3, 5, 1.0, 1.0), precondition_error);
}

TEST(GridFunction2D, LayoutAndInterpolation) {
    auto g = GridFunction2D::sample(0.0, 1.0, 11, 0.0, 2.0, 5, [](double x, double t) { return 3.0 * x + t; });
    EXPECT_EQ(g.nx(), 11u);
    EXPECT_EQ(g.nt(), 5u);
    EXPECT_NEAR(g.dx(), 0.1, 1e-15);
    EXPECT_NEAR(g.dt(), 0.5, 1e-15);
    EXPECT_NEAR(g.at(2, 3), 0.9 + 1.0, 1e-15);
    EXPECT_NEAR(g.interpolate(2, 0.37), 1.0 + 1.11, 1e-12);
    EXPECT_NEAR(g.interpolate(2, -5.0), 1.0, 1e-15);
    EXPECT_EQ(g.time_index(1.5).value(), 3u);
    EXPECT_FALSE(g.time_index(1.2).has_value());
}

TEST(DiscreteArc, SpeedsAndEnergy) {
    DiscreteArc arc{{0.0, 0.5, 1.0}, {0.0, 1.0, 0.0}};
    EXPECT_EQ(arc.speeds(), (std::vector<double>{2.0, -2.0}));
    EXPECT_NEAR(arc.energy(1.5), std::pow(2.0, 1.5), 1e-14);
    DiscreteArc bad{{0.0, 0.0}, {0.0, 1.0}};
    EXPECT_THROW(bad.validate(), precondition_error);
}
