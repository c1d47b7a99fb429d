#pragma once

// Closed-form examples: the boundary-discontinuous solution
// u = min{1, x^2/(t-1)_+} of u_t + |u_x|^2/4 = 0 on the open quadrant, the
// energy gap X_t(h) of xi_0(t) = t^gamma, and coarse exhaustive evidence
// that xi_0 minimizes the limit functional.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "holder_hj/common.hpp"
#include "holder_hj/value_solver.hpp"

namespace holder_hj {

inline double parabola_solution(double x, double t) {
    require(x > 0.0 && t > 0.0, "parabola_solution: (x, t) must lie in the open quadrant");
    if (t > 1.0 && x * x < t - 1.0) {
        return x * x / (t - 1.0);
    }
    return 1.0;
}

struct Rect {
    double x_lo = 0.0;
    double x_hi = 0.0;
    double t_lo = 0.0;
    double t_hi = 0.0;
};

/// Distance from the rectangle to the parabola {t = 1 + x^2, x >= 0},
/// endpoint (0, 1) included, by dense sampling of the curve.
inline double distance_to_parabola(const Rect& r) {
    auto dist_point = [&](double x, double t) {
        const double dx = x < r.x_lo ? r.x_lo - x : (x > r.x_hi ? x - r.x_hi : 0.0);
        const double dt = t < r.t_lo ? r.t_lo - t : (t > r.t_hi ? t - r.t_hi : 0.0);
        return std::hypot(dx, dt);
    };
    const double x_end = std::max({r.x_hi, std::sqrt(std::max(0.0, r.t_hi - 1.0)), 1.0}) + 1.0;
    constexpr int samples = 200000;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= samples; ++i) {
        const double x = x_end * static_cast<double>(i) / samples;
        best = std::min(best, dist_point(x, 1.0 + x * x));
    }
    return best;
}

struct ResidualResult {
    double max_residual = 0.0;
    double distance = 0.0;  // region distance to the parabola
};

/// max |u_t + u_x^2 / 4| by central differences of step h over a
/// samples x samples lattice in the region.
inline ResidualResult residual_check(const std::function<double(double, double)>& u, const Rect& region,
                                     double margin, double h, std::size_t samples = 41) {
    require(region.x_hi >= region.x_lo && region.t_hi >= region.t_lo, "residual_check: empty region");
    require(h > 0.0 && h <= margin / 10.0 * (1.0 + 1e-12), "residual_check: need 0 < h <= margin / 10");
    require(region.x_lo - h > 0.0 && region.t_lo - h > 0.0, "residual_check: stencil leaves the open quadrant");
    require(samples >= 2, "residual_check: need at least 2 samples per axis");
    ResidualResult out;
    out.distance = distance_to_parabola(region);
    require(out.distance >= margin, "residual_check: region is closer than the margin to the parabola");
    for (std::size_t i = 0; i < samples; ++i) {
        const double x = region.x_lo + (region.x_hi - region.x_lo) * static_cast<double>(i) / (samples - 1);
        for (std::size_t k = 0; k < samples; ++k) {
            const double t = region.t_lo + (region.t_hi - region.t_lo) * static_cast<double>(k) / (samples - 1);
            const double ut = (u(x, t + h) - u(x, t - h)) / (2.0 * h);
            const double ux = (u(x + h, t) - u(x - h, t)) / (2.0 * h);
            out.max_residual = std::max(out.max_residual, std::abs(ut + 0.25 * ux * ux));
        }
    }
    return out;
}

struct BoundaryLimits {
    double along_t1 = 0.0;        // u(x, 1) at the smallest probe x
    double along_parabola = 0.0;  // u(x, 1 + 2x^2) at the smallest probe x
    double max_dev_t1 = 0.0;      // max |u(x, 1) - 1| over the probes
    double max_dev_parabola = 0.0;  // max |u(x, 1 + 2x^2) - 1/2| over the probes
};

/// Probes x log-spaced in [x_min, x_max].
inline BoundaryLimits boundary_limits(double x_min = 1e-4, double x_max = 1e-1, std::size_t probes = 31) {
    require(x_min > 0.0 && x_max > x_min && probes >= 2, "boundary_limits: bad probe range");
    BoundaryLimits out;
    for (std::size_t i = 0; i < probes; ++i) {
        const double x = x_min * std::pow(x_max / x_min, static_cast<double>(i) / (probes - 1));
        const double a = parabola_solution(x, 1.0);
        const double b = parabola_solution(x, 1.0 + 2.0 * x * x);
        if (i == 0) {
            out.along_t1 = a;
            out.along_parabola = b;
        }
        out.max_dev_t1 = std::max(out.max_dev_t1, std::abs(a - 1.0));
        out.max_dev_parabola = std::max(out.max_dev_parabola, std::abs(b - 0.5));
    }
    return out;
}

/// X_t(h) = int_t^{t+h} (gamma s^(gamma-1))^2 ds - (2/h)(xi_0(t+h) - xi_0(t))^2, closed form.
inline double xi0_energy_gap(double gamma, double t, double h) {
    const double e = 2.0 * gamma - 1.0;
    double energy = 0.0;
    double rise = 0.0;
    if (t > 0.0) {
        const double ratio = std::log1p(h / t);
        energy = gamma * gamma * std::pow(t, e) * std::expm1(e * ratio) / e;
        rise = std::pow(t, gamma) * std::expm1(gamma * ratio);
    } else {
        energy = gamma * gamma * std::pow(h, e) / e;
        rise = std::pow(h, gamma);
    }
    return energy - 2.0 / h * rise * rise;
}

struct Xi0Check {
    std::vector<double> h;       // sorted increasing
    std::vector<double> values;  // X_t(h)
    bool all_negative = true;
    bool decreasing = true;  // strictly decreasing in h
    double max_value = -std::numeric_limits<double>::infinity();
};

inline Xi0Check xi0_decreasing_check(double gamma, double t, std::vector<double> h_grid) {
    require(gamma > 2.0 - std::sqrt(2.0) && gamma < 1.0, "xi0_decreasing_check: gamma must lie in (2 - sqrt 2, 1)");
    require(t >= 0.0 && t < 1.0, "xi0_decreasing_check: t must lie in [0, 1)");
    require(!h_grid.empty(), "xi0_decreasing_check: empty h grid");
    for (double h : h_grid) {
        require(h > 0.0 && h <= 1.0 - t + 1e-12, "xi0_decreasing_check: h must lie in (0, 1 - t]");
    }
    std::sort(h_grid.begin(), h_grid.end());
    Xi0Check out;
    out.h = h_grid;
    for (double h : h_grid) {
        const double x = xi0_energy_gap(gamma, t, h);
        if (!out.values.empty() && !(x < out.values.back())) {
            out.decreasing = false;
        }
        out.values.push_back(x);
        out.all_negative = out.all_negative && x < 0.0;
        out.max_value = std::max(out.max_value, x);
    }
    return out;
}

struct BruteForceComparison {
    double pinned_value = 0.0;  // J on the arc through (t_k, t_k^gamma), coefficient 1 throughout
    DiscreteArc pinned_arc;
    double best_value = 0.0;
    DiscreteArc best_arc;
    bool best_on_graph = false;
    double best_off_graph_value = 0.0;  // best arc with some node off the graph
    DiscreteArc best_off_graph_arc;
    double best_off_target_value = 0.0;  // best arc with xi(1) away from 1
    double tolerance = 0.0;               // half a position cell
};

/// Exhaustive search over arcs from (0, 0) whose later nodes sit on a
/// `positions`-point grid of [0, 1], under the limit coefficients with
/// on-graph detection within half a grid cell.
inline BruteForceComparison optimality_bruteforce(const CounterexampleSpec& spec, std::size_t nodes,
                                                  std::size_t positions) {
    spec.validate();
    require(nodes >= 2 && nodes <= 6, "optimality_bruteforce: nodes must be in [2, 6]");
    require(positions >= 2 && positions <= 21, "optimality_bruteforce: positions per node must be in [2, 21]");
    const double cell = 1.0 / static_cast<double>(positions - 1);
    const double tol = 0.5 * cell;
    const double gamma = spec.gamma;
    const std::size_t steps = nodes - 1;
    const double h = 1.0 / static_cast<double>(steps);
    std::vector<double> grid(positions);
    for (std::size_t j = 0; j < positions; ++j) {
        grid[j] = cell * static_cast<double>(j);
    }
    std::vector<double> times(nodes);
    for (std::size_t k = 0; k < nodes; ++k) {
        times[k] = h * static_cast<double>(k);
    }
    times.back() = 1.0;
    auto on_graph = [&](double x, double t) { return std::abs(x - std::pow(t, gamma)) <= tol; };
    auto coeff = [&](double x, double t) { return on_graph(x, t) ? 1.0 : 2.0; };
    auto terminal = [&](double x) { return std::abs(x - 1.0) <= tol ? 0.0 : spec.G; };

    BruteForceComparison out;
    out.tolerance = tol;
    out.best_value = std::numeric_limits<double>::infinity();
    out.best_off_graph_value = std::numeric_limits<double>::infinity();
    out.best_off_target_value = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> path(steps);
    std::vector<std::size_t> best_path(steps);
    std::vector<std::size_t> best_off_path(steps);

    std::function<void(std::size_t, double, double, bool)> descend = [&](std::size_t depth, double x_prev,
                                                                         double cost, bool off) {
        const double a = coeff(x_prev, times[depth]);
        for (std::size_t j = 0; j < positions; ++j) {
            const double v = (grid[j] - x_prev) / h;
            const double c = cost + h * a * v * v;
            const bool off_here = off || !on_graph(grid[j], times[depth + 1]);
            path[depth] = j;
            if (depth + 1 == steps) {
                const double total = c + terminal(grid[j]);
                if (total < out.best_value) {
                    out.best_value = total;
                    best_path = path;
                    out.best_on_graph = !off_here;
                }
                if (off_here && total < out.best_off_graph_value) {
                    out.best_off_graph_value = total;
                    best_off_path = path;
                }
                if (std::abs(grid[j] - 1.0) > tol) {
                    out.best_off_target_value = std::min(out.best_off_target_value, total);
                }
            } else {
                descend(depth + 1, grid[j], c, off_here);
            }
        }
    };
    descend(0, 0.0, 0.0, false);

    auto build = [&](const std::vector<std::size_t>& idx) {
        DiscreteArc arc;
        arc.times = times;
        arc.positions.push_back(0.0);
        for (std::size_t k = 0; k < steps; ++k) {
            arc.positions.push_back(grid[idx[k]]);
        }
        return arc;
    };
    out.best_arc = build(best_path);
    out.best_off_graph_arc = build(best_off_path);

    out.pinned_arc.times = times;
    for (double t : times) {
        out.pinned_arc.positions.push_back(std::pow(t, gamma));
    }
    out.pinned_value = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
        const double v = (out.pinned_arc.positions[k + 1] - out.pinned_arc.positions[k]) / h;
        out.pinned_value += h * v * v;
    }
    return out;
}

/// J[xi_0] under the limit coefficients on graded nodes t_k = (k/N)^2,
/// which resolve the t^(gamma-1) speed singularity at 0.
inline double xi0_functional(const CounterexampleSpec& spec, std::size_t nodes) {
    require(nodes >= 2, "xi0_functional: need at least 2 nodes");
    const auto lim = limit_coefficients(spec, 1e-12);
    VariationalProblem problem;
    problem.running_coefficient = lim.a;
    problem.terminal_cost = lim.g;
    DiscreteArc arc;
    const std::size_t n = nodes - 1;
    for (std::size_t k = 0; k <= n; ++k) {
        const double s = static_cast<double>(k) / static_cast<double>(n);
        const double t = s * s;
        arc.times.push_back(t);
        arc.positions.push_back(std::pow(t, spec.gamma));
    }
    return evaluate_functional(problem, arc);
}

}  // namespace holder_hj
