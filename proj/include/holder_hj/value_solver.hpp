#pragma once

// Backward dynamic programming for the quadratic-cost variational problem
//
//     u(x, t) = inf { int_t^1 a(xi(s), s) |xi'(s)|^2 ds + g(xi(1)) : xi(t) = x }
//
// on a uniform (x, t) grid, optimal-arc extraction along the DP minimizers,
// the counterexample coefficient family (a_n, g_n) and an exhaustive
// small-instance oracle.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "holder_hj/common.hpp"

namespace holder_hj {

struct VariationalProblem {
    std::function<double(double x, double t)> running_coefficient;
    std::function<double(double x)> terminal_cost;
    double t0 = 0.0;
    double t1 = 1.0;
    double x_min = -2.0;
    double x_max = 2.0;
    /// Lower bound of the running coefficient on the domain; bounds how far a
    /// single step can usefully move.
    double coefficient_floor = 0.5;
};

/// Values on a uniform (x, t) grid, t-major: values[it * nx + ix].
class GridFunction2D {
public:
    GridFunction2D() = default;
    GridFunction2D(std::vector<double> x_grid, std::vector<double> t_grid)
        : x_(std::move(x_grid)), t_(std::move(t_grid)), values_(x_.size() * t_.size(), 0.0) {
        require(x_.size() >= 2 && t_.size() >= 1, "GridFunction2D: degenerate grid");
    }

    static GridFunction2D uniform(double x_lo, double x_hi, std::size_t nx, double t_lo, double t_hi,
                                  std::size_t nt) {
        require(nx >= 2 && nt >= 2, "GridFunction2D::uniform: need at least two nodes per axis");
        require(x_hi > x_lo && t_hi > t_lo, "GridFunction2D::uniform: empty interval");
        std::vector<double> xs(nx);
        std::vector<double> ts(nt);
        for (std::size_t i = 0; i < nx; ++i) {
            xs[i] = x_lo + (x_hi - x_lo) * static_cast<double>(i) / static_cast<double>(nx - 1);
        }
        for (std::size_t k = 0; k < nt; ++k) {
            ts[k] = t_lo + (t_hi - t_lo) * static_cast<double>(k) / static_cast<double>(nt - 1);
        }
        return GridFunction2D(std::move(xs), std::move(ts));
    }

    template <class Fn>
    static GridFunction2D sample(double x_lo, double x_hi, std::size_t nx, double t_lo, double t_hi,
                                 std::size_t nt, Fn&& fn) {
        GridFunction2D g = uniform(x_lo, x_hi, nx, t_lo, t_hi, nt);
        for (std::size_t k = 0; k < nt; ++k) {
            for (std::size_t i = 0; i < nx; ++i) {
                g.at(k, i) = fn(g.x_[i], g.t_[k]);
            }
        }
        return g;
    }

    std::size_t nx() const { return x_.size(); }
    std::size_t nt() const { return t_.size(); }
    const std::vector<double>& x_grid() const { return x_; }
    const std::vector<double>& t_grid() const { return t_; }
    const std::vector<double>& values() const { return values_; }
    double dx() const { return (x_.back() - x_.front()) / static_cast<double>(x_.size() - 1); }
    double dt() const {
        return t_.size() > 1 ? (t_.back() - t_.front()) / static_cast<double>(t_.size() - 1) : 0.0;
    }

    double& at(std::size_t it, std::size_t ix) { return values_[it * x_.size() + ix]; }
    double at(std::size_t it, std::size_t ix) const { return values_[it * x_.size() + ix]; }

    std::span<double> row(std::size_t it) { return {values_.data() + it * x_.size(), x_.size()}; }
    std::span<const double> row(std::size_t it) const { return {values_.data() + it * x_.size(), x_.size()}; }

    /// Index of grid time t (within 1e-9 of a step), if any.
    std::optional<std::size_t> time_index(double t) const {
        const double step = dt();
        if (step <= 0.0) {
            return std::abs(t - t_.front()) <= 1e-12 ? std::optional<std::size_t>(0) : std::nullopt;
        }
        const double pos = (t - t_.front()) / step;
        const double r = std::round(pos);
        if (r < 0.0 || r > static_cast<double>(t_.size() - 1) || std::abs(pos - r) > 1e-9) {
            return std::nullopt;
        }
        return static_cast<std::size_t>(r);
    }

    /// Piecewise-linear interpolation in x on row it (clamped to the grid).
    double interpolate(std::size_t it, double x) const {
        const double h = dx();
        const double pos = std::clamp((x - x_.front()) / h, 0.0, static_cast<double>(x_.size() - 1));
        std::size_t j = static_cast<std::size_t>(std::floor(pos));
        if (j + 1 >= x_.size()) {
            j = x_.size() - 2;
        }
        const double w = pos - static_cast<double>(j);
        return (1.0 - w) * at(it, j) + w * at(it, j + 1);
    }

private:
    std::vector<double> x_;
    std::vector<double> t_;
    std::vector<double> values_;
};

/// Piecewise-linear arc through (times[k], positions[k]).
struct DiscreteArc {
    std::vector<double> times;
    std::vector<double> positions;

    std::size_t size() const { return times.size(); }

    /// Forward difference quotients, one per segment.
    std::vector<double> speeds() const {
        std::vector<double> v;
        if (times.size() < 2) {
            return v;
        }
        v.resize(times.size() - 1);
        for (std::size_t k = 0; k + 1 < times.size(); ++k) {
            v[k] = (positions[k + 1] - positions[k]) / (times[k + 1] - times[k]);
        }
        return v;
    }

    /// sum_k dt_k |speed_k|^p
    double energy(double p) const {
        double e = 0.0;
        const auto v = speeds();
        for (std::size_t k = 0; k < v.size(); ++k) {
            e += (times[k + 1] - times[k]) * std::pow(std::abs(v[k]), p);
        }
        return e;
    }

    void validate() const {
        require(times.size() == positions.size(), "DiscreteArc: times/positions length mismatch");
        require(times.size() >= 2, "DiscreteArc: need at least two nodes");
        for (std::size_t k = 0; k + 1 < times.size(); ++k) {
            require(times[k + 1] > times[k], "DiscreteArc: times must be strictly increasing");
        }
    }
};

struct BoundaryFlags {
    std::size_t state_window_hits = 0;      // minimizer pinned to x_min / x_max
    std::size_t candidate_window_hits = 0;  // minimizer pinned to the per-step search radius
    double first_x = std::numeric_limits<double>::quiet_NaN();
    double first_t = std::numeric_limits<double>::quiet_NaN();

    bool any() const { return state_window_hits + candidate_window_hits > 0; }

    void merge(const BoundaryFlags& o) {
        if (!any() && o.any()) {
            first_x = o.first_x;
            first_t = o.first_t;
        }
        state_window_hits += o.state_window_hits;
        candidate_window_hits += o.candidate_window_hits;
    }
};

/// Minimum of one backward step from departure point x.
struct StepMinimum {
    double value = std::numeric_limits<double>::infinity();
    double arrival = 0.0;
    bool state_clamped = false;
    bool window_clamped = false;
};

/// min_y { (a/dt) (y - x)^2 + U(y) } where U is the piecewise-linear
/// interpolant of `next_row` on `x_grid`, |y - x| <= radius.
///
/// The objective is a convex quadratic on every grid cell, so each cell is
/// minimized in closed form. Ties go to the smaller |y - x|, then smaller y.
inline StepMinimum minimize_step(std::span<const double> next_row, const std::vector<double>& x_grid, double x,
                                 double a, double dt, double radius) {
    const std::size_t n = x_grid.size();
    const double x_lo = x_grid.front();
    const double x_hi = x_grid.back();
    const double h = (x_hi - x_lo) / static_cast<double>(n - 1);
    const double c = a / dt;
    const double lo = std::max(x_lo, x - radius);
    const double hi = std::min(x_hi, x + radius);

    std::size_t j_begin = static_cast<std::size_t>(std::max(0.0, std::floor((lo - x_lo) / h)));
    std::size_t j_end = static_cast<std::size_t>(std::max(0.0, std::ceil((hi - x_lo) / h)));
    j_end = std::min(j_end, n - 1);
    if (j_begin >= j_end) {
        j_begin = j_end > 0 ? j_end - 1 : 0;
        j_end = j_begin + 1;
    }

    StepMinimum best;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t j = j_begin; j < j_end; ++j) {
        const double yl = x_lo + h * static_cast<double>(j);
        const double yr = x_lo + h * static_cast<double>(j + 1);
        const double cell_lo = std::max(yl, lo);
        const double cell_hi = std::min(yr, hi);
        if (cell_lo > cell_hi) {
            continue;
        }
        const double slope = (next_row[j + 1] - next_row[j]) / h;
        const double unconstrained = x - slope / (2.0 * c);
        const double y = std::clamp(unconstrained, cell_lo, cell_hi);
        const double interp = next_row[j] + slope * (y - yl);
        const double val = c * (y - x) * (y - x) + interp;
        const double dist = std::abs(y - x);
        if (val < best.value || (val == best.value && dist < best_dist)) {
            best.value = val;
            best.arrival = y;
            best_dist = dist;
            best.state_clamped = (y == x_lo && unconstrained < x_lo && x_lo > x - radius) ||
                                 (y == x_hi && unconstrained > x_hi && x_hi < x + radius);
            best.window_clamped = (y == x - radius && unconstrained < y && y > x_lo) ||
                                  (y == x + radius && unconstrained > y && y < x_hi);
        }
    }
    return best;
}

struct ValueSolution {
    GridFunction2D u;
    BoundaryFlags flags;
    double candidate_radius = 0.0;
};

/// Per-step search radius: min(20 dx sqrt(nx), sqrt(dt * osc(g) / a_floor) + dx).
/// Moving farther than the second term costs more than the whole oscillation
/// of the data, so it can never be optimal.
inline double step_search_radius(const VariationalProblem& problem, std::size_t x_nodes, double dx, double dt,
                                 double terminal_oscillation) {
    const double cap = 20.0 * dx * std::sqrt(static_cast<double>(x_nodes));
    const double speed_bound = std::sqrt(dt * terminal_oscillation / problem.coefficient_floor) + dx;
    return std::min(cap, speed_bound);
}

inline ValueSolution solve_value_function(const VariationalProblem& problem, std::size_t x_nodes,
                                          std::size_t t_nodes) {
    require(x_nodes >= 3 && t_nodes >= 3, "solve_value_function: need at least 3 nodes per axis");
    require(problem.x_max > problem.x_min && problem.t1 > problem.t0, "solve_value_function: degenerate domain");
    require(problem.coefficient_floor > 0.0, "solve_value_function: coefficient floor must be positive");
    require(static_cast<bool>(problem.running_coefficient) && static_cast<bool>(problem.terminal_cost),
            "solve_value_function: coefficients not set");

    ValueSolution sol;
    sol.u = GridFunction2D::uniform(problem.x_min, problem.x_max, x_nodes, problem.t0, problem.t1, t_nodes);
    GridFunction2D& u = sol.u;
    const auto& xs = u.x_grid();
    const auto& ts = u.t_grid();
    const double dx = u.dx();
    const double dt = u.dt();

    double g_min = std::numeric_limits<double>::infinity();
    double g_max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x_nodes; ++i) {
        const double g = problem.terminal_cost(xs[i]);
        u.at(t_nodes - 1, i) = g;
        g_min = std::min(g_min, g);
        g_max = std::max(g_max, g);
    }
    sol.candidate_radius = step_search_radius(problem, x_nodes, dx, dt, g_max - g_min);

    std::vector<unsigned char> state_hit(x_nodes);
    std::vector<unsigned char> window_hit(x_nodes);
    for (std::size_t k = t_nodes - 1; k-- > 0;) {
        const auto next = u.row(k + 1);
        auto current = u.row(k);
        const double t = ts[k];
        parallel_for(x_nodes, [&](std::size_t i) {
            const double a = problem.running_coefficient(xs[i], t);
            const StepMinimum m = minimize_step(next, xs, xs[i], a, dt, sol.candidate_radius);
            current[i] = m.value;
            state_hit[i] = m.state_clamped ? 1 : 0;
            window_hit[i] = m.window_clamped ? 1 : 0;
        });
        for (std::size_t i = 0; i < x_nodes; ++i) {
            if ((state_hit[i] || window_hit[i]) && !sol.flags.any()) {
                sol.flags.first_x = xs[i];
                sol.flags.first_t = t;
            }
            sol.flags.state_window_hits += state_hit[i];
            sol.flags.candidate_window_hits += window_hit[i];
        }
    }
    return sol;
}

struct ArcExtraction {
    DiscreteArc arc;
    BoundaryFlags flags;
    /// One-step values U_k(xi_k) recomputed at the (possibly off-grid) arc points.
    std::vector<double> step_values;
    /// max_k |U_k(xi_k) - (dt a speed_k^2 + interp u(xi_{k+1}, t_{k+1}))|; zero up to rounding.
    double optimality_defect = 0.0;
    /// max_k |U_k(xi_k) - interp u(xi_k, t_k)|; the interpolation gap, O(dx^2).
    double interpolation_gap = 0.0;
};

/// Follows the DP minimizers forward from (x_start, t_start).
inline ArcExtraction extract_optimal_arc(const ValueSolution& solution, const VariationalProblem& problem,
                                         double x_start, double t_start) {
    const GridFunction2D& u = solution.u;
    const auto k0 = u.time_index(t_start);
    require(k0.has_value(), "extract_optimal_arc: start time is not a grid time");
    require(x_start >= u.x_grid().front() && x_start <= u.x_grid().back(),
            "extract_optimal_arc: start point outside the state window");
    const double dt = u.dt();
    const auto& ts = u.t_grid();

    ArcExtraction out;
    out.arc.times.push_back(ts[*k0]);
    out.arc.positions.push_back(x_start);
    double x = x_start;
    for (std::size_t k = *k0; k + 1 < u.nt(); ++k) {
        const double a = problem.running_coefficient(x, ts[k]);
        const StepMinimum m = minimize_step(u.row(k + 1), u.x_grid(), x, a, dt, solution.candidate_radius);
        if (m.state_clamped || m.window_clamped) {
            if (!out.flags.any()) {
                out.flags.first_x = x;
                out.flags.first_t = ts[k];
            }
            out.flags.state_window_hits += m.state_clamped ? 1 : 0;
            out.flags.candidate_window_hits += m.window_clamped ? 1 : 0;
        }
        const double speed = (m.arrival - x) / dt;
        const double rebuilt = dt * a * speed * speed + u.interpolate(k + 1, m.arrival);
        out.optimality_defect = std::max(out.optimality_defect, std::abs(m.value - rebuilt));
        out.interpolation_gap = std::max(out.interpolation_gap, std::abs(m.value - u.interpolate(k, x)));
        out.step_values.push_back(m.value);
        x = m.arrival;
        out.arc.times.push_back(ts[k + 1]);
        out.arc.positions.push_back(x);
    }
    out.flags.merge(BoundaryFlags{});
    return out;
}

/// J[xi] = sum_k dt_k a(xi_k, t_k) speed_k^2 + g(xi(end)).
inline double evaluate_functional(const VariationalProblem& problem, const DiscreteArc& arc) {
    arc.validate();
    const double tol = 1e-9 * std::max(1.0, std::abs(problem.t1 - problem.t0));
    require(std::abs(arc.times.front() - problem.t0) <= tol && std::abs(arc.times.back() - problem.t1) <= tol,
            "evaluate_functional: arc must span the horizon [t0, t1]");
    double running = 0.0;
    for (std::size_t k = 0; k + 1 < arc.size(); ++k) {
        const double h = arc.times[k + 1] - arc.times[k];
        const double v = (arc.positions[k + 1] - arc.positions[k]) / h;
        running += h * problem.running_coefficient(arc.positions[k], arc.times[k]) * v * v;
    }
    return running + problem.terminal_cost(arc.positions.back());
}

/// Parameters of the non-Lipschitz family: xi_0(t) = t^gamma, terminal level G.
struct CounterexampleSpec {
    int n = 1;
    double gamma = 0.75;
    double G = 1.5;

    /// J[xi_0] = gamma^2 / (2 gamma - 1)
    double limit_value() const { return gamma * gamma / (2.0 * gamma - 1.0); }

    void validate() const {
        require(n >= 1, "CounterexampleSpec: n must be a positive integer");
        require(gamma > 2.0 - std::sqrt(2.0) && gamma < 1.0, "CounterexampleSpec: gamma must lie in (2 - sqrt 2, 1)");
        require(G > limit_value(), "CounterexampleSpec: G must exceed gamma^2 / (2 gamma - 1)");
    }
};

struct CoefficientPair {
    std::function<double(double, double)> a;
    std::function<double(double)> g;
};

/// a_n(x,t) = min{2, n |x - t^gamma| + sum_{k=1..n} 2^-k},  g_n(x) = min{G, n |x - 1|}.
inline CoefficientPair counterexample_coefficients(const CounterexampleSpec& spec) {
    spec.validate();
    const double n = static_cast<double>(spec.n);
    const double floor_sum = 1.0 - std::ldexp(1.0, -spec.n);
    const double gamma = spec.gamma;
    const double G = spec.G;
    CoefficientPair out;
    out.a = [n, floor_sum, gamma](double x, double t) {
        return std::min(2.0, n * std::abs(x - std::pow(t, gamma)) + floor_sum);
    };
    out.g = [n, G](double x) { return std::min(G, n * std::abs(x - 1.0)); };
    return out;
}

/// The discontinuous limit pair: a = 1 on the graph of t^gamma (within
/// `tolerance`), 2 elsewhere; g = 0 at 1 (within `tolerance`), G elsewhere.
inline CoefficientPair limit_coefficients(const CounterexampleSpec& spec, double tolerance = 0.0) {
    spec.validate();
    const double gamma = spec.gamma;
    const double G = spec.G;
    CoefficientPair out;
    out.a = [gamma, tolerance](double x, double t) {
        return std::abs(x - std::pow(t, gamma)) <= tolerance ? 1.0 : 2.0;
    };
    out.g = [G, tolerance](double x) { return std::abs(x - 1.0) <= tolerance ? 0.0 : G; };
    return out;
}

inline VariationalProblem counterexample_problem(const CounterexampleSpec& spec, double x_min = -2.0,
                                                 double x_max = 2.0) {
    auto coeffs = counterexample_coefficients(spec);
    VariationalProblem problem;
    problem.running_coefficient = std::move(coeffs.a);
    problem.terminal_cost = std::move(coeffs.g);
    problem.t0 = 0.0;
    problem.t1 = 1.0;
    problem.x_min = x_min;
    problem.x_max = x_max;
    problem.coefficient_floor = 0.5;
    return problem;
}

struct BruteForceResult {
    double value = std::numeric_limits<double>::infinity();
    DiscreteArc arc;
};

/// Exhaustive minimization of the discrete functional over piecewise-linear
/// arcs from (x_start, t0) whose remaining `nodes - 1` nodes sit on a uniform
/// grid of `positions` points over [pos_lo, pos_hi]. Coefficients are taken
/// at the departure point of each segment. Ties keep the lexicographically
/// first arc.
inline BruteForceResult brute_force_oracle(const VariationalProblem& problem, double x_start, std::size_t nodes,
                                           std::size_t positions, double pos_lo, double pos_hi) {
    require(nodes >= 2 && nodes <= 6, "brute_force_oracle: nodes must be in [2, 6]");
    require(positions >= 2 && positions <= 21, "brute_force_oracle: positions per node must be in [2, 21]");
    require(pos_hi > pos_lo, "brute_force_oracle: empty position window");

    const std::size_t steps = nodes - 1;
    const double h = (problem.t1 - problem.t0) / static_cast<double>(steps);
    std::vector<double> grid(positions);
    for (std::size_t j = 0; j < positions; ++j) {
        grid[j] = pos_lo + (pos_hi - pos_lo) * static_cast<double>(j) / static_cast<double>(positions - 1);
    }
    std::vector<double> times(nodes);
    for (std::size_t k = 0; k < nodes; ++k) {
        times[k] = problem.t0 + h * static_cast<double>(k);
    }
    times.back() = problem.t1;

    // Coefficient at every (departure, time) pair is arc independent.
    std::vector<double> coeff(positions * nodes);
    for (std::size_t k = 1; k < nodes; ++k) {
        for (std::size_t j = 0; j < positions; ++j) {
            coeff[k * positions + j] = problem.running_coefficient(grid[j], times[k]);
        }
    }
    const double a0 = problem.running_coefficient(x_start, times[0]);
    std::vector<double> terminal(positions);
    for (std::size_t j = 0; j < positions; ++j) {
        terminal[j] = problem.terminal_cost(grid[j]);
    }

    BruteForceResult best;
    std::vector<std::size_t> path(steps, 0);
    std::vector<std::size_t> best_path(steps, 0);

    // Depth-first enumeration in lexicographic order with running partial sums.
    std::vector<double> partial(steps + 1, 0.0);
    std::function<void(std::size_t, double, double)> descend = [&](std::size_t depth, double x_prev,
                                                                   double a_prev) {
        for (std::size_t j = 0; j < positions; ++j) {
            const double v = (grid[j] - x_prev) / h;
            const double cost = partial[depth] + h * a_prev * v * v;
            path[depth] = j;
            if (depth + 1 == steps) {
                const double total = cost + terminal[j];
                if (total < best.value) {
                    best.value = total;
                    best_path = path;
                }
            } else {
                partial[depth + 1] = cost;
                descend(depth + 1, grid[j], coeff[(depth + 1) * positions + j]);
            }
        }
    };
    descend(0, x_start, a0);

    best.arc.times = times;
    best.arc.positions.resize(nodes);
    best.arc.positions[0] = x_start;
    for (std::size_t k = 0; k < steps; ++k) {
        best.arc.positions[k + 1] = grid[best_path[k]];
    }
    return best;
}

}  // namespace holder_hj
