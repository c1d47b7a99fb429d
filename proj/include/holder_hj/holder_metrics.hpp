#pragma once

// Lipschitz and Hölder seminorms of grid functions over a declared scale
// window, log-log exponent fits, the theorem's exponent pair, and the energy
// inequalities along an extracted arc.

#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "holder_hj/common.hpp"
#include "holder_hj/envelope.hpp"
#include "holder_hj/value_solver.hpp"

namespace holder_hj {

enum class Direction { space, time };

inline const char* to_string(Direction d) { return d == Direction::space ? "space" : "time"; }

struct Region {
    double x_lo = -std::numeric_limits<double>::infinity();
    double x_hi = std::numeric_limits<double>::infinity();
    double t_lo = -std::numeric_limits<double>::infinity();
    double t_hi = std::numeric_limits<double>::infinity();
};

struct ScaleWindow {
    double r_min = 0.0;
    double r_max = 0.0;
};

namespace detail {

struct IndexRange {
    std::size_t lo = 0;
    std::size_t hi = 0;  // inclusive
    bool empty = true;
};

inline IndexRange nodes_in(const std::vector<double>& grid, double lo, double hi) {
    IndexRange r;
    const double tol = 1e-12 * std::max(1.0, std::abs(grid.back() - grid.front()));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] >= lo - tol && grid[i] <= hi + tol) {
            if (r.empty) {
                r.lo = i;
                r.empty = false;
            }
            r.hi = i;
        }
    }
    return r;
}

struct RegionIndex {
    IndexRange xs;
    IndexRange ts;
};

inline RegionIndex locate(const GridFunction2D& u, const Region& region) {
    RegionIndex ri{nodes_in(u.x_grid(), region.x_lo, region.x_hi), nodes_in(u.t_grid(), region.t_lo, region.t_hi)};
    require(!ri.xs.empty && !ri.ts.empty, "holder metrics: region contains no grid nodes");
    return ri;
}

inline double axis_step(const GridFunction2D& u, Direction d) { return d == Direction::space ? u.dx() : u.dt(); }

inline double axis_width(const GridFunction2D& u, Direction d) {
    const auto& g = d == Direction::space ? u.x_grid() : u.t_grid();
    return g.back() - g.front();
}

/// max |u(node + d) - u(node)| over pairs along `dir` inside the region, offset d in nodes.
inline double max_increment(const GridFunction2D& u, const RegionIndex& ri, Direction dir, std::size_t d,
                            bool& any) {
    double best = 0.0;
    any = false;
    if (dir == Direction::space) {
        if (ri.xs.hi < ri.xs.lo + d) {
            return 0.0;
        }
        for (std::size_t k = ri.ts.lo; k <= ri.ts.hi; ++k) {
            for (std::size_t i = ri.xs.lo; i + d <= ri.xs.hi; ++i) {
                best = std::max(best, std::abs(u.at(k, i + d) - u.at(k, i)));
                any = true;
            }
        }
    } else {
        if (ri.ts.hi < ri.ts.lo + d) {
            return 0.0;
        }
        for (std::size_t k = ri.ts.lo; k + d <= ri.ts.hi; ++k) {
            for (std::size_t i = ri.xs.lo; i <= ri.xs.hi; ++i) {
                best = std::max(best, std::abs(u.at(k + d, i) - u.at(k, i)));
                any = true;
            }
        }
    }
    return best;
}

}  // namespace detail

/// [10 step, 0.1 * grid width] along the direction.
inline ScaleWindow default_scale_window(const GridFunction2D& u, Direction dir) {
    return {10.0 * detail::axis_step(u, dir), 0.1 * detail::axis_width(u, dir)};
}

/// sup |u(p) - u(p')| / |p - p'|^alpha over same-row (space) or same-column
/// (time) node pairs in the region with separation inside the scale window.
inline double holder_seminorm(const GridFunction2D& u, double alpha, Direction dir, const Region& region,
                              ScaleWindow window) {
    require(alpha > 0.0 && alpha <= 1.0, "holder_seminorm: alpha must lie in (0, 1]");
    const double step = detail::axis_step(u, dir);
    require(window.r_min >= step * (1.0 - 1e-9) && window.r_max >= window.r_min,
            "holder_seminorm: scale window must satisfy step <= r_min <= r_max");
    const auto ri = detail::locate(u, region);
    const auto d_lo = static_cast<std::size_t>(std::ceil(window.r_min / step - 1e-9));
    const auto d_hi = static_cast<std::size_t>(std::floor(window.r_max / step + 1e-9));
    double best = 0.0;
    bool any_pair = false;
    for (std::size_t d = std::max<std::size_t>(d_lo, 1); d <= d_hi; ++d) {
        bool any = false;
        const double inc = detail::max_increment(u, ri, dir, d, any);
        if (!any) {
            break;
        }
        any_pair = true;
        best = std::max(best, inc / std::pow(step * static_cast<double>(d), alpha));
    }
    require(any_pair, "holder_seminorm: no node pairs inside region and scale window");
    return best;
}

struct HolderFit {
    double exponent = 0.0;  // slope clipped to (0, 1]
    double raw_slope = 0.0;
    double constant = 0.0;
    double fit_residual = 0.0;  // R^2 of the log-log regression
    ScaleWindow scale_window;
    std::size_t scales = 0;
    bool poor_fit = false;  // R^2 < 0.9 or degenerate data
    std::vector<double> separations;
    std::vector<double> oscillations;
};

/// Least-squares slope of log(max |du| at separation r) against log r over
/// log-spaced separations snapped to the grid.
inline HolderFit fit_holder_exponent(const GridFunction2D& u, Direction dir, const Region& region,
                                     ScaleWindow window, std::size_t requested_scales = 12) {
    require(requested_scales >= 5, "fit_holder_exponent: need at least 5 scales");
    const double step = detail::axis_step(u, dir);
    require(window.r_min >= step * (1.0 - 1e-9) && window.r_max > window.r_min,
            "fit_holder_exponent: scale window must satisfy step <= r_min < r_max");
    const auto ri = detail::locate(u, region);

    std::vector<std::size_t> offsets;
    for (std::size_t k = 0; k < requested_scales; ++k) {
        const double frac = static_cast<double>(k) / static_cast<double>(requested_scales - 1);
        const double r = window.r_min * std::pow(window.r_max / window.r_min, frac);
        const auto d = static_cast<std::size_t>(std::max(1.0, std::round(r / step)));
        if (offsets.empty() || offsets.back() != d) {
            offsets.push_back(d);
        }
    }
    HolderFit fit;
    fit.scale_window = window;
    std::vector<double> lx;
    std::vector<double> ly;
    for (std::size_t d : offsets) {
        bool any = false;
        const double inc = detail::max_increment(u, ri, dir, d, any);
        if (!any) {
            continue;
        }
        const double r = step * static_cast<double>(d);
        fit.separations.push_back(r);
        fit.oscillations.push_back(inc);
        if (inc > 0.0) {
            lx.push_back(std::log(r));
            ly.push_back(std::log(inc));
        }
    }
    fit.scales = fit.separations.size();
    require(fit.scales >= 5, "fit_holder_exponent: fewer than 5 distinct scales fit inside the region");
    if (lx.size() < 5) {
        fit.exponent = 1.0;
        fit.poor_fit = true;
        return fit;
    }
    const LineFit lf = fit_line(lx, ly);
    fit.raw_slope = lf.slope;
    fit.exponent = std::clamp(lf.slope, std::numeric_limits<double>::min(), 1.0);
    fit.constant = std::exp(lf.intercept);
    fit.fit_residual = lf.r_squared;
    fit.poor_fit = lf.r_squared < 0.9;
    return fit;
}

/// Max adjacent-node difference quotient along `dir` in the region.
inline double lipschitz_constant(const GridFunction2D& u, Direction dir, const Region& region) {
    const auto ri = detail::locate(u, region);
    bool any = false;
    const double inc = detail::max_increment(u, ri, dir, 1, any);
    require(any, "lipschitz_constant: region holds fewer than two nodes along the direction");
    return inc / detail::axis_step(u, dir);
}

struct ExponentPair {
    double space = 0.0;  // (theta - p) / (theta - 1)
    double time = 0.0;   // (theta - p) / theta
};

inline ExponentPair theorem_exponents(double theta, double p) {
    require(p > 1.0, "theorem_exponents: p must exceed 1");
    require(theta > p, "theorem_exponents: theta must exceed p");
    return {(theta - p) / (theta - 1.0), (theta - p) / theta};
}

struct ArcEnergyReport {
    // energy inequality: u(x0, t0) >= u(xi(t), t) + c_plus E(t) / slack - eta_plus (t - t0)
    double energy_min_slack = 0.0;
    double energy_margin = 0.0;
    // weak reverse Hölder: mean |xi'|^p <= slack c_one (mean |xi'|)^p + c_zero on [t0, t]
    double reverse_min_slack = 0.0;
    double reverse_margin = 0.0;
    // decay of int_{t0}^{t0+h} |xi'| in h
    double decay_exponent = std::numeric_limits<double>::quiet_NaN();
    double decay_fit_r2 = 0.0;
    double decay_predicted = 0.0;
    bool decay_degenerate = false;
    double slack = 1.25;
};

/// Energy inequalities along an arc extracted from u. The arc starts at the
/// probed point (x0, t0) and runs forward in the solver's time; windows are
/// [t0, t_k]. `theta` sets the predicted decay exponent 1 - 1/theta, fitted
/// over h in [decay_h_min, decay_h_max].
inline ArcEnergyReport arc_energy_check(const DiscreteArc& arc, const GridFunction2D& u, const GrowthEnvelope& env,
                                        double slack, double theta, double decay_h_min = 0.02,
                                        double decay_h_max = 0.5) {
    require(slack >= 1.0, "arc_energy_check: slack must be >= 1");
    arc.validate();
    for (std::size_t k = 0; k < arc.size(); ++k) {
        require(u.time_index(arc.times[k]).has_value(), "arc_energy_check: arc times are not grid times");
        require(arc.positions[k] >= u.x_grid().front() - 1e-12 && arc.positions[k] <= u.x_grid().back() + 1e-12,
                "arc_energy_check: arc leaves the grid");
    }
    const double p = env.p;
    ArcEnergyReport rep;
    rep.slack = slack;
    rep.decay_predicted = 1.0 - 1.0 / theta;

    const double t0 = arc.times.front();
    const double u0 = u.interpolate(*u.time_index(t0), arc.positions.front());
    double energy = 0.0;
    double length = 0.0;
    rep.energy_margin = std::numeric_limits<double>::infinity();
    rep.reverse_margin = std::numeric_limits<double>::infinity();
    std::vector<double> hs;
    std::vector<double> lengths;
    for (std::size_t k = 0; k + 1 < arc.size(); ++k) {
        const double dt = arc.times[k + 1] - arc.times[k];
        const double speed = std::abs(arc.positions[k + 1] - arc.positions[k]) / dt;
        energy += dt * std::pow(speed, p);
        length += dt * speed;
        const double t = arc.times[k + 1];
        const double h = t - t0;
        const double uk = u.interpolate(*u.time_index(t), arc.positions[k + 1]);

        const double budget = u0 - uk + env.eta_plus * h;
        const double demand = env.c_plus * energy;
        if (demand > 0.0) {
            rep.energy_min_slack = budget > 0.0 ? std::max(rep.energy_min_slack, demand / budget)
                                                : std::numeric_limits<double>::infinity();
        }
        rep.energy_margin = std::min(rep.energy_margin, budget - demand / slack);

        const double pmean = energy / h;
        const double mean = length / h;
        const double rhs_unit = env.c_one * std::pow(mean, p);
        if (pmean - env.c_zero > 0.0) {
            rep.reverse_min_slack = rhs_unit > 0.0
                                        ? std::max(rep.reverse_min_slack, (pmean - env.c_zero) / rhs_unit)
                                        : std::numeric_limits<double>::infinity();
        }
        rep.reverse_margin = std::min(rep.reverse_margin, slack * rhs_unit + env.c_zero - pmean);

        if (h >= decay_h_min * (1.0 - 1e-9) && h <= decay_h_max * (1.0 + 1e-9)) {
            hs.push_back(h);
            lengths.push_back(length);
        }
    }
    // 20 log-spaced targets so that the fit is not dominated by large h.
    std::vector<double> lx;
    std::vector<double> ly;
    std::size_t last = hs.size();
    for (int j = 0; j < 20 && !hs.empty(); ++j) {
        const double target = decay_h_min * std::pow(decay_h_max / decay_h_min, j / 19.0);
        std::size_t best = 0;
        for (std::size_t i = 1; i < hs.size(); ++i) {
            if (std::abs(std::log(hs[i] / target)) < std::abs(std::log(hs[best] / target))) {
                best = i;
            }
        }
        if (best != last && lengths[best] > 0.0) {
            lx.push_back(std::log(hs[best]));
            ly.push_back(std::log(lengths[best]));
        }
        last = best;
    }
    if (lx.size() >= 5) {
        const LineFit lf = fit_line(lx, ly);
        rep.decay_exponent = lf.slope;
        rep.decay_fit_r2 = lf.r_squared;
    } else {
        rep.decay_degenerate = true;
    }
    return rep;
}

}  // namespace holder_hj
