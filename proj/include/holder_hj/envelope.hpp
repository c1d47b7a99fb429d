#pragma once

// Power-law envelope Hamiltonians
//
//     (1/delta)|z|^q - eta_minus  <=  H(x,t,z)  <=  delta|z|^q + eta_plus
//
// their convex conjugates, the Hopf-Lax step built on those conjugates, and
// the one-sided bound satisfied by sub-solutions of the lower envelope.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "holder_hj/common.hpp"

namespace holder_hj {

struct GrowthEnvelope {
    double q = 2.0;
    double p = 2.0;
    double delta = 1.0;
    double eta_plus = 0.0;
    double eta_minus = 0.0;
    double bound_M = 0.0;
    double c_plus = 0.25;   // coefficient of the conjugate of the upper envelope
    double c_minus = 0.25;  // coefficient of the conjugate of the lower envelope
    double c_zero = 0.0;    // (eta_plus + eta_minus) / c_plus
    double c_one = 1.0;     // delta^(2p/q) = c_minus / c_plus

    double eta() const { return eta_plus + eta_minus; }

    double hamiltonian_plus(double z_norm) const { return delta * std::pow(std::abs(z_norm), q) + eta_plus; }
    double hamiltonian_minus(double z_norm) const { return std::pow(std::abs(z_norm), q) / delta - eta_minus; }

    /// H_+^*(w) = c_plus |w|^p - eta_plus
    double conjugate_plus(double w_norm) const { return c_plus * std::pow(std::abs(w_norm), p) - eta_plus; }
    /// H_-^*(w) = c_minus |w|^p + eta_minus
    double conjugate_minus(double w_norm) const { return c_minus * std::pow(std::abs(w_norm), p) + eta_minus; }
};

inline GrowthEnvelope derive_conjugates(double q, double delta, double eta_plus = 0.0, double eta_minus = 0.0,
                                        double bound_M = 0.0) {
    require(std::isfinite(q) && q > 1.0, "derive_conjugates: q must exceed 1 (conjugate undefined otherwise)");
    require(std::isfinite(delta) && delta >= 1.0, "derive_conjugates: delta must be >= 1");
    require(eta_plus >= 0.0 && eta_minus >= 0.0, "derive_conjugates: eta offsets must be nonnegative");
    require(bound_M >= 0.0, "derive_conjugates: bound M must be nonnegative");

    GrowthEnvelope env;
    env.q = q;
    env.p = q / (q - 1.0);
    env.delta = delta;
    env.eta_plus = eta_plus;
    env.eta_minus = eta_minus;
    env.bound_M = bound_M;
    const double p_over_q = env.p / q;
    const double denom = env.p * std::pow(q, p_over_q);
    env.c_plus = std::pow(delta, -p_over_q) / denom;
    env.c_minus = std::pow(delta, p_over_q) / denom;
    env.c_zero = (eta_plus + eta_minus) / env.c_plus;
    env.c_one = std::pow(delta, 2.0 * p_over_q);
    return env;
}

/// Result of the sampled Legendre transform.
struct ConjugateSample {
    double value = -std::numeric_limits<double>::infinity();
    std::vector<double> maximizer;
    bool on_boundary = false;  // maximizer sits on the search box: radius too small
};

/// Brute-force convex conjugate sup_z { z.w - H(z) } over the box
/// [-radius, radius]^d sampled with `samples` points per axis.
///
/// `hamiltonian` is called with a std::span<const double> of length d.
/// Use an odd sample count so that z = 0 is on the grid. Nested refinements
/// (samples -> 2*samples - 1) never decrease the returned value.
template <class Hamiltonian>
ConjugateSample legendre_oracle(Hamiltonian&& hamiltonian, std::span<const double> w, double radius,
                                std::size_t samples) {
    require(!w.empty() && w.size() <= 3, "legendre_oracle: dimension must be 1, 2 or 3");
    require(samples >= 1000, "legendre_oracle: at least 1000 samples per axis");
    require(radius > 0.0, "legendre_oracle: radius must be positive");

    const std::size_t dim = w.size();
    const double step = 2.0 * radius / static_cast<double>(samples - 1);
    std::vector<std::size_t> idx(dim, 0);
    std::vector<double> z(dim, -radius);
    std::vector<std::size_t> best_idx(dim, 0);

    ConjugateSample out;
    for (;;) {
        double dot = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            z[d] = -radius + step * static_cast<double>(idx[d]);
            dot += z[d] * w[d];
        }
        const double val = dot - hamiltonian(std::span<const double>(z));
        if (val > out.value) {
            out.value = val;
            best_idx = idx;
        }
        std::size_t d = 0;
        while (d < dim && ++idx[d] == samples) {
            idx[d] = 0;
            ++d;
        }
        if (d == dim) {
            break;
        }
    }
    out.maximizer.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        out.maximizer[d] = -radius + step * static_cast<double>(best_idx[d]);
        if (best_idx[d] == 0 || best_idx[d] == samples - 1) {
            out.on_boundary = true;
        }
    }
    return out;
}

/// H^*(w) = coeff |w|^exponent + offset.
struct PowerConjugate {
    double coeff = 0.25;
    double exponent = 2.0;
    double offset = 0.0;

    double operator()(double w) const { return coeff * std::pow(std::abs(w), exponent) + offset; }
};

inline PowerConjugate plus_conjugate(const GrowthEnvelope& env) { return {env.c_plus, env.p, -env.eta_plus}; }
inline PowerConjugate minus_conjugate(const GrowthEnvelope& env) { return {env.c_minus, env.p, env.eta_minus}; }

struct UniformGrid1D {
    double origin = 0.0;
    double step = 1.0;
    std::size_t size = 0;

    double at(std::size_t i) const { return origin + step * static_cast<double>(i); }
};

struct HopfLaxOptions {
    /// Search only |y - x| <= window_radius.
    double window_radius = std::numeric_limits<double>::infinity();
    /// 3-point parabolic refinement around the discrete argmin.
    bool parabolic_refinement = false;
};

struct HopfLaxResult {
    std::vector<double> values;
    std::vector<std::size_t> argmin;  // grid index of the discrete minimizer
    std::vector<double> minimizer;    // refined location (== grid point without refinement)
    std::size_t window_hits = 0;      // minimizer on a truncated window edge
    std::size_t edge_hits = 0;        // minimizer moved to the first/last grid node
};

/// Search radius from the a priori arc-energy bound (2M + eta_+ T)/c_+,
/// times a safety factor 2: R(tau) = 2 ((2M + eta_+ T)/c_+)^(1/p) tau^(1/q).
inline double hopf_lax_window(const GrowthEnvelope& env, double horizon, double tau) {
    require(tau > 0.0, "hopf_lax_window: tau must be positive");
    const double budget = (2.0 * env.bound_M + env.eta_plus * horizon) / env.c_plus;
    return 2.0 * std::pow(budget, 1.0 / env.p) * std::pow(tau, 1.0 / env.q);
}

/// One Hopf-Lax step on a uniform 1D grid:
///   v(x_i) = min_j { tau * H^*((x_j - x_i)/tau) + u_prev(x_j) }.
/// Ties go to the smallest |x_j - x_i|, then to the smaller x_j.
inline HopfLaxResult hopf_lax_step(std::span<const double> u_prev, UniformGrid1D grid, double tau,
                                   PowerConjugate kernel, HopfLaxOptions options = {}) {
    require(tau > 0.0, "hopf_lax_step: tau must be positive");
    require(grid.size == u_prev.size() && grid.size >= 1, "hopf_lax_step: grid/values size mismatch");
    require(grid.step > 0.0, "hopf_lax_step: grid step must be positive");

    const std::size_t n = grid.size;
    const double max_offset_real = options.window_radius / grid.step;
    const std::size_t max_offset = std::isfinite(max_offset_real)
                                       ? static_cast<std::size_t>(std::floor(max_offset_real + 1e-9))
                                       : n;
    auto cost = [&](std::size_t i, std::size_t j) {
        const double disp = (static_cast<double>(j) - static_cast<double>(i)) * grid.step;
        return tau * kernel(disp / tau) + u_prev[j];
    };

    HopfLaxResult out;
    out.values.resize(n);
    out.argmin.resize(n);
    out.minimizer.resize(n);
    std::vector<unsigned char> window_flag(n, 0);
    std::vector<unsigned char> edge_flag(n, 0);

    parallel_for(n, [&](std::size_t i) {
        double best = cost(i, i);
        std::size_t best_j = i;
        std::size_t best_d = 0;
        for (std::size_t d = 1; d <= max_offset; ++d) {
            bool any = false;
            if (i >= d) {
                any = true;
                const double c = cost(i, i - d);
                if (c < best) {
                    best = c;
                    best_j = i - d;
                    best_d = d;
                }
            }
            if (i + d < n) {
                any = true;
                const double c = cost(i, i + d);
                if (c < best) {
                    best = c;
                    best_j = i + d;
                    best_d = d;
                }
            }
            if (!any) {
                break;
            }
        }
        double where = grid.at(best_j);
        if (options.parabolic_refinement && best_j > 0 && best_j + 1 < n) {
            const std::size_t dl = best_j > i ? best_j - 1 - i : i - (best_j - 1);
            const std::size_t dr = best_j + 1 > i ? best_j + 1 - i : i - (best_j + 1);
            if (dl <= max_offset && dr <= max_offset) {
                const double fl = cost(i, best_j - 1);
                const double fr = cost(i, best_j + 1);
                const double curvature = fl - 2.0 * best + fr;
                if (curvature > 0.0) {
                    const double shift = std::clamp(0.5 * (fl - fr) / curvature, -0.5, 0.5);
                    const double refined = best - 0.25 * (fl - fr) * shift;
                    if (refined < best) {
                        best = refined;
                        where = grid.at(best_j) + shift * grid.step;
                    }
                }
            }
        }
        out.values[i] = best;
        out.argmin[i] = best_j;
        out.minimizer[i] = where;
        if (best_d == max_offset && best_d > 0) {
            const bool truncated = (best_j < i) ? (i >= max_offset + 1) : (i + max_offset + 1 < n);
            window_flag[i] = truncated ? 1 : 0;
        }
        if (best_j != i && (best_j == 0 || best_j + 1 == n)) {
            edge_flag[i] = 1;
        }
    });
    for (std::size_t i = 0; i < n; ++i) {
        out.window_hits += window_flag[i];
        out.edge_hits += edge_flag[i];
    }
    return out;
}

/// Upper bound for sub-solutions of u_t + H_-(Du) = 0:
///   u(x, s) <= u(y, t) + c_minus (s - t)^(1-p) |y - x|^p + eta_minus (s - t).
inline double one_sided_upper_bound(double u_at_y_t, std::span<const double> x, std::span<const double> y,
                                    double s, double t, const GrowthEnvelope& env) {
    require(s > t, "one_sided_upper_bound: requires s > t");
    require(x.size() == y.size(), "one_sided_upper_bound: dimension mismatch");
    double dist2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        dist2 += (y[i] - x[i]) * (y[i] - x[i]);
    }
    const double gap = s - t;
    return u_at_y_t + env.c_minus * std::pow(gap, 1.0 - env.p) * std::pow(std::sqrt(dist2), env.p) +
           env.eta_minus * gap;
}

}  // namespace holder_hj
