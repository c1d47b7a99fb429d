#pragma once

// Weak reverse-Hölder machinery on sampled nonnegative functions:
// the threshold exponent theta(p, A), the hypothesis constants (A, B) of a
// given profile, the integral decay conclusion, Hardy's inequality with the
// power weight s^(p/theta - 1), the constant-shift reduction B -> 0, and the
// expectation form with theta capped below 2.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "holder_hj/common.hpp"

namespace holder_hj {

enum class Anchor { left, right };

/// Nonnegative function on [a, b], constant on each of N uniform cells.
/// values[i] is the value on [a + i h, a + (i+1) h).
class SampledFunction1D {
public:
    SampledFunction1D() = default;
    SampledFunction1D(double a, double b, std::vector<double> values, double p)
        : a_(a), b_(b), p_(p), values_(std::move(values)) {
        require(b > a, "SampledFunction1D: need b > a");
        require(p > 1.0, "SampledFunction1D: need p > 1");
        require(!values_.empty(), "SampledFunction1D: no samples");
        for (double v : values_) {
            require(std::isfinite(v) && v >= 0.0, "SampledFunction1D: values must be finite and nonnegative");
        }
    }

    /// Left-endpoint samples fn(a + i h).
    template <class Fn>
    static SampledFunction1D from_function(Fn&& fn, double a, double b, std::size_t cells, double p) {
        require(cells >= 1, "SampledFunction1D: need at least one cell");
        std::vector<double> v(cells);
        const double h = (b - a) / static_cast<double>(cells);
        for (std::size_t i = 0; i < cells; ++i) {
            v[i] = fn(a + h * static_cast<double>(i));
        }
        return SampledFunction1D(a, b, std::move(v), p);
    }

    /// Exact cell averages (F(s_{i+1}) - F(s_i)) / h of an antiderivative F.
    /// Keeps integrable singularities such as s^(gamma - 1) at the left end.
    template <class Fn>
    static SampledFunction1D from_antiderivative(Fn&& F, double a, double b, std::size_t cells, double p) {
        require(cells >= 1, "SampledFunction1D: need at least one cell");
        std::vector<double> v(cells);
        const double h = (b - a) / static_cast<double>(cells);
        double prev = F(a);
        for (std::size_t i = 0; i < cells; ++i) {
            const double next = F(i + 1 == cells ? b : a + h * static_cast<double>(i + 1));
            v[i] = std::max(0.0, (next - prev) / h);
            prev = next;
        }
        return SampledFunction1D(a, b, std::move(v), p);
    }

    double a() const { return a_; }
    double b() const { return b_; }
    double p() const { return p_; }
    std::size_t size() const { return values_.size(); }
    double step() const { return (b_ - a_) / static_cast<double>(values_.size()); }
    double node(std::size_t i) const { return a_ + step() * static_cast<double>(i); }
    const std::vector<double>& values() const { return values_; }

    /// (int_a^b phi^p)^(1/p)
    double norm_p() const {
        std::vector<double> pw(values_.size());
        for (std::size_t i = 0; i < values_.size(); ++i) {
            pw[i] = std::pow(values_[i], p_);
        }
        return std::pow(step() * pairwise_sum(pw), 1.0 / p_);
    }

    double integral() const { return step() * pairwise_sum(values_); }

private:
    double a_ = 0.0;
    double b_ = 1.0;
    double p_ = 2.0;
    std::vector<double> values_;
};

/// Window sums at every grid cut. For the left anchor entry i covers
/// [a, a + (i+1) h]; for the right anchor it covers [b - (i+1) h, b].
struct WindowSums {
    std::vector<double> length;
    std::vector<double> sum;        // int phi
    std::vector<double> power_sum;  // int phi^p
};

inline WindowSums window_sums(const SampledFunction1D& phi, Anchor anchor) {
    const std::size_t n = phi.size();
    const double h = phi.step();
    const double p = phi.p();
    WindowSums w;
    w.length.resize(n);
    w.sum.resize(n);
    w.power_sum.resize(n);
    double s = 0.0;
    double sp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = phi.values()[anchor == Anchor::left ? i : n - 1 - i];
        s += h * v;
        sp += h * std::pow(v, p);
        w.length[i] = h * static_cast<double>(i + 1);
        w.sum[i] = s;
        w.power_sum[i] = sp;
    }
    return w;
}

/// Smallest A with  mean(phi^p) <= A mean(phi)^p  on every grid window.
/// Windows where both sides vanish are skipped.
inline double min_hypothesis_constant(const SampledFunction1D& phi, Anchor anchor) {
    require(phi.size() >= 10, "min_hypothesis_constant: need at least 10 samples");
    const WindowSums w = window_sums(phi, anchor);
    const double p = phi.p();
    double best = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < w.length.size(); ++i) {
        const double mean = w.sum[i] / w.length[i];
        const double pmean = w.power_sum[i] / w.length[i];
        if (mean <= 0.0 && pmean <= 0.0) {
            continue;
        }
        any = true;
        best = std::max(best, pmean / std::pow(mean, p));
    }
    require(any, "min_hypothesis_constant: phi is identically zero");
    return best;
}

/// Smallest B >= 0 with  mean(phi^p) <= A mean(phi)^p + B  on every grid window.
inline double min_offset_constant(const SampledFunction1D& phi, double A, Anchor anchor) {
    const WindowSums w = window_sums(phi, anchor);
    const double p = phi.p();
    double best = 0.0;
    for (std::size_t i = 0; i < w.length.size(); ++i) {
        const double mean = w.sum[i] / w.length[i];
        const double pmean = w.power_sum[i] / w.length[i];
        best = std::max(best, pmean - A * std::pow(mean, p));
    }
    return best;
}

struct ThetaResult {
    double theta = 0.0;
    double p = 0.0;
    double A = 0.0;
    double margin = 0.0;      // threshold function at theta; positive
    double constant_C = 0.0;
    double theta_star = 0.0;  // supremum of the admissible set
    int sign_changes = 0;
    bool non_monotone = false;  // more than one sign change seen while sampling
    bool cap_engaged = false;   // expectation form only
};

/// theta / ((theta - p) A) - (theta / (theta - 1))^p
inline double threshold_function(double theta, double p, double A) {
    return theta / ((theta - p) * A) - std::pow(theta / (theta - 1.0), p);
}

namespace detail {

struct Bracket {
    double theta_star = 0.0;
    int sign_changes = 0;
};

inline Bracket locate_threshold(double p, double A) {
    // theta - p sampled log-uniformly over [1e-10 p, 1e9 p]; the threshold
    // function is +inf at p+ and tends to 1/A - 1 < 0 at infinity.
    constexpr int samples = 1200;
    const double lo_exp = -10.0;
    const double hi_exp = 9.0;
    std::vector<double> gaps(samples);
    std::vector<double> vals(samples);
    for (int k = 0; k < samples; ++k) {
        const double e = lo_exp + (hi_exp - lo_exp) * static_cast<double>(k) / (samples - 1);
        gaps[k] = p * std::pow(10.0, e);
        vals[k] = threshold_function(p + gaps[k], p, A);
    }
    Bracket out;
    int first_change = -1;
    for (int k = 0; k + 1 < samples; ++k) {
        if ((vals[k] > 0.0) != (vals[k + 1] > 0.0)) {
            ++out.sign_changes;
            if (first_change < 0) {
                first_change = k;
            }
        }
    }
    require(first_change >= 0, "theta_threshold: no sign change located");
    double lo = gaps[first_change];
    double hi = gaps[first_change + 1];
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (threshold_function(p + mid, p, A) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    out.theta_star = p + lo;
    return out;
}

}  // namespace detail

/// Threshold exponent for the deterministic form. theta = p + backoff (theta* - p);
/// constant_C = (K/D)^(1/p) (theta'/q)^(1/q) with K = theta/((theta-p)A),
/// D = K - (theta/(theta-1))^p, theta' = theta/(theta-1), q = p/(p-1).
inline ThetaResult theta_threshold(double p, double A, double backoff = 0.95) {
    require(std::isfinite(p) && p > 1.0, "theta_threshold: p must exceed 1");
    require(std::isfinite(A) && A > 1.0, "theta_threshold: A must exceed 1");
    require(backoff > 0.0 && backoff < 1.0, "theta_threshold: backoff must lie in (0, 1)");
    const detail::Bracket br = detail::locate_threshold(p, A);
    ThetaResult r;
    r.p = p;
    r.A = A;
    r.theta_star = br.theta_star;
    r.sign_changes = br.sign_changes;
    r.non_monotone = br.sign_changes > 1;
    r.theta = p + backoff * (br.theta_star - p);
    r.margin = threshold_function(r.theta, p, A);
    const double K = r.theta / ((r.theta - p) * A);
    const double D = r.margin;
    const double theta_conj = r.theta / (r.theta - 1.0);
    const double q = p / (p - 1.0);
    r.constant_C = std::pow(K / D, 1.0 / p) * std::pow(theta_conj / q, 1.0 / q);
    return r;
}

/// Expectation form: theta restricted to (p, 2). theta = min(2 - 1e-6, deterministic theta);
/// constant_C = (theta'/q)^(p/q) max(K, 2 theta / (p (2 - theta) A)) / D.
inline ThetaResult stochastic_theta(double p, double A, double backoff = 0.95) {
    require(std::isfinite(p) && p > 1.0 && p < 2.0, "stochastic_theta: p must lie in (1, 2)");
    require(std::isfinite(A) && A > 1.0, "stochastic_theta: A must exceed 1");
    constexpr double cap = 2.0 - 1e-6;
    ThetaResult r = theta_threshold(p, A, backoff);
    if (r.theta > cap) {
        r.theta = cap;
        r.cap_engaged = true;
    }
    r.margin = threshold_function(r.theta, p, A);
    const double K = r.theta / ((r.theta - p) * A);
    const double offset = 2.0 * r.theta / (p * (2.0 - r.theta) * A);
    const double theta_conj = r.theta / (r.theta - 1.0);
    const double q = p / (p - 1.0);
    r.constant_C = std::pow(theta_conj / q, p / q) * std::max(K, offset) / r.margin;
    return r;
}

/// Worst margin over grid t of
///   C (t-a)^(1-1/theta) { (b-a)^(1/theta-1/p) ||phi||_p + k (b-a)^(1/theta) } - int_a^t phi
/// (left anchor) or its mirror over [t, b] (right anchor). offset_k = 0 gives
/// the B = 0 form; the shifted form uses k = B^(1/p) / (A^(1/p) - 1).
inline double verify_conclusion(const SampledFunction1D& phi, double theta, double C, Anchor anchor,
                                double offset_k = 0.0) {
    require(theta > phi.p(), "verify_conclusion: theta must exceed p");
    const WindowSums w = window_sums(phi, anchor);
    const double len = phi.b() - phi.a();
    const double scale = std::pow(len, 1.0 / theta - 1.0 / phi.p()) * phi.norm_p() +
                         offset_k * std::pow(len, 1.0 / theta);
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < w.length.size(); ++i) {
        const double bound = C * std::pow(w.length[i], 1.0 - 1.0 / theta) * scale;
        worst = std::min(worst, bound - w.sum[i]);
    }
    return worst;
}

struct HardyResult {
    double margin = 0.0;
    double weighted_phi = 0.0;      // int s^(p/theta-1) phi^p
    double weighted_average = 0.0;  // int s^(p/theta-1) f^p
    bool under_resolved = false;    // fewer than 50 samples in [0, 0.01]
};

/// (theta/(theta-1))^p int_0^1 s^b phi^p - int_0^1 s^b f^p,  b = p/theta - 1,
/// with f the running average of phi, on the interval mapped to [0, 1].
/// The weight is integrated exactly per cell against phi^p; the f term is
/// exact on the first cell (f = phi_0 there) and 5-point Gauss-Legendre on
/// the others, where f is smooth.
inline HardyResult hardy_check(const SampledFunction1D& phi, double theta) {
    const double p = phi.p();
    require(theta > p, "hardy_check: theta must exceed p");
    const std::size_t n = phi.size();
    const double h = 1.0 / static_cast<double>(n);
    const double beta = p / theta - 1.0;
    const double bp1 = beta + 1.0;
    const auto& v = phi.values();

    static constexpr double gl_nodes[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                           0.9061798459386640};
    static constexpr double gl_weights[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                             0.4786286704993665, 0.2369268850561891};

    std::vector<double> lhs_terms(n);
    std::vector<double> rhs_terms(n);
    double running = 0.0;  // int_0^{s_i} phi
    for (std::size_t i = 0; i < n; ++i) {
        const double s0 = h * static_cast<double>(i);
        const double s1 = h * static_cast<double>(i + 1);
        const double weight = (std::pow(s1, bp1) - std::pow(s0, bp1)) / bp1;
        const double vp = std::pow(v[i], p);
        lhs_terms[i] = vp * weight;
        if (i == 0) {
            rhs_terms[i] = vp * weight;
        } else {
            double acc = 0.0;
            for (int g = 0; g < 5; ++g) {
                const double s = 0.5 * (s0 + s1) + 0.5 * h * gl_nodes[g];
                const double f = (running + v[i] * (s - s0)) / s;
                acc += gl_weights[g] * std::pow(s, beta) * std::pow(f, p);
            }
            rhs_terms[i] = 0.5 * h * acc;
        }
        running += h * v[i];
    }
    HardyResult r;
    r.weighted_phi = pairwise_sum(lhs_terms);
    r.weighted_average = pairwise_sum(rhs_terms);
    r.margin = std::pow(theta / (theta - 1.0), p) * r.weighted_phi - r.weighted_average;
    r.under_resolved = static_cast<double>(n) * 0.01 < 50.0;
    return r;
}

struct ShiftResult {
    SampledFunction1D shifted;
    double k = 0.0;
    double norm_bound = 0.0;  // ||phi||_p + k (b-a)^(1/p), an upper bound for ||psi||_p
};

/// psi = phi + k with k = B^(1/p) / (A^(1/p) - 1).
inline ShiftResult shift_reduction(const SampledFunction1D& phi, double A, double B) {
    require(A > 1.0, "shift_reduction: A must exceed 1");
    require(B >= 0.0, "shift_reduction: B must be nonnegative");
    const double p = phi.p();
    ShiftResult r;
    r.k = std::pow(B, 1.0 / p) / (std::pow(A, 1.0 / p) - 1.0);
    std::vector<double> vals = phi.values();
    for (double& x : vals) {
        x += r.k;
    }
    r.shifted = SampledFunction1D(phi.a(), phi.b(), std::move(vals), p);
    r.norm_bound = phi.norm_p() + r.k * std::pow(phi.b() - phi.a(), 1.0 / p);
    return r;
}

}  // namespace holder_hj
