#pragma once

// Monte Carlo checks for controlled diffusions dY = zeta dt + sigma(Y, t) dW:
// the pinned bridge with drift -alpha (Y - x)/(T - t), its control energy,
// the moment bound on increments, and the expectation form of the weak
// reverse-Hölder inequality on simulated controls.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "holder_hj/common.hpp"
#include "holder_hj/philox.hpp"
#include "holder_hj/reverse_holder.hpp"

namespace holder_hj {

/// Diffusion coefficient sigma: R^N x [0,T] -> R^{N x D}, written row-major
/// into `out` (N*D entries). The factor sqrt(2) some second-order equations
/// carry is not applied here.
using SigmaFn = std::function<void(std::span<const double> y, double t, std::span<double> out)>;

struct SdeSpec {
    std::size_t dimension = 1;
    std::size_t noise_dimension = 1;
    SigmaFn sigma;
    double sigma_bound = 1.0;  // delta: Frobenius bound on sigma

    /// sigma = value * I (N = D).
    static SdeSpec constant(std::size_t n, double value) {
        SdeSpec s;
        s.dimension = n;
        s.noise_dimension = n;
        s.sigma_bound = std::abs(value) * std::sqrt(static_cast<double>(n));
        s.sigma = [n, value](std::span<const double>, double, std::span<double> out) {
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    out[i * n + j] = i == j ? value : 0.0;
                }
            }
        };
        return s;
    }

    void validate() const {
        require(dimension >= 1 && noise_dimension >= 1, "SdeSpec: dimensions must be positive");
        require(static_cast<bool>(sigma), "SdeSpec: sigma not set");
        require(sigma_bound >= 0.0, "SdeSpec: sigma bound must be nonnegative");
    }
};

struct BridgeSpec {
    std::vector<double> start{0.0};   // y
    std::vector<double> target{0.0};  // x
    double horizon = 1.0;             // T
    double p = 1.5;
    double alpha = 0.0;  // 0 selects 3/4 + 1/(2p)

    double effective_alpha() const { return alpha > 0.0 ? alpha : 0.75 + 0.5 / p; }

    void validate() const {
        require(!start.empty() && start.size() == target.size(), "BridgeSpec: start/target dimension mismatch");
        require(horizon > 0.0, "BridgeSpec: horizon must be positive");
        require(p > 1.0 && p < 2.0, "BridgeSpec: p must lie in (1, 2)");
        const double a = effective_alpha();
        require(a > 1.0 - 1.0 / p && a < 2.0, "BridgeSpec: alpha must lie in (1 - 1/p, 2)");
    }
};

/// Batch-means Monte Carlo estimate.
struct McEstimate {
    double estimate = 0.0;
    double stderr_ = 0.0;
};

/// Mean over `values` and the standard error from `batches` contiguous batch means.
inline McEstimate batch_means(std::span<const double> values, std::size_t batches = 20) {
    require(!values.empty(), "batch_means: no samples");
    McEstimate out;
    out.estimate = pairwise_sum(values) / static_cast<double>(values.size());
    const std::size_t b = std::min(batches, values.size());
    if (b < 2) {
        return out;
    }
    std::vector<double> means(b);
    for (std::size_t k = 0; k < b; ++k) {
        const std::size_t lo = k * values.size() / b;
        const std::size_t hi = (k + 1) * values.size() / b;
        means[k] = pairwise_sum(values.subspan(lo, hi - lo)) / static_cast<double>(hi - lo);
    }
    const double m = pairwise_sum(means) / static_cast<double>(b);
    double ss = 0.0;
    for (double v : means) {
        ss += (v - m) * (v - m);
    }
    out.stderr_ = std::sqrt(ss / static_cast<double>(b - 1) / static_cast<double>(b));
    return out;
}

/// Seeded ensemble on a uniform time grid. Full trajectories are kept only
/// when requested; per-path summaries are always kept.
struct PathEnsemble {
    std::vector<double> times;  // n + 1 nodes
    std::size_t dimension = 1;
    std::size_t path_count = 0;
    std::uint64_t seed = 0;
    double dt = 0.0;
    bool stored = false;
    std::vector<double> states;    // [path][k in 0..n][dim]
    std::vector<double> controls;  // [path][k in 0..n-1][dim]
    std::vector<double> terminal;     // Y_T, [path][dim]
    std::vector<double> penultimate;  // Y at T - dt, [path][dim]
    std::vector<double> energy;       // E[int_0^T |zeta|^p | grid states] per path
    bool overflow = false;
    bool sigma_bound_violated = false;
    bool energy_anisotropic = false;  // in-cell noise used the mean eigenvalue of sigma sigma^T

    std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }

    double state(std::size_t path, std::size_t k, std::size_t d = 0) const {
        return states[(path * times.size() + k) * dimension + d];
    }
    double control(std::size_t path, std::size_t k, std::size_t d = 0) const {
        return controls[(path * steps() + k) * dimension + d];
    }
};

namespace detail {

inline std::size_t step_count(double horizon, double dt) {
    const double n = std::ceil(horizon / dt - 1e-9);
    return static_cast<std::size_t>(std::max(1.0, n));
}

inline double frobenius(std::span<const double> m) {
    double s = 0.0;
    for (double v : m) {
        s += v * v;
    }
    return std::sqrt(s);
}

/// g(rho) = E|rho e_1 + Z|^p for Z ~ N(0, I_d): tabulated on [0, 20] from the
/// Kummer form 2^(p/2) Gamma((d+p)/2)/Gamma(d/2) e^(-z) 1F1((d+p)/2; d/2; z),
/// z = rho^2/2, and by its large-rho expansion beyond.
class GaussianNormMoment {
public:
    GaussianNormMoment(double p, std::size_t d) : p_(p), d_(static_cast<double>(d)) {
        values_.resize(nodes_ + 3);
        const double lead =
            std::exp(0.5 * p * std::log(2.0) + std::lgamma(0.5 * (d_ + p)) - std::lgamma(0.5 * d_));
        for (std::size_t i = 0; i < values_.size(); ++i) {
            values_[i] = lead * kummer_scaled(0.5 * (d_ + p), 0.5 * d_, 0.5 * sq(step_ * static_cast<double>(i)));
        }
    }

    double operator()(double rho) const {
        if (rho >= rho_max_) {
            return asymptotic(rho);
        }
        const double x = rho / step_;
        const auto i = static_cast<std::size_t>(x);
        const double f = x - static_cast<double>(i);
        // Catmull-Rom through i-1..i+2, mirrored at 0 (g is even in rho).
        const double y0 = i == 0 ? values_[1] : values_[i - 1];
        const double y1 = values_[i];
        const double y2 = values_[i + 1];
        const double y3 = values_[i + 2];
        return y1 + 0.5 * f * (y2 - y0 + f * (2.0 * y0 - 5.0 * y1 + 4.0 * y2 - y3 + f * (3.0 * (y1 - y2) + y3 - y0)));
    }

    double asymptotic(double rho) const {
        const double r2 = 1.0 / (rho * rho);
        const double c1 = p_ * (p_ + d_ - 2.0) / 2.0;
        const double c2 = p_ * (p_ - 2.0) * (p_ + d_ - 2.0) * (p_ + d_ - 4.0) / 8.0;
        return std::pow(rho, p_) * (1.0 + r2 * (c1 + r2 * c2));
    }

private:
    static double sq(double v) { return v * v; }

    /// e^(-z) 1F1(a; b; z), summed term by term in log space.
    static double kummer_scaled(double a, double b, double z) {
        if (z == 0.0) {
            return 1.0;
        }
        double log_term = -z;
        double sum = std::exp(log_term);
        for (int n = 0; n < 100000; ++n) {
            log_term += std::log((a + n) / (b + n) * z / (n + 1.0));
            const double t = std::exp(log_term);
            sum += t;
            if (n > z && t < 1e-17 * sum) {
                break;
            }
        }
        return sum;
    }

    static constexpr double rho_max_ = 20.0;
    static constexpr std::size_t nodes_ = 4000;
    static constexpr double step_ = rho_max_ / nodes_;
    double p_;
    double d_;
    std::vector<double> values_;
};

}  // namespace detail

/// Bridge from (y, 0) to (x, T). The drift is integrated exactly over each
/// cell: Y_{k+1} - x = r_k (Y_k - x) + sqrt(v_k) sigma(Y_k, t_k) Z with
///   r_k = ((T - t_{k+1}) / (T - t_k))^alpha,
///   v_k = int_{t_k}^{t_{k+1}} r(s)^2 ds,
/// so the last step lands on x. zeta_k = -alpha (Y_k - x)/(T - t_k).
///
/// The per-path energy is E[int |zeta_s|^p ds | grid states]: inside a cell
/// Y_s - x is Gaussian with mean r(s)(Y_k - x) and covariance V(s) sigma sigma^T,
/// so each cell contributes int (alpha/(T-s))^p E|m(s) + N(0, V(s) S)|^p ds,
/// integrated by Gauss-Legendre (after tau = tau_0 u^(2/(2-p)) on the last
/// cell, which removes the (T-s)^(-p/2) endpoint singularity). sigma is frozen
/// at (Y_k, t_k); a non-isotropic sigma sigma^T is replaced by its mean
/// eigenvalue and flagged. With sigma = 0 the drift integral is exact.
inline PathEnsemble simulate_bridge(const BridgeSpec& spec, const SdeSpec& sde, double dt, std::size_t paths,
                                    std::uint64_t seed, bool store_paths = true) {
    spec.validate();
    sde.validate();
    require(spec.start.size() == sde.dimension, "simulate_bridge: bridge and SDE dimensions differ");
    require(dt > 0.0 && dt <= spec.horizon / 100.0 * (1.0 + 1e-9), "simulate_bridge: dt must be <= T/100");
    require(paths >= 1, "simulate_bridge: need at least one path");

    const std::size_t n = detail::step_count(spec.horizon, dt);
    const std::size_t dim = sde.dimension;
    const std::size_t nd = sde.noise_dimension;
    const double T = spec.horizon;
    const double alpha = spec.effective_alpha();
    const double p = spec.p;
    const double beta = p * (alpha - 1.0);

    PathEnsemble ens;
    ens.dimension = dim;
    ens.path_count = paths;
    ens.seed = seed;
    ens.dt = T / static_cast<double>(n);
    ens.times.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        ens.times[k] = T * static_cast<double>(k) / static_cast<double>(n);
    }
    ens.times[n] = T;
    ens.stored = store_paths;
    if (store_paths) {
        ens.states.resize(paths * (n + 1) * dim);
        ens.controls.resize(paths * n * dim);
    }
    ens.terminal.resize(paths * dim);
    ens.penultimate.resize(paths * dim);
    ens.energy.resize(paths);

    // Per-cell drift factor, noise variance and energy weight are path independent.
    std::vector<double> r(n);
    std::vector<double> sd(n);
    std::vector<double> w(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double rem0 = T - ens.times[k];
        const double rem1 = T - ens.times[k + 1];
        if (rem1 <= 0.0) {
            r[k] = 0.0;
            sd[k] = 0.0;
        } else {
            r[k] = std::pow(rem1 / rem0, alpha);
            double v = 0.0;
            if (std::abs(2.0 * alpha - 1.0) < 1e-12) {
                v = rem1 * std::log(rem0 / rem1);
            } else {
                v = (rem1 - std::pow(rem1, 2.0 * alpha) * std::pow(rem0, 1.0 - 2.0 * alpha)) / (2.0 * alpha - 1.0);
            }
            sd[k] = std::sqrt(std::max(0.0, v));
        }
        w[k] = std::pow(rem0, -beta) * (std::pow(rem0, beta + 1.0) - std::pow(std::max(rem1, 0.0), beta + 1.0)) /
               (beta + 1.0);
    }

    // Quadrature nodes per cell in tau = T - s: weight (alpha/tau)^p dtau, the
    // mean factor (tau/tau_0)^alpha and the in-cell variance V(tau).
    static constexpr double gl_x[6] = {-0.9324695142031521, -0.6612093864662645, -0.2386191860831969,
                                       0.2386191860831969,  0.6612093864662645,  0.9324695142031521};
    static constexpr double gl_w[6] = {0.1713244923791704, 0.3607615730481386, 0.4679139345726910,
                                       0.4679139345726910, 0.3607615730481386, 0.1713244923791704};
    constexpr std::size_t q = 6;
    std::vector<double> node_weight(n * q);
    std::vector<double> node_mean(n * q);
    std::vector<double> node_sd(n * q);
    std::vector<double> node_sdp(n * q);
    const double stretch = 2.0 / (2.0 - p);
    for (std::size_t k = 0; k < n; ++k) {
        const double tau0 = T - ens.times[k];
        const double tau1 = std::max(T - ens.times[k + 1], 0.0);
        for (std::size_t j = 0; j < q; ++j) {
            const double u = 0.5 * (gl_x[j] + 1.0);
            double tau = 0.0;
            double jac = 0.0;
            if (tau1 > 0.0) {
                tau = tau1 + (tau0 - tau1) * u;
                jac = tau0 - tau1;
            } else {
                tau = tau0 * std::pow(u, stretch);
                jac = tau0 * stretch * std::pow(u, stretch - 1.0);
            }
            double v = 0.0;
            if (std::abs(2.0 * alpha - 1.0) < 1e-12) {
                v = tau * std::log(tau0 / tau);
            } else {
                v = (tau - std::pow(tau, 2.0 * alpha) * std::pow(tau0, 1.0 - 2.0 * alpha)) / (2.0 * alpha - 1.0);
            }
            v = std::max(v, 0.0);
            node_weight[k * q + j] = 0.5 * gl_w[j] * jac * std::pow(alpha / tau, p);
            node_mean[k * q + j] = std::pow(tau / tau0, alpha);
            node_sd[k * q + j] = std::sqrt(v);
            node_sdp[k * q + j] = std::pow(v, 0.5 * p);
        }
    }
    const detail::GaussianNormMoment moment(p, dim);

    std::vector<unsigned char> overflow(paths, 0);
    std::vector<unsigned char> violated(paths, 0);
    std::vector<unsigned char> anisotropic(paths, 0);
    parallel_for(paths, [&](std::size_t path) {
        PhiloxStream rng(seed, path);
        std::vector<double> y(spec.start);
        std::vector<double> sig(dim * nd);
        std::vector<double> z(nd);
        std::vector<double> zeta(dim);
        std::vector<double> cell_energy(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double rem0 = T - ens.times[k];
            double znorm2 = 0.0;
            double dev2 = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                const double dev = y[d] - spec.target[d];
                zeta[d] = -alpha * dev / rem0;
                znorm2 += zeta[d] * zeta[d];
                dev2 += dev * dev;
            }
            if (store_paths) {
                for (std::size_t d = 0; d < dim; ++d) {
                    ens.states[(path * (n + 1) + k) * dim + d] = y[d];
                    ens.controls[(path * n + k) * dim + d] = zeta[d];
                }
            }
            if (k + 1 == n) {
                for (std::size_t d = 0; d < dim; ++d) {
                    ens.penultimate[path * dim + d] = y[d];
                }
            }
            sde.sigma(y, ens.times[k], sig);
            if (path == 0 && detail::frobenius(sig) > sde.sigma_bound * (1.0 + 1e-12)) {
                violated[path] = 1;
            }
            // S = sigma sigma^T; its mean eigenvalue c drives the in-cell noise.
            double trace = 0.0;
            bool isotropic = true;
            double diag0 = 0.0;
            for (std::size_t a = 0; a < dim && isotropic; ++a) {
                for (std::size_t b = 0; b < dim; ++b) {
                    double sab = 0.0;
                    for (std::size_t j = 0; j < nd; ++j) {
                        sab += sig[a * nd + j] * sig[b * nd + j];
                    }
                    if (a == b) {
                        trace += sab;
                        if (a == 0) {
                            diag0 = sab;
                        }
                        isotropic = isotropic && std::abs(sab - diag0) <= 1e-12 * std::max(1.0, diag0);
                    } else {
                        isotropic = isotropic && std::abs(sab) <= 1e-12 * std::max(1.0, diag0);
                    }
                }
            }
            if (!isotropic) {
                anisotropic[path] = 1;
                trace = 0.0;
                for (double v : sig) {
                    trace += v * v;
                }
            }
            const double c = trace / static_cast<double>(dim);
            if (c > 0.0) {
                const double dist = std::sqrt(dev2);
                const double cp = std::pow(c, 0.5 * p);
                const double inv_sc = 1.0 / std::sqrt(c);
                double e = 0.0;
                for (std::size_t j = 0; j < q; ++j) {
                    const std::size_t at = k * q + j;
                    const double m = dist * node_mean[at];
                    const double sdv = node_sd[at];
                    const double val = sdv > 0.0 ? cp * node_sdp[at] * moment(m * inv_sc / sdv) : std::pow(m, p);
                    e += node_weight[at] * val;
                }
                cell_energy[k] = e;
            } else {
                cell_energy[k] = std::pow(std::sqrt(znorm2), p) * w[k];
            }
            for (std::size_t j = 0; j < nd; ++j) {
                z[j] = rng.normal();
            }
            for (std::size_t d = 0; d < dim; ++d) {
                double noise = 0.0;
                for (std::size_t j = 0; j < nd; ++j) {
                    noise += sig[d * nd + j] * z[j];
                }
                y[d] = spec.target[d] + r[k] * (y[d] - spec.target[d]) + sd[k] * noise;
                if (!std::isfinite(y[d])) {
                    overflow[path] = 1;
                }
            }
        }
        for (std::size_t d = 0; d < dim; ++d) {
            ens.terminal[path * dim + d] = y[d];
            if (store_paths) {
                ens.states[(path * (n + 1) + n) * dim + d] = y[d];
            }
        }
        ens.energy[path] = pairwise_sum(cell_energy);
    });
    for (std::size_t i = 0; i < paths; ++i) {
        ens.overflow = ens.overflow || overflow[i];
        ens.sigma_bound_violated = ens.sigma_bound_violated || violated[i];
        ens.energy_anisotropic = ens.energy_anisotropic || anisotropic[i];
    }
    return ens;
}

struct BridgeEnergyResult {
    McEstimate energy;         // E int_0^T |zeta|^p
    double shape = 0.0;        // T^(1-p) |y-x|^p + T^(1-p/2)
    double ratio = 0.0;        // energy / shape
    double relative_stderr = 0.0;
    bool noisy = false;        // relative standard error above 5%
    McEstimate abs_terminal;   // E |Y_T - x|
};

inline BridgeEnergyResult bridge_energy_check(const PathEnsemble& ens, const BridgeSpec& spec) {
    spec.validate();
    require(!ens.energy.empty(), "bridge_energy_check: empty ensemble");
    BridgeEnergyResult out;
    out.energy = batch_means(ens.energy);
    double dist2 = 0.0;
    for (std::size_t d = 0; d < spec.start.size(); ++d) {
        dist2 += (spec.start[d] - spec.target[d]) * (spec.start[d] - spec.target[d]);
    }
    const double T = spec.horizon;
    const double p = spec.p;
    out.shape = std::pow(T, 1.0 - p) * std::pow(std::sqrt(dist2), p) + std::pow(T, 1.0 - p / 2.0);
    out.ratio = out.energy.estimate / out.shape;
    out.relative_stderr = out.energy.estimate > 0.0 ? out.energy.stderr_ / out.energy.estimate : 0.0;
    out.noisy = out.relative_stderr > 0.05;

    std::vector<double> dev(ens.path_count);
    for (std::size_t i = 0; i < ens.path_count; ++i) {
        double s = 0.0;
        for (std::size_t d = 0; d < ens.dimension; ++d) {
            const double e = ens.terminal[i * ens.dimension + d] - spec.target[d];
            s += e * e;
        }
        dev[i] = std::sqrt(s);
    }
    out.abs_terminal = batch_means(dev);
    return out;
}

/// Exact deterministic bridge energy for sigma = 0: alpha^p |y-x|^p T^(1-p) / (1 + p(alpha-1)).
inline double bridge_energy_closed_form(const BridgeSpec& spec) {
    const double alpha = spec.effective_alpha();
    double dist2 = 0.0;
    for (std::size_t d = 0; d < spec.start.size(); ++d) {
        dist2 += (spec.start[d] - spec.target[d]) * (spec.start[d] - spec.target[d]);
    }
    return std::pow(alpha, spec.p) * std::pow(std::sqrt(dist2), spec.p) * std::pow(spec.horizon, 1.0 - spec.p) /
           (1.0 + spec.p * (alpha - 1.0));
}

/// E int_0^T |zeta_t|^p dt for sigma = sigma_scalar I in closed Gaussian form:
/// Y_t - x ~ N(m_t, sigma^2 Var_t I) with m_t = (y - x)((T-t)/T)^alpha and
/// Var_t = ((T-t) - (T-t)^(2 alpha) T^(1 - 2 alpha)) / (2 alpha - 1); the time
/// integral uses panels in u with T - t = T u^(2/(2-p)).
inline double bridge_energy_gaussian(const BridgeSpec& spec, double sigma_scalar, std::size_t panels = 400) {
    spec.validate();
    const double T = spec.horizon;
    const double alpha = spec.effective_alpha();
    const double p = spec.p;
    double dist2 = 0.0;
    for (std::size_t d = 0; d < spec.start.size(); ++d) {
        dist2 += (spec.start[d] - spec.target[d]) * (spec.start[d] - spec.target[d]);
    }
    const double dist = std::sqrt(dist2);
    const detail::GaussianNormMoment moment(p, spec.start.size());
    static constexpr double gl_x[6] = {-0.9324695142031521, -0.6612093864662645, -0.2386191860831969,
                                       0.2386191860831969,  0.6612093864662645,  0.9324695142031521};
    static constexpr double gl_w[6] = {0.1713244923791704, 0.3607615730481386, 0.4679139345726910,
                                       0.4679139345726910, 0.3607615730481386, 0.1713244923791704};
    const double stretch = 2.0 / (2.0 - p);
    std::vector<double> terms;
    terms.reserve(panels * 6);
    for (std::size_t i = 0; i < panels; ++i) {
        const double u0 = static_cast<double>(i) / static_cast<double>(panels);
        const double u1 = static_cast<double>(i + 1) / static_cast<double>(panels);
        for (int j = 0; j < 6; ++j) {
            const double u = 0.5 * (u0 + u1) + 0.5 * (u1 - u0) * gl_x[j];
            const double tau = T * std::pow(u, stretch);
            const double jac = T * stretch * std::pow(u, stretch - 1.0);
            double var = 0.0;
            if (std::abs(2.0 * alpha - 1.0) < 1e-12) {
                var = tau * std::log(T / tau);
            } else {
                var = (tau - std::pow(tau, 2.0 * alpha) * std::pow(T, 1.0 - 2.0 * alpha)) / (2.0 * alpha - 1.0);
            }
            const double sd = std::abs(sigma_scalar) * std::sqrt(std::max(var, 0.0));
            const double m = dist * std::pow(tau / T, alpha);
            const double e = sd > 0.0 ? std::pow(sd, p) * moment(m / sd) : std::pow(m, p);
            terms.push_back(0.5 * (u1 - u0) * gl_w[j] * jac * std::pow(alpha / tau, p) * e);
        }
    }
    return pairwise_sum(terms);
}

/// Drift policy zeta(y, t) written into `out` (N entries).
using ControlFn = std::function<void(std::span<const double> y, double t, std::span<double> out)>;

inline ControlFn constant_control(std::size_t n, double value) {
    return [n, value](std::span<const double>, double, std::span<double> out) {
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = value;
        }
    };
}

/// Euler-Maruyama samples of Y and of int_0^t zeta at selected grid indices.
struct RecordedPaths {
    std::vector<std::size_t> indices;  // recorded grid indices, increasing
    std::vector<double> times;
    std::size_t dimension = 1;
    std::size_t path_count = 0;
    std::vector<double> state;          // [path][record][dim]
    std::vector<double> control_integral;  // [path][record][dim]
};

inline RecordedPaths simulate_controlled(const SdeSpec& sde, const ControlFn& control, std::span<const double> y0,
                                         double horizon, double dt, std::size_t paths, std::uint64_t seed,
                                         std::vector<std::size_t> record) {
    sde.validate();
    require(static_cast<bool>(control), "simulate_controlled: control not set");
    require(y0.size() == sde.dimension, "simulate_controlled: start dimension mismatch");
    require(horizon > 0.0 && dt > 0.0 && dt <= horizon, "simulate_controlled: bad time step");
    require(paths >= 1, "simulate_controlled: need at least one path");
    const std::size_t n = detail::step_count(horizon, dt);
    const double h = horizon / static_cast<double>(n);
    std::sort(record.begin(), record.end());
    record.erase(std::unique(record.begin(), record.end()), record.end());
    require(!record.empty() && record.back() <= n, "simulate_controlled: record index beyond the horizon");

    const std::size_t dim = sde.dimension;
    const std::size_t nd = sde.noise_dimension;
    RecordedPaths out;
    out.indices = record;
    out.dimension = dim;
    out.path_count = paths;
    for (std::size_t k : record) {
        out.times.push_back(h * static_cast<double>(k));
    }
    const std::size_t m = record.size();
    out.state.resize(paths * m * dim);
    out.control_integral.resize(paths * m * dim);
    const double sqrt_h = std::sqrt(h);

    parallel_for(paths, [&](std::size_t path) {
        PhiloxStream rng(seed, path);
        std::vector<double> y(y0.begin(), y0.end());
        std::vector<double> acc(dim, 0.0);
        std::vector<double> sig(dim * nd);
        std::vector<double> z(nd);
        std::vector<double> zeta(dim);
        std::size_t next = 0;
        for (std::size_t k = 0;; ++k) {
            while (next < m && record[next] == k) {
                for (std::size_t d = 0; d < dim; ++d) {
                    out.state[(path * m + next) * dim + d] = y[d];
                    out.control_integral[(path * m + next) * dim + d] = acc[d];
                }
                ++next;
            }
            if (k == n || next == m) {
                break;
            }
            const double t = h * static_cast<double>(k);
            control(y, t, zeta);
            sde.sigma(y, t, sig);
            for (std::size_t j = 0; j < nd; ++j) {
                z[j] = rng.normal();
            }
            for (std::size_t d = 0; d < dim; ++d) {
                double noise = 0.0;
                for (std::size_t j = 0; j < nd; ++j) {
                    noise += sig[d * nd + j] * z[j];
                }
                y[d] += zeta[d] * h + sqrt_h * noise;
                acc[d] += zeta[d] * h;
            }
        }
    });
    return out;
}

struct MomentPair {
    double s = 0.0;
    double t = 0.0;
    McEstimate numerator;    // E |Y_t - Y_s|^r
    McEstimate denominator;  // E |int_s^t zeta|^r + delta^r |t-s|^(r/2)
    double ratio = 0.0;
    double ratio_stderr = 0.0;
    bool under_resolved = false;  // fewer than 10 steps between s and t
};

struct MomentBoundResult {
    std::vector<MomentPair> pairs;
    double max_ratio = 0.0;
    double median_ratio = 0.0;
    double pooled_ratio = 0.0;  // sum of numerators / sum of denominators
    double pooled_stderr = 0.0;
    std::size_t under_resolved = 0;
};

/// Ratio statistic E|Y_t - Y_s|^r / (E|int_s^t zeta|^r + delta^r |t-s|^(r/2))
/// for each (s, t) pair. Pair times are snapped to the dt grid.
inline MomentBoundResult moment_bound_check(const SdeSpec& sde, const ControlFn& control, double r,
                                            const std::vector<std::pair<double, double>>& pairs, double dt,
                                            std::size_t paths, std::uint64_t seed, std::size_t batches = 20) {
    require(r > 0.0, "moment_bound_check: r must be positive");
    require(!pairs.empty(), "moment_bound_check: no pairs");
    double horizon = 0.0;
    for (const auto& [s, t] : pairs) {
        require(t > s && s >= 0.0, "moment_bound_check: pairs need 0 <= s < t");
        horizon = std::max(horizon, t);
    }
    const std::size_t n = detail::step_count(horizon, dt);
    const double h = horizon / static_cast<double>(n);
    auto snap = [&](double v) { return static_cast<std::size_t>(std::llround(v / h)); };
    std::vector<std::size_t> record;
    for (const auto& [s, t] : pairs) {
        record.push_back(snap(s));
        record.push_back(snap(t));
    }
    std::vector<double> y0(sde.dimension, 0.0);
    const RecordedPaths rec = simulate_controlled(sde, control, y0, horizon, dt, paths, seed, record);
    const std::size_t m = rec.indices.size();
    const std::size_t dim = rec.dimension;
    auto slot = [&](std::size_t idx) {
        return static_cast<std::size_t>(std::lower_bound(rec.indices.begin(), rec.indices.end(), idx) -
                                        rec.indices.begin());
    };

    MomentBoundResult out;
    const std::size_t b = std::min(batches, paths);
    std::vector<double> num_tot(b, 0.0);
    std::vector<double> den_tot(b, 0.0);
    std::vector<double> num(paths);
    std::vector<double> ctl(paths);
    for (const auto& [s, t] : pairs) {
        const std::size_t is = snap(s);
        const std::size_t it = snap(t);
        const std::size_t js = slot(is);
        const std::size_t jt = slot(it);
        MomentPair mp;
        mp.s = h * static_cast<double>(is);
        mp.t = h * static_cast<double>(it);
        mp.under_resolved = it < is + 10;
        for (std::size_t path = 0; path < paths; ++path) {
            double dy2 = 0.0;
            double dc2 = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                const double dy = rec.state[(path * m + jt) * dim + d] - rec.state[(path * m + js) * dim + d];
                const double dc = rec.control_integral[(path * m + jt) * dim + d] -
                                  rec.control_integral[(path * m + js) * dim + d];
                dy2 += dy * dy;
                dc2 += dc * dc;
            }
            num[path] = std::pow(std::sqrt(dy2), r);
            ctl[path] = std::pow(std::sqrt(dc2), r);
        }
        const double noise_term = std::pow(sde.sigma_bound, r) * std::pow(mp.t - mp.s, r / 2.0);
        mp.numerator = batch_means(num, batches);
        mp.denominator = batch_means(ctl, batches);
        mp.denominator.estimate += noise_term;
        mp.ratio = mp.denominator.estimate > 0.0 ? mp.numerator.estimate / mp.denominator.estimate : 0.0;

        // Batch ratios give the standard error of the ratio.
        std::vector<double> batch_ratio(b);
        for (std::size_t k = 0; k < b; ++k) {
            const std::size_t lo = k * paths / b;
            const std::size_t hi = (k + 1) * paths / b;
            const std::span<const double> ns(num.data() + lo, hi - lo);
            const std::span<const double> cs(ctl.data() + lo, hi - lo);
            const double nm = pairwise_sum(ns) / static_cast<double>(hi - lo);
            const double dm = pairwise_sum(cs) / static_cast<double>(hi - lo) + noise_term;
            batch_ratio[k] = dm > 0.0 ? nm / dm : 0.0;
            num_tot[k] += nm;
            den_tot[k] += dm;
        }
        mp.ratio_stderr = batch_means(batch_ratio, b).stderr_;
        out.under_resolved += mp.under_resolved ? 1 : 0;
        out.pairs.push_back(mp);
    }
    std::vector<double> ratios;
    double num_sum = 0.0;
    double den_sum = 0.0;
    for (const auto& mp : out.pairs) {
        ratios.push_back(mp.ratio);
        out.max_ratio = std::max(out.max_ratio, mp.ratio);
        num_sum += mp.numerator.estimate;
        den_sum += mp.denominator.estimate;
    }
    std::sort(ratios.begin(), ratios.end());
    const std::size_t mid = ratios.size() / 2;
    out.median_ratio = ratios.size() % 2 == 1 ? ratios[mid] : 0.5 * (ratios[mid - 1] + ratios[mid]);
    out.pooled_ratio = den_sum > 0.0 ? num_sum / den_sum : 0.0;
    std::vector<double> pooled_batches(b);
    for (std::size_t k = 0; k < b; ++k) {
        pooled_batches[k] = den_tot[k] > 0.0 ? num_tot[k] / den_tot[k] : 0.0;
    }
    out.pooled_stderr = batch_means(pooled_batches, b).stderr_;
    return out;
}

struct MartingaleResult {
    double max_abs_z = 0.0;  // max over grid t of |mean(Y_t - Y_0)| / stderr
    std::size_t checked = 0;
};

/// With zeta = 0, the sample mean of Y_t - Y_0 at every grid t, in units of its standard error.
inline MartingaleResult martingale_check(const SdeSpec& sde, double horizon, double dt, std::size_t paths,
                                         std::uint64_t seed) {
    const std::size_t n = detail::step_count(horizon, dt);
    std::vector<std::size_t> record(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        record[k] = k;
    }
    std::vector<double> y0(sde.dimension, 0.0);
    const RecordedPaths rec =
        simulate_controlled(sde, constant_control(sde.dimension, 0.0), y0, horizon, dt, paths, seed, record);
    MartingaleResult out;
    std::vector<double> inc(paths);
    const std::size_t m = rec.indices.size();
    for (std::size_t j = 1; j < m; ++j) {
        for (std::size_t d = 0; d < rec.dimension; ++d) {
            for (std::size_t path = 0; path < paths; ++path) {
                inc[path] = rec.state[(path * m + j) * rec.dimension + d] - rec.state[(path * m) * rec.dimension + d];
            }
            const McEstimate e = batch_means(inc);
            if (e.stderr_ > 0.0) {
                out.max_abs_z = std::max(out.max_abs_z, std::abs(e.estimate) / e.stderr_);
            }
            ++out.checked;
        }
    }
    return out;
}

struct StochasticRevHolderResult {
    double A = 0.0;
    double B = 0.0;
    ThetaResult theta;
    double margin = 0.0;           // worst conclusion margin over grid t
    double relative_margin = 0.0;  // worst margin / bound
    bool degenerate = false;       // A at its floor while B is huge
    double norm_pp = 0.0;          // E int_a^b |zeta|^p
};

/// Both sides of the expectation hypothesis
///   E[mean |zeta|^p on [a,t]] <= A E[(mean |zeta| on [a,t])^p] + B (t-a)^(-p/2)
/// at every grid t (controls are cell-constant), the minimal A (at least
/// 1 + 1e-6, at most `a_cap`) and the minimal B for that A, then the
/// conclusion with theta and C from stochastic_theta.
inline StochasticRevHolderResult stochastic_revholder_check(const PathEnsemble& ens, double p,
                                                            std::size_t anchor_index = 0,
                                                            double a_cap = std::numeric_limits<double>::infinity(),
                                                            double backoff = 0.95) {
    require(p > 1.0 && p < 2.0, "stochastic_revholder_check: p must lie in (1, 2)");
    require(ens.stored, "stochastic_revholder_check: ensemble has no stored controls");
    const std::size_t n = ens.steps();
    require(anchor_index < n, "stochastic_revholder_check: anchor beyond the grid");
    const std::size_t paths = ens.path_count;
    const std::size_t windows = n - anchor_index;
    const double a = ens.times[anchor_index];

    std::vector<double> lhs(windows, 0.0);      // E mean |zeta|^p
    std::vector<double> rhs(windows, 0.0);      // E (mean |zeta|)^p
    std::vector<double> moment(windows, 0.0);   // E (int |zeta|)^p
    std::vector<double> per_path_l(paths);
    std::vector<double> per_path_r(paths);
    std::vector<double> per_path_m(paths);
    std::vector<double> run_sum(paths, 0.0);
    std::vector<double> run_pow(paths, 0.0);
    for (std::size_t j = 0; j < windows; ++j) {
        const std::size_t k = anchor_index + j;
        const double h = ens.times[k + 1] - ens.times[k];
        const double len = ens.times[k + 1] - a;
        for (std::size_t path = 0; path < paths; ++path) {
            double z2 = 0.0;
            for (std::size_t d = 0; d < ens.dimension; ++d) {
                const double z = ens.control(path, k, d);
                z2 += z * z;
            }
            const double mag = std::sqrt(z2);
            run_sum[path] += h * mag;
            run_pow[path] += h * std::pow(mag, p);
            per_path_l[path] = run_pow[path] / len;
            per_path_r[path] = std::pow(run_sum[path] / len, p);
            per_path_m[path] = std::pow(run_sum[path], p);
        }
        lhs[j] = pairwise_sum(per_path_l) / static_cast<double>(paths);
        rhs[j] = pairwise_sum(per_path_r) / static_cast<double>(paths);
        moment[j] = pairwise_sum(per_path_m) / static_cast<double>(paths);
    }
    StochasticRevHolderResult out;
    out.norm_pp = lhs.back() * (ens.times[n] - a);

    double ratio = 0.0;
    for (std::size_t j = 0; j < windows; ++j) {
        if (rhs[j] > 0.0) {
            ratio = std::max(ratio, lhs[j] / rhs[j]);
        }
    }
    out.A = std::min(std::max(ratio, 1.0 + 1e-6), std::max(a_cap, 1.0 + 1e-6));
    for (std::size_t j = 0; j < windows; ++j) {
        const double len = ens.times[anchor_index + j + 1] - a;
        out.B = std::max(out.B, (lhs[j] - out.A * rhs[j]) * std::pow(len, p / 2.0));
    }
    out.degenerate = out.A <= 1.0 + 1e-6 && out.B > 1e6;

    out.theta = stochastic_theta(p, out.A, backoff);
    const double theta = out.theta.theta;
    const double C = out.theta.constant_C;
    const double total = ens.times[n] - a;
    const double bracket = std::pow(total, p / theta - 1.0) * out.norm_pp + out.B * std::pow(total, p / theta - p / 2.0);
    out.margin = std::numeric_limits<double>::infinity();
    out.relative_margin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < windows; ++j) {
        const double len = ens.times[anchor_index + j + 1] - a;
        const double bound = C * std::pow(len, p - p / theta) * bracket;
        out.margin = std::min(out.margin, bound - moment[j]);
        if (bound > 0.0) {
            out.relative_margin = std::min(out.relative_margin, (bound - moment[j]) / bound);
        }
    }
    return out;
}

/// Ensemble whose every path carries the same deterministic control profile
/// (cell values on a uniform grid over [0, T]); states are left at zero.
inline PathEnsemble replicated_control_ensemble(std::span<const double> cell_values, double horizon,
                                                std::size_t paths) {
    require(!cell_values.empty() && paths >= 1, "replicated_control_ensemble: empty input");
    PathEnsemble ens;
    const std::size_t n = cell_values.size();
    ens.dimension = 1;
    ens.path_count = paths;
    ens.dt = horizon / static_cast<double>(n);
    ens.times.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        ens.times[k] = horizon * static_cast<double>(k) / static_cast<double>(n);
    }
    ens.stored = true;
    ens.states.assign(paths * (n + 1), 0.0);
    ens.controls.resize(paths * n);
    for (std::size_t path = 0; path < paths; ++path) {
        std::copy(cell_values.begin(), cell_values.end(), ens.controls.begin() + static_cast<std::ptrdiff_t>(path * n));
    }
    ens.terminal.assign(paths, 0.0);
    ens.penultimate.assign(paths, 0.0);
    ens.energy.assign(paths, 0.0);
    return ens;
}

}  // namespace holder_hj
