#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <vector>

#include "holder_hj/reverse_holder.hpp"
#include "holder_hj/stochastic.hpp"

using namespace holder_hj;

namespace {

double simpson_gauss(double rho, double p, double lo, double hi) {
    const int n = 40000;
    const double h = (hi - lo) / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double z = lo + h * i;
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        acc += w * std::pow(std::abs(rho + z), p) * std::exp(-0.5 * z * z);
    }
    return acc * h / 3.0;
}

// E|rho + Z|^p for scalar Z ~ N(0, 1) by Simpson on [-14, 14], split at the kink z = -rho.
double gaussian_abs_moment(double rho, double p) {
    double acc = 0.0;
    if (rho < 14.0) {
        acc = simpson_gauss(rho, p, -14.0, -rho) + simpson_gauss(rho, p, -rho, 14.0);
    } else {
        acc = simpson_gauss(rho, p, -14.0, 14.0);
    }
    return acc / std::sqrt(2.0 * std::numbers::pi);
}

// Bridge energy at sigma = 1, x = y, d = 1 by Simpson in u with T - t = T u^4 (p = 1.5).
double bridge_energy_reference(double T, double alpha) {
    const double p = 1.5;
    const double c = std::pow(2.0, p / 2.0) * std::tgamma((1.0 + p) / 2.0) / std::sqrt(std::numbers::pi);
    const int n = 20000;
    double acc = 0.0;
    for (int i = 1; i <= n; ++i) {
        const double u = static_cast<double>(i) / n;
        const double tau = T * std::pow(u, 4.0);
        const double var = (tau - std::pow(tau, 2.0 * alpha) * std::pow(T, 1.0 - 2.0 * alpha)) / (2.0 * alpha - 1.0);
        const double f = std::pow(alpha / tau, p) * c * std::pow(std::max(var, 0.0), p / 2.0) * 4.0 * T *
                         std::pow(u, 3.0);
        const double w = i == n ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        acc += w * f;
    }
    // Finite limit of the integrand at u = 0.
    acc += std::pow(alpha, p) * c * std::pow(2.0 * alpha - 1.0, -p / 2.0) * 4.0 * std::pow(T, 1.0 - p / 2.0);
    return acc / (3.0 * n);
}

double sample_variance(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) {
        m += x;
    }
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) {
        s += (x - m) * (x - m);
    }
    return s / static_cast<double>(v.size() - 1);
}

double bridge_variance(double tau, double T, double alpha) {
    return (tau - std::pow(tau, 2.0 * alpha) * std::pow(T, 1.0 - 2.0 * alpha)) / (2.0 * alpha - 1.0);
}

}  // namespace

TEST(BatchMeans, LinearSequence) {
    std::vector<double> v(40);
    for (int i = 0; i < 40; ++i) {
        v[i] = i;
    }
    const auto e = batch_means(v, 20);
    EXPECT_DOUBLE_EQ(e.estimate, 19.5);
    EXPECT_NEAR(e.stderr_, std::sqrt(7.0), 1e-12);
    const std::vector<double> one{3.0};
    EXPECT_EQ(batch_means(one).stderr_, 0.0);
    EXPECT_THROW(batch_means(std::vector<double>{}), precondition_error);
}

TEST(GaussianNormMoment, SecondMomentIsExact) {
    for (std::size_t d : {1u, 2u, 3u}) {
        const detail::GaussianNormMoment g(2.0, d);
        for (double rho : {0.0, 0.37, 1.9, 6.5, 19.0, 25.0, 80.0}) {
            const double want = rho * rho + static_cast<double>(d);
            EXPECT_NEAR(g(rho), want, 1e-6 * want) << "d=" << d << " rho=" << rho;
        }
    }
}

TEST(GaussianNormMoment, CentralMomentMatchesGammaFormula) {
    for (double p : {1.2, 1.5, 1.9}) {
        for (std::size_t d : {1u, 2u, 5u}) {
            const detail::GaussianNormMoment g(p, d);
            const double dd = static_cast<double>(d);
            const double want = std::pow(2.0, p / 2.0) * std::tgamma((dd + p) / 2.0) / std::tgamma(dd / 2.0);
            EXPECT_NEAR(g(0.0), want, 1e-12 * want);
        }
    }
}

TEST(GaussianNormMoment, MatchesQuadratureInOneDimension) {
    const detail::GaussianNormMoment g(1.5, 1);
    for (double rho : {0.05, 0.3, 1.0, 2.7, 7.1, 12.4, 19.5, 20.5, 30.0}) {
        const double want = gaussian_abs_moment(rho, 1.5);
        EXPECT_NEAR(g(rho), want, 1e-5 * want) << "rho=" << rho;
    }
}

TEST(GaussianNormMoment, AsymptoticTail) {
    const detail::GaussianNormMoment g(1.5, 1);
    for (double rho : {25.0, 40.0}) {
        const double want = gaussian_abs_moment(rho, 1.5);
        EXPECT_NEAR(g.asymptotic(rho), want, 1e-7 * want);
    }
}

TEST(BridgeEnergyGaussian, DeterministicLimitIsClosedForm) {
    BridgeSpec spec;
    spec.start = {1.0};
    spec.target = {-0.5};
    spec.horizon = 0.7;
    const double closed = bridge_energy_closed_form(spec);
    EXPECT_NEAR(bridge_energy_gaussian(spec, 0.0), closed, 1e-8 * closed);
    // alpha^p |y-x|^p T^(1-p) / (1 + p(alpha-1)) checked against a direct integral of |zeta|^p.
    const double alpha = spec.effective_alpha();
    const int n = 200000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double t = spec.horizon * (i + 0.5) / n;
        const double rem = spec.horizon - t;
        const double zeta = alpha * 1.5 * std::pow(rem / spec.horizon, alpha) / rem;
        acc += std::pow(zeta, 1.5) * spec.horizon / n;
    }
    EXPECT_NEAR(closed, acc, 1e-6 * closed);
}

TEST(BridgeEnergyGaussian, PinnedNoiseMatchesReferenceAndScales) {
    BridgeSpec spec;
    spec.horizon = 1.0;
    const double alpha = spec.effective_alpha();
    const double e1 = bridge_energy_gaussian(spec, 1.0);
    EXPECT_NEAR(e1, bridge_energy_reference(1.0, alpha), 1e-6 * e1);
    for (double T : {0.25, 0.5}) {
        spec.horizon = T;
        EXPECT_NEAR(bridge_energy_gaussian(spec, 1.0), e1 * std::pow(T, 0.25), 1e-9 * e1);
    }
    spec.horizon = 1.0;
    EXPECT_NEAR(bridge_energy_gaussian(spec, 2.0), e1 * std::pow(2.0, 1.5), 1e-9 * e1);
}

TEST(SimulateBridge, NoNoiseAtTargetStaysPut) {
    BridgeSpec spec;
    spec.start = {0.3};
    spec.target = {0.3};
    const auto ens = simulate_bridge(spec, SdeSpec::constant(1, 0.0), 0.01, 5, 1);
    for (double y : ens.states) {
        EXPECT_EQ(y, 0.3);
    }
    for (double z : ens.controls) {
        EXPECT_EQ(z, 0.0);
    }
    for (double e : ens.energy) {
        EXPECT_EQ(e, 0.0);
    }
}

TEST(SimulateBridge, NoNoisePathIsExact) {
    BridgeSpec spec;
    spec.start = {1.0};
    spec.target = {0.0};
    spec.horizon = 2.0;
    const double alpha = spec.effective_alpha();
    const auto ens = simulate_bridge(spec, SdeSpec::constant(1, 0.0), 0.005, 3, 9);
    for (std::size_t k = 0; k <= ens.steps(); ++k) {
        const double want = std::pow((2.0 - ens.times[k]) / 2.0, alpha);
        EXPECT_NEAR(ens.state(1, k), want, 1e-12);
    }
    const double closed = bridge_energy_closed_form(spec);
    EXPECT_NEAR(ens.energy[0], closed, 1e-4 * closed);
    const auto chk = bridge_energy_check(ens, spec);
    EXPECT_NEAR(chk.shape, std::pow(2.0, -0.5) + std::pow(2.0, 0.25), 1e-12);
    EXPECT_LT(chk.energy.stderr_, 1e-12);
    EXPECT_FALSE(chk.noisy);
}

TEST(SimulateBridge, TerminalIsPinnedAndVarianceMatches) {
    BridgeSpec spec;
    const double alpha = spec.effective_alpha();
    const std::size_t paths = 20000;
    const auto ens = simulate_bridge(spec, SdeSpec::constant(1, 1.0), 0.01, paths, 5);
    for (double y : ens.terminal) {
        EXPECT_EQ(y, 0.0);
    }
    EXPECT_EQ(bridge_energy_check(ens, spec).abs_terminal.estimate, 0.0);
    std::vector<double> mid(paths);
    for (std::size_t i = 0; i < paths; ++i) {
        mid[i] = ens.state(i, 50);
    }
    const double want = bridge_variance(0.5, 1.0, alpha);
    EXPECT_NEAR(sample_variance(mid), want, 5.0 * want * std::sqrt(2.0 / paths));
}

TEST(SimulateBridge, PenultimateVarianceShrinksWithStep) {
    BridgeSpec spec;
    const double alpha = spec.effective_alpha();
    const std::size_t paths = 8000;
    double prev = 1e9;
    for (double dt : {4e-3, 2e-3, 1e-3}) {
        const auto ens = simulate_bridge(spec, SdeSpec::constant(1, 1.0), dt, paths, 11, false);
        const double v = sample_variance(ens.penultimate);
        const double want = bridge_variance(dt, 1.0, alpha);
        EXPECT_NEAR(v, want, 5.0 * want * std::sqrt(2.0 / paths)) << "dt=" << dt;
        EXPECT_LT(v, prev);
        prev = v;
    }
}

TEST(SimulateBridge, SeedDeterminesEnsemble) {
    BridgeSpec spec;
    const auto sde = SdeSpec::constant(1, 1.0);
    const auto a = simulate_bridge(spec, sde, 0.01, 64, 123);
    const auto b = simulate_bridge(spec, sde, 0.01, 64, 123);
    const auto c = simulate_bridge(spec, sde, 0.01, 64, 124);
    EXPECT_EQ(a.states, b.states);
    EXPECT_EQ(a.energy, b.energy);
    EXPECT_NE(a.states, c.states);

    ::setenv("HOLDER_HJ_THREADS", "1", 1);
    const auto serial = simulate_bridge(spec, sde, 0.01, 64, 123);
    ::unsetenv("HOLDER_HJ_THREADS");
    EXPECT_EQ(serial.states, a.states);
    EXPECT_EQ(serial.energy, a.energy);
}

TEST(SimulateBridge, EnergyScalesWithHorizon) {
    BridgeSpec spec;
    const auto sde = SdeSpec::constant(1, 1.0);
    std::vector<double> logT;
    std::vector<double> logE;
    for (double T : {0.25, 0.5, 1.0}) {
        spec.horizon = T;
        const auto ens = simulate_bridge(spec, sde, T / 400.0, 4000, 17, false);
        const auto chk = bridge_energy_check(ens, spec);
        const double exact = bridge_energy_gaussian(spec, 1.0);
        EXPECT_NEAR(chk.energy.estimate, exact, 3.0 * chk.energy.stderr_ + 1e-3 * exact) << "T=" << T;
        EXPECT_FALSE(chk.noisy);
        logT.push_back(std::log(T));
        logE.push_back(std::log(chk.energy.estimate));
    }
    EXPECT_NEAR(fit_line(logT, logE).slope, 0.25, 0.1);
}

TEST(BridgeEnergyCheck, FlagsNoisyEstimate) {
    PathEnsemble ens;
    ens.path_count = 40;
    ens.dimension = 1;
    ens.energy.assign(40, 0.0);
    ens.energy[0] = 100.0;
    ens.terminal.assign(40, 0.0);
    const auto chk = bridge_energy_check(ens, BridgeSpec{});
    EXPECT_TRUE(chk.noisy);
    EXPECT_GT(chk.relative_stderr, 0.05);
}

TEST(SimulateBridge, RejectsInvalidInput) {
    BridgeSpec spec;
    const auto sde = SdeSpec::constant(1, 1.0);
    EXPECT_THROW(simulate_bridge(spec, sde, 0.02, 10, 1), precondition_error);
    EXPECT_THROW(simulate_bridge(spec, sde, 0.01, 0, 1), precondition_error);
    EXPECT_THROW(simulate_bridge(spec, SdeSpec::constant(2, 1.0), 0.01, 10, 1), precondition_error);
    BridgeSpec bad_p;
    bad_p.p = 2.0;
    EXPECT_THROW(simulate_bridge(bad_p, sde, 0.01, 10, 1), precondition_error);
    BridgeSpec bad_alpha;
    bad_alpha.alpha = 0.2;
    EXPECT_THROW(simulate_bridge(bad_alpha, sde, 0.01, 10, 1), precondition_error);
    BridgeSpec bad_t;
    bad_t.horizon = 0.0;
    EXPECT_THROW(simulate_bridge(bad_t, sde, 0.01, 10, 1), precondition_error);
}

TEST(SimulateBridge, FlagsSigmaAboveBound) {
    auto sde = SdeSpec::constant(1, 2.0);
    sde.sigma_bound = 1.0;
    const auto ens = simulate_bridge(BridgeSpec{}, sde, 0.01, 4, 1);
    EXPECT_TRUE(ens.sigma_bound_violated);
}

TEST(MomentBound, NoNoiseNoControlIsZero) {
    const auto r = moment_bound_check(SdeSpec::constant(1, 0.0), constant_control(1, 0.0), 2.0,
                                      {{0.0, 0.5}, {0.25, 1.0}}, 0.01, 100, 3);
    EXPECT_EQ(r.max_ratio, 0.0);
    EXPECT_EQ(r.pooled_ratio, 0.0);
}

TEST(MomentBound, BrownianSecondMomentRatioIsOne) {
    const auto r = moment_bound_check(SdeSpec::constant(1, 1.0), constant_control(1, 0.0), 2.0,
                                      {{0.0, 0.25}, {0.1, 0.6}, {0.3, 1.0}}, 0.01, 20000, 8);
    EXPECT_NEAR(r.pooled_ratio, 1.0, 3.0 * r.pooled_stderr);
    for (const auto& mp : r.pairs) {
        EXPECT_NEAR(mp.denominator.estimate, mp.t - mp.s, 1e-12);
        EXPECT_NEAR(mp.ratio, 1.0, 4.0 * mp.ratio_stderr);
    }
    EXPECT_EQ(r.under_resolved, 0u);
}

TEST(MomentBound, DriftedRatiosStayComparable) {
    const auto r = moment_bound_check(SdeSpec::constant(1, 1.0), constant_control(1, 1.0), 1.5,
                                      {{0.0, 0.1}, {0.0, 0.5}, {0.2, 0.9}, {0.5, 1.0}, {0.0, 1.0}}, 0.005, 8000, 21);
    EXPECT_LE(r.max_ratio, 4.0 * r.median_ratio);
    EXPECT_GT(r.median_ratio, 0.0);
}

TEST(MomentBound, FlagsShortPairs) {
    const auto r = moment_bound_check(SdeSpec::constant(1, 1.0), constant_control(1, 0.0), 2.0,
                                      {{0.0, 0.05}, {0.0, 0.5}}, 0.01, 100, 3);
    EXPECT_EQ(r.under_resolved, 1u);
    EXPECT_TRUE(r.pairs[0].under_resolved);
    EXPECT_FALSE(r.pairs[1].under_resolved);
    EXPECT_THROW(moment_bound_check(SdeSpec::constant(1, 1.0), constant_control(1, 0.0), 2.0, {{0.5, 0.2}}, 0.01,
                                    100, 3),
                 precondition_error);
}

TEST(Martingale, DriftFreeMeanStaysWithinNoise) {
    const auto r = martingale_check(SdeSpec::constant(1, 1.0), 1.0, 0.01, 4000, 77);
    EXPECT_EQ(r.checked, 100u);
    EXPECT_LE(r.max_abs_z, 4.0);
}

TEST(StochasticRevHolder, ReplicatedPowerLawMatchesDeterministicConstant) {
    const double gamma = 0.75;
    const double p = 1.5;
    const auto phi =
        SampledFunction1D::from_antiderivative([gamma](double s) { return std::pow(s, gamma); }, 0.0, 1.0, 2000, p);
    const auto ens = replicated_control_ensemble(phi.values(), 1.0, 8);
    const auto r = stochastic_revholder_check(ens, p);
    EXPECT_NEAR(r.A, min_hypothesis_constant(phi, Anchor::left), 1e-6);
    EXPECT_NEAR(r.B, 0.0, 1e-9);
    EXPECT_DOUBLE_EQ(r.theta.theta, stochastic_theta(p, r.A).theta);
    EXPECT_NEAR(r.norm_pp, std::pow(phi.norm_p(), p), 1e-9);
    EXPECT_GE(r.margin, 0.0);
    EXPECT_FALSE(r.degenerate);
}

TEST(StochasticRevHolder, ZeroControlSitsAtFloor) {
    const std::vector<double> zero(100, 0.0);
    const auto ens = replicated_control_ensemble(zero, 1.0, 4);
    const auto r = stochastic_revholder_check(ens, 1.5);
    EXPECT_DOUBLE_EQ(r.A, 1.0 + 1e-6);
    EXPECT_EQ(r.B, 0.0);
    EXPECT_EQ(r.margin, 0.0);
    EXPECT_TRUE(r.theta.cap_engaged);
    EXPECT_FALSE(r.degenerate);
    EXPECT_THROW(stochastic_revholder_check(ens, 2.0), precondition_error);
    EXPECT_THROW(stochastic_revholder_check(ens, 1.5, 100), precondition_error);
}
