#include <gtest/gtest.h>

#include <cmath>

#include "fbl/bessel.hpp"
#include "fbl/stats.hpp"

using namespace fbl;

namespace {

constexpr std::size_t kSteps = 64;

BoundaryCurveY flat_curve(double level, double T1 = 1.0, std::size_t n = 64) {
    return make_boundary_curve(T1 / static_cast<double>(n), std::vector<double>(n + 1, level),
                               std::vector<double>(n + 1, 0.0));
}

// W decreasing linearly: Wbar stays 0 and rho = -W.
PitmanPath falling_path(std::size_t n, double dt) {
    PitmanPath p;
    p.dt_path = dt;
    p.n_steps = n;
    for (std::size_t k = 0; k <= n; ++k) {
        p.W.push_back(-static_cast<double>(k) * dt);
        p.Wbar.push_back(0.0);
        p.rho.push_back(static_cast<double>(k) * dt);
    }
    return p;
}

}  // namespace

TEST(PitmanPath, CouplingIdentitiesHoldOnEveryNode) {
    Rng rng = make_rng(11, StreamDomain::Diagnostics, 0);
    for (int n = 0; n < 500; ++n) {
        const auto p = sample_pitman_path(200, 1.0 / 200, rng);
        for (std::size_t k = 0; k <= p.n_steps; ++k) {
            ASSERT_GE(p.Wbar[k], 0.0);
            ASSERT_GE(p.rho[k], p.Wbar[k]);
            ASSERT_NEAR(p.rho[k], 2 * p.Wbar[k] - p.W[k], 1e-14);
        }
    }
}

TEST(PitmanPath, SameSubstreamReproduces) {
    Rng a = make_rng(5, StreamDomain::LambdaPaths, 17), b = make_rng(5, StreamDomain::LambdaPaths, 17);
    const auto pa = sample_pitman_path(100, 0.01, a), pb = sample_pitman_path(100, 0.01, b);
    EXPECT_EQ(pa.rho, pb.rho);
    EXPECT_EQ(pa.Wbar, pb.Wbar);
}

TEST(PitmanPath, SecondMomentMatchesThreeDimensionalModulus) {
    // |B_1|^2 for a 3-d Brownian motion has mean 3 and variance 6.
    const std::size_t n = 20000;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng = make_rng(3, StreamDomain::Diagnostics, i);
        const auto p = sample_pitman_path(kSteps, 1.0 / kSteps, rng);
        sum += p.rho.back() * p.rho.back();
    }
    EXPECT_NEAR(sum / n, 3.0, 3.0 * std::sqrt(6.0 / n));
}

TEST(BesselLaw, CdfMatchesClosedForm) {
    EXPECT_NEAR(bessel3_cdf(1.0, 1.0), 0.19874804309879912, 1e-13);
    EXPECT_NEAR(bessel3_cdf(2.0, 4.0), bessel3_cdf(1.0, 1.0), 1e-13);
    EXPECT_EQ(bessel3_cdf(0.0, 1.0), 0.0);
}

TEST(BesselLaw, MarginalPassesKolmogorovSmirnov) {
    const auto line = marginal_ks_check(1.0, 20000, 9, kSteps, true, 1);
    EXPECT_TRUE(line.pass) << line.statistic << " vs " << line.threshold;
}

TEST(BesselLaw, MeanAndInverseMoment) {
    const auto mean = mean_check(20000, 4, 1);
    EXPECT_TRUE(mean.pass) << mean.detail;
    EXPECT_NEAR(mean.statistic, 2.0 * std::sqrt(2.0 / M_PI), 0.02);
    const auto inv = inverse_moment_check(1.0, 1.0, 20000, 4, 1);
    EXPECT_TRUE(inv.pass) << inv.detail;
}

TEST(ConditionalJ, EndpointsAndUniformity) {
    EXPECT_EQ(conditional_J_cdf(0.0, 1.3), 0.0);
    EXPECT_EQ(conditional_J_cdf(1.3, 1.3), 1.0);
    EXPECT_NEAR(conditional_J_cdf(0.65, 1.3), 0.5, 1e-15);
}

TEST(ConditionalJ, PooledChiSquarePasses) {
    const auto rep = conditional_J_law_check(40000, 1.0, 8, 21);
    EXPECT_TRUE(rep.pass) << rep.pooled_p;
}

TEST(HittingTheta, NoUpperBarrier) {
    Rng rng = make_rng(1, StreamDomain::Diagnostics, 0);
    const auto p = sample_pitman_path(kSteps, 1.0 / kSteps, rng);
    const auto hit = hitting_time_theta(p, flat_curve(0.0), 0.25, 1.0, kInf);
    EXPECT_EQ(hit.time, 0.75);
    EXPECT_FALSE(hit.crossed);
}

TEST(HittingTheta, CurveAtBarrierCrossesImmediately) {
    Rng rng = make_rng(1, StreamDomain::Diagnostics, 0);
    const auto p = sample_pitman_path(kSteps, 1.0 / kSteps, rng);
    EXPECT_EQ(hitting_time_theta(p, flat_curve(0.4), 0.25, 1.0, 0.4).time, 0.0);
}

TEST(HittingTheta, LowerBarrierHitsNoLater) {
    std::size_t earlier = 0;
    for (std::uint64_t i = 0; i < 2000; ++i) {
        Rng rng = make_rng(2, StreamDomain::Diagnostics, i);
        const auto p = sample_pitman_path(kSteps, 1.0 / kSteps, rng);
        const auto lo = hitting_time_theta(p, flat_curve(0.0), 0.0, 1.0, 0.8);
        const auto hi = hitting_time_theta(p, flat_curve(0.0), 0.0, 1.0, 1.2);
        ASSERT_LE(lo.time, hi.time);
        earlier += lo.time < 1.0;
    }
    EXPECT_GT(earlier, 0u);
}

TEST(HittingThetaH, ReducesToThetaWhenMaximumStaysAtZero) {
    const auto p = falling_path(kSteps, 1.0 / kSteps);
    const auto curve = flat_curve(0.0);
    const double th = hitting_time_theta(p, curve, 0.0, 1.0, 0.5).time;
    EXPECT_NEAR(hitting_time_theta_h(p, curve, 0.0, 1.0, 0.5, 0.0), th, 1e-12);
    EXPECT_NEAR(th, 0.5, 1e-12);
}

TEST(HittingThetaH, NeverBeforeLowerTau) {
    const auto line = theta_h_dominates_check(2000, 8, 1.0 / 256, 1);
    EXPECT_TRUE(line.pass);
    EXPECT_EQ(line.statistic, 0.0);
}

TEST(TauPair, MinusNeverAfterPlus) {
    for (std::uint64_t i = 0; i < 500; ++i) {
        Rng rng = make_rng(6, StreamDomain::Diagnostics, i);
        const auto p = sample_pitman_path(256, 1.0 / 256, rng);
        const auto tau = tau_pm_h(p, [](double s) { return -2.0 - 0.5 * s; }, 0.2);
        ASSERT_LE(tau.minus, tau.plus);
    }
}

TEST(TauPair, OrderingThroughBrownianPassage) {
    const auto line = ordering_check(4000, 12, 1.0 / 256, 1);
    EXPECT_TRUE(line.pass) << line.detail;
}

TEST(Weights, ZeroDriftGivesUnitWeight) {
    Rng rng = make_rng(4, StreamDomain::Diagnostics, 0);
    const auto p = sample_pitman_path(kSteps, 1.0 / kSteps, rng);
    const auto w = weight_L(p, flat_curve(0.0), [](double, double) { return 0.0; }, 0.0, 0.7);
    EXPECT_EQ(w.value, 1.0);
    EXPECT_FALSE(w.capped);
}

TEST(Weights, DiscountFactor) {
    Rng rng = make_rng(4, StreamDomain::Diagnostics, 1);
    const auto p = sample_pitman_path(kSteps, 1.0 / kSteps, rng);
    const auto curve = flat_curve(0.0);
    EXPECT_EQ(discount_D(p, curve, [](double, double) { return 0.0; }, 0.0, 0.6), 1.0);
    EXPECT_NEAR(discount_D(p, curve, [](double, double) { return 0.06; }, 0.0, 0.6), std::exp(-0.036), 1e-14);
}

TEST(Weights, ExponentialMomentBound) {
    for (auto [K, S] : {std::pair{0.5, 1.0}, {1.0, 0.5}}) {
        const auto line = exponential_moment_check(K, S, 5000, 13, 1.0 / 128, 1);
        EXPECT_TRUE(line.pass) << "K=" << K << " S=" << S << " " << line.detail;
    }
}

TEST(Statistics, KolmogorovTailAtOnePercent) {
    EXPECT_NEAR(kolmogorov_sf(1.6276), 0.01, 1e-4);
    EXPECT_NEAR(chi_square_sf(3.0, 2.0), std::exp(-1.5), 1e-12);
}
