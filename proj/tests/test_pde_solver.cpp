#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fbl/errors.hpp"
#include "fbl/pde_solver.hpp"
#include "test_support.hpp"

using namespace fbl;
using fbl::testing::default_grid;

namespace {

// 5000-step Cox-Ross-Rubinstein tree for the default put at x = 1, t = 0.
constexpr double kCrrPutValue = 0.1387622354;

struct PutSurfaces {
    ProblemSpec spec = american_put_spec({});
    ValueSurface coarse = solve_full(spec, default_grid(spec), {}, 10);
    ValueSurface fine = solve_full(spec, default_grid(spec).refined(), {}, 20);
};

const PutSurfaces& put() {
    static const PutSurfaces s;
    return s;
}

}  // namespace

TEST(Grid, RectangleEdgesSitOnNodes) {
    const auto spec = american_put_spec({});
    const Grid g = default_grid(spec);
    EXPECT_NEAR(g.x(g.j_x1), spec.rect_x1, 1e-12);
    EXPECT_NEAR(g.x(g.j_x2), spec.rect_x2, 1e-12);
    EXPECT_NEAR(g.t(g.i_T1), spec.rect_T1, 1e-12);
    const Grid f = g.refined();
    EXPECT_EQ(f.j_x1, 2 * g.j_x1);
    EXPECT_NEAR(f.dx, g.dx / 2, 1e-15);
}

TEST(Solver, PutMatchesBinomialTree) {
    const auto& S = put().coarse;
    EXPECT_NEAR(S.interp(S.v, 0.0, 1.0), kCrrPutValue, 2e-3);
    EXPECT_NEAR(put().fine.interp(put().fine.v, 0.0, 1.0), kCrrPutValue, 1e-3);
}

TEST(Solver, ValueDominatesPayoff) {
    const auto& S = put().coarse;
    for (std::size_t i = 0; i < S.grid.rows(); ++i) {
        for (std::size_t j = 0; j < S.grid.cols(); ++j) ASSERT_GE(S.v(i, j), S.g(i, j)) << i << "," << j;
    }
}

TEST(Solver, ZeroObstacleGivesZeroValue) {
    auto spec = american_put_spec({});
    spec.gain = fbl::testing::zero_gain();
    const auto S = solve_obstacle(spec, Grid::build(spec, 80, 80, 0.45, 2.0));
    double worst = 0.0;
    for (std::size_t i = 0; i < S.grid.rows(); ++i) {
        for (std::size_t j = 0; j < S.grid.cols(); ++j) worst = std::max(worst, std::abs(S.v(i, j)));
    }
    EXPECT_EQ(worst, 0.0);
}

TEST(Boundary, TerminalValueIsStrike) {
    const auto& S = put().coarse;
    EXPECT_NEAR(S.b.back(), 1.0, 2 * S.grid.dx);
}

TEST(Boundary, NonDecreasingWithinOneCell) {
    const auto& S = put().coarse;
    for (std::size_t i = 0; i + 1 < S.b.size(); ++i) ASSERT_GE(S.b[i + 1], S.b[i] - S.grid.dx) << "slice " << i;
}

TEST(Boundary, PositiveSliceHasNoContactSet) {
    ValueSurface S = put().coarse;
    for (std::size_t i = 0; i < S.grid.rows(); ++i) {
        for (std::size_t j = 0; j < S.grid.cols(); ++j) S.u(i, j) = 1.0;
    }
    EXPECT_THROW(extract_boundary(S), BoundaryEscape);
}

TEST(Boundary, RectangleAboveBoundaryEscapes) {
    OptionParams p;
    p.x1 = 0.9;
    const auto spec = american_put_spec(p);
    EXPECT_THROW(solve_full(spec, Grid::build(spec, 100, 100, 0.45, 2.0)), BoundaryEscape);
}

TEST(Derivatives, TimeDerivativeVanishesInStoppingRegion) {
    const auto& S = put().coarse;
    for (double t : {0.1, 0.4, 0.7}) EXPECT_EQ(S.interp(S.u_dot, t, S.boundary_at(t) - 2 * S.grid.dx), 0.0);
}

TEST(Derivatives, SmoothFitCurvature) {
    // u_xx(t, b+) -> -2 h(t, b) / sigma(b)^2.
    const auto& S = put().fine;
    const OptionParams p;
    for (std::size_t i : {S.grid.i_T1 / 4, S.grid.i_T1 / 2}) {
        const double b = S.b[i];
        const double expected = -2.0 * (p.delta * b - p.r * p.K) / (p.sigma * p.sigma * b * b);
        EXPECT_NEAR(uxx_at_boundary(S, i), expected, 0.1 * expected) << "t=" << S.grid.t(i);
    }
}

TEST(SavitzkyGolay, ExactOnQuadratics) {
    std::vector<double> y(41);
    for (std::size_t k = 0; k < y.size(); ++k) {
        const double x = 0.1 * k;
        y[k] = 1.0 - 2.0 * x + 0.5 * x * x;
    }
    const auto s = savitzky_golay(y, 0.1, 4);
    for (std::size_t k = 0; k < y.size(); ++k) {
        EXPECT_NEAR(s.value[k], y[k], 1e-11);
        EXPECT_NEAR(s.slope[k], -2.0 + 0.1 * k, 1e-10);
    }
}

TEST(RegularityChecks, LipschitzRatioStableUnderRefinement) {
    const auto c = lipschitz_ratio_check(put().coarse, put().fine, 0.64);
    EXPECT_TRUE(c.finite);
    EXPECT_LT(std::abs(c.growth), 0.1);
}

TEST(RegularityChecks, TimeDerivativeBoundStable) {
    const auto c = dotv_bound_check(put().coarse, put().fine);
    EXPECT_TRUE(c.pass()) << c.value << " -> " << c.refined_value;
}

TEST(RegularityChecks, BoundaryRatioVanishesOnStoppingSide) {
    const auto& S = put().coarse;
    const std::size_t i = S.grid.i_T1 / 2;
    for (std::size_t j = S.grid.j_x1; j <= S.grid.j_x2; ++j) {
        if (S.grid.x(j) <= S.b[i]) EXPECT_EQ(S.u_dot(i, j), 0.0);
    }
}

TEST(Hitting, EndpointsAreExact) {
    const auto& S = put().coarse;
    const auto& spec = put().spec;
    const double b = S.boundary_at(0.3);
    EXPECT_EQ(hitting_prob_check(spec, S, 0.3, b, 100, 1).mc_prob, 0.0);
    EXPECT_EQ(hitting_prob_check(spec, S, 0.3, spec.rect_x2, 100, 1).mc_prob, 1.0);
}

TEST(Hitting, MidpointAgreesWithScaleFunction) {
    const auto& S = put().coarse;
    const auto& spec = put().spec;
    const double x = 0.5 * (S.boundary_at(0.3) + spec.rect_x2);
    const auto c = hitting_prob_check(spec, S, 0.3, x, 4000, 7);
    EXPECT_LE(std::abs(c.mc_prob - c.scale_prob), 3 * c.std_err + c.budget)
        << c.mc_prob << " vs " << c.scale_prob;
}

TEST(UdotRepresentation, ZeroHorizonReturnsFiniteDifference) {
    const auto& S = put().coarse;
    const auto c = mc_udot_check(put().spec, S, put().spec.rect_T1, 1.0, 100, 1);
    EXPECT_EQ(c.mc_value, c.fd_value);
}

TEST(UdotRepresentation, AgreesWithFiniteDifferenceAtInteriorPoint) {
    const auto& S = put().coarse;
    const auto c = mc_udot_check(put().spec, S, 0.32, 1.0, 4000, 3);
    const double budget = std::abs(c.fd_value - put().fine.interp(put().fine.u_dot, 0.32, 1.0));
    EXPECT_LE(std::abs(c.mc_value - c.fd_value), 3 * c.std_err + budget);
}
