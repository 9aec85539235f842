#include <gtest/gtest.h>

#include <cmath>

#include "fbl/errors.hpp"
#include "fbl/stefan.hpp"
#include "test_support.hpp"

using namespace fbl;
using fbl::testing::default_grid;

namespace {

OptionParams yield_above_rate() {
    OptionParams p;
    p.delta = 0.08;
    p.x1 = 0.4;
    p.x2 = 0.749;
    p.T1 = 0.5;
    return p;
}

struct PutPair {
    ProblemSpec spec = american_put_spec({});
    ValueSurface coarse, fine;
    PutPair() {
        SolverOptions so;
        so.tol = 1e-12;
        coarse = solve_full(spec, default_grid(spec), so, 10);
        fine = solve_full(spec, default_grid(spec).refined(), so, 20);
    }
};

const PutPair& put() {
    static const PutPair p;
    return p;
}

}  // namespace

TEST(Bump, PeakAndSupport) {
    const Bump xi{"b", 1.0, 0.1};
    EXPECT_DOUBLE_EQ(xi(1.0), 1.0);
    EXPECT_EQ(xi(1.1), 0.0);
    EXPECT_EQ(xi(0.85), 0.0);
    EXPECT_GT(xi(1.09), 0.0);
    EXPECT_DOUBLE_EQ(xi(0.95), xi(1.05));
}

TEST(TerminalMeasure, PutStatedMeasureIsUnitAtomAtStrike) {
    const auto spec = american_put_spec({});
    const auto& m = *spec.stated_terminal_measure;
    ASSERT_EQ(m.atoms.size(), 1u);
    EXPECT_EQ(m.atoms[0].location, 1.0);
    EXPECT_EQ(m.atoms[0].mass, 1.0);
    EXPECT_FALSE(m.density);
}

TEST(TerminalMeasure, PutWithYieldAboveRateHasDensity) {
    const auto spec = american_put_spec(yield_above_rate());
    const auto& m = *spec.stated_terminal_measure;
    ASSERT_TRUE(m.density);
    EXPECT_NEAR(m.lo, 0.75, 1e-15);
    EXPECT_EQ(m.hi, 1.0);
    EXPECT_NEAR(m.density(0.9), 0.08 * 0.9 - 0.06, 1e-15);
}

TEST(TerminalMeasure, CallHasDensityAboveStrike) {
    OptionParams p;
    p.delta = 0.03;
    p.x1 = 2.1;
    p.x2 = 3.0;
    const auto spec = american_call_spec(p);
    const auto& m = *spec.stated_terminal_measure;
    ASSERT_TRUE(m.density);
    EXPECT_EQ(m.lo, 1.0);
    EXPECT_NEAR(m.hi, 2.0, 1e-15);
    EXPECT_NEAR(m.density(1.5), 0.06 - 0.03 * 1.5, 1e-15);
    ASSERT_EQ(m.atoms.size(), 1u);
}

TEST(TerminalMeasure, PairingIntegratesDensityAndAtoms) {
    // Density part frozen from adaptive quadrature of (0.08 z - 0.06) xi(z).
    const auto spec = american_put_spec(yield_above_rate());
    const auto& m = *spec.stated_terminal_measure;
    EXPECT_NEAR(pair_measure(m, {"mid", 0.875, 0.1}), 0.0012069003224378766, 1e-13);
    EXPECT_NEAR(pair_measure(m, {"kink", 1.0, 0.1}), 1.0 + pair_measure({m.density, m.lo, m.hi, {}}, {"k", 1.0, 0.1}),
                1e-15);
}

TEST(StefanData, PutCoefficients) {
    const auto& S = put().coarse;
    const auto d = stefan_data_for(put().spec, S);
    const OptionParams p;
    for (std::size_t i = 0; i < S.grid.rows(); ++i) {
        for (std::size_t j = 0; j < S.grid.cols(); ++j) ASSERT_EQ(d.psi(i, j), 0.0);
    }
    for (std::size_t i = 0; i <= S.grid.i_T1; ++i) {
        const double b = S.b_smooth[i];
        EXPECT_EQ(d.nu[i], 0.0);
        EXPECT_NEAR(d.eta[i], -p.sigma * p.sigma * b * b / (2.0 * (p.delta * b - p.r * p.K)), 1e-12);
        EXPECT_GT(d.eta[i], 0.0);
    }
}

TEST(StefanData, GeneratorMeasureCarriesSmoothFitAtom) {
    // (Lg)(T, dz) - r g dz at the kink: sigma(K)^2 / 2 times the slope jump.
    const auto d = stefan_data_for(put().spec, put().coarse);
    ASSERT_EQ(d.sigma_generator.atoms.size(), 1u);
    EXPECT_EQ(d.sigma_generator.atoms[0].location, 1.0);
    EXPECT_NEAR(d.sigma_generator.atoms[0].mass, 0.08, 1e-15);
    EXPECT_NEAR(pair_measure(d.sigma_generator, {"k", 1.0, 0.1}), 0.08, 1e-12);
}

TEST(PdeResidual, ManufacturedSolutionIsResolved) {
    const fbl::testing::PowerSolution sol;
    const auto spec = sol.spec();
    SolverOptions so;
    so.obstacle = false;
    so.tol = 1e-13;
    const auto S = solve_obstacle(spec, default_grid(spec), so);
    StefanData d;
    d.psi = Field(S.grid.rows(), S.grid.cols());
    const auto r = pde_residual(spec, S, d, 0.64);
    EXPECT_GT(r.n, 1000u);
    EXPECT_LT(r.max, 1e-6);
}

TEST(PdeResidual, PsiShiftMovesResidualByThatConstant) {
    const fbl::testing::PowerSolution sol;
    const auto spec = sol.spec();
    SolverOptions so;
    so.obstacle = false;
    const auto S = solve_obstacle(spec, default_grid(spec, 200), so);
    StefanData d;
    d.psi = Field(S.grid.rows(), S.grid.cols());
    PdeResidualOptions po;
    const auto a = pde_residual(spec, S, d, 0.64, po);
    po.psi_shift = 0.5;
    const auto b = pde_residual(spec, S, d, 0.64, po);
    EXPECT_NEAR(b.mean - a.mean, 0.5, 1e-12);
}

TEST(TerminalPairing, BumpInsideStoppingRegionPairsToZero) {
    const auto& S = put().fine;
    const std::size_t i = S.grid.n_t - 2;
    EXPECT_EQ(vdot_pairing(put().spec, S, i, {"low", 0.7, 0.05}), 0.0);
}

TEST(TerminalPairing, BumpOffTheMeshIsRejected) {
    const auto& S = put().fine;
    EXPECT_THROW(vdot_pairing(put().spec, S, S.grid.n_t - 2, {"edge", 1.98, 0.1}), ConfigError);
}

TEST(TerminalPairing, ApproachesGeneratorMeasure) {
    const auto& S = put().fine;
    const auto d = stefan_data_for(put().spec, S);
    const double T = put().spec.horizon_T, dt = S.grid.dt;
    const auto rows = terminal_weak_limit(put().spec, S, d, {{"kink", 1.0, 0.1}}, {T - 10 * dt, T - 2 * dt});
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_NEAR(rows[0].rhs_generator, -0.08, 1e-12);
    EXPECT_LT(std::abs(rows[1].lhs - rows[1].rhs_generator), std::abs(rows[0].lhs - rows[0].rhs_generator));
}

TEST(Verification, PutBoundaryConditionsAndCoefficients) {
    const auto& P = put();
    const auto d = stefan_data_for(P.spec, P.fine);
    const auto rep = verify_stefan(P.spec, P.coarse, P.fine, default_bumps(P.spec, d));
    EXPECT_TRUE(rep.velocity.pass) << rep.velocity.order_rms << " " << rep.velocity.pass_fraction;
    EXPECT_GE(rep.velocity.pass_fraction, 0.8);
    EXPECT_TRUE(rep.bc.pass) << rep.bc.order_rms;
    EXPECT_TRUE(rep.eta_positive);
    EXPECT_EQ(rep.nu_max_abs, 0.0);
    EXPECT_GE(rep.pde.order_rms, 0.9);
}
