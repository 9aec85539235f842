#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fbl/model.hpp"
#include "fbl/pde_solver.hpp"

namespace fbl {

/// Standard mollifier profile scaled to peak 1 at `center`, support
/// (center - radius, center + radius).
struct Bump {
    std::string id;
    double center = 0.0;
    double radius = 0.0;

    double operator()(double z) const;
    double lo() const { return center - radius; }
    double hi() const { return center + radius; }
};

/// int xi dSigma: Gauss-Kronrod on the density part, atoms exactly.
double pair_measure(const TerminalMeasure& sigma, const Bump& xi);

struct StefanData {
    Orientation orientation = Orientation::StopBelow;
    /// mu_t v_x - r_t v on the surface nodes.
    Field psi;
    /// Per time node, evaluated at the smoothed boundary.
    std::vector<double> phi, eta, nu;
    /// The instance's closed-form terminal measure when it has one,
    /// otherwise `sigma_generator`.
    TerminalMeasure sigma;
    /// (Lg)(T, dz) - r g(T, z) dz on the terminal continuation side: the
    /// smooth part of the generator plus sigma^2/2 times each slope jump.
    TerminalMeasure sigma_generator;
    /// b(T); the continuation side is above it for stop-below, below it otherwise.
    double support_lo = 0.0;
};

/// Needs a surface with boundary and derivative fields. Throws ConfigError
/// when a callable the data depends on is missing.
StefanData stefan_data_for(const ProblemSpec& spec, const ValueSurface& surface);

struct ResidualStats {
    double max = 0.0;
    double l2 = 0.0;  // sqrt(dt dx sum r^2)
    double mean = 0.0;
    std::size_t n = 0;
};

struct PdeResidualOptions {
    double margin = 0.0;          // distance kept from b at slices i - 1..i + 1; 0: three cells
    std::size_t node_stride = 1;  // 2 on a refined grid visits only the coarse nodes
    double psi_shift = 0.0;
};

/// vdd + L vd - r vd + psi at continuation nodes inside the rectangle at
/// slices t <= T2. vd = u_dot + g_t and vdd is its central difference in t;
/// a surface without derivative fields (no obstacle) uses central
/// differences of v instead. The time stencil is twice the scheme's, which
/// keeps the Crank-Nicolson identity from cancelling the truncation error.
ResidualStats pde_residual(const ProblemSpec& spec, const ValueSurface& surface, const StefanData& data, double T2,
                           const PdeResidualOptions& opt = {});

struct SliceResidual {
    double t = 0.0;
    double value = 0.0;     // residual on this grid
    double b_dot = 0.0;     // velocity rows only
    double vdot_x = 0.0;    // velocity rows only
    double eta = 0.0;
    double budget = 0.0;    // filled by judge_two_grid
    bool pass = false;
};

/// Least-squares fit of a field at slice i against s = |x - b| over the
/// continuation nodes with s <= width, basis s^p0 .. s^(p0 + n - 1); returns
/// the s^p0 coefficient. A fixed physical width averages out the jitter
/// the discrete contact set leaves next to b.
double boundary_poly_fit(const ValueSurface& surface, const Field& f, std::size_t i, double width, int p0, int n);

/// Twenty cells of the given grid. Two-grid comparisons use the coarse
/// width on both grids.
double default_fit_width(const Grid& coarse);

/// b_dot + eta vdot_x(t, b) - nu with vdot_x the one-sided limit from the
/// continuation side (cubic fit without constant term), on slices t in
/// [0.1 T1, T2].
std::vector<SliceResidual> stefan_velocity_residual(const ProblemSpec& spec, const ValueSurface& surface,
                                                    const StefanData& data, double T2, double fit_width = 0.0);

/// vdot(t, b(t)) - phi(t) on the same slices, u_dot extrapolated to b by a
/// quadratic fit.
std::vector<SliceResidual> stefan_bc_residual(const ProblemSpec& spec, const ValueSurface& surface,
                                              const StefanData& data, double T2, double fit_width = 0.0);

struct TwoGridVerdict {
    std::string condition;
    double coarse_max = 0.0, fine_max = 0.0;
    double coarse_rms = 0.0, fine_rms = 0.0;  // l2 for the pde condition
    double order_max = 0.0;       // log2 of the coarse/fine ratio
    double order_rms = 0.0;
    bool judged_on_max = false;   // which order the verdict reads
    double pass_fraction = 0.0;   // fine slices within their budget
    bool order_pass = false;      // judged order >= 1
    bool pass = false;
    double order() const { return judged_on_max ? order_max : order_rms; }
};

/// Matches fine slices to coarse ones by t. The budget at each slice is the
/// coarse-fine gap of b_dot and eta vdot_x when `ingredient_budget` is set,
/// else the gap of the residual itself. `fine` gets budget and pass filled;
/// unmatched fine slices are dropped. Judged on the rms order and, when
/// min_fraction > 0, on the share of slices within budget.
TwoGridVerdict judge_two_grid(const std::string& condition, const std::vector<SliceResidual>& coarse,
                              std::vector<SliceResidual>& fine, bool ingredient_budget, double min_fraction = 0.8);

/// Judged on the order of the max norm.
TwoGridVerdict judge_pde_two_grid(const ResidualStats& coarse, const ResidualStats& fine);

struct TerminalTest {
    std::string xi_id;
    double t = 0.0;
    double lhs = 0.0;           // int over the continuation side of vdot(t, z) xi(z) dz
    double rhs = 0.0;           // int xi d(sigma)
    double rhs_generator = 0.0; // -int xi d(sigma_generator)
    double gap() const { return std::abs(lhs - rhs); }
};

/// One row per (xi, t). Throws ConfigError when a bump leaves the mesh.
std::vector<TerminalTest> terminal_weak_limit(const ProblemSpec& spec, const ValueSurface& surface,
                                              const StefanData& data, const std::vector<Bump>& xi_list,
                                              const std::vector<double>& t_list);

/// lhs alone at slice i.
double vdot_pairing(const ProblemSpec& spec, const ValueSurface& surface, std::size_t i, const Bump& xi);

struct StefanReport {
    ResidualStats pde_coarse, pde_fine;
    TwoGridVerdict pde, bc, velocity;
    std::vector<SliceResidual> bc_rows, velocity_rows;  // fine grid
    std::vector<TerminalTest> terminal_tests;
    double terminal_tolerance = 0.05;  // relative to the scale of rhs
    bool terminal_pass = false;
    bool eta_positive = false;
    double nu_max_abs = 0.0;
    /// Largest jump of vdot_x(t, b(t)) between neighbouring slices over the
    /// fine FD budget; reported only.
    double vdot_x_jump_ratio = 0.0;
    bool pass() const { return pde.pass && bc.pass && velocity.pass && terminal_pass && eta_positive; }
};

struct StefanOptions {
    double T2_frac = 0.8;  // of T1
    double terminal_tolerance = 0.05;
    std::size_t terminal_steps_back = 2;  // last t is T - k dt
};

/// Full report from a coarse and a refined surface of the same instance.
/// Terminal tests pair each bump with the fine surface.
StefanReport verify_stefan(const ProblemSpec& spec, const ValueSurface& coarse, const ValueSurface& fine,
                           const std::vector<Bump>& xi_list, const StefanOptions& opt = {});

/// A bump of radius 0.1 |K| at each payoff kink, plus one over the middle
/// of the stated density support when there is one.
std::vector<Bump> default_bumps(const ProblemSpec& spec, const StefanData& data);

}  // namespace fbl
