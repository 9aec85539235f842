#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fbl/bessel.hpp"
#include "fbl/model.hpp"
#include "fbl/pde_solver.hpp"

namespace fbl {

/// c = f(b) on the surface's time nodes up to T1; c_dot = b_dot_fd / sigma(b).
BoundaryCurveY build_boundary_curve_y(const ValueSurface& surface, const LampertiMap& lamperti, double T1);

/// Everything the path estimators read in Lamperti coordinates. f^{-1} and
/// gamma are tabulated on [y1, y2] so the inner loops avoid root finding.
class LambdaModel {
public:
    LambdaModel(const ProblemSpec& spec, const ValueSurface& surface);

    const ProblemSpec& spec() const { return spec_; }
    const ValueSurface& surface() const { return *surface_; }
    const LampertiMap& lamperti() const { return map_; }
    const BoundaryCurveY& curve() const { return curve_; }
    double T1() const { return spec_.rect_T1; }
    double y1() const { return map_.y1(); }
    double y2() const { return map_.y2(); }

    /// Tabulated inverse, clamped to [y1, y2].
    double x_of(double y) const;
    double gamma(double t, double y) const;
    double rate(double t, double y) const;
    /// w_dot(t, y) = u_dot(t, f^{-1}(y)) from the surface.
    double w_dot(double t, double y) const;
    /// F(t, y) = H(t, f^{-1}(y)); zero for time-homogeneous instances.
    double F(double t, double y) const;
    /// sigma(b(t)) / (2 h(t, b(t))).
    double bdot_factor(double t) const;

    GammaFn gamma_fn() const;
    RateFn rate_fn() const;

private:
    ProblemSpec spec_;
    const ValueSurface* surface_;
    LampertiMap map_;
    BoundaryCurveY curve_;
    std::vector<double> x_tab_;
    std::vector<double> gamma_tab_;  // n_tt x n_y, or 1 x n_y when the drift is time-homogeneous
    std::size_t n_tt_ = 1;
    double dy_ = 0.0;
    double dtt_ = 0.0;
};

struct LambdaOptions {
    std::size_t n_paths = 200000;
    double dt_path = 0.0;         // 0: 2e-4 T1
    std::uint64_t seed = 1;
    std::size_t n_q = 64;
    double rho_floor_frac = 1e-3;  // of y2 - y1
    bool bridge_max = true;
    std::size_t workers = 1;
};

struct LambdaEstimate {
    double t = 0.0;
    double V1 = 0.0, V2 = 0.0;  // split of V1plusV2, diagnostics only
    double V1plusV2 = 0.0, se_V12 = 0.0;
    double intVs = 0.0, se_intVs = 0.0;
    double Lambda = 0.0, se_Lambda = 0.0;
    double bdot_formula = 0.0, se_bdot = 0.0;
    double bdot_fd = 0.0;
    double frac_exit_y2 = 0.0;
    double floor_fraction = 0.0;
    bool high_variance = false;
    std::size_t capped = 0;
    std::size_t n_paths = 0;
    double dt_path = 0.0;
    std::uint64_t seed = 0;
};

/// Lambda(t) = V1 + V2 + int V_s. V1 + V2 is one expectation; the V_s
/// integral uses s = q^2 on the same paths.
LambdaEstimate estimate_lambda(const LambdaModel& model, double t, const LambdaOptions& opt);

struct VhEstimate {
    double t = 0.0, h = 0.0;
    double value = 0.0, std_err = 0.0;
    double p_B1 = 0.0, p_B2 = 0.0;
    double w_dot_solver = 0.0;
    std::size_t capped = 0;
};

/// Pre-limit representation of w_dot(t, c(t) + h) on the process h + rho - 2J.
VhEstimate estimate_Vh(const LambdaModel& model, double t, double h, const LambdaOptions& opt);

struct ExpansionRow {
    double h = 0.0;          // absolute, in y units
    double w_dot = 0.0;      // solver value at (t, c(t) + h)
    double ratio = 0.0;      // w_dot / (h Lambda)
    double ratio_coarse = 0.0;
};

struct ExpansionReport {
    double t = 0.0;
    double Lambda = 0.0;
    std::vector<ExpansionRow> rows;
    bool skipped = false;           // Lambda == 0
    bool monotone = false;          // |r - 1| non-increasing along the list
    bool improves = false;          // |r(h_min) - 1| < |r(h_max) - 1|
    double tolerance = 0.0;         // 3 se(Lambda)/|Lambda| + two-grid gap of r(h_min)
    bool within_tolerance = false;  // |r(h_min) - 1| <= tolerance
    bool trend_pass() const { return !skipped && monotone && improves; }
    bool pass() const { return trend_pass() && within_tolerance; }
};

/// h_fracs are in units of y2 - y1, decreasing. w_dot is read from `fine`
/// (h_min is about one cell of the coarse grid); `coarse` gives the budget.
ExpansionReport expansion_convergence(const LambdaModel& fine, const LambdaModel& coarse, const LambdaEstimate& lambda,
                                      const std::vector<double>& h_fracs);

struct LambdaRow {
    LambdaEstimate est;
    double budget = 0.0;     // two-grid b_dot budget
    double abs_diff = 0.0;
    double tolerance = 0.0;  // 3 se_bdot + budget
    bool rel_checked = false;
    double rel_err = 0.0;
    bool sign_ok = true;
    bool pass = false;
};

/// Verdict for one t: |bdot_formula - bdot_fd| within se_mult se + budget,
/// relative error <= rel_tol where |bdot_fd| > 5 budget, and sign agreement
/// where |bdot_fd| > 3 se.
LambdaRow judge_lambda(const LambdaEstimate& est, double budget, double rel_tol = 0.15, double se_mult = 3.0);

struct VhRow {
    VhEstimate est;
    double w_dot_fine = 0.0;
    double budget = 0.0;  // |w_dot coarse - w_dot fine|
    double abs_diff = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

/// |Vh - w_dot| within se_mult se + two-grid budget.
VhRow judge_vh(const VhEstimate& est, double w_dot_fine, double se_mult = 3.0);

}  // namespace fbl
