#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "fbl/model.hpp"

namespace fbl {

/// Uniform (t, x) mesh. n_t and n_x count intervals; x1 and x2 sit on nodes.
struct Grid {
    double T = 1.0;
    double dt = 0.0;
    double dx = 0.0;
    double x_lo = 0.0;
    double x_hi = 0.0;
    std::size_t n_t = 0;
    std::size_t n_x = 0;
    std::size_t i_T1 = 0;
    std::size_t j_x1 = 0;
    std::size_t j_x2 = 0;

    double t(std::size_t i) const { return static_cast<double>(i) * dt; }
    double x(std::size_t j) const { return x_lo + static_cast<double>(j) * dx; }
    std::size_t rows() const { return n_t + 1; }
    std::size_t cols() const { return n_x + 1; }

    /// x_lo / x_hi are lower bounds on the margins; the mesh spacing is
    /// (x2 - x1) / m with m the integer closest to (x2 - x1) n_x / (x_hi - x_lo),
    /// extended outward until it covers [x_lo, x_hi].
    static Grid build(const ProblemSpec& spec, std::size_t n_t, std::size_t n_x, double x_lo, double x_hi);
    /// Same span with dt and dx halved; coarse node (i, j) is fine node (2i, 2j).
    Grid refined() const;
};

class Field {
public:
    Field() = default;
    Field(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

struct SolverOptions {
    double theta = 0.5;               // 0.5 is Crank-Nicolson
    std::size_t rannacher_steps = 2;  // leading intervals done as two implicit half steps
    bool obstacle = true;             // false: plain Cauchy-Dirichlet problem
    double tol = 1e-9;                // PSOR residual, relative to scale
    std::size_t max_sweeps = 100000;
    std::optional<double> omega;      // auto-tuned when empty
};

struct ValueSurface {
    Grid grid;
    Orientation orientation = Orientation::StopBelow;
    double scale = 1.0;
    double omega = 1.0;
    std::size_t total_sweeps = 0;

    Field v, g, u;
    /// g_t + (Lg)_discrete - r g at t = T on the nodes; locates b(T).
    std::vector<double> terminal_generator;

    bool has_boundary = false;
    double eps = 0.0;
    std::size_t sg_half_window = 2;
    std::vector<double> b;
    std::vector<double> b_smooth;
    std::vector<double> b_dot_fd;

    bool has_derivatives = false;
    Field u_dot, u_x, u_xx, u_dot_x;

    /// Bilinear interpolation, (t, x) clamped to the mesh.
    double interp(const Field& f, double t, double x) const;
    /// Interpolation for fields that vanish on the stopping side (u, u_dot,
    /// u_x): inside the cell that contains b the value runs linearly from 0
    /// at b instead of from the neighbouring contact node.
    double interp_c(const Field& f, double t, double x) const;
    double boundary_at(double t) const;
    double b_dot_at(double t) const;
    /// True if x lies in the continuation region at slice i.
    bool in_continuation(std::size_t i, double x) const {
        return orientation == Orientation::StopBelow ? x > b[i] : x < b[i];
    }
    /// Index of the first continuation node at slice i.
    std::size_t first_continuation(std::size_t i) const;
};

/// Backward theta-scheme (Crank-Nicolson by default, Rannacher start-up)
/// with the obstacle enforced by projected SOR; v = g on both lateral ends.
ValueSurface solve_obstacle(const ProblemSpec& spec, const Grid& grid, const SolverOptions& options = {});

/// Fills b and b_dot_fd. eps defaults to 1e-8 * scale. The crossing is refined
/// by extrapolating sqrt(u), which is linear in x near a smooth-fit boundary.
/// The slice t = T uses the sign change of the discrete generator of g.
void extract_boundary(ValueSurface& surface, std::optional<double> eps = std::nullopt,
                      std::size_t sg_half_window = 2);

struct SmoothedSeries {
    std::vector<double> value;
    std::vector<double> slope;
};

/// Local quadratic least squares (Savitzky-Golay, degree 2) of samples y[0..n)
/// spaced by h; windows shrink one-sidedly at the ends.
SmoothedSeries savitzky_golay(const std::vector<double>& y, double h, std::size_t half_window);
std::vector<double> savitzky_golay_slope(const std::vector<double>& y, double h, std::size_t half_window);

void fd_derivatives(ValueSurface& surface);

/// One-sided limit of u_dot_x at the boundary from the continuation side.
double udot_x_at_boundary(const ValueSurface& surface, std::size_t i);
/// One-sided limit of u_xx at the boundary from the continuation side.
double uxx_at_boundary(const ValueSurface& surface, std::size_t i);

/// Solve, extract and differentiate in one go.
ValueSurface solve_full(const ProblemSpec& spec, const Grid& grid, const SolverOptions& options = {},
                        std::size_t sg_half_window = 2);

struct UdotCheck {
    double mc_value = 0.0;
    double std_err = 0.0;
    double fd_value = 0.0;
    double dt_mc = 0.0;
    double escape_fraction = 0.0;
    double hit_boundary = 0.0;
    double hit_x2 = 0.0;
    double reach_T1 = 0.0;
};

/// Euler-Maruyama estimate of the stopped representation of u_dot at (t, x).
UdotCheck mc_udot_check(const ProblemSpec& spec, const ValueSurface& surface, double t, double x,
                        std::size_t n_paths, std::uint64_t seed, std::size_t workers = 1,
                        std::optional<double> dt_mc = std::nullopt);

struct RatioCheck {
    double value = 0.0;
    double refined_value = 0.0;
    double growth = 0.0;  // refined / value - 1
    bool finite = false;
    bool stable = false;
    bool pass() const { return finite && stable; }
};

/// max |u_dot| / ((x - b)(1 + (T1 - t)^{-1/2})) over continuation nodes, t < T1.
double dotv_bound_constant(const ValueSurface& surface);
RatioCheck dotv_bound_check(const ValueSurface& coarse, const ValueSurface& fine);

/// max over adjacent slices on [0, T2] of |b_{i+1} - b_i| / dt, taken on the
/// smoothed boundary (raw sub-grid noise would otherwise dominate).
double lipschitz_ratio(const ValueSurface& surface, double T2);
RatioCheck lipschitz_ratio_check(const ValueSurface& coarse, const ValueSurface& fine, double T2);

struct HittingCheck {
    double mc_prob = 0.0;
    double std_err = 0.0;
    double scale_prob = 0.0;
    double budget = 0.0;
};

/// P_x(hit x2 before b(t)) by Euler paths of the time-homogeneous diffusion,
/// against the scale-function formula.
HittingCheck hitting_prob_check(const ProblemSpec& spec, const ValueSurface& surface, double t, double x,
                                std::size_t n_paths, std::uint64_t seed, std::size_t workers = 1,
                                std::optional<double> dt_mc = std::nullopt);

}  // namespace fbl
