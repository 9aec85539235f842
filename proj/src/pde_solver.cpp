#include "fbl/pde_solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "fbl/errors.hpp"

namespace fbl {

Grid Grid::build(const ProblemSpec& spec, std::size_t n_t, std::size_t n_x, double x_lo, double x_hi) {
    if (n_t < 64 || n_x < 64) throw ConfigError("grid needs N_t, N_x >= 64", n_t < 64 ? "N_t" : "N_x");
    const double x1 = spec.rect_x1, x2 = spec.rect_x2;
    if (!(x_lo < x1 && x_hi > x2)) throw ConfigError("grid [x_lo, x_hi] must contain [x1, x2]", "x_lo");
    Grid g;
    g.T = spec.horizon_T;
    g.n_t = n_t;
    g.dt = g.T / static_cast<double>(n_t);
    const double k = spec.rect_T1 / g.dt;
    g.i_T1 = static_cast<std::size_t>(std::llround(k));
    if (std::abs(k - static_cast<double>(g.i_T1)) > 1e-9 * k) {
        throw ConfigError("T1 must fall on a time node of the grid (T1 / (T / N_t) integral)", "N_t");
    }
    const auto m = std::max<long long>(1, std::llround((x2 - x1) * static_cast<double>(n_x) / (x_hi - x_lo)));
    g.dx = (x2 - x1) / static_cast<double>(m);
    const auto n_lo = static_cast<std::size_t>(std::ceil((x1 - x_lo) / g.dx - 1e-9));
    const auto n_hi = static_cast<std::size_t>(std::ceil((x_hi - x2) / g.dx - 1e-9));
    g.j_x1 = n_lo;
    g.j_x2 = n_lo + static_cast<std::size_t>(m);
    g.n_x = g.j_x2 + n_hi;
    g.x_lo = x1 - static_cast<double>(n_lo) * g.dx;
    g.x_hi = g.x(g.n_x);
    const double margin = 0.1 * (x2 - x1) - 1e-12;
    if (x1 - g.x_lo < margin || g.x_hi - x2 < margin) {
        throw ConfigError("grid margin beyond the rectangle must be at least 10% of x2 - x1", "x_lo");
    }
    if (!(g.x_lo > spec.diffusion.domain_lo && g.x_hi < spec.diffusion.domain_hi)) {
        throw ConfigError("grid leaves the state interval", "x_lo");
    }
    return g;
}

Grid Grid::refined() const {
    Grid g = *this;
    g.n_t *= 2;
    g.n_x *= 2;
    g.dt *= 0.5;
    g.dx *= 0.5;
    g.i_T1 *= 2;
    g.j_x1 *= 2;
    g.j_x2 *= 2;
    return g;
}

double ValueSurface::interp(const Field& f, double t, double x) const {
    const double ft = std::clamp(t / grid.dt, 0.0, static_cast<double>(grid.n_t));
    const double fx = std::clamp((x - grid.x_lo) / grid.dx, 0.0, static_cast<double>(grid.n_x));
    const auto i = std::min(static_cast<std::size_t>(ft), grid.n_t - 1);
    const auto j = std::min(static_cast<std::size_t>(fx), grid.n_x - 1);
    const double a = ft - static_cast<double>(i);
    const double c = fx - static_cast<double>(j);
    return (1 - a) * ((1 - c) * f(i, j) + c * f(i, j + 1)) + a * ((1 - c) * f(i + 1, j) + c * f(i + 1, j + 1));
}

namespace {

double interp_series(const std::vector<double>& y, double dt, double t) {
    const double ft = std::clamp(t / dt, 0.0, static_cast<double>(y.size() - 1));
    const auto i = std::min(static_cast<std::size_t>(ft), y.size() - 2);
    const double a = ft - static_cast<double>(i);
    return (1 - a) * y[i] + a * y[i + 1];
}

}  // namespace

std::size_t ValueSurface::first_continuation(std::size_t i) const {
    auto j = static_cast<long>(std::floor((b[i] - grid.x_lo) / grid.dx));
    const long last = static_cast<long>(grid.n_x);
    if (orientation == Orientation::StopBelow) {
        j = std::clamp(j, 0L, last);
        while (j < last && !in_continuation(i, grid.x(static_cast<std::size_t>(j)))) ++j;
    } else {
        j = std::clamp(j + 1, 0L, last);
        while (j > 0 && !in_continuation(i, grid.x(static_cast<std::size_t>(j)))) --j;
    }
    return static_cast<std::size_t>(j);
}

double ValueSurface::interp_c(const Field& f, double t, double x) const {
    const double ft = std::clamp(t / grid.dt, 0.0, static_cast<double>(grid.n_t));
    const auto i = std::min(static_cast<std::size_t>(ft), grid.n_t - 1);
    const double a = ft - static_cast<double>(i);
    const double fx = std::clamp((x - grid.x_lo) / grid.dx, 0.0, static_cast<double>(grid.n_x));
    auto slice = [&](std::size_t k) {
        if (!in_continuation(k, x)) return 0.0;
        const std::size_t jc = first_continuation(k);
        const double xc = grid.x(jc);
        const bool inside_cell = orientation == Orientation::StopBelow ? x < xc : x > xc;
        if (inside_cell) return f(k, jc) * (x - b[k]) / (xc - b[k]);
        const auto j = std::min(static_cast<std::size_t>(fx), grid.n_x - 1);
        const double c = fx - static_cast<double>(j);
        return (1 - c) * f(k, j) + c * f(k, j + 1);
    };
    return (1 - a) * slice(i) + a * slice(i + 1);
}

double ValueSurface::boundary_at(double t) const { return interp_series(b, grid.dt, t); }
double ValueSurface::b_dot_at(double t) const { return interp_series(b_dot_fd, grid.dt, t); }

namespace {

struct Tridiag {
    std::vector<double> lo, diag, up;
    explicit Tridiag(std::size_t n) : lo(n, 0.0), diag(n, 0.0), up(n, 0.0) {}
};

// (A v)_j = a_j v_{j-1} + b_j v_j + c_j v_{j+1} for the generator minus discounting.
void operator_coefficients(const ProblemSpec& spec, const Grid& g, double t, Tridiag& A) {
    const double idx2 = 1.0 / (g.dx * g.dx);
    const double i2dx = 0.5 / g.dx;
    for (std::size_t j = 1; j < g.n_x; ++j) {
        const double x = g.x(j);
        const double s = spec.diffusion.sigma(x);
        const double mu = spec.diffusion.mu(t, x);
        const double r = spec.discount.r(t, x);
        const double diff = 0.5 * s * s * idx2;
        A.lo[j] = diff - mu * i2dx;
        A.diag[j] = -2.0 * diff - r;
        A.up[j] = diff + mu * i2dx;
    }
}

void thomas(const Tridiag& M, std::vector<double>& rhs, std::vector<double>& out) {
    const std::size_t n = rhs.size();
    std::vector<double> c(n, 0.0), d(n, 0.0);
    c[0] = M.up[0] / M.diag[0];
    d[0] = rhs[0] / M.diag[0];
    for (std::size_t j = 1; j < n; ++j) {
        const double den = M.diag[j] - M.lo[j] * c[j - 1];
        c[j] = M.up[j] / den;
        d[j] = (rhs[j] - M.lo[j] * d[j - 1]) / den;
    }
    out[n - 1] = d[n - 1];
    for (std::size_t j = n - 1; j-- > 0;) out[j] = d[j] - c[j] * out[j + 1];
}

class StepSolver {
public:
    StepSolver(const ProblemSpec& spec, const Grid& grid, const SolverOptions& opt, double scale)
        : spec_(spec), g_(grid), opt_(opt), scale_(scale), Anext_(grid.cols()), Acur_(grid.cols()),
          M_(grid.cols()), rhs_(grid.cols()), lb_(grid.cols()) {
        if (opt.omega) omega_ = *opt.omega;
    }

    double omega() const { return omega_.value_or(1.0); }
    std::size_t sweeps() const { return sweeps_; }

    // Advances v from t_next back to t_cur with weight theta. guess holds the
    // initial iterate and receives the solution.
    void step(const std::vector<double>& v_next, double t_next, double t_cur, double theta,
              std::vector<double>& guess) {
        const std::size_t n = g_.n_x;
        const double h = t_next - t_cur;
        operator_coefficients(spec_, g_, t_next, Anext_);
        operator_coefficients(spec_, g_, t_cur, Acur_);
        for (std::size_t j = 1; j < n; ++j) {
            const double Av = Anext_.lo[j] * v_next[j - 1] + Anext_.diag[j] * v_next[j] + Anext_.up[j] * v_next[j + 1];
            rhs_[j] = v_next[j] + (1.0 - theta) * h * Av;
            M_.lo[j] = -theta * h * Acur_.lo[j];
            M_.diag[j] = 1.0 - theta * h * Acur_.diag[j];
            M_.up[j] = -theta * h * Acur_.up[j];
        }
        const double gl = spec_.gain.g(t_cur, g_.x(0));
        const double gr = spec_.gain.g(t_cur, g_.x(n));
        M_.diag[0] = M_.diag[n] = 1.0;
        M_.lo[0] = M_.up[0] = M_.lo[n] = M_.up[n] = 0.0;
        rhs_[0] = gl;
        rhs_[n] = gr;
        if (!opt_.obstacle) {
            thomas(M_, rhs_, guess);
            return;
        }
        for (std::size_t j = 0; j <= n; ++j) {
            lb_[j] = spec_.gain.g(t_cur, g_.x(j));
            guess[j] = std::max(guess[j], lb_[j]);
        }
        guess[0] = gl;
        guess[n] = gr;
        if (!omega_) tune(guess);
        const std::size_t used = psor(*omega_, guess, opt_.max_sweeps);
        sweeps_ += used;
    }

private:
    double residual(const std::vector<double>& v) const {
        double worst = 0.0;
        for (std::size_t j = 1; j < g_.n_x; ++j) {
            const double r = (M_.lo[j] * v[j - 1] + M_.diag[j] * v[j] + M_.up[j] * v[j + 1] - rhs_[j]) / M_.diag[j];
            worst = std::max(worst, std::abs(std::min(v[j] - lb_[j], r)));
        }
        return worst;
    }

    // Returns the sweep count; throws after max_sweeps.
    std::size_t psor(double omega, std::vector<double>& v, std::size_t max_sweeps) const {
        const std::size_t n = g_.n_x;
        const double tol = opt_.tol * scale_;
        double res = 0.0;
        for (std::size_t sweep = 1; sweep <= max_sweeps; ++sweep) {
            for (std::size_t j = 1; j < n; ++j) {
                const double y = (rhs_[j] - M_.lo[j] * v[j - 1] - M_.up[j] * v[j + 1]) / M_.diag[j];
                v[j] = std::max(lb_[j], v[j] + omega * (y - v[j]));
            }
            res = residual(v);
            if (res <= tol) return sweep;
        }
        std::ostringstream os;
        os << "PSOR did not converge in " << max_sweeps << " sweeps (residual " << res << ")";
        throw NumericalFailure("solve_obstacle", os.str(), res);
    }

    void tune(std::vector<double>& guess) {
        double best_omega = 1.0;
        std::size_t best = static_cast<std::size_t>(-1);
        for (int k = 0; k < 20; ++k) {
            const double w = 1.0 + 0.05 * k;
            std::vector<double> trial = guess;
            try {
                const std::size_t used = psor(w, trial, std::min<std::size_t>(opt_.max_sweeps, best));
                if (used < best) {
                    best = used;
                    best_omega = w;
                }
            } catch (const NumericalFailure&) {
            }
        }
        omega_ = best_omega;
    }

    const ProblemSpec& spec_;
    const Grid& g_;
    const SolverOptions& opt_;
    double scale_;
    Tridiag Anext_, Acur_, M_;
    std::vector<double> rhs_, lb_;
    std::optional<double> omega_;
    std::size_t sweeps_ = 0;
};

}  // namespace

ValueSurface solve_obstacle(const ProblemSpec& spec, const Grid& grid, const SolverOptions& opt) {
    ValueSurface S;
    S.grid = grid;
    S.orientation = spec.orientation;
    const std::size_t R = grid.rows(), C = grid.cols();
    S.v = Field(R, C);
    S.g = Field(R, C);
    S.u = Field(R, C);
    for (std::size_t i = 0; i < R; ++i) {
        for (std::size_t j = 0; j < C; ++j) S.g(i, j) = spec.gain.g(grid.t(i), grid.x(j));
    }
    double scale = 0.0;
    for (std::size_t i = 0; i <= grid.i_T1; ++i) {
        for (std::size_t j = grid.j_x1; j <= grid.j_x2; ++j) scale = std::max(scale, std::abs(S.g(i, j)));
    }
    S.scale = scale > 0.0 ? scale : 1.0;

    S.terminal_generator.assign(C, 0.0);
    {
        const std::size_t n = grid.n_t;
        const double T = grid.t(n);
        for (std::size_t j = 1; j + 1 < C; ++j) {
            const double x = grid.x(j);
            const double s = spec.diffusion.sigma(x);
            const double gxx = (S.g(n, j + 1) - 2 * S.g(n, j) + S.g(n, j - 1)) / (grid.dx * grid.dx);
            const double gx = (S.g(n, j + 1) - S.g(n, j - 1)) / (2 * grid.dx);
            S.terminal_generator[j] = spec.gain.g_t(T, x) + 0.5 * s * s * gxx + spec.diffusion.mu(T, x) * gx -
                                      spec.discount.r(T, x) * S.g(n, j);
        }
        S.terminal_generator[0] = S.terminal_generator[1];
        S.terminal_generator[C - 1] = S.terminal_generator[C - 2];
    }

    StepSolver solver(spec, grid, opt, S.scale);
    std::vector<double> next(S.g.row(grid.n_t), S.g.row(grid.n_t) + C);
    std::copy(next.begin(), next.end(), S.v.row(grid.n_t));
    std::vector<double> cur(C), prev2 = next;
    for (std::size_t step = 0; step < grid.n_t; ++step) {
        const std::size_t i = grid.n_t - step - 1;
        const double t_next = grid.t(i + 1), t_cur = grid.t(i);
        // Linear extrapolation in time as the starting iterate.
        for (std::size_t j = 0; j < C; ++j) cur[j] = step >= 1 ? 2 * next[j] - prev2[j] : next[j];
        if (step < opt.rannacher_steps) {
            const double t_mid = 0.5 * (t_next + t_cur);
            std::vector<double> mid = next;
            solver.step(next, t_next, t_mid, 1.0, mid);
            cur = mid;
            solver.step(mid, t_mid, t_cur, 1.0, cur);
        } else {
            solver.step(next, t_next, t_cur, opt.theta, cur);
        }
        std::copy(cur.begin(), cur.end(), S.v.row(i));
        prev2 = next;
        next = cur;
    }
    S.omega = solver.omega();
    S.total_sweeps = solver.sweeps();
    for (std::size_t i = 0; i < R; ++i) {
        for (std::size_t j = 0; j < C; ++j) {
            const double d = S.v(i, j) - S.g(i, j);
            S.u(i, j) = opt.obstacle ? std::max(d, 0.0) : d;
        }
    }
    return S;
}

SmoothedSeries savitzky_golay(const std::vector<double>& y, double h, std::size_t m) {
    const std::size_t n = y.size();
    SmoothedSeries out{y, std::vector<double>(n, 0.0)};
    if (n < 2) return out;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= m ? i - m : 0;
        const std::size_t hi = std::min(n - 1, i + m);
        if (hi - lo + 1 < 3) {
            out.slope[i] = (y[hi] - y[lo]) / (static_cast<double>(hi - lo) * h);
            continue;
        }
        // Normal equations for y ~ a0 + a1 s + a2 s^2 with s = k - i.
        std::array<double, 5> S{};
        std::array<double, 3> B{};
        for (std::size_t k = lo; k <= hi; ++k) {
            const double s = static_cast<double>(k) - static_cast<double>(i);
            double p = 1.0;
            for (int e = 0; e < 5; ++e, p *= s) S[e] += p;
            B[0] += y[k];
            B[1] += s * y[k];
            B[2] += s * s * y[k];
        }
        const double a = S[0], b = S[1], c = S[2], d = S[3], e = S[4];
        const double det = a * (c * e - d * d) - b * (b * e - c * d) + c * (b * d - c * c);
        const double det0 = B[0] * (c * e - d * d) - b * (B[1] * e - d * B[2]) + c * (B[1] * d - c * B[2]);
        const double det1 = a * (B[1] * e - d * B[2]) - B[0] * (b * e - c * d) + c * (b * B[2] - c * B[1]);
        out.value[i] = det0 / det;
        out.slope[i] = det1 / det / h;
    }
    return out;
}

std::vector<double> savitzky_golay_slope(const std::vector<double>& y, double h, std::size_t m) {
    return savitzky_golay(y, h, m).slope;
}

namespace {

// Direction pointing from the stopping side into the continuation region.
int inward(Orientation o) { return o == Orientation::StopBelow ? 1 : -1; }

}  // namespace

void extract_boundary(ValueSurface& S, std::optional<double> eps_opt, std::size_t half_window) {
    const Grid& g = S.grid;
    const double eps = eps_opt.value_or(1e-8 * S.scale);
    const int d = inward(S.orientation);
    const auto C = static_cast<long>(g.cols());
    const long start = d > 0 ? 0 : C - 1;
    const double x1 = g.x(g.j_x1), x2 = g.x(g.j_x2);
    S.b.assign(g.rows(), 0.0);
    S.eps = eps;
    S.sg_half_window = half_window;

    for (std::size_t i = 0; i < g.n_t; ++i) {
        const double* u = S.u.row(i);
        long j0 = -1;
        for (long k = 0; k < C; ++k) {
            const long j = start + d * k;
            if (u[j] > eps) {
                j0 = j;
                break;
            }
        }
        if (j0 < 0) throw BoundaryEscape("no continuation region at slice " + std::to_string(i), i);
        if (j0 == start) throw BoundaryEscape("no contact set at slice " + std::to_string(i), i);
        const long jp = j0 - d;
        double b = g.x(static_cast<std::size_t>(jp)) +
                   d * g.dx * (eps - u[jp]) / (u[j0] - u[jp]);  // linear in u at level eps
        // sqrt(u) is close to linear in x near b; fit it on the three nodes past
        // the first continuation node, which is the one most distorted by contact.
        if (j0 + 3 * d >= 0 && j0 + 3 * d < C) {
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            for (int k = 1; k <= 3; ++k) {
                const double x = d * k * g.dx;
                const double y = std::sqrt(u[j0 + d * k]) - std::sqrt(eps);
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
            }
            const double slope = (3 * sxy - sx * sy) / (3 * sxx - sx * sx);
            const double icpt = (sy - slope * sx) / 3;
            if (d * slope > 0.0) {
                const double cand = g.x(static_cast<std::size_t>(j0)) - icpt / slope;
                const double lo = g.x(static_cast<std::size_t>(j0)) - 2 * g.dx, hi = g.x(static_cast<std::size_t>(j0)) + 2 * g.dx;
                b = std::clamp(cand, d > 0 ? lo : g.x(static_cast<std::size_t>(j0)), d > 0 ? g.x(static_cast<std::size_t>(j0)) : hi);
            }
        }
        if (i <= g.i_T1 && !(b > x1 && b < x2)) {
            std::ostringstream os;
            os << "boundary " << b << " left (x1, x2) at t = " << g.t(i);
            throw BoundaryEscape(os.str(), i);
        }
        S.b[i] = b;
    }
    {
        // At maturity a node belongs to the stopping set iff waiting loses value.
        const auto& hT = S.terminal_generator;
        long j1 = -1;
        for (long k = 1; k < C; ++k) {
            const long j = start + d * k;
            if (hT[j] >= 0.0) {
                j1 = j;
                break;
            }
        }
        if (j1 < 0) throw BoundaryEscape("terminal generator never changes sign", g.n_t);
        const long jp = j1 - d;
        const double den = hT[j1] - hT[jp];
        const double frac = den > 0.0 ? -hT[jp] / den : 0.0;
        S.b[g.n_t] = g.x(static_cast<std::size_t>(jp)) + d * g.dx * std::clamp(frac, 0.0, 1.0);
    }
    std::vector<double> head(S.b.begin(), S.b.end() - 1);
    auto sm = savitzky_golay(head, g.dt, half_window);
    S.b_smooth = std::move(sm.value);
    S.b_smooth.push_back(S.b.back());
    S.b_dot_fd = std::move(sm.slope);
    S.b_dot_fd.push_back(S.b_dot_fd.back());
    S.has_boundary = true;
}

namespace {

// Spatial derivatives of F at slice i, restricted to the continuation region.
void spatial_derivatives(const ValueSurface& S, const Field& F, std::size_t i, Field* Fx, Field* Fxx) {
    const Grid& g = S.grid;
    const int d = inward(S.orientation);
    const auto C = static_cast<long>(g.cols());
    const double dx = g.dx;
    for (long j = 0; j < C; ++j) {
        const double x = g.x(static_cast<std::size_t>(j));
        double vx = 0.0, vxx = 0.0;
        if (S.in_continuation(i, x)) {
            const bool back_in = j - d >= 0 && j - d < C && S.in_continuation(i, g.x(static_cast<std::size_t>(j - d)));
            const bool fwd_ok = j + d >= 0 && j + d < C;
            auto f = [&](long k) { return F(i, static_cast<std::size_t>(k)); };
            if (back_in && fwd_ok) {
                vx = (f(j + 1) - f(j - 1)) / (2 * dx);
                vxx = (f(j + 1) - 2 * f(j) + f(j - 1)) / (dx * dx);
            } else {
                // One-sided toward whichever side has room (into C near b, back at the mesh edge).
                const int e = fwd_ok ? d : -d;
                if (j + 3 * e >= 0 && j + 3 * e < C) {
                    vx = e * (-3 * f(j) + 4 * f(j + e) - f(j + 2 * e)) / (2 * dx);
                    vxx = (2 * f(j) - 5 * f(j + e) + 4 * f(j + 2 * e) - f(j + 3 * e)) / (dx * dx);
                }
            }
        }
        if (Fx) (*Fx)(i, static_cast<std::size_t>(j)) = vx;
        if (Fxx) (*Fxx)(i, static_cast<std::size_t>(j)) = vxx;
    }
}

}  // namespace

void fd_derivatives(ValueSurface& S) {
    if (!S.has_boundary) throw NumericalFailure("fd_derivatives", "boundary not extracted");
    const Grid& g = S.grid;
    const std::size_t R = g.rows(), C = g.cols();
    S.u_dot = Field(R, C);
    S.u_x = Field(R, C);
    S.u_xx = Field(R, C);
    S.u_dot_x = Field(R, C);
    const double dt = g.dt;
    for (std::size_t i = 0; i < R; ++i) {
        for (std::size_t j = 0; j < C; ++j) {
            if (!S.in_continuation(i, g.x(j))) continue;
            double val;
            if (i == 0) {
                val = (-3 * S.u(0, j) + 4 * S.u(1, j) - S.u(2, j)) / (2 * dt);
            } else if (i == g.n_t) {
                val = (3 * S.u(i, j) - 4 * S.u(i - 1, j) + S.u(i - 2, j)) / (2 * dt);
            } else {
                val = (S.u(i + 1, j) - S.u(i - 1, j)) / (2 * dt);
            }
            S.u_dot(i, j) = val;
        }
    }
    for (std::size_t i = 0; i < R; ++i) {
        spatial_derivatives(S, S.u, i, &S.u_x, &S.u_xx);
        spatial_derivatives(S, S.u_dot, i, &S.u_dot_x, nullptr);
    }
    S.has_derivatives = true;
}

namespace {

// Least-squares fit F ~ a s + c s^p over continuation nodes 1..4 past the
// first one, s = distance to b; returns a for p = 2 or c for p = 3 basis.
std::array<double, 2> boundary_fit(const ValueSurface& S, const Field& F, std::size_t i, int p0, int p1) {
    const Grid& g = S.grid;
    const int d = inward(S.orientation);
    const double b = S.b[i];
    long j = static_cast<long>(std::floor((b - g.x_lo) / g.dx));
    if (d > 0) {
        while (j < static_cast<long>(g.n_x) && !S.in_continuation(i, g.x(static_cast<std::size_t>(j)))) ++j;
    } else {
        j += 1;
        while (j > 0 && !S.in_continuation(i, g.x(static_cast<std::size_t>(j)))) --j;
    }
    double a11 = 0, a12 = 0, a22 = 0, r1 = 0, r2 = 0;
    for (int k = 1; k <= 4; ++k) {
        const long jj = j + d * k;
        if (jj < 0 || jj > static_cast<long>(g.n_x)) break;
        const double s = std::abs(g.x(static_cast<std::size_t>(jj)) - b);
        const double f = F(i, static_cast<std::size_t>(jj));
        const double e0 = std::pow(s, p0), e1 = std::pow(s, p1);
        a11 += e0 * e0;
        a12 += e0 * e1;
        a22 += e1 * e1;
        r1 += e0 * f;
        r2 += e1 * f;
    }
    const double det = a11 * a22 - a12 * a12;
    return {(r1 * a22 - r2 * a12) / det, (a11 * r2 - a12 * r1) / det};
}

}  // namespace

double udot_x_at_boundary(const ValueSurface& S, std::size_t i) {
    return inward(S.orientation) * boundary_fit(S, S.u_dot, i, 1, 2)[0];
}

double uxx_at_boundary(const ValueSurface& S, std::size_t i) { return 2.0 * boundary_fit(S, S.u, i, 2, 3)[0]; }

ValueSurface solve_full(const ProblemSpec& spec, const Grid& grid, const SolverOptions& options,
                        std::size_t sg_half_window) {
    ValueSurface S = solve_obstacle(spec, grid, options);
    extract_boundary(S, std::nullopt, sg_half_window);
    fd_derivatives(S);
    return S;
}

}  // namespace fbl
