#include "fbl/stefan.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "fbl/errors.hpp"

namespace fbl {

namespace {

int inward(Orientation o) { return o == Orientation::StopBelow ? 1 : -1; }

double terminal_boundary(const ProblemSpec& spec, const ValueSurface& S) {
    return spec.terminal_boundary ? *spec.terminal_boundary : S.b.back();
}

bool on_continuation_side(Orientation o, double b, double x) {
    return o == Orientation::StopBelow ? x >= b : x <= b;
}

void require(bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("stefan data needs ") + what, what);
}

}  // namespace

double Bump::operator()(double z) const {
    const double u = (z - center) / radius;
    if (std::abs(u) >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - u * u));
}

double pair_measure(const TerminalMeasure& sigma, const Bump& xi) {
    double total = 0.0;
    if (sigma.density) {
        const double a = std::max(sigma.lo, xi.lo()), b = std::min(sigma.hi, xi.hi());
        if (b > a) {
            auto f = [&](double z) { return sigma.density(z) * xi(z); };
            total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 12, 1e-12);
        }
    }
    for (const auto& atom : sigma.atoms) total += atom.mass * xi(atom.location);
    return total;
}

StefanData stefan_data_for(const ProblemSpec& spec, const ValueSurface& S) {
    require(static_cast<bool>(spec.diffusion.mu_t), "mu_t");
    require(static_cast<bool>(spec.discount.r_t), "r_t");
    require(static_cast<bool>(spec.gain.g_t), "g_t");
    require(static_cast<bool>(spec.gain.g_tx), "g_tx");
    if (!S.has_boundary || !S.has_derivatives) throw NumericalFailure("stefan_data_for", "surface not differentiated");

    const Grid& g = S.grid;
    StefanData d;
    d.orientation = S.orientation;
    d.psi = Field(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i) {
        const double t = g.t(i);
        for (std::size_t j = 0; j < g.cols(); ++j) {
            const double x = g.x(j);
            const double vx = S.u_x(i, j) + spec.gain.g_x(t, x);
            d.psi(i, j) = spec.diffusion.mu_t(t, x) * vx - spec.discount.r_t(t, x) * S.v(i, j);
        }
    }
    const std::size_t R = g.rows();
    d.phi.resize(R);
    d.eta.resize(R);
    d.nu.resize(R);
    for (std::size_t i = 0; i < R; ++i) {
        const double t = g.t(i), b = S.b_smooth[i];
        const double s = spec.diffusion.sigma(b);
        const double h = generator_of_gain(spec, t, b);
        d.phi[i] = spec.gain.g_t(t, b);
        d.eta[i] = -s * s / (2.0 * h);
        d.nu[i] = -s * s * spec.gain.g_tx(t, b) / (2.0 * h);
    }

    const double bT = terminal_boundary(spec, S);
    d.support_lo = bT;
    const double T = spec.horizon_T;
    TerminalMeasure gen;
    gen.density = [spec, T](double z) { return generator_of_gain(spec, T, z) - spec.gain.g_t(T, z); };
    if (S.orientation == Orientation::StopBelow) {
        gen.lo = bT;
        gen.hi = std::min(spec.diffusion.domain_hi, g.x_hi);
    } else {
        gen.lo = std::max(spec.diffusion.domain_lo, g.x_lo);
        gen.hi = bT;
    }
    for (const auto& k : spec.gain.kinks) {
        if (!on_continuation_side(S.orientation, bT, k.location)) continue;
        const double s = spec.diffusion.sigma(k.location);
        gen.atoms.push_back({k.location, 0.5 * s * s * k.slope_jump});
    }
    d.sigma_generator = gen;
    d.sigma = spec.stated_terminal_measure ? *spec.stated_terminal_measure : gen;
    return d;
}

ResidualStats pde_residual(const ProblemSpec& spec, const ValueSurface& S, const StefanData& data, double T2,
                           const PdeResidualOptions& opt) {
    const Grid& g = S.grid;
    const std::size_t R = g.rows(), C = g.cols();
    const double dt = g.dt, dx = g.dx;
    Field vd(R, C);
    for (std::size_t i = 1; i + 1 < R; ++i) {
        const double t = g.t(i);
        for (std::size_t j = 0; j < C; ++j) {
            vd(i, j) = S.has_derivatives ? S.u_dot(i, j) + spec.gain.g_t(t, g.x(j))
                                         : (S.v(i + 1, j) - S.v(i - 1, j)) / (2 * dt);
        }
    }
    const int d = inward(S.orientation);
    const double margin = opt.margin > 0.0 ? opt.margin : 3 * dx;
    const std::size_t step = std::max<std::size_t>(opt.node_stride, 1);
    auto clear_of_boundary = [&](std::size_t i, double x) {
        if (!S.has_boundary) return true;
        for (std::size_t k = i - 1; k <= i + 1; ++k) {
            if (d * (x - S.b[k]) < margin) return false;
        }
        return true;
    };
    ResidualStats st;
    double sum2 = 0.0, sum = 0.0;
    for (std::size_t i = 2 * step; i + 2 < R && g.t(i) <= T2 + 1e-12; i += step) {
        const double t = g.t(i);
        std::size_t j = std::max<std::size_t>(g.j_x1, 1);
        j += (step - j % step) % step;
        for (; j <= g.j_x2 && j + 1 < C; j += step) {
            const double x = g.x(j);
            if (!clear_of_boundary(i, x)) continue;
            const double s = spec.diffusion.sigma(x);
            const double vdd = (vd(i + 1, j) - vd(i - 1, j)) / (2 * dt);
            const double lvd = 0.5 * s * s * (vd(i, j + 1) - 2 * vd(i, j) + vd(i, j - 1)) / (dx * dx) +
                               spec.diffusion.mu(t, x) * (vd(i, j + 1) - vd(i, j - 1)) / (2 * dx);
            const double res = vdd + lvd - spec.discount.r(t, x) * vd(i, j) + data.psi(i, j) + opt.psi_shift;
            st.max = std::max(st.max, std::abs(res));
            sum2 += res * res;
            sum += res;
            ++st.n;
        }
    }
    if (st.n > 0) {
        st.l2 = std::sqrt(sum2 * dt * dx * static_cast<double>(step * step));
        st.mean = sum / static_cast<double>(st.n);
    }
    return st;
}

namespace {

std::vector<std::size_t> check_slices(const ValueSurface& S, double T1, double T2) {
    std::vector<std::size_t> out;
    const Grid& g = S.grid;
    for (std::size_t i = 1; i + 1 < g.rows(); ++i) {
        const double t = g.t(i);
        if (t >= 0.1 * T1 - 1e-12 && t <= T2 + 1e-12) out.push_back(i);
    }
    return out;
}

}  // namespace

double default_fit_width(const Grid& coarse) { return 20.0 * coarse.dx; }

double boundary_poly_fit(const ValueSurface& S, const Field& F, std::size_t i, double width, int p0, int n) {
    if (n < 1 || n > 4) throw ConfigError("boundary fit takes 1 to 4 terms", "n");
    const Grid& g = S.grid;
    const int d = inward(S.orientation);
    double A[4][5] = {};
    int used = 0;
    for (long j = static_cast<long>(S.first_continuation(i)); j >= 0 && j <= static_cast<long>(g.n_x); j += d) {
        const double s = std::abs(g.x(static_cast<std::size_t>(j)) - S.b[i]);
        if (s > width) break;
        double e[4];
        for (int r = 0; r < n; ++r) e[r] = std::pow(s, p0 + r);
        const double f = F(i, static_cast<std::size_t>(j));
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) A[r][c] += e[r] * e[c];
            A[r][4] += e[r] * f;
        }
        ++used;
    }
    if (used < n + 2) throw NumericalFailure("boundary_poly_fit", "too few continuation nodes inside the fit width");
    for (int p = 0; p < n; ++p) {
        for (int r = p + 1; r < n; ++r) {
            const double m = A[r][p] / A[p][p];
            for (int c = p; c < n; ++c) A[r][c] -= m * A[p][c];
            A[r][4] -= m * A[p][4];
        }
    }
    double x[4];
    for (int r = n - 1; r >= 0; --r) {
        double acc = A[r][4];
        for (int c = r + 1; c < n; ++c) acc -= A[r][c] * x[c];
        x[r] = acc / A[r][r];
    }
    return x[0];
}

std::vector<SliceResidual> stefan_velocity_residual(const ProblemSpec& spec, const ValueSurface& S,
                                                    const StefanData& data, double T2, double fit_width) {
    const double w = fit_width > 0.0 ? fit_width : default_fit_width(S.grid);
    std::vector<SliceResidual> rows;
    for (std::size_t i : check_slices(S, spec.rect_T1, T2)) {
        SliceResidual r;
        r.t = S.grid.t(i);
        r.b_dot = S.b_dot_fd[i];
        r.vdot_x = inward(S.orientation) * boundary_poly_fit(S, S.u_dot, i, w, 1, 3) +
                   spec.gain.g_tx(r.t, S.b_smooth[i]);
        r.eta = data.eta[i];
        r.value = r.b_dot + r.eta * r.vdot_x - data.nu[i];
        rows.push_back(r);
    }
    return rows;
}

std::vector<SliceResidual> stefan_bc_residual(const ProblemSpec& spec, const ValueSurface& S, const StefanData& data,
                                              double T2, double fit_width) {
    const double w = fit_width > 0.0 ? fit_width : default_fit_width(S.grid);
    std::vector<SliceResidual> rows;
    for (std::size_t i : check_slices(S, spec.rect_T1, T2)) {
        SliceResidual r;
        r.t = S.grid.t(i);
        const double ud = boundary_poly_fit(S, S.u_dot, i, w, 0, 3);
        r.value = ud + spec.gain.g_t(r.t, S.b[i]) - data.phi[i];
        rows.push_back(r);
    }
    return rows;
}

TwoGridVerdict judge_two_grid(const std::string& condition, const std::vector<SliceResidual>& coarse,
                              std::vector<SliceResidual>& fine, bool ingredient_budget, double min_fraction) {
    TwoGridVerdict v;
    v.condition = condition;
    std::vector<SliceResidual> matched;
    double sc = 0.0, sf = 0.0;
    std::size_t passed = 0;
    std::size_t k = 0;
    for (const auto& c : coarse) {
        while (k < fine.size() && fine[k].t < c.t - 1e-9) ++k;
        if (k == fine.size() || std::abs(fine[k].t - c.t) > 1e-9) continue;
        SliceResidual f = fine[k];
        f.budget = ingredient_budget ? std::abs(c.b_dot - f.b_dot) + std::abs(c.eta * c.vdot_x - f.eta * f.vdot_x)
                                     : std::abs(c.value - f.value);
        f.pass = std::abs(f.value) <= f.budget;
        passed += f.pass;
        v.coarse_max = std::max(v.coarse_max, std::abs(c.value));
        v.fine_max = std::max(v.fine_max, std::abs(f.value));
        sc += c.value * c.value;
        sf += f.value * f.value;
        matched.push_back(f);
    }
    fine = matched;
    if (matched.empty()) return v;
    const double n = static_cast<double>(matched.size());
    v.coarse_rms = std::sqrt(sc / n);
    v.fine_rms = std::sqrt(sf / n);
    v.order_rms = v.fine_rms > 0.0 ? std::log2(v.coarse_rms / v.fine_rms) : kInf;
    v.order_max = v.fine_max > 0.0 ? std::log2(v.coarse_max / v.fine_max) : kInf;
    v.order_pass = v.order_rms >= 1.0;
    v.pass_fraction = static_cast<double>(passed) / n;
    v.pass = v.order_pass && v.pass_fraction >= min_fraction;
    return v;
}

TwoGridVerdict judge_pde_two_grid(const ResidualStats& coarse, const ResidualStats& fine) {
    TwoGridVerdict v;
    v.condition = "pde";
    v.coarse_max = coarse.max;
    v.fine_max = fine.max;
    v.coarse_rms = coarse.l2;
    v.fine_rms = fine.l2;
    v.order_max = fine.max > 0.0 ? std::log2(coarse.max / fine.max) : kInf;
    v.order_rms = fine.l2 > 0.0 ? std::log2(coarse.l2 / fine.l2) : kInf;
    v.judged_on_max = true;
    v.order_pass = v.order_max >= 1.0;
    v.pass_fraction = v.order_pass ? 1.0 : 0.0;
    v.pass = v.order_pass;
    return v;
}

double vdot_pairing(const ProblemSpec& spec, const ValueSurface& S, std::size_t i, const Bump& xi) {
    const Grid& g = S.grid;
    if (xi.lo() < g.x_lo || xi.hi() > g.x_hi) throw ConfigError("test function leaves the mesh", xi.id);
    const double t = g.t(i), b = S.b[i];
    const int d = inward(S.orientation);
    // Integrand sampled at b, where vdot = g_t, then at the continuation nodes outward.
    double prev_x = b, prev_f = spec.gain.g_t(t, b) * xi(b);
    double total = 0.0;
    for (long j = static_cast<long>(S.first_continuation(i)); j >= 0 && j <= static_cast<long>(g.n_x); j += d) {
        const double x = g.x(static_cast<std::size_t>(j));
        const double f = (S.u_dot(i, static_cast<std::size_t>(j)) + spec.gain.g_t(t, x)) * xi(x);
        total += 0.5 * (f + prev_f) * std::abs(x - prev_x);
        prev_x = x;
        prev_f = f;
        if (d > 0 ? x > xi.hi() : x < xi.lo()) break;
    }
    return total;
}

std::vector<TerminalTest> terminal_weak_limit(const ProblemSpec& spec, const ValueSurface& S, const StefanData& data,
                                              const std::vector<Bump>& xi_list, const std::vector<double>& t_list) {
    std::vector<TerminalTest> out;
    for (const auto& xi : xi_list) {
        const double rhs = pair_measure(data.sigma, xi);
        const double rhs_gen = -pair_measure(data.sigma_generator, xi);
        for (double t : t_list) {
            const auto i = static_cast<std::size_t>(std::lround(t / S.grid.dt));
            if (i == 0 || i >= S.grid.n_t) throw ConfigError("terminal test time outside (0, T)", xi.id);
            TerminalTest row;
            row.xi_id = xi.id;
            row.t = S.grid.t(i);
            row.lhs = vdot_pairing(spec, S, i, xi);
            row.rhs = rhs;
            row.rhs_generator = rhs_gen;
            out.push_back(row);
        }
    }
    return out;
}

std::vector<Bump> default_bumps(const ProblemSpec& spec, const StefanData& data) {
    std::vector<Bump> out;
    for (const auto& k : spec.gain.kinks) {
        out.push_back({"bump_at_kink", k.location, 0.1 * std::abs(k.location)});
    }
    if (data.sigma.density && data.sigma.hi > data.sigma.lo) {
        const double mid = 0.5 * (data.sigma.lo + data.sigma.hi);
        out.push_back({"bump_in_density", mid, 0.4 * (data.sigma.hi - data.sigma.lo)});
    }
    return out;
}

StefanReport verify_stefan(const ProblemSpec& spec, const ValueSurface& coarse, const ValueSurface& fine,
                           const std::vector<Bump>& xi_list, const StefanOptions& opt) {
    StefanReport rep;
    const double T2 = opt.T2_frac * spec.rect_T1;
    const StefanData dc = stefan_data_for(spec, coarse);
    const StefanData df = stefan_data_for(spec, fine);

    // Both grids on the coarse nodes, three coarse cells clear of b.
    PdeResidualOptions po;
    po.margin = 3 * coarse.grid.dx;
    rep.pde_coarse = pde_residual(spec, coarse, dc, T2, po);
    po.node_stride = static_cast<std::size_t>(std::lround(coarse.grid.dx / fine.grid.dx));
    rep.pde_fine = pde_residual(spec, fine, df, T2, po);
    rep.pde = judge_pde_two_grid(rep.pde_coarse, rep.pde_fine);

    const double width = default_fit_width(coarse.grid);
    const auto bc_c = stefan_bc_residual(spec, coarse, dc, T2, width);
    rep.bc_rows = stefan_bc_residual(spec, fine, df, T2, width);
    rep.bc = judge_two_grid("boundary", bc_c, rep.bc_rows, false, 0.0);

    const auto vel_c = stefan_velocity_residual(spec, coarse, dc, T2, width);
    rep.velocity_rows = stefan_velocity_residual(spec, fine, df, T2, width);
    rep.velocity = judge_two_grid("velocity", vel_c, rep.velocity_rows, true);

    double max_jump = 0.0, max_budget = 0.0;
    for (std::size_t k = 0; k < rep.velocity_rows.size(); ++k) {
        if (k > 0) max_jump = std::max(max_jump, std::abs(rep.velocity_rows[k].vdot_x - rep.velocity_rows[k - 1].vdot_x));
    }
    for (std::size_t k = 0, m = 0; k < vel_c.size() && m < rep.velocity_rows.size(); ++k) {
        if (std::abs(vel_c[k].t - rep.velocity_rows[m].t) > 1e-9) continue;
        max_budget = std::max(max_budget, std::abs(vel_c[k].vdot_x - rep.velocity_rows[m].vdot_x));
        ++m;
    }
    rep.vdot_x_jump_ratio = max_budget > 0.0 ? max_jump / max_budget : kInf;

    rep.eta_positive = true;
    for (std::size_t i = 0; i <= fine.grid.i_T1; ++i) {
        if (fine.grid.t(i) < spec.rect_T1 && !(df.eta[i] > 0.0)) rep.eta_positive = false;
    }
    for (double nu : df.nu) rep.nu_max_abs = std::max(rep.nu_max_abs, std::abs(nu));

    std::vector<double> t_list;
    const std::size_t n = fine.grid.n_t;
    for (std::size_t k : {10, 8, 6, 4}) {
        if (k > opt.terminal_steps_back) t_list.push_back(fine.grid.t(n - k));
    }
    t_list.push_back(fine.grid.t(n - opt.terminal_steps_back));
    rep.terminal_tests = terminal_weak_limit(spec, fine, df, xi_list, t_list);
    rep.terminal_tolerance = opt.terminal_tolerance;
    rep.terminal_pass = true;
    for (std::size_t k = 0; k < rep.terminal_tests.size(); ++k) {
        const bool last = k + 1 == rep.terminal_tests.size() ||
                          rep.terminal_tests[k + 1].xi_id != rep.terminal_tests[k].xi_id;
        if (!last) continue;
        const auto& row = rep.terminal_tests[k];
        if (row.gap() > opt.terminal_tolerance * std::max(std::abs(row.rhs), 1e-12)) rep.terminal_pass = false;
    }
    return rep;
}

}  // namespace fbl
