#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include "fbl/errors.hpp"
#include "fbl/parallel.hpp"
#include "fbl/pde_solver.hpp"
#include "fbl/rng.hpp"

namespace fbl {

namespace {

double sigma_max_on_rectangle(const ProblemSpec& spec) {
    double m = 0.0;
    for (int k = 0; k <= 200; ++k) {
        const double x = spec.rect_x1 + (spec.rect_x2 - spec.rect_x1) * k / 200.0;
        m = std::max(m, spec.diffusion.sigma(x));
    }
    return m;
}

double default_dt_mc(const ProblemSpec& spec, const ValueSurface& S) {
    const double s = sigma_max_on_rectangle(spec);
    return std::min(S.grid.dt, std::pow(S.grid.dx / s, 2)) / 4.0;
}

// Signed distance into the continuation region.
double inside(const ValueSurface& S, double t, double x) {
    const double b = S.boundary_at(t);
    return S.orientation == Orientation::StopBelow ? x - b : b - x;
}

enum class Exit { Boundary, Upper, Horizon };

}  // namespace

UdotCheck mc_udot_check(const ProblemSpec& spec, const ValueSurface& S, double t, double x, std::size_t n_paths,
                        std::uint64_t seed, std::size_t workers, std::optional<double> dt_opt) {
    if (!S.has_derivatives) throw NumericalFailure("mc_udot_check", "surface has no derivative fields");
    if (spec.orientation != Orientation::StopBelow) {
        throw ConfigError("mc_udot_check supports the stop-below orientation only");
    }
    UdotCheck out;
    const double T1 = spec.rect_T1, x2 = spec.rect_x2;
    out.fd_value = S.interp_c(S.u_dot, t, x);
    if (t >= T1 - 1e-14) {
        out.mc_value = out.fd_value;
        out.reach_T1 = 1.0;
        return out;
    }
    if (!(inside(S, t, x) > 0.0 && x < x2)) throw DomainError("mc_udot_check: (t, x) not interior to C and R");
    const double dt_target = dt_opt.value_or(default_dt_mc(spec, S));
    const auto n_steps = static_cast<std::size_t>(std::ceil((T1 - t) / dt_target));
    const double dt = (T1 - t) / static_cast<double>(n_steps);
    const double sq = std::sqrt(dt);
    out.dt_mc = dt;
    const bool with_H = !spec.time_homogeneous();

    std::vector<double> value(n_paths, 0.0);
    std::vector<unsigned char> exit_kind(n_paths, 0), escaped(n_paths, 0);
    parallel_for(n_paths, workers, [&](std::size_t p) {
        Rng rng = make_rng(seed, StreamDomain::UdotPaths, p);
        boost::random::normal_distribution<double> normal;
        double X = x, log_disc = 0.0, running = 0.0;
        double s_prev = t;
        double r_prev = spec.discount.r(t, X);
        double F_prev = with_H ? bigH_unchecked(spec, t, X, S.interp_c(S.u, t, X), S.interp_c(S.u_x, t, X)) : 0.0;
        double d_prev = inside(S, t, X);
        Exit how = Exit::Horizon;
        double payoff = 0.0;
        for (std::size_t k = 0; k < n_steps; ++k) {
            const double s_next = t + static_cast<double>(k + 1) * dt;
            const double Xn = X + spec.diffusion.mu(s_prev, X) * dt + spec.diffusion.sigma(X) * sq * normal(rng);
            if (Xn < S.grid.x_lo || Xn > S.grid.x_hi) escaped[p] = 1;
            const double d_next = inside(S, s_next, Xn);
            double frac = 1.0;
            if (d_next <= 0.0) {
                how = Exit::Boundary;
                frac = d_prev / (d_prev - d_next);
            } else if (Xn >= x2) {
                how = Exit::Upper;
                frac = (x2 - X) / (Xn - X);
            }
            const double s_end = s_prev + frac * dt;
            const double X_end = how == Exit::Horizon ? Xn : X + frac * (Xn - X);
            const double r_end = spec.discount.r(s_end, X_end);
            const double disc_prev = std::exp(-log_disc);
            log_disc += 0.5 * (r_prev + r_end) * frac * dt;
            if (with_H) {
                const double F_end = bigH_unchecked(spec, s_end, X_end, S.interp_c(S.u, s_end, X_end),
                                                    S.interp_c(S.u_x, s_end, X_end));
                running += 0.5 * (disc_prev * F_prev + std::exp(-log_disc) * F_end) * frac * dt;
                F_prev = F_end;
            }
            if (how == Exit::Upper) payoff = std::exp(-log_disc) * S.interp_c(S.u_dot, s_end, x2);
            if (how != Exit::Horizon) break;
            X = Xn;
            s_prev = s_next;
            r_prev = r_end;
            d_prev = d_next;
        }
        if (how == Exit::Horizon) payoff = std::exp(-log_disc) * S.interp_c(S.u_dot, T1, X);
        value[p] = payoff + running;
        exit_kind[p] = static_cast<unsigned char>(how);
    });
    const auto st = sample_stats(value);
    out.mc_value = st.mean;
    out.std_err = st.std_err;
    std::size_t nb = 0, nu = 0, nh = 0, ne = 0;
    for (std::size_t p = 0; p < n_paths; ++p) {
        nb += exit_kind[p] == static_cast<unsigned char>(Exit::Boundary);
        nu += exit_kind[p] == static_cast<unsigned char>(Exit::Upper);
        nh += exit_kind[p] == static_cast<unsigned char>(Exit::Horizon);
        ne += escaped[p];
    }
    const double n = static_cast<double>(n_paths);
    out.hit_boundary = nb / n;
    out.hit_x2 = nu / n;
    out.reach_T1 = nh / n;
    out.escape_fraction = ne / n;
    return out;
}

double dotv_bound_constant(const ValueSurface& S) {
    const Grid& g = S.grid;
    const double T1 = g.t(g.i_T1);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.i_T1; ++i) {
        const double w = 1.0 + 1.0 / std::sqrt(T1 - g.t(i));
        for (std::size_t j = g.j_x1; j <= g.j_x2; ++j) {
            const double x = g.x(j);
            if (!S.in_continuation(i, x)) continue;
            const double dist = std::abs(x - S.b[i]);
            worst = std::max(worst, std::abs(S.u_dot(i, j)) / (dist * w));
        }
    }
    return worst;
}

namespace {

RatioCheck compare(double coarse, double fine) {
    RatioCheck r;
    r.value = coarse;
    r.refined_value = fine;
    r.finite = std::isfinite(coarse) && std::isfinite(fine);
    r.growth = coarse != 0.0 ? fine / coarse - 1.0 : (fine == 0.0 ? 0.0 : kInf);
    r.stable = r.finite && r.growth < 0.10;
    return r;
}

}  // namespace

RatioCheck dotv_bound_check(const ValueSurface& coarse, const ValueSurface& fine) {
    return compare(dotv_bound_constant(coarse), dotv_bound_constant(fine));
}

double lipschitz_ratio(const ValueSurface& S, double T2) {
    const Grid& g = S.grid;
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < g.rows() && g.t(i + 1) <= T2 + 1e-12; ++i) {
        worst = std::max(worst, std::abs(S.b_smooth[i + 1] - S.b_smooth[i]) / g.dt);
    }
    return worst;
}

RatioCheck lipschitz_ratio_check(const ValueSurface& coarse, const ValueSurface& fine, double T2) {
    return compare(lipschitz_ratio(coarse, T2), lipschitz_ratio(fine, T2));
}

HittingCheck hitting_prob_check(const ProblemSpec& spec, const ValueSurface& S, double t, double x,
                                std::size_t n_paths, std::uint64_t seed, std::size_t workers,
                                std::optional<double> dt_opt) {
    const double lo_level = S.boundary_at(t);
    const double hi_level = spec.rect_x2;
    const ScaleFunction scale(spec);
    HittingCheck out;
    const double s_lo = scale(lo_level), s_hi = scale(hi_level);
    out.scale_prob = std::clamp((scale(x) - s_lo) / (s_hi - s_lo), 0.0, 1.0);
    if (x <= lo_level) {
        out.mc_prob = 0.0;
        return out;
    }
    if (x >= hi_level) {
        out.mc_prob = 1.0;
        return out;
    }
    const double dt = dt_opt.value_or(default_dt_mc(spec, S));
    const double sq = std::sqrt(dt);
    const std::size_t max_steps = static_cast<std::size_t>(std::ceil(1000.0 * spec.horizon_T / dt));
    std::vector<double> hit(n_paths, 0.0);
    parallel_for(n_paths, workers, [&](std::size_t p) {
        Rng rng = make_rng(seed, StreamDomain::HittingPaths, p);
        boost::random::normal_distribution<double> normal;
        double X = x;
        for (std::size_t k = 0; k < max_steps; ++k) {
            X += spec.diffusion.mu(0.0, X) * dt + spec.diffusion.sigma(X) * sq * normal(rng);
            if (X >= hi_level) {
                hit[p] = 1.0;
                return;
            }
            if (X <= lo_level) return;
        }
        throw NumericalFailure("hitting_prob_check", "path failed to exit the interval");
    });
    const auto st = sample_stats(hit);
    out.mc_prob = st.mean;
    out.std_err = st.std_err;
    // Discrete monitoring shifts each barrier by about 0.5826 sigma sqrt(dt).
    const double s = sigma_max_on_rectangle(spec);
    out.budget = 3.0 * st.std_err + 2.0 * 0.5826 * s * sq / (hi_level - lo_level);
    return out;
}

}  // namespace fbl
