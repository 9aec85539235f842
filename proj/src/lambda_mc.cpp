#include "fbl/lambda_mc.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/gauss.hpp>

#include "fbl/errors.hpp"
#include "fbl/parallel.hpp"

namespace fbl {

namespace {

constexpr std::size_t kTableY = 4097;
constexpr std::size_t kTableT = 129;

double default_dt_path(double T1) { return 2e-4 * T1; }

// f^{-1} on y1 + j dy, marching from x1: Newton along dx/dy = sigma(x), with
// 1/sigma integrated over each short step only.
std::vector<double> inverse_table(const LampertiMap& map, double dy, std::size_t n) {
    using Gauss = boost::math::quadrature::gauss<double, 15>;
    std::vector<double> xs(n);
    double x = map.x1(), y = map.y1();
    xs[0] = x;
    for (std::size_t j = 1; j < n; ++j) {
        const double target = map.y1() + static_cast<double>(j) * dy;
        for (int it = 0; it < 50 && std::abs(target - y) > 1e-15 * (1.0 + std::abs(target)); ++it) {
            const double next = x + (target - y) * map.sigma(x);
            y += Gauss::integrate([&](double z) { return 1.0 / map.sigma(z); }, x, next);
            x = next;
        }
        xs[j] = x;
    }
    return xs;
}

}  // namespace

BoundaryCurveY build_boundary_curve_y(const ValueSurface& S, const LampertiMap& map, double T1) {
    if (!S.has_boundary) throw NumericalFailure("build_boundary_curve_y", "surface has no extracted boundary");
    const Grid& g = S.grid;
    const auto last = static_cast<std::size_t>(std::lround(T1 / g.dt));
    if (last >= g.rows()) throw ConfigError("build_boundary_curve_y: T1 beyond the grid");
    std::vector<double> c(last + 1), c_dot(last + 1);
    for (std::size_t i = 0; i <= last; ++i) {
        const double b = S.b_smooth[i];
        if (!(b > map.x1() && b < map.x2())) throw BoundaryEscape("boundary leaves the rectangle", i);
        c[i] = map.f(b);
        c_dot[i] = S.b_dot_fd[i] / map.sigma(b);
    }
    return make_boundary_curve(g.dt, std::move(c), std::move(c_dot));
}

LambdaModel::LambdaModel(const ProblemSpec& spec, const ValueSurface& surface)
    : spec_(spec),
      surface_(&surface),
      map_(spec.diffusion, spec.rect_x1, spec.rect_x2),
      curve_(build_boundary_curve_y(surface, map_, spec.rect_T1)) {
    if (spec.orientation != Orientation::StopBelow) {
        throw ConfigError("Lambda estimation supports the stop-below orientation only");
    }
    if (!surface.has_derivatives) throw NumericalFailure("LambdaModel", "surface has no derivative fields");
    dy_ = (map_.y2() - map_.y1()) / static_cast<double>(kTableY - 1);
    x_tab_ = inverse_table(map_, dy_, kTableY);
    x_tab_.front() = map_.x1();
    x_tab_.back() = map_.x2();
    n_tt_ = spec.diffusion.drift_time_homogeneous ? 1 : kTableT;
    dtt_ = n_tt_ > 1 ? spec.rect_T1 / static_cast<double>(n_tt_ - 1) : 0.0;
    gamma_tab_.resize(n_tt_ * kTableY);
    for (std::size_t i = 0; i < n_tt_; ++i) {
        const double t = static_cast<double>(i) * dtt_;
        for (std::size_t j = 0; j < kTableY; ++j) {
            const double x = x_tab_[j];
            gamma_tab_[i * kTableY + j] =
                spec.diffusion.mu(t, x) / spec.diffusion.sigma(x) - 0.5 * spec.diffusion.sigma_x(x);
        }
    }
}

double LambdaModel::x_of(double y) const {
    const double pos = std::clamp((y - map_.y1()) / dy_, 0.0, static_cast<double>(kTableY - 1));
    const auto j = std::min(static_cast<std::size_t>(pos), kTableY - 2);
    const double w = pos - static_cast<double>(j);
    return x_tab_[j] + w * (x_tab_[j + 1] - x_tab_[j]);
}

double LambdaModel::gamma(double t, double y) const {
    const double pos = std::clamp((y - map_.y1()) / dy_, 0.0, static_cast<double>(kTableY - 1));
    const auto j = std::min(static_cast<std::size_t>(pos), kTableY - 2);
    const double w = pos - static_cast<double>(j);
    auto row = [&](std::size_t i) {
        const double* r = gamma_tab_.data() + i * kTableY;
        return r[j] + w * (r[j + 1] - r[j]);
    };
    if (n_tt_ == 1) return row(0);
    const double tp = std::clamp(t / dtt_, 0.0, static_cast<double>(n_tt_ - 1));
    const auto i = std::min(static_cast<std::size_t>(tp), n_tt_ - 2);
    const double a = tp - static_cast<double>(i);
    return (1.0 - a) * row(i) + a * row(i + 1);
}

double LambdaModel::rate(double t, double y) const { return spec_.discount.r(t, x_of(y)); }

double LambdaModel::w_dot(double t, double y) const {
    return surface_->interp_c(surface_->u_dot, t, x_of(y));
}

double LambdaModel::F(double t, double y) const {
    if (spec_.time_homogeneous()) return 0.0;
    const double x = x_of(y);
    return bigH_unchecked(spec_, t, x, surface_->interp_c(surface_->u, t, x), surface_->interp_c(surface_->u_x, t, x));
}

double LambdaModel::bdot_factor(double t) const {
    const double b = surface_->boundary_at(t);
    return spec_.diffusion.sigma(b) / (2.0 * h_fn(spec_, t, b));
}

GammaFn LambdaModel::gamma_fn() const {
    return [this](double t, double y) { return gamma(t, y); };
}

RateFn LambdaModel::rate_fn() const {
    return [this](double t, double y) { return rate(t, y); };
}

namespace {

struct PathScratch {
    PitmanPath path;
    WeightTrack track;
    std::vector<double> z;
};

PathScratch& scratch() {
    thread_local PathScratch s;
    return s;
}

std::size_t steps_for(double span, double dt_target) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span / dt_target - 1e-9)));
}

// Nodes needed to evaluate tracked quantities at time s (one past the step
// containing s).
std::size_t nodes_through(double s, double dt, std::size_t n_steps) {
    const auto k = static_cast<std::size_t>(std::floor(s / dt));
    return std::min(n_steps, k + 1) + 1;
}

}  // namespace

LambdaEstimate estimate_lambda(const LambdaModel& model, double t, const LambdaOptions& opt) {
    const double T1 = model.T1(), y2 = model.y2();
    if (!(t >= 0.0 && t < T1)) throw DomainError("estimate_lambda: t must lie in [0, T1)");
    const BoundaryCurveY& curve = model.curve();
    const double span = T1 - t;
    const std::size_t n_steps = steps_for(span, opt.dt_path > 0.0 ? opt.dt_path : default_dt_path(T1));
    const double dt = span / static_cast<double>(n_steps);
    const double rho_floor = opt.rho_floor_frac * (y2 - model.y1());
    double c_bar = kInf;
    for (double c : curve.c) c_bar = std::min(c_bar, y2 - c);
    const bool with_Vs = !model.spec().time_homogeneous();
    const double Q = std::sqrt(span);
    const double dq = Q / static_cast<double>(opt.n_q);
    // E[2q / rho_{q^2}] = 2 sqrt(2/pi) for every q > 0. The part of the
    // integrand carried by G0 = F(t, c(t)) is therefore added in closed form
    // and only the bounded remainder (G_s - G0) / rho_s is read off the path;
    // below one path step the interpolated rho_s is too small for 1 / rho_s.
    const double G0 = model.F(t, curve.value(t));
    const double G0_part = 2.0 * std::sqrt(2.0 / boost::math::constants::pi<double>()) * G0 * Q;
    const GammaFn gam = model.gamma_fn();
    const RateFn rate = model.rate_fn();

    const std::size_t n = opt.n_paths;
    std::vector<double> v1(n, 0.0), v2(n, 0.0), vs(n, 0.0), total(n, 0.0);
    std::vector<unsigned char> crossed(n, 0), floored(n, 0), capped(n, 0);
    parallel_for(n, opt.workers, [&](std::size_t p) {
        PathScratch& sc = scratch();
        Rng rng = make_rng(opt.seed, StreamDomain::LambdaPaths, p);
        sample_pitman_path(sc.path, n_steps, dt, rng, opt.bridge_max);
        const double* rho = sc.path.rho.data();
        const Hit th = hitting_time_theta(sc.path, curve, t, T1, y2);
        track_weights(rho, nodes_through(th.time, dt, n_steps), dt, curve, gam, rate, t, sc.track);
        double logL = log_L_at(sc.track, rho, dt, th.time);
        if (std::abs(logL) > kLogWeightCap) {
            capped[p] = 1;
            logL = std::copysign(kLogWeightCap, logL);
        }
        const double D = std::exp(-int_R_at(sc.track, dt, th.time));
        double rho_th, y_pay;
        if (th.crossed) {
            rho_th = y2 - curve.value(t + th.time);
            if (!(rho_th >= 0.5 * c_bar)) {
                throw NumericalFailure("estimate_lambda", "rho at the exit through y2 below the rectangle gap",
                                       rho_th);
            }
            y_pay = y2;
        } else {
            rho_th = sc.path.rho.back();
            if (rho_th < rho_floor) floored[p] = 1;
            y_pay = curve.value(T1) + rho_th;
        }
        const double val = std::exp(logL) * D / rho_th * model.w_dot(t + th.time, y_pay);
        crossed[p] = th.crossed;
        (th.crossed ? v2 : v1)[p] = val;

        if (with_Vs) {
            CompensatedSum acc;
            for (std::size_t j = 1; j <= opt.n_q; ++j) {
                const double q = static_cast<double>(j) * dq;
                const double w = j == opt.n_q ? 0.5 : 1.0;
                const double s = q * q;
                const double rs = path_value_at(sc.path.rho, dt, s);
                if (s < th.time) {
                    const double Ls =
                        std::exp(std::clamp(log_L_at(sc.track, rho, dt, s), -kLogWeightCap, kLogWeightCap));
                    const double Ds = std::exp(-int_R_at(sc.track, dt, s));
                    const double Gs = Ls * Ds * model.F(t + s, curve.value(t + s) + rs);
                    acc.add(w * 2.0 * q * (Gs - G0) / rs);
                } else {
                    acc.add(-w * 2.0 * q * G0 / rs);
                }
            }
            vs[p] = acc.value() * dq + G0_part;
        }
        total[p] = val + vs[p];
    });

    std::vector<double> v12(n);
    std::size_t n_cross = 0, n_floor = 0, n_cap = 0;
    for (std::size_t p = 0; p < n; ++p) {
        v12[p] = v1[p] + v2[p];
        n_cross += crossed[p];
        n_floor += floored[p];
        n_cap += capped[p];
    }
    const double nn = static_cast<double>(n);
    if (static_cast<double>(n_cap) > 1e-4 * nn) {
        throw NumericalFailure("estimate_lambda", "too many paths hit the weight cap", static_cast<double>(n_cap) / nn);
    }
    LambdaEstimate e;
    e.t = t;
    e.V1 = sample_stats(v1).mean;
    e.V2 = sample_stats(v2).mean;
    const auto s12 = sample_stats(v12), ss = sample_stats(vs), st = sample_stats(total);
    e.V1plusV2 = s12.mean;
    e.se_V12 = s12.std_err;
    e.intVs = ss.mean;
    e.se_intVs = ss.std_err;
    e.Lambda = st.mean;
    e.se_Lambda = st.std_err;
    const double k = model.bdot_factor(t);
    e.bdot_formula = k * e.Lambda;
    e.se_bdot = std::abs(k) * e.se_Lambda;
    e.bdot_fd = model.surface().b_dot_at(t);
    e.frac_exit_y2 = static_cast<double>(n_cross) / nn;
    e.floor_fraction = static_cast<double>(n_floor) / nn;
    e.high_variance = e.floor_fraction > 0.01;
    e.capped = n_cap;
    e.n_paths = n;
    e.dt_path = dt;
    e.seed = opt.seed;
    return e;
}

VhEstimate estimate_Vh(const LambdaModel& model, double t, double h, const LambdaOptions& opt) {
    const double T1 = model.T1(), y2 = model.y2();
    if (!(t >= 0.0 && t < T1)) throw DomainError("estimate_Vh: t must lie in [0, T1)");
    const BoundaryCurveY& curve = model.curve();
    if (!(h > 0.0 && curve.value(t) + h < y2)) throw DomainError("estimate_Vh: need 0 < h < y2 - c(t)");
    const double span = T1 - t;
    const std::size_t n_steps = steps_for(span, opt.dt_path > 0.0 ? opt.dt_path : default_dt_path(T1));
    const double dt = span / static_cast<double>(n_steps);
    const bool with_Vs = !model.spec().time_homogeneous();
    const GammaFn gam = model.gamma_fn();
    const RateFn rate = model.rate_fn();

    const std::size_t n = opt.n_paths;
    std::vector<double> value(n, 0.0);
    std::vector<unsigned char> b1(n, 0), b2(n, 0), capped(n, 0);
    parallel_for(n, opt.workers, [&](std::size_t p) {
        PathScratch& sc = scratch();
        Rng rng = make_rng(opt.seed, StreamDomain::VhPaths, p);
        // Nothing past the first node with J > h can contribute.
        sample_pitman_path(sc.path, n_steps, dt, rng, opt.bridge_max, h);
        const std::size_t m = sc.path.n_steps;
        // J_s <= h exactly on the nodes before k_J.
        const std::size_t k_J = sc.path.Wbar[m] > h ? m : n_steps + 1;
        const double theta_h = hitting_time_theta_h(sc.path, curve, t, T1, y2, h);
        const double s_end = std::min({theta_h, span, static_cast<double>(m) * dt});
        sc.z.resize(m + 1);
        for (std::size_t k = 0; k <= m; ++k) sc.z[k] = h - sc.path.W[k];
        const double* z = sc.z.data();
        track_weights(z, nodes_through(s_end, dt, m), dt, curve, gam, rate, t, sc.track);
        auto weight = [&](double s) {
            double lg = log_L_at(sc.track, z, dt, s);
            if (std::abs(lg) > kLogWeightCap) {
                capped[p] = 1;
                lg = std::copysign(kLogWeightCap, lg);
            }
            return std::exp(lg - int_R_at(sc.track, dt, s));
        };
        double val = 0.0;
        if (theta_h >= span && k_J > n_steps) {
            b1[p] = 1;
            val += weight(span) * model.w_dot(T1, curve.value(T1) + z[n_steps]);
        } else if (theta_h < span && static_cast<std::size_t>(std::floor(theta_h / dt)) < k_J) {
            b2[p] = 1;
            val += weight(theta_h) * model.w_dot(t + theta_h, y2);
        }
        if (with_Vs) {
            // Trapezoid on nodes while J <= h and before theta_h.
            double prev = model.F(t, curve.value(t) + z[0]);
            CompensatedSum acc;
            for (std::size_t k = 1; k < k_J && static_cast<double>(k) * dt <= s_end; ++k) {
                const double s = static_cast<double>(k) * dt;
                const double cur = weight(s) * model.F(t + s, curve.value(t + s) + z[k]);
                acc.add(0.5 * (prev + cur) * dt);
                prev = cur;
            }
            val += acc.value();
        }
        value[p] = val;
    });
    VhEstimate out;
    out.t = t;
    out.h = h;
    const auto st = sample_stats(value);
    out.value = st.mean;
    out.std_err = st.std_err;
    std::size_t n1 = 0, n2 = 0, nc = 0;
    for (std::size_t p = 0; p < n; ++p) {
        if (b1[p] && b2[p]) throw NumericalFailure("estimate_Vh", "events B1 and B2 overlap on a path");
        n1 += b1[p];
        n2 += b2[p];
        nc += capped[p];
    }
    const double nn = static_cast<double>(n);
    if (static_cast<double>(nc) > 1e-4 * nn) {
        throw NumericalFailure("estimate_Vh", "too many paths hit the weight cap", static_cast<double>(nc) / nn);
    }
    out.p_B1 = static_cast<double>(n1) / nn;
    out.p_B2 = static_cast<double>(n2) / nn;
    out.capped = nc;
    out.w_dot_solver = model.w_dot(t, curve.value(t) + h);
    return out;
}

ExpansionReport expansion_convergence(const LambdaModel& fine, const LambdaModel& coarse, const LambdaEstimate& lambda,
                                      const std::vector<double>& h_fracs) {
    ExpansionReport rep;
    rep.t = lambda.t;
    rep.Lambda = lambda.Lambda;
    if (lambda.Lambda == 0.0 || h_fracs.empty()) {
        rep.skipped = true;
        return rep;
    }
    const double width = fine.y2() - fine.y1();
    for (double frac : h_fracs) {
        ExpansionRow row;
        row.h = frac * width;
        row.w_dot = fine.w_dot(lambda.t, fine.curve().value(lambda.t) + row.h);
        row.ratio = row.w_dot / (row.h * lambda.Lambda);
        row.ratio_coarse =
            coarse.w_dot(lambda.t, coarse.curve().value(lambda.t) + row.h) / (row.h * lambda.Lambda);
        rep.rows.push_back(row);
    }
    rep.monotone = true;
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
        if (std::abs(rep.rows[i].ratio - 1.0) > std::abs(rep.rows[i - 1].ratio - 1.0)) rep.monotone = false;
    }
    const auto& last = rep.rows.back();
    const double gap = std::abs(last.ratio - 1.0);
    rep.improves = gap < std::abs(rep.rows.front().ratio - 1.0);
    rep.tolerance = 3.0 * lambda.se_Lambda / std::abs(lambda.Lambda) + std::abs(last.ratio - last.ratio_coarse);
    rep.within_tolerance = gap <= rep.tolerance;
    return rep;
}

LambdaRow judge_lambda(const LambdaEstimate& est, double budget, double rel_tol, double se_mult) {
    LambdaRow row;
    row.est = est;
    row.budget = budget;
    row.abs_diff = std::abs(est.bdot_formula - est.bdot_fd);
    row.tolerance = se_mult * est.se_bdot + budget;
    row.rel_checked = std::abs(est.bdot_fd) > 5.0 * budget;
    row.rel_err = est.bdot_fd != 0.0 ? row.abs_diff / std::abs(est.bdot_fd) : kInf;
    if (std::abs(est.bdot_fd) > 3.0 * est.se_bdot) {
        row.sign_ok = (est.bdot_formula > 0.0) == (est.bdot_fd > 0.0);
    }
    row.pass = row.abs_diff <= row.tolerance && (!row.rel_checked || row.rel_err <= rel_tol) && row.sign_ok;
    return row;
}

VhRow judge_vh(const VhEstimate& est, double w_dot_fine, double se_mult) {
    VhRow row;
    row.est = est;
    row.w_dot_fine = w_dot_fine;
    row.budget = std::abs(est.w_dot_solver - w_dot_fine);
    row.abs_diff = std::abs(est.value - est.w_dot_solver);
    row.tolerance = se_mult * est.std_err + row.budget;
    row.pass = row.abs_diff <= row.tolerance;
    return row;
}

}  // namespace fbl
