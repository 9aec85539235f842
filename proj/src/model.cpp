#include "fbl/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "fbl/errors.hpp"

namespace fbl {

namespace {

using boost::math::quadrature::gauss_kronrod;

constexpr double kQuadTol = 1e-13;

double integrate(const std::function<double(double)>& fn, double a, double b) {
    if (a == b) return 0.0;
    return gauss_kronrod<double, 31>::integrate(fn, a, b, 15, kQuadTol);
}

bool rect_contains(const ProblemSpec& s, double t, double x) {
    const double et = 1e-12 * std::max(1.0, s.rect_T1);
    const double ex = 1e-12 * std::max(1.0, std::abs(s.rect_x2));
    return t >= -et && t <= s.rect_T1 + et && x >= s.rect_x1 - ex && x <= s.rect_x2 + ex;
}

void require_rect(const ProblemSpec& s, double t, double x, const char* who) {
    if (!rect_contains(s, t, x)) {
        std::ostringstream os;
        os << who << ": (t, x) = (" << t << ", " << x << ") outside the closed rectangle";
        throw DomainError(os.str());
    }
}

}  // namespace

bool ProblemSpec::beyond_kink(double x) const {
    for (const auto& k : gain.kinks) {
        if (orientation == Orientation::StopBelow && x >= k.location) return true;
        if (orientation == Orientation::StopAbove && x <= k.location) return true;
    }
    return false;
}

double generator_of_gain(const ProblemSpec& s, double t, double x) {
    const double sig = s.diffusion.sigma(x);
    return s.gain.g_t(t, x) + 0.5 * sig * sig * s.gain.g_xx(t, x) + s.diffusion.mu(t, x) * s.gain.g_x(t, x) -
           s.discount.r(t, x) * s.gain.g(t, x);
}

double h_fn(const ProblemSpec& s, double t, double x) {
    require_rect(s, t, x, "h_fn");
    return generator_of_gain(s, t, x);
}

double h_dot(const ProblemSpec& s, double t, double x) {
    const auto& G = s.gain;
    const double sig = s.diffusion.sigma(x);
    return G.g_tt(t, x) + 0.5 * sig * sig * G.g_txx(t, x) + s.diffusion.mu_t(t, x) * G.g_x(t, x) +
           s.diffusion.mu(t, x) * G.g_tx(t, x) - s.discount.r_t(t, x) * G.g(t, x) -
           s.discount.r(t, x) * G.g_t(t, x);
}

double bigH_unchecked(const ProblemSpec& s, double t, double x, double u_val, double u_x_val) {
    if (s.time_homogeneous()) return 0.0;
    return h_dot(s, t, x) + s.diffusion.mu_t(t, x) * u_x_val - s.discount.r_t(t, x) * u_val;
}

double bigH_fn(const ProblemSpec& s, double t, double x, double u_val, double u_x_val) {
    require_rect(s, t, x, "bigH_fn");
    return bigH_unchecked(s, t, x, u_val, u_x_val);
}

void validate(const ProblemSpec& s) {
    const auto& D = s.diffusion;
    const auto& G = s.gain;
    const auto& R = s.discount;
    if (!D.mu || !D.sigma || !D.sigma_x || !D.sigma_xx || !D.mu_t || !G.g || !G.g_t || !G.g_x || !G.g_xx ||
        !G.g_tx || !G.g_txx || !G.g_tt || !R.r || !R.r_t) {
        throw ConfigError("problem '" + s.name + "': missing analytic derivative callable");
    }
    if (!(s.rect_T1 > 0.0 && s.rect_T1 < s.horizon_T)) {
        throw ConfigError("problem '" + s.name + "': need 0 < T1 < T", "T1");
    }
    if (!(D.domain_lo < s.rect_x1 && s.rect_x1 < s.rect_x2 && s.rect_x2 < D.domain_hi)) {
        throw ConfigError("problem '" + s.name + "': need domain_lo < x1 < x2 < domain_hi", "x1");
    }
    constexpr int n = 50;
    for (int i = 0; i < n; ++i) {
        const double t = s.rect_T1 * i / (n - 1);
        for (int j = 0; j < n; ++j) {
            const double x = s.rect_x1 + (s.rect_x2 - s.rect_x1) * j / (n - 1);
            if (!(D.sigma(x) > 0.0)) {
                throw ConfigError("problem '" + s.name + "': sigma not positive on the rectangle", "sigma");
            }
            if (s.beyond_kink(x)) continue;
            const double h = generator_of_gain(s, t, x);
            if (!(h < 0.0)) {
                std::ostringstream os;
                os << "problem '" << s.name << "': h(" << t << ", " << x << ") = " << h
                   << " is not negative on the rectangle";
                throw ConfigError(os.str());
            }
        }
    }
}

double derivative_consistency(const ProblemSpec& s, int n) {
    constexpr double e = 1e-5;
    double worst = 0.0;
    auto check = [&](double analytic, double fd) {
        const double err = std::abs(analytic - fd) / std::max(1.0, std::abs(analytic));
        worst = std::max(worst, err);
    };
    const auto& D = s.diffusion;
    const auto& G = s.gain;
    const auto& R = s.discount;
    for (int i = 0; i < n; ++i) {
        const double t = s.rect_T1 * (i + 0.5) / n;
        for (int j = 0; j < n; ++j) {
            const double x = s.rect_x1 + (s.rect_x2 - s.rect_x1) * (j + 0.5) / n;
            bool near_kink = false;
            for (const auto& k : G.kinks) near_kink |= std::abs(x - k.location) < 10 * e;
            auto dt = [&](const TimeStateFn& f) { return (f(t + e, x) - f(t - e, x)) / (2 * e); };
            auto dx = [&](const TimeStateFn& f) { return (f(t, x + e) - f(t, x - e)) / (2 * e); };
            check(D.sigma_x(x), (D.sigma(x + e) - D.sigma(x - e)) / (2 * e));
            check(D.sigma_xx(x), (D.sigma_x(x + e) - D.sigma_x(x - e)) / (2 * e));
            check(D.mu_t(t, x), dt(D.mu));
            check(R.r_t(t, x), dt(R.r));
            check(G.g_t(t, x), dt(G.g));
            check(G.g_tt(t, x), dt(G.g_t));
            check(G.g_tx(t, x), dt(G.g_x));
            check(G.g_txx(t, x), dt(G.g_xx));
            if (!near_kink) {
                check(G.g_x(t, x), dx(G.g));
                check(G.g_xx(t, x), dx(G.g_x));
            }
        }
    }
    return worst;
}

LampertiMap::LampertiMap(const DiffusionSpec& diffusion, double x1, double x2, std::optional<double> ref_point)
    : diffusion_(diffusion), x1_(x1), x2_(x2), c0_(ref_point.value_or(x1)) {
    y1_ = f(x1_);
    y2_ = f(x2_);
    if (!(y2_ > y1_)) throw ConfigError("Lamperti map is not increasing on [x1, x2]");
}

double LampertiMap::f(double x) const {
    const auto& sig = diffusion_.sigma;
    return integrate([&](double z) { return 1.0 / sig(z); }, c0_, x);
}

double LampertiMap::f_inv(double y) const {
    double lo = x1_, hi = x2_;
    double flo = f(lo) - y, fhi = f(hi) - y;
    const double span = x2_ - x1_;
    for (int k = 0; flo > 0.0 && k < 200; ++k) {
        double next = lo - span * std::pow(2.0, k);
        if (next <= diffusion_.domain_lo) next = 0.5 * (lo + diffusion_.domain_lo);
        hi = lo;
        fhi = flo;
        lo = next;
        flo = f(lo) - y;
    }
    for (int k = 0; fhi < 0.0 && k < 200; ++k) {
        double next = hi + span * std::pow(2.0, k);
        if (next >= diffusion_.domain_hi) next = 0.5 * (hi + diffusion_.domain_hi);
        lo = hi;
        flo = fhi;
        hi = next;
        fhi = f(hi) - y;
    }
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if (flo > 0.0 || fhi < 0.0) throw DomainError("f_inv: value outside the range of the Lamperti map");
    std::uintmax_t iters = 200;
    auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-13 * std::max(1.0, std::abs(a)); };
    const auto [a, b] = boost::math::tools::toms748_solve([&](double x) { return f(x) - y; }, lo, hi, flo, fhi,
                                                          tol, iters);
    return 0.5 * (a + b);
}

double gamma_fn(const ProblemSpec& s, const LampertiMap& L, double t, double y) {
    const double yc = std::clamp(y, L.y1(), L.y2());
    const double tc = std::clamp(t, 0.0, s.rect_T1);
    double x;
    if (yc == L.y1()) {
        x = L.x1();
    } else if (yc == L.y2()) {
        x = L.x2();
    } else {
        x = L.f_inv(yc);
    }
    return s.diffusion.mu(tc, x) / s.diffusion.sigma(x) - 0.5 * s.diffusion.sigma_x(x);
}

ScaleFunction::ScaleFunction(const ProblemSpec& spec, std::optional<double> density_anchor)
    : spec_(spec), anchor_(density_anchor.value_or(spec.rect_x1)) {
    if (!spec.diffusion.drift_time_homogeneous) {
        throw ConfigError("scale function requires a time-homogeneous drift");
    }
}

double ScaleFunction::density(double x) const {
    const auto& D = spec_.diffusion;
    const double expo = integrate(
        [&](double w) {
            const double s = D.sigma(w);
            return 2.0 * D.mu(0.0, w) / (s * s);
        },
        anchor_, x);
    return std::exp(-expo);
}

double ScaleFunction::operator()(double x) const {
    return integrate([&](double z) { return density(z); }, spec_.rect_x1, x);
}

namespace {

DiffusionSpec gbm(double drift, double vol) {
    DiffusionSpec d;
    d.mu = [drift](double, double x) { return drift * x; };
    d.sigma = [vol](double x) { return vol * x; };
    d.sigma_x = [vol](double) { return vol; };
    d.sigma_xx = [](double) { return 0.0; };
    d.mu_t = [](double, double) { return 0.0; };
    d.domain_lo = 0.0;
    d.domain_hi = kInf;
    return d;
}

DiscountSpec constant_rate(double r) {
    DiscountSpec d;
    d.r = [r](double, double) { return r; };
    d.r_t = [](double, double) { return 0.0; };
    return d;
}

auto zero_tx() {
    return [](double, double) { return 0.0; };
}

// (K - x)^+ with the exercise branch taken at x = K.
GainSpec put_payoff(double K) {
    GainSpec g;
    g.g = [K](double, double x) { return x <= K ? K - x : 0.0; };
    g.g_x = [K](double, double x) { return x <= K ? -1.0 : 0.0; };
    g.g_t = g.g_xx = g.g_tx = g.g_txx = g.g_tt = zero_tx();
    g.kinks = {{K, 1.0}};
    return g;
}

GainSpec call_payoff(double K) {
    GainSpec g;
    g.g = [K](double, double x) { return x >= K ? x - K : 0.0; };
    g.g_x = [K](double, double x) { return x >= K ? 1.0 : 0.0; };
    g.g_t = g.g_xx = g.g_tx = g.g_txx = g.g_tt = zero_tx();
    g.kinks = {{K, 1.0}};
    return g;
}

void check_option_params(const OptionParams& p) {
    if (!(p.K > 0.0)) throw ConfigError("strike must be positive", "K");
    if (!(p.sigma > 0.0)) throw ConfigError("volatility must be positive", "sigma");
    if (p.r < 0.0) throw ConfigError("rate must be non-negative", "r");
    if (p.delta < 0.0) throw ConfigError("dividend yield must be non-negative", "delta");
}

}  // namespace

ProblemSpec american_put_spec(const OptionParams& p) {
    check_option_params(p);
    ProblemSpec s;
    s.name = "american_put";
    s.diffusion = gbm(p.r - p.delta, p.sigma);
    s.gain = put_payoff(p.K);
    s.discount = constant_rate(p.r);
    s.horizon_T = p.T;
    s.rect_T1 = p.T1;
    s.rect_x1 = p.x1;
    s.rect_x2 = p.x2;
    s.orientation = Orientation::StopBelow;
    s.terminal_boundary = p.r >= p.delta ? p.K : p.r / p.delta * p.K;
    {
        TerminalMeasure m;
        m.atoms = {{p.K, 1.0}};
        if (p.r < p.delta) {
            const double r = p.r, d = p.delta, K = p.K;
            m.density = [r, d, K](double z) { return d * z - r * K; };
            m.lo = r / d * K;
            m.hi = K;
        }
        s.stated_terminal_measure = m;
    }
    validate(s);
    return s;
}

ProblemSpec american_call_spec(const OptionParams& p) {
    check_option_params(p);
    if (!(p.delta > 0.0)) throw ConfigError("american call needs delta > 0", "delta");
    ProblemSpec s;
    s.name = "american_call";
    s.diffusion = gbm(p.r - p.delta, p.sigma);
    s.gain = call_payoff(p.K);
    s.discount = constant_rate(p.r);
    s.horizon_T = p.T;
    s.rect_T1 = p.T1;
    s.rect_x1 = p.x1;
    s.rect_x2 = p.x2;
    s.orientation = Orientation::StopAbove;
    s.terminal_boundary = p.r <= p.delta ? p.K : p.r / p.delta * p.K;
    {
        TerminalMeasure m;
        m.atoms = {{p.K, 1.0}};
        if (p.r > p.delta) {
            const double r = p.r, d = p.delta, K = p.K;
            m.density = [r, d, K](double z) { return r * K - d * z; };
            m.lo = K;
            m.hi = r / d * K;
        }
        s.stated_terminal_measure = m;
    }
    validate(s);
    return s;
}

ProblemSpec time_inhomogeneous_put_spec(const OptionParams& p) {
    check_option_params(p);
    ProblemSpec s;
    s.name = "custom_time_inhomogeneous";
    s.diffusion = gbm(p.r - p.delta, p.sigma);
    s.gain = put_payoff(p.K);
    const double r = p.r;
    s.discount.r = [r](double t, double) { return r * (1.0 + t); };
    s.discount.r_t = [r](double, double) { return r; };
    s.discount.time_homogeneous = false;
    s.horizon_T = p.T;
    s.rect_T1 = p.T1;
    s.rect_x1 = p.x1;
    s.rect_x2 = p.x2;
    s.orientation = Orientation::StopBelow;
    // h(T, x) = (delta + r T) x - r (1 + T) K stays negative below K iff delta < r.
    s.terminal_boundary = p.delta <= r ? p.K : std::min(p.K, r * (1.0 + p.T) / (p.delta + r * p.T) * p.K);
    validate(s);
    return s;
}

}  // namespace fbl
