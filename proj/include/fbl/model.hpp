#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace fbl {

using TimeStateFn = std::function<double(double t, double x)>;
using StateFn = std::function<double(double x)>;

enum class Orientation { StopBelow, StopAbove };

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct DiffusionSpec {
    TimeStateFn mu;
    StateFn sigma;
    StateFn sigma_x;
    StateFn sigma_xx;
    TimeStateFn mu_t;
    double domain_lo = -kInf;
    double domain_hi = kInf;
    bool drift_time_homogeneous = true;
};

/// A point where g(T, .) has a jump in slope; together with the smooth
/// branches this is the difference-of-convex description of the payoff.
struct PayoffKink {
    double location;
    double slope_jump;  // g_x(location+) - g_x(location-)
};

struct GainSpec {
    TimeStateFn g, g_t, g_x, g_xx, g_tx, g_txx, g_tt;
    std::vector<PayoffKink> kinks;
    bool time_homogeneous = true;
};

struct DiscountSpec {
    TimeStateFn r, r_t;
    bool time_homogeneous = true;
};

struct MeasureAtom {
    double location;
    double mass;
};

/// A measure on the state space: density on (lo, hi) plus Dirac atoms.
struct TerminalMeasure {
    std::function<double(double)> density;  // empty: no density part
    double lo = 0.0, hi = 0.0;
    std::vector<MeasureAtom> atoms;
};

struct ProblemSpec {
    std::string name;
    DiffusionSpec diffusion;
    GainSpec gain;
    DiscountSpec discount;
    double horizon_T = 1.0;
    double rect_T1 = 0.5;
    double rect_x1 = 0.0;
    double rect_x2 = 1.0;
    Orientation orientation = Orientation::StopBelow;
    /// b(T) when the instance knows it in closed form.
    std::optional<double> terminal_boundary;
    /// Terminal measure of the Stefan problem in the closed form quoted for
    /// the instance, already restricted to the terminal continuation side.
    std::optional<TerminalMeasure> stated_terminal_measure;

    bool time_homogeneous() const {
        return diffusion.drift_time_homogeneous && gain.time_homogeneous && discount.time_homogeneous;
    }
    bool in_closed_rectangle(double t, double x) const {
        return t >= 0.0 && t <= rect_T1 && x >= rect_x1 && x <= rect_x2;
    }
    /// True when x lies on the side of some payoff kink where the payoff
    /// is flat and h vanishes (x >= K for the put, x <= K for the call).
    bool beyond_kink(double x) const;
};

/// Checks the structural invariants: rectangle ordering, sigma bounded away
/// from zero, every callable present and h < 0 on a 50x50 sample of the
/// closed rectangle (exercise side of kinks only). Throws ConfigError.
void validate(const ProblemSpec& spec);

/// Largest relative mismatch between each analytic derivative and a central
/// difference (step 1e-5) of its parent, over n x n points of the rectangle
/// away from kinks.
double derivative_consistency(const ProblemSpec& spec, int n = 7);

/// g_t + (sigma^2/2) g_xx + mu g_x - r g on the closed rectangle.
double h_fn(const ProblemSpec& spec, double t, double x);
/// Same expression without the domain check (terminal data, boundary).
double generator_of_gain(const ProblemSpec& spec, double t, double x);
double h_dot(const ProblemSpec& spec, double t, double x);
double bigH_fn(const ProblemSpec& spec, double t, double x, double u_val, double u_x_val);
double bigH_unchecked(const ProblemSpec& spec, double t, double x, double u_val, double u_x_val);

class LampertiMap {
public:
    LampertiMap(const DiffusionSpec& diffusion, double x1, double x2,
                std::optional<double> ref_point = std::nullopt);

    double f(double x) const;
    double f_inv(double y) const;
    double y1() const { return y1_; }
    double y2() const { return y2_; }
    double x1() const { return x1_; }
    double x2() const { return x2_; }
    double ref_point() const { return c0_; }
    double sigma(double x) const { return diffusion_.sigma(x); }

private:
    DiffusionSpec diffusion_;
    double x1_, x2_, c0_;
    double y1_, y2_;
};

/// mu(t, x)/sigma(x) - sigma_x(x)/2 at x = f_inv(y), y clamped to [y1, y2].
double gamma_fn(const ProblemSpec& spec, const LampertiMap& lamperti, double t, double y);

/// S(x) = int_{x1}^x S'(z) dz with S'(z) = exp(-int_{anchor}^z 2 mu / sigma^2).
class ScaleFunction {
public:
    explicit ScaleFunction(const ProblemSpec& spec, std::optional<double> density_anchor = std::nullopt);

    double density(double x) const;
    double operator()(double x) const;

private:
    ProblemSpec spec_;
    double anchor_;
};

struct OptionParams {
    double K = 1.0;
    double r = 0.06;
    double delta = 0.02;
    double sigma = 0.4;
    double T = 1.0;
    double T1 = 0.8;
    double x1 = 0.55;
    double x2 = 1.3;

    bool operator==(const OptionParams&) const = default;
};

ProblemSpec american_put_spec(const OptionParams& p);
ProblemSpec american_call_spec(const OptionParams& p);
/// Put payoff under GBM with drift (r - delta) x and discount r (1 + t).
ProblemSpec time_inhomogeneous_put_spec(const OptionParams& p);

}  // namespace fbl
