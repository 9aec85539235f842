#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fbl/model.hpp"

namespace fbl {

struct ProblemConfig {
    std::string kind = "put";  // put | call | custom_time_inhomogeneous
    OptionParams params;

    bool operator==(const ProblemConfig&) const = default;
};

struct GridConfig {
    std::size_t n_t = 400;
    std::size_t n_x = 400;
    double x_lo = 0.45;
    double x_hi = 2.0;
    std::size_t sg_half_window = 10;  // doubled on the refined grid
    double psor_tol = 1e-9;
    double stefan_psor_tol = 1e-12;

    bool operator==(const GridConfig&) const = default;
};

struct McConfig {
    std::size_t n_paths = 200000;
    double dt_path = 0.0;  // 0: 2e-4 T1
    std::uint64_t seed = 1;
    double rho_floor = 1e-3;
    bool bridge_max = true;
    std::size_t n_q = 64;
    std::size_t vh_paths = 50000;

    bool operator==(const McConfig&) const = default;
};

struct EvalConfig {
    std::vector<double> t_list;
    std::vector<double> h_list{0.08, 0.04, 0.02, 0.01};  // of y2 - y1
    double T2 = 0.0;                                   // 0: 0.8 T1
    double se_mult = 3.0;
    double rel_tol = 0.15;
    double vh_h = 0.05;  // of y2 - y1
    double terminal_tol = 0.05;

    bool operator==(const EvalConfig&) const = default;
};

struct BesselConfig {
    std::size_t n_marginal = 100000;
    std::size_t n_conditional = 200000;
    std::size_t n_moments = 200000;
    std::size_t n_lemma = 50000;
    std::size_t steps_per_unit = 64;

    bool operator==(const BesselConfig&) const = default;
};

/// Grammar: `[section]` headers, `key = value` lines, `#` comments. Lists
/// are comma separated, optionally in brackets; booleans are on/off or
/// true/false.
struct RunConfig {
    ProblemConfig problem;
    GridConfig grid;
    McConfig mc;
    EvalConfig eval;
    BesselConfig bessel;
    std::string output_dir = "out";

    double T2() const { return eval.T2 > 0.0 ? eval.T2 : 0.8 * problem.params.T1; }
    double dt_path() const { return mc.dt_path > 0.0 ? mc.dt_path : 2e-4 * problem.params.T1; }

    bool operator==(const RunConfig&) const = default;
};

/// Keys that have no default, as `section.key`.
const std::vector<std::string>& required_config_keys();

/// Throws ConfigError naming the key (and line) on unknown or duplicate
/// keys, unparsable values, missing required keys, or failed cross-field
/// checks.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::string& path);

/// Every key, defaults included; parse_config_text(serialize(c)) == c.
std::string serialize(const RunConfig& config);

/// Cross-field checks: 0 < T2 < T1 < T, t_list inside [0, T2], grid margins
/// around the rectangle, decreasing positive h_list.
void validate_config(const RunConfig& config);

ProblemSpec make_problem(const RunConfig& config);

}  // namespace fbl
