#include "fbl/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <type_traits>

#include "fbl/errors.hpp"

namespace fbl {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double to_double(const std::string& v, const std::string& key, std::size_t line) {
    errno = 0;
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(x)) {
        throw ConfigError("'" + key + "': not a finite number: '" + v + "'", key, line);
    }
    return x;
}

std::uint64_t to_u64(const std::string& v, const std::string& key, std::size_t line) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError("'" + key + "': not a non-negative integer: '" + v + "'", key, line);
    }
    errno = 0;
    const unsigned long long x = std::strtoull(v.c_str(), nullptr, 10);
    if (errno == ERANGE) throw ConfigError("'" + key + "': integer out of range", key, line);
    return x;
}

bool to_bool(const std::string& v, const std::string& key, std::size_t line) {
    if (v == "on" || v == "true") return true;
    if (v == "off" || v == "false") return false;
    throw ConfigError("'" + key + "': expected on/off or true/false, got '" + v + "'", key, line);
}

std::vector<double> to_list(std::string v, const std::string& key, std::size_t line) {
    if (!v.empty() && v.front() == '[') {
        if (v.back() != ']') throw ConfigError("'" + key + "': unterminated list", key, line);
        v = v.substr(1, v.size() - 2);
    }
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(trim(item), key, line));
    if (out.empty()) throw ConfigError("'" + key + "': empty list", key, line);
    return out;
}

std::string fmt_list(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
    return s + "]";
}

struct KeyDef {
    std::string name;  // section.key
    bool required = false;
    std::function<void(RunConfig&, const std::string&, std::size_t)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class Ref>
KeyDef real(const char* name, Ref ref, bool required = false) {
    return {name, required,
            [ref, name](RunConfig& c, const std::string& v, std::size_t line) { ref(c) = to_double(v, name, line); },
            [ref](const RunConfig& c) { return fmt(ref(c)); }};
}

template <class Ref>
KeyDef count(const char* name, Ref ref, bool required = false) {
    return {name, required,
            [ref, name](RunConfig& c, const std::string& v, std::size_t line) {
                ref(c) = static_cast<std::remove_reference_t<decltype(ref(c))>>(to_u64(v, name, line));
            },
            [ref](const RunConfig& c) { return std::to_string(ref(c)); }};
}

template <class Ref>
KeyDef list(const char* name, Ref ref, bool required = false) {
    return {name, required,
            [ref, name](RunConfig& c, const std::string& v, std::size_t line) { ref(c) = to_list(v, name, line); },
            [ref](const RunConfig& c) { return fmt_list(ref(c)); }};
}

const std::vector<KeyDef>& registry() {
    static const std::vector<KeyDef> keys = [] {
        std::vector<KeyDef> k;
        k.push_back({"problem.kind", true,
                     [](RunConfig& c, const std::string& v, std::size_t line) {
                         if (v != "put" && v != "call" && v != "custom_time_inhomogeneous") {
                             throw ConfigError("'problem.kind': expected put, call or custom_time_inhomogeneous",
                                               "problem.kind", line);
                         }
                         c.problem.kind = v;
                     },
                     [](const RunConfig& c) { return c.problem.kind; }});
        k.push_back(real("problem.K", [](auto& c) -> auto& { return c.problem.params.K; }));
        k.push_back(real("problem.r", [](auto& c) -> auto& { return c.problem.params.r; }));
        k.push_back(real("problem.delta", [](auto& c) -> auto& { return c.problem.params.delta; }));
        k.push_back(real("problem.sigma", [](auto& c) -> auto& { return c.problem.params.sigma; }));
        k.push_back(real("problem.T", [](auto& c) -> auto& { return c.problem.params.T; }));
        k.push_back(real("problem.T1", [](auto& c) -> auto& { return c.problem.params.T1; }));
        k.push_back(real("problem.x1", [](auto& c) -> auto& { return c.problem.params.x1; }));
        k.push_back(real("problem.x2", [](auto& c) -> auto& { return c.problem.params.x2; }));

        k.push_back(count("grid.n_t", [](auto& c) -> auto& { return c.grid.n_t; }, true));
        k.push_back(count("grid.n_x", [](auto& c) -> auto& { return c.grid.n_x; }, true));
        k.push_back(real("grid.x_lo", [](auto& c) -> auto& { return c.grid.x_lo; }));
        k.push_back(real("grid.x_hi", [](auto& c) -> auto& { return c.grid.x_hi; }));
        k.push_back(count("grid.sg_half_window", [](auto& c) -> auto& { return c.grid.sg_half_window; }));
        k.push_back(real("grid.psor_tol", [](auto& c) -> auto& { return c.grid.psor_tol; }));
        k.push_back(real("grid.stefan_psor_tol", [](auto& c) -> auto& { return c.grid.stefan_psor_tol; }));

        k.push_back(count("mc.n_paths", [](auto& c) -> auto& { return c.mc.n_paths; }, true));
        k.push_back(real("mc.dt_path", [](auto& c) -> auto& { return c.mc.dt_path; }));
        k.push_back(count("mc.seed", [](auto& c) -> auto& { return c.mc.seed; }, true));
        k.push_back(real("mc.rho_floor", [](auto& c) -> auto& { return c.mc.rho_floor; }));
        k.push_back({"mc.bridge_max", false,
                     [](RunConfig& c, const std::string& v, std::size_t line) {
                         c.mc.bridge_max = to_bool(v, "mc.bridge_max", line);
                     },
                     [](const RunConfig& c) { return std::string(c.mc.bridge_max ? "on" : "off"); }});
        k.push_back(count("mc.n_q", [](auto& c) -> auto& { return c.mc.n_q; }));
        k.push_back(count("mc.vh_paths", [](auto& c) -> auto& { return c.mc.vh_paths; }));

        k.push_back(list("eval.t_list", [](auto& c) -> auto& { return c.eval.t_list; }, true));
        k.push_back(list("eval.h_list", [](auto& c) -> auto& { return c.eval.h_list; }));
        k.push_back(real("eval.T2", [](auto& c) -> auto& { return c.eval.T2; }));
        k.push_back(real("eval.se_mult", [](auto& c) -> auto& { return c.eval.se_mult; }));
        k.push_back(real("eval.rel_tol", [](auto& c) -> auto& { return c.eval.rel_tol; }));
        k.push_back(real("eval.vh_h", [](auto& c) -> auto& { return c.eval.vh_h; }));
        k.push_back(real("eval.terminal_tol", [](auto& c) -> auto& { return c.eval.terminal_tol; }));

        k.push_back(count("bessel.n_marginal", [](auto& c) -> auto& { return c.bessel.n_marginal; }));
        k.push_back(count("bessel.n_conditional", [](auto& c) -> auto& { return c.bessel.n_conditional; }));
        k.push_back(count("bessel.n_moments", [](auto& c) -> auto& { return c.bessel.n_moments; }));
        k.push_back(count("bessel.n_lemma", [](auto& c) -> auto& { return c.bessel.n_lemma; }));
        k.push_back(count("bessel.steps_per_unit", [](auto& c) -> auto& { return c.bessel.steps_per_unit; }));

        k.push_back({"output.dir", false,
                     [](RunConfig& c, const std::string& v, std::size_t) { c.output_dir = v; },
                     [](const RunConfig& c) { return c.output_dir; }});
        return k;
    }();
    return keys;
}

const KeyDef* find_key(const std::string& name) {
    for (const auto& k : registry()) {
        if (k.name == name) return &k;
    }
    return nullptr;
}

bool known_section(const std::string& s) {
    for (const auto& k : registry()) {
        if (k.name.compare(0, s.size() + 1, s + ".") == 0) return true;
    }
    return false;
}

}  // namespace

const std::vector<std::string>& required_config_keys() {
    static const std::vector<std::string> req = [] {
        std::vector<std::string> out;
        for (const auto& k : registry()) {
            if (k.required) out.push_back(k.name);
        }
        return out;
    }();
    return req;
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig c;
    std::set<std::string> seen;
    std::string section;
    std::stringstream in(text);
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError("malformed section header '" + s + "'", {}, line);
            section = trim(s.substr(1, s.size() - 2));
            if (!known_section(section)) throw ConfigError("unknown section [" + section + "]", section, line);
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("expected 'key = value', got '" + s + "'", {}, line);
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (section.empty()) throw ConfigError("key '" + key + "' outside any section", key, line);
        const std::string name = section + "." + key;
        const KeyDef* def = find_key(name);
        if (!def) throw ConfigError("unknown key '" + name + "'", name, line);
        if (!seen.insert(name).second) throw ConfigError("duplicate key '" + name + "'", name, line);
        if (value.empty()) throw ConfigError("'" + name + "': empty value", name, line);
        def->set(c, value, line);
    }
    std::vector<std::string> missing;
    for (const auto& k : required_config_keys()) {
        if (!seen.count(k)) missing.push_back(k);
    }
    if (!missing.empty()) {
        std::string msg = "missing required key(s):";
        for (const auto& m : missing) msg += " " + m;
        throw ConfigError(msg, missing.front());
    }
    validate_config(c);
    return c;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'", "config");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

std::string serialize(const RunConfig& c) {
    std::string out, section;
    for (const auto& k : registry()) {
        const auto dot = k.name.find('.');
        const std::string sec = k.name.substr(0, dot);
        if (sec != section) {
            out += (out.empty() ? "[" : "\n[") + sec + "]\n";
            section = sec;
        }
        out += k.name.substr(dot + 1) + " = " + k.get(c) + "\n";
    }
    return out;
}

void validate_config(const RunConfig& c) {
    const OptionParams& p = c.problem.params;
    auto fail = [](const std::string& msg, const std::string& key) { throw ConfigError(msg, key); };
    if (!(p.K > 0.0)) fail("K must be positive", "problem.K");
    if (!(p.sigma > 0.0)) fail("sigma must be positive", "problem.sigma");
    if (p.r < 0.0 || p.delta < 0.0) fail("r and delta must be non-negative", p.r < 0.0 ? "problem.r" : "problem.delta");
    if (!(p.T > 0.0 && p.T1 > 0.0 && p.T1 < p.T)) fail("need 0 < T1 < T", "problem.T1");
    if (!(p.x1 > 0.0 && p.x1 < p.x2)) fail("need 0 < x1 < x2", "problem.x2");
    const double T2 = c.T2();
    if (!(T2 > 0.0 && T2 < p.T1)) fail("need 0 < T2 < T1", "eval.T2");
    for (double t : c.eval.t_list) {
        if (!(t >= 0.0 && t <= T2)) fail("t = " + fmt(t) + " outside [0, T2]: t must be <= T2 < T1", "eval.t_list");
    }
    for (std::size_t i = 0; i < c.eval.h_list.size(); ++i) {
        const double h = c.eval.h_list[i];
        if (!(h > 0.0 && h < 1.0)) fail("h_list entries must lie in (0, 1)", "eval.h_list");
        if (i > 0 && !(h < c.eval.h_list[i - 1])) fail("h_list must be strictly decreasing", "eval.h_list");
    }
    const double margin = 0.1 * (p.x2 - p.x1);
    if (!(c.grid.x_lo <= p.x1 - margin)) fail("x_lo must sit 10% of (x2 - x1) below x1", "grid.x_lo");
    if (!(c.grid.x_hi >= p.x2 + margin)) fail("x_hi must sit 10% of (x2 - x1) above x2", "grid.x_hi");
    if (c.grid.x_lo <= 0.0) fail("x_lo must be positive for the option instances", "grid.x_lo");
    if (c.grid.n_t < 64) fail("n_t must be at least 64", "grid.n_t");
    if (c.grid.n_x < 64) fail("n_x must be at least 64", "grid.n_x");
    {
        const double steps = static_cast<double>(c.grid.n_t) * p.T1 / p.T;
        if (std::abs(steps - std::round(steps)) > 1e-9) fail("T1 must fall on a time node (n_t T1 / T integral)", "grid.n_t");
    }
    if (c.grid.sg_half_window < 2) fail("sg_half_window must be at least 2", "grid.sg_half_window");
    if (!(c.grid.psor_tol > 0.0 && c.grid.psor_tol < 1e-3)) fail("psor_tol must lie in (0, 1e-3)", "grid.psor_tol");
    if (!(c.grid.stefan_psor_tol > 0.0 && c.grid.stefan_psor_tol < 1e-3)) {
        fail("stefan_psor_tol must lie in (0, 1e-3)", "grid.stefan_psor_tol");
    }
    if (c.mc.n_paths < 2) fail("n_paths must be at least 2", "mc.n_paths");
    if (c.mc.vh_paths < 2) fail("vh_paths must be at least 2", "mc.vh_paths");
    if (c.mc.dt_path < 0.0) fail("dt_path must be non-negative", "mc.dt_path");
    if (!(c.mc.rho_floor > 0.0 && c.mc.rho_floor < 0.5)) fail("rho_floor must lie in (0, 0.5)", "mc.rho_floor");
    if (c.mc.n_q < 2) fail("n_q must be at least 2", "mc.n_q");
    if (!(c.eval.se_mult > 0.0)) fail("se_mult must be positive", "eval.se_mult");
    if (!(c.eval.rel_tol > 0.0)) fail("rel_tol must be positive", "eval.rel_tol");
    if (!(c.eval.vh_h > 0.0 && c.eval.vh_h < 1.0)) fail("vh_h must lie in (0, 1)", "eval.vh_h");
    if (!(c.eval.terminal_tol > 0.0)) fail("terminal_tol must be positive", "eval.terminal_tol");
    for (auto [n, key] : {std::pair{c.bessel.n_marginal, "bessel.n_marginal"},
                          std::pair{c.bessel.n_conditional, "bessel.n_conditional"},
                          std::pair{c.bessel.n_moments, "bessel.n_moments"},
                          std::pair{c.bessel.n_lemma, "bessel.n_lemma"}}) {
        if (n < 100) fail(std::string(key) + " must be at least 100", key);
    }
    if (c.bessel.steps_per_unit < 4) fail("steps_per_unit must be at least 4", "bessel.steps_per_unit");
    if (c.output_dir.empty()) fail("output dir must not be empty", "output.dir");
}

ProblemSpec make_problem(const RunConfig& c) {
    if (c.problem.kind == "put") return american_put_spec(c.problem.params);
    if (c.problem.kind == "call") return american_call_spec(c.problem.params);
    if (c.problem.kind == "custom_time_inhomogeneous") return time_inhomogeneous_put_spec(c.problem.params);
    throw ConfigError("unknown problem kind '" + c.problem.kind + "'", "problem.kind");
}

}  // namespace fbl
