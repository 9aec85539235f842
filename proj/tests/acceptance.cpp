// Acceptance criteria 1-9 on the default put and its variants. One PASS/FAIL
// line per criterion, preceded by the measurements it was judged on.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fbl/lambda_mc.hpp"
#include "fbl/pde_solver.hpp"
#include "fbl/runner.hpp"
#include "fbl/stefan.hpp"

using namespace fbl;
namespace fs = std::filesystem;

namespace {

const std::string kConfigDir = FBL_CONFIG_DIR;

// 5000-step Cox-Ross-Rubinstein tree for the default put at x = 1, t = 0.
constexpr double kCrrPutValue = 0.1387622354;

struct Verdict {
    bool pass = true;
    std::vector<std::string> lines;

    void check(bool ok, const std::string& what) {
        lines.push_back(std::string(ok ? "PASS  " : "FAIL  ") + what);
        pass = pass && ok;
    }
    void info(const std::string& what) { lines.push_back("INFO  " + what); }
    void absorb(const StageSummary& s) {
        for (const auto& l : s.lines) lines.push_back(l);
        pass = pass && s.pass;
    }
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

fs::path out_root;

RunConfig load(const std::string& name) { return parse_config(kConfigDir + "/" + name); }

StageSummary stage(const std::string& sub, const RunConfig& cfg, const std::string& dir, std::size_t workers = 1) {
    RunOptions o;
    o.out_dir = (out_root / dir).string();
    o.workers = workers;
    o.quiet = true;
    return run(sub, cfg, o).stages.front();
}

struct Surfaces {
    ProblemSpec spec;
    ValueSurface coarse, fine;
};

Surfaces solve_pair(const RunConfig& cfg, double tol) {
    Surfaces s{make_problem(cfg), {}, {}};
    SolverOptions so;
    so.tol = tol;
    const Grid g = Grid::build(s.spec, cfg.grid.n_t, cfg.grid.n_x, cfg.grid.x_lo, cfg.grid.x_hi);
    s.coarse = solve_full(s.spec, g, so, cfg.grid.sg_half_window);
    s.fine = solve_full(s.spec, g.refined(), so, 2 * cfg.grid.sg_half_window);
    return s;
}

Verdict criterion1() {
    Verdict v;
    const auto cfg = load("put_default.ini");
    const auto t0 = std::chrono::steady_clock::now();
    const auto st = stage("solve", cfg, "c1");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    v.absorb(st);
    const auto S = solve_pair(cfg, cfg.grid.psor_tol).coarse;
    const double val = S.interp(S.v, 0.0, 1.0);
    v.check(std::abs(val - kCrrPutValue) <= 2e-3,
            "v(0, 1) = " + fmt(val) + " vs binomial " + fmt(kCrrPutValue) + " (|diff| " + fmt(std::abs(val - kCrrPutValue)) +
                " <= 2e-3)");
    v.check(secs < 120.0, "runtime " + fmt(secs) + " s < 120 s");
    return v;
}

Verdict criterion2() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    v.absorb(stage("boundary", load("put_default.ini"), "c2"));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    v.check(secs < 300.0, "runtime " + fmt(secs) + " s < 300 s");
    return v;
}

Verdict criterion3() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    v.absorb(stage("bessel-check", load("put_default.ini"), "c3"));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    v.check(secs < 180.0, "runtime " + fmt(secs) + " s < 180 s");
    return v;
}

Verdict criterion4() {
    Verdict v;
    const auto cfg = load("put_default.ini");
    const auto t0 = std::chrono::steady_clock::now();
    const auto P = solve_pair(cfg, cfg.grid.psor_tol);
    for (auto [t, x] : {std::pair{0.16, 0.9}, {0.32, 1.0}, {0.48, 1.1}}) {
        const auto c = mc_udot_check(P.spec, P.coarse, t, x, 20000, cfg.mc.seed);
        const double budget = std::abs(c.fd_value - P.fine.interp(P.fine.u_dot, t, x));
        const double diff = std::abs(c.mc_value - c.fd_value);
        v.check(diff <= 3 * c.std_err + budget, "(t, x) = (" + fmt(t) + ", " + fmt(x) + "): MC " + fmt(c.mc_value) +
                                                      " vs FD " + fmt(c.fd_value) + " (|diff| " + fmt(diff) +
                                                      " <= 3 se + budget = " + fmt(3 * c.std_err + budget) + ")");
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    v.check(secs < 180.0, "runtime " + fmt(secs) + " s < 180 s");
    return v;
}

Verdict criterion5() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    v.absorb(stage("vh", load("put_default.ini"), "c5"));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    v.check(secs < 300.0, "runtime " + fmt(secs) + " s < 300 s");
    return v;
}

Verdict criterion6() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    v.absorb(stage("lambda", load("put_default.ini"), "c6"));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    v.check(secs < 600.0, "runtime " + fmt(secs) + " s < 600 s");
    return v;
}

Verdict criterion7() {
    Verdict v;
    const auto cfg = load("time_inhomogeneous.ini");
    const auto t0 = std::chrono::steady_clock::now();
    const auto P = solve_pair(cfg, cfg.grid.psor_tol);
    const LambdaModel M(P.spec, P.coarse), M2(P.spec, P.fine);
    const double t = 0.4 * cfg.problem.params.T1;
    LambdaOptions o;
    o.n_paths = cfg.mc.n_paths;
    o.dt_path = cfg.dt_path();
    o.seed = cfg.mc.seed;
    o.n_q = cfg.mc.n_q;
    const auto e = estimate_lambda(M, t, o);
    o.n_q = 2 * cfg.mc.n_q;
    const auto e2 = estimate_lambda(M, t, o);
    v.check(std::abs(e.intVs) > 3 * e.se_intVs,
            "intVs = " + fmt(e.intVs) + " nonzero (se " + fmt(e.se_intVs) + ")");
    const double drift = std::abs(e.intVs - e2.intVs);
    v.check(drift <= 3 * std::max(e.se_intVs, e2.se_intVs),
            "n_q " + std::to_string(cfg.mc.n_q) + " -> " + std::to_string(o.n_q) + ": intVs " + fmt(e.intVs) + " -> " +
                fmt(e2.intVs) + " (|diff| " + fmt(drift) + " <= 3 se)");
    const auto row = judge_lambda(e, std::abs(P.coarse.b_dot_at(t) - P.fine.b_dot_at(t)), cfg.eval.rel_tol,
                                  cfg.eval.se_mult);
    v.check(row.pass, "bdot formula " + fmt(e.bdot_formula) + " vs FD " + fmt(e.bdot_fd) + " (|diff| " +
                          fmt(row.abs_diff) + " <= " + fmt(row.tolerance) + ", rel " + fmt(row.rel_err) + ")");
    const auto rep = expansion_convergence(M2, M, e, cfg.eval.h_list);
    std::string ratios;
    for (const auto& r : rep.rows) ratios += " " + fmt(r.ratio) + " (coarse " + fmt(r.ratio_coarse) + ")";
    v.check(rep.trend_pass(), "expansion |r(h) - 1| decreasing along h_list, r =" + ratios);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    v.check(secs < 600.0, "runtime " + fmt(secs) + " s < 600 s");
    return v;
}

void stefan_lines(Verdict& v, const StefanReport& rep, const std::string& label, bool residuals) {
    if (residuals) {
        v.check(rep.pde.order_max >= 1.0, label + " PDE residual max-norm order " + fmt(rep.pde.order_max) + " (" +
                                              fmt(rep.pde.coarse_max) + " -> " + fmt(rep.pde.fine_max) + ")");
        v.info(label + " PDE residual L2 order " + fmt(rep.pde.order_rms));
        v.check(rep.bc.order_rms >= 1.0, label + " boundary residual order " + fmt(rep.bc.order_rms));
        v.check(rep.velocity.order_rms >= 1.0 && rep.velocity.pass_fraction >= 0.8,
                label + " velocity residual order " + fmt(rep.velocity.order_rms) + ", " +
                    fmt(100 * rep.velocity.pass_fraction) + "% of t within budget");
    }
    v.check(rep.eta_positive, label + " eta > 0");
    v.check(rep.nu_max_abs == 0.0, label + " nu = 0 exactly (max |nu| " + fmt(rep.nu_max_abs) + ")");
}

Verdict criterion8() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    for (const char* name : {"put_default.ini", "put_r_lt_delta.ini"}) {
        const auto cfg = load(name);
        const bool is_default = std::string(name) == "put_default.ini";
        const auto P = solve_pair(cfg, cfg.grid.stefan_psor_tol);
        const auto data = stefan_data_for(P.spec, P.fine);
        StefanOptions so;
        so.T2_frac = cfg.T2() / cfg.problem.params.T1;
        so.terminal_tolerance = cfg.eval.terminal_tol;
        const auto rep = verify_stefan(P.spec, P.coarse, P.fine, default_bumps(P.spec, data), so);
        const std::string label = is_default ? "put:" : "put r<delta:";
        stefan_lines(v, rep, label, is_default);
        // Last t per bump is the verdict; the earlier ones show the trend.
        std::map<std::string, std::vector<const TerminalTest*>> by_bump;
        for (const auto& r : rep.terminal_tests) by_bump[r.xi_id].push_back(&r);
        for (const auto& [id, rows] : by_bump) {
            if (!is_default && id != "bump_in_density") continue;
            std::string trend;
            for (const auto* r : rows) trend += " " + fmt(r->lhs);
            v.info(label + " " + id + " lhs over t = T - 10dt .. T - 2dt:" + trend);
            const auto& last = *rows.back();
            v.check(last.gap() <= cfg.eval.terminal_tol * std::abs(last.rhs),
                    label + " " + id + ": lhs " + fmt(last.lhs) + " vs stated measure " + fmt(last.rhs) +
                        " within " + fmt(100 * cfg.eval.terminal_tol) + "%");
            v.info(label + " " + id + ": generator target -int xi d[(Lg)(T) - r g(T)] = " + fmt(last.rhs_generator) +
                   ", gap " + fmt(std::abs(last.lhs - last.rhs_generator)));
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    v.check(secs < 600.0, "runtime " + fmt(secs) + " s < 600 s");
    return v;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Largest relative gap between numeric cells of two CSVs with equal shape;
// infinite when the shape or a text cell differs.
double csv_max_rel_gap(const std::string& a, const std::string& b) {
    std::istringstream ia(a), ib(b);
    std::string la, lb;
    double worst = 0.0;
    while (true) {
        const bool ga = static_cast<bool>(std::getline(ia, la)), gb = static_cast<bool>(std::getline(ib, lb));
        if (ga != gb) return INFINITY;
        if (!ga) return worst;
        std::istringstream ca(la), cb(lb);
        std::string xa, xb;
        while (true) {
            const bool ha = static_cast<bool>(std::getline(ca, xa, ',')), hb = static_cast<bool>(std::getline(cb, xb, ','));
            if (ha != hb) return INFINITY;
            if (!ha) break;
            char* ea = nullptr;
            char* eb = nullptr;
            const double va = std::strtod(xa.c_str(), &ea), vb = std::strtod(xb.c_str(), &eb);
            if (*ea != '\0' || *eb != '\0' || xa.empty()) {
                if (xa != xb) return INFINITY;
                continue;
            }
            if (va != vb) worst = std::max(worst, std::abs(va - vb) / std::max(std::abs(va), std::abs(vb)));
        }
    }
}

Verdict criterion9() {
    Verdict v;
    auto cfg = load("put_default.ini");
    cfg.mc.n_paths = 20000;
    cfg.mc.vh_paths = 20000;
    cfg.eval.t_list = {0.32};
    v.info("config: put_default.ini with n_paths = vh_paths = 20000, t_list = [0.32]");
    const std::vector<std::pair<std::string, std::size_t>> runs = {{"c9/w1a", 1}, {"c9/w1b", 1}, {"c9/w3", 3}};
    for (const auto& [dir, workers] : runs) {
        stage("lambda", cfg, dir, workers);
        stage("vh", cfg, dir, workers);
    }
    for (const char* file : {"lambda.csv", "lambda_expansion.csv", "vh.csv"}) {
        const std::string a = slurp(out_root / "c9/w1a" / file);
        const std::string b = slurp(out_root / "c9/w1b" / file);
        const std::string c = slurp(out_root / "c9/w3" / file);
        v.check(!a.empty() && a == b, std::string(file) + ": two single-worker runs byte-identical");
        const double gap = csv_max_rel_gap(a, c);
        v.check(gap <= 1e-12, std::string(file) + ": 3 workers vs 1, max relative gap " + fmt(gap) + " <= 1e-12");
    }
    return v;
}

const std::map<int, std::pair<std::string, std::function<Verdict()>>>& criteria() {
    static const std::map<int, std::pair<std::string, std::function<Verdict()>>> c = {
        {1, {"solver sanity", criterion1}},
        {2, {"boundary regularity", criterion2}},
        {3, {"Bessel and Pitman suite", criterion3}},
        {4, {"time-derivative representation", criterion4}},
        {5, {"pre-limit representation", criterion5}},
        {6, {"velocity formula on the put", criterion6}},
        {7, {"time-inhomogeneous instance", criterion7}},
        {8, {"Stefan verification", criterion8}},
        {9, {"determinism", criterion9}},
    };
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<int> selected;
    std::string out = "acceptance_out";
    app.add_option("--criterion,-c", selected, "Criteria to run (default: all)")->check(CLI::Range(1, 9));
    app.add_option("--out", out, "Scratch directory for artifacts");
    CLI11_PARSE(app, argc, argv);
    if (selected.empty()) {
        for (const auto& [k, _] : criteria()) selected.push_back(k);
    }
    out_root = out;
    fs::create_directories(out_root);

    bool all = true;
    std::vector<std::string> summary;
    for (int k : selected) {
        const auto& [title, fn] = criteria().at(k);
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v.check(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        for (const auto& l : v.lines) std::cout << "  [" << k << "] " << l << "\n";
        std::ostringstream line;
        line << (v.pass ? "PASS" : "FAIL") << " criterion " << k << ": " << title << " (" << fmt(secs) << " s)";
        std::cout << line.str() << std::endl;
        summary.push_back(line.str());
        all = all && v.pass;
    }
    if (selected.size() > 1) {
        std::cout << "\n";
        for (const auto& s : summary) std::cout << s << "\n";
    }
    return all ? 0 : 1;
}
