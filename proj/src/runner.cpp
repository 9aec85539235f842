#include "fbl/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "fbl/bessel.hpp"
#include "fbl/errors.hpp"
#include "fbl/lambda_mc.hpp"
#include "fbl/pde_solver.hpp"
#include "fbl/stefan.hpp"

namespace fbl {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

const char* verdict(bool pass) { return pass ? "PASS" : "FAIL"; }

class Csv {
public:
    Csv(const std::filesystem::path& path, const std::string& header) : out_(path) {
        if (!out_) throw ConfigError("cannot write '" + path.string() + "'", "output.dir");
        out_ << header << '\n';
    }
    template <class... Cells>
    void row(const Cells&... cells) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cells, first = false), ...);
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

struct Context {
    const RunConfig& cfg;
    const RunOptions& opt;
    std::filesystem::path out;
    std::uint64_t seed;
    ProblemSpec spec;
    std::unique_ptr<ValueSurface> coarse, fine, stefan_coarse, stefan_fine;

    Context(const RunConfig& c, const RunOptions& o, std::filesystem::path dir, std::uint64_t s)
        : cfg(c), opt(o), out(std::move(dir)), seed(s), spec(make_problem(c)) {}

    Grid grid() const { return Grid::build(spec, cfg.grid.n_t, cfg.grid.n_x, cfg.grid.x_lo, cfg.grid.x_hi); }

    void solve(double tol, std::unique_ptr<ValueSurface>& c, std::unique_ptr<ValueSurface>& f) {
        if (c) return;
        SolverOptions so;
        so.tol = tol;
        const Grid g = grid();
        c = std::make_unique<ValueSurface>(solve_full(spec, g, so, cfg.grid.sg_half_window));
        f = std::make_unique<ValueSurface>(solve_full(spec, g.refined(), so, 2 * cfg.grid.sg_half_window));
    }
    const ValueSurface& C() {
        solve(cfg.grid.psor_tol, coarse, fine);
        return *coarse;
    }
    const ValueSurface& F() {
        solve(cfg.grid.psor_tol, coarse, fine);
        return *fine;
    }
    void note(const std::string& s) const {
        if (!opt.quiet) std::cout << s << std::endl;
    }
};

void add(StageSummary& st, bool pass, const std::string& what) {
    st.lines.push_back(std::string(verdict(pass)) + "  " + what);
    st.pass = st.pass && pass;
}

void info(StageSummary& st, const std::string& what) { st.lines.push_back("INFO  " + what); }

StageSummary stage_solve(Context& ctx) {
    StageSummary st{"solve", true, {}, {}, 0.0};
    const ValueSurface& S = ctx.C();
    const Grid& g = S.grid;
    {
        Csv csv(ctx.out / "surface.csv", "t,x,v,u");
        for (std::size_t i = 0; i < g.rows(); ++i) {
            for (std::size_t j = 0; j < g.cols(); ++j) csv.row(num(g.t(i)), num(g.x(j)), num(S.v(i, j)), num(S.u(i, j)));
        }
    }
    st.artifacts.push_back("surface.csv");
    double worst = 0.0;
    for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < g.cols(); ++j) worst = std::min(worst, S.v(i, j) - S.g(i, j));
    }
    add(st, worst >= -1e-12 * S.scale, "v >= g on the mesh (min v - g = " + short_num(worst) + ")");
    if (ctx.spec.terminal_boundary) {
        const double gap = std::abs(S.b.back() - *ctx.spec.terminal_boundary);
        add(st, gap <= 2 * g.dx, "b(T) = " + short_num(S.b.back()) + " within 2dx of " +
                                     short_num(*ctx.spec.terminal_boundary));
    }
    return st;
}

StageSummary stage_boundary(Context& ctx) {
    StageSummary st{"boundary", true, {}, {}, 0.0};
    const ValueSurface& S = ctx.C();
    const ValueSurface& S2 = ctx.F();
    const Grid& g = S.grid;
    {
        Csv csv(ctx.out / "boundary.csv", "t,b,b_dot_fd");
        for (std::size_t i = 0; i < g.rows(); ++i) csv.row(num(g.t(i)), num(S.b[i]), num(S.b_dot_fd[i]));
    }
    st.artifacts.push_back("boundary.csv");
    const int dir = S.orientation == Orientation::StopBelow ? 1 : -1;
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < g.rows(); ++i) worst = std::min(worst, dir * (S.b[i + 1] - S.b[i]));
    add(st, worst >= -g.dx, "b monotone within dx (worst step " + short_num(worst) + ")");
    const double T2 = ctx.cfg.T2();
    const auto lip = lipschitz_ratio_check(S, S2, T2);
    add(st, lip.pass(), "Lipschitz ratio " + short_num(lip.value) + " -> " + short_num(lip.refined_value) +
                            " (growth " + short_num(lip.growth) + ")");
    const auto dv = dotv_bound_check(S, S2);
    add(st, dv.pass(), "u_dot bound constant " + short_num(dv.value) + " -> " + short_num(dv.refined_value) +
                           " (growth " + short_num(dv.growth) + ")");
    return st;
}

LambdaOptions lambda_options(const Context& ctx, std::size_t n_paths) {
    LambdaOptions o;
    o.n_paths = n_paths;
    o.dt_path = ctx.cfg.dt_path();
    o.seed = ctx.seed;
    o.n_q = ctx.cfg.mc.n_q;
    o.rho_floor_frac = ctx.cfg.mc.rho_floor;
    o.bridge_max = ctx.cfg.mc.bridge_max;
    o.workers = ctx.opt.workers;
    return o;
}

void require_stop_below(const Context& ctx, const char* stage) {
    if (ctx.spec.orientation != Orientation::StopBelow) {
        throw ConfigError(std::string(stage) + " supports stop-below (put-type) instances only", "problem.kind");
    }
}

StageSummary stage_lambda(Context& ctx) {
    require_stop_below(ctx, "lambda");
    StageSummary st{"lambda", true, {}, {}, 0.0};
    const ValueSurface& S = ctx.C();
    const ValueSurface& S2 = ctx.F();
    const LambdaModel M(ctx.spec, S), M2(ctx.spec, S2);
    const auto o = lambda_options(ctx, ctx.cfg.mc.n_paths);
    Csv csv(ctx.out / "lambda.csv",
            "t,V1plusV2,se_V1plusV2,intVs,se_intVs,Lambda,bdot_formula,bdot_fd,abs_diff,tolerance,verdict");
    Csv ex(ctx.out / "lambda_expansion.csv", "t,h_frac,h,w_dot,ratio,ratio_coarse");
    for (double t : ctx.cfg.eval.t_list) {
        const auto e = estimate_lambda(M, t, o);
        const double budget = std::abs(S.b_dot_at(t) - S2.b_dot_at(t));
        const auto row = judge_lambda(e, budget, ctx.cfg.eval.rel_tol, ctx.cfg.eval.se_mult);
        csv.row(num(t), num(e.V1plusV2), num(e.se_V12), num(e.intVs), num(e.se_intVs), num(e.Lambda),
                num(e.bdot_formula), num(e.bdot_fd), num(row.abs_diff), num(row.tolerance), verdict(row.pass));
        add(st, row.pass, "t=" + short_num(t) + " bdot formula " + short_num(e.bdot_formula) + " vs FD " +
                              short_num(e.bdot_fd) + " (|diff| " + short_num(row.abs_diff) + " <= " +
                              short_num(row.tolerance) + ", rel " + short_num(row.rel_err) + ")");
        const auto rep = expansion_convergence(M2, M, e, ctx.cfg.eval.h_list);
        for (std::size_t k = 0; k < rep.rows.size(); ++k) {
            const auto& r = rep.rows[k];
            ex.row(num(t), num(ctx.cfg.eval.h_list[k]), num(r.h), num(r.w_dot), num(r.ratio), num(r.ratio_coarse));
        }
        std::string ratios;
        for (const auto& r : rep.rows) ratios += " " + short_num(r.ratio);
        add(st, rep.trend_pass(), "t=" + short_num(t) + " expansion |r(h) - 1| decreasing, r =" + ratios);
        info(st, "t=" + short_num(t) + " expansion |r(h_min) - 1| = " + short_num(std::abs(rep.rows.back().ratio - 1)) +
                     " against tolerance " + short_num(rep.tolerance) +
                     (rep.within_tolerance ? " (within)" : " (outside)"));
        ctx.note("  lambda t=" + short_num(t) + " " + verdict(row.pass));
    }
    st.artifacts = {"lambda.csv", "lambda_expansion.csv"};
    return st;
}

StageSummary stage_vh(Context& ctx) {
    require_stop_below(ctx, "vh");
    StageSummary st{"vh", true, {}, {}, 0.0};
    const ValueSurface& S = ctx.C();
    const ValueSurface& S2 = ctx.F();
    const LambdaModel M(ctx.spec, S), M2(ctx.spec, S2);
    const auto o = lambda_options(ctx, ctx.cfg.mc.vh_paths);
    const double h = ctx.cfg.eval.vh_h * (M.y2() - M.y1());
    Csv csv(ctx.out / "vh.csv", "t,h,Vh,se,w_dot_solver,w_dot_fine,abs_diff,tolerance,p_B1,p_B2,verdict");
    for (double t : ctx.cfg.eval.t_list) {
        const auto e = estimate_Vh(M, t, h, o);
        const auto row = judge_vh(e, M2.w_dot(t, M2.curve().value(t) + h), ctx.cfg.eval.se_mult);
        csv.row(num(t), num(h), num(e.value), num(e.std_err), num(e.w_dot_solver), num(row.w_dot_fine),
                num(row.abs_diff), num(row.tolerance), num(e.p_B1), num(e.p_B2), verdict(row.pass));
        add(st, row.pass, "t=" + short_num(t) + " Vh " + short_num(e.value) + " vs solver " +
                              short_num(e.w_dot_solver) + " (|diff| " + short_num(row.abs_diff) + " <= " +
                              short_num(row.tolerance) + ")");
    }
    st.artifacts = {"vh.csv"};
    return st;
}

StageSummary stage_stefan(Context& ctx) {
    StageSummary st{"verify-stefan", true, {}, {}, 0.0};
    ctx.solve(ctx.cfg.grid.stefan_psor_tol, ctx.stefan_coarse, ctx.stefan_fine);
    const ValueSurface& S = *ctx.stefan_coarse;
    const ValueSurface& S2 = *ctx.stefan_fine;
    const StefanData d2 = stefan_data_for(ctx.spec, S2);
    StefanOptions so;
    so.T2_frac = ctx.cfg.T2() / ctx.spec.rect_T1;
    so.terminal_tolerance = ctx.cfg.eval.terminal_tol;
    const auto rep = verify_stefan(ctx.spec, S, S2, default_bumps(ctx.spec, d2), so);

    Csv csv(ctx.out / "stefan_report.csv", "condition,id,residual,budget,verdict");
    csv.row("pde", "order_max", num(rep.pde.order_max), num(1.0), verdict(rep.pde.pass));
    csv.row("pde", "order_l2", num(rep.pde.order_rms), num(1.0), "INFO");
    csv.row("pde", "max_coarse", num(rep.pde.coarse_max), "", "INFO");
    csv.row("pde", "max_fine", num(rep.pde.fine_max), "", "INFO");
    csv.row("boundary", "order_rms", num(rep.bc.order_rms), num(1.0), verdict(rep.bc.pass));
    for (const auto& r : rep.bc_rows) csv.row("boundary", "t=" + num(r.t), num(r.value), num(r.budget), "INFO");
    csv.row("velocity", "order_rms", num(rep.velocity.order_rms), num(1.0), verdict(rep.velocity.order_pass));
    csv.row("velocity", "within_budget_fraction", num(rep.velocity.pass_fraction), num(0.8),
            verdict(rep.velocity.pass_fraction >= 0.8));
    for (const auto& r : rep.velocity_rows) {
        csv.row("velocity", "t=" + num(r.t), num(r.value), num(r.budget), verdict(r.pass));
    }
    std::vector<std::size_t> finals;
    for (std::size_t k = 0; k < rep.terminal_tests.size(); ++k) {
        const auto& r = rep.terminal_tests[k];
        const bool last = k + 1 == rep.terminal_tests.size() || rep.terminal_tests[k + 1].xi_id != r.xi_id;
        const double tol = rep.terminal_tolerance * std::abs(r.rhs);
        csv.row("terminal", r.xi_id + "@t=" + num(r.t), num(r.lhs - r.rhs), num(tol),
                last ? verdict(r.gap() <= tol) : "INFO");
        csv.row("terminal_generator", r.xi_id + "@t=" + num(r.t), num(r.lhs - r.rhs_generator),
                num(rep.terminal_tolerance * std::abs(r.rhs_generator)), "INFO");
        if (last) finals.push_back(k);
    }
    double eta_min = kInf;
    for (std::size_t i = 0; i <= S2.grid.i_T1; ++i) {
        if (S2.grid.t(i) < ctx.spec.rect_T1) eta_min = std::min(eta_min, d2.eta[i]);
    }
    csv.row("eta", "min_on_[0,T1)", num(eta_min), num(0.0), verdict(rep.eta_positive));
    csv.row("nu", "max_abs", num(rep.nu_max_abs), "", "INFO");
    csv.row("vdot_x_continuity", "max_jump_over_budget", num(rep.vdot_x_jump_ratio), "", "INFO");

    add(st, rep.pde.pass, "PDE residual max order " + short_num(rep.pde.order_max) + " (max " +
                              short_num(rep.pde.coarse_max) + " -> " + short_num(rep.pde.fine_max) + ")");
    info(st, "PDE residual L2 order " + short_num(rep.pde.order_rms) + " (" + short_num(rep.pde.coarse_rms) +
                 " -> " + short_num(rep.pde.fine_rms) + ")");
    add(st, rep.bc.pass, "boundary condition rms order " + short_num(rep.bc.order_rms) + " (" +
                             short_num(rep.bc.coarse_rms) + " -> " + short_num(rep.bc.fine_rms) + ")");
    add(st, rep.velocity.pass, "velocity condition rms order " + short_num(rep.velocity.order_rms) + ", " +
                                   short_num(100 * rep.velocity.pass_fraction) + "% of t within budget");
    add(st, rep.eta_positive, "eta > 0 on [0, T1) (min " + short_num(eta_min) + ")");
    info(st, "max |nu| = " + short_num(rep.nu_max_abs));
    for (std::size_t k : finals) {
        const auto& r = rep.terminal_tests[k];
        add(st, r.gap() <= rep.terminal_tolerance * std::abs(r.rhs),
            "terminal " + r.xi_id + " at t=" + short_num(r.t) + ": lhs " + short_num(r.lhs) + " vs stated measure " +
                short_num(r.rhs));
        info(st, "terminal " + r.xi_id + ": -int xi d[(Lg)(T) - r g(T)] = " + short_num(r.rhs_generator) +
                     ", gap " + short_num(std::abs(r.lhs - r.rhs_generator)));
    }
    st.pass = st.pass && rep.pass();
    {
        std::ofstream txt(ctx.out / "stefan_report.txt");
        txt << "# " << kSchemaVersion << " stefan_report\n";
        txt << "instance " << ctx.spec.name << ", grids " << S.grid.n_t << "x" << S.grid.n_x << " and "
            << S2.grid.n_t << "x" << S2.grid.n_x << ", T2 = " << ctx.cfg.T2() << "\n";
        for (const auto& l : st.lines) txt << l << "\n";
        txt << "overall " << verdict(st.pass) << "\n";
    }
    st.artifacts = {"stefan_report.csv", "stefan_report.txt"};
    return st;
}

StageSummary stage_bessel(Context& ctx) {
    StageSummary st{"bessel-check", true, {}, {}, 0.0};
    BesselCheckOptions o;
    o.seed = ctx.seed;
    o.n_marginal = ctx.cfg.bessel.n_marginal;
    o.n_conditional = ctx.cfg.bessel.n_conditional;
    o.n_moments = ctx.cfg.bessel.n_moments;
    o.n_lemma = ctx.cfg.bessel.n_lemma;
    o.steps_per_unit = ctx.cfg.bessel.steps_per_unit;
    o.bridge_max = ctx.cfg.mc.bridge_max;
    o.workers = ctx.opt.workers;
    const auto lines = run_bessel_checks(o);
    std::ofstream txt(ctx.out / "bessel_report.txt");
    txt << "# " << kSchemaVersion << " bessel_report\n";
    txt << "# test | statistic | threshold | verdict | detail\n";
    for (const auto& l : lines) {
        const char* v = l.asserted ? verdict(l.pass) : "INFO";
        txt << l.name << " | " << num(l.statistic) << " | " << num(l.threshold) << " | " << v << " | " << l.detail
            << "\n";
        if (l.asserted) {
            add(st, l.pass, l.name + " " + short_num(l.statistic) + " vs " + short_num(l.threshold));
        } else {
            info(st, l.name + " " + short_num(l.statistic));
        }
    }
    st.artifacts = {"bessel_report.txt"};
    return st;
}

using StageFn = StageSummary (*)(Context&);

std::vector<std::pair<std::string, StageFn>> stages_for(const std::string& sub) {
    const std::vector<std::pair<std::string, StageFn>> all = {
        {"solve", stage_solve},   {"boundary", stage_boundary},     {"lambda", stage_lambda},
        {"vh", stage_vh},         {"verify-stefan", stage_stefan}, {"bessel-check", stage_bessel}};
    if (sub == "all") return all;
    for (const auto& s : all) {
        if (s.first == sub) return {s};
    }
    throw ConfigError("unknown subcommand '" + sub + "'", "subcommand");
}

void write_run_report(const std::filesystem::path& dir, const RunReport& rep) {
    std::ofstream txt(dir / "run_report.txt");
    txt << "# " << kSchemaVersion << " run_report\n";
    txt << "version " << kVersion << "\nsubcommand " << rep.subcommand << "\nseed " << rep.seed << "\nworkers "
        << rep.workers << "\n";
    for (const auto& s : rep.stages) {
        txt << "\n[" << s.name << "] " << verdict(s.pass) << " (" << short_num(s.seconds) << " s)\n";
        for (const auto& l : s.lines) txt << "  " << l << "\n";
        for (const auto& a : s.artifacts) txt << "  artifact " << a << "\n";
    }
    txt << "\nwall_clock_s " << short_num(rep.seconds) << "\noverall " << verdict(rep.pass()) << "\n";
}

}  // namespace

bool RunReport::pass() const {
    for (const auto& s : stages) {
        if (!s.pass) return false;
    }
    return true;
}

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> s = {"solve", "boundary", "lambda", "vh", "verify-stefan", "bessel-check",
                                               "all"};
    return s;
}

RunReport run(const std::string& subcommand, const RunConfig& config, const RunOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto stages = stages_for(subcommand);
    const std::filesystem::path dir = options.out_dir.empty() ? config.output_dir : options.out_dir;
    std::filesystem::create_directories(dir);
    RunReport rep;
    rep.subcommand = subcommand;
    rep.seed = options.seed ? *options.seed : config.mc.seed;
    rep.workers = options.workers;
    Context ctx(config, options, dir, rep.seed);
    for (const auto& [name, fn] : stages) {
        ctx.note("[" + name + "]");
        const auto s0 = std::chrono::steady_clock::now();
        StageSummary s;
        try {
            s = fn(ctx);
        } catch (const std::exception& e) {
            // Partial report: completed stages plus the one that threw.
            s.name = name;
            s.pass = false;
            s.lines.push_back(std::string("ERROR ") + e.what());
            rep.stages.push_back(std::move(s));
            rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            write_run_report(dir, rep);
            throw;
        }
        s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - s0).count();
        for (const auto& l : s.lines) ctx.note("  " + l);
        rep.stages.push_back(std::move(s));
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_run_report(dir, rep);
    return rep;
}

int run_cli(const std::string& subcommand, const std::string& config_path, const RunOptions& options) {
    try {
        const RunConfig cfg = parse_config(config_path);
        const RunReport rep = run(subcommand, cfg, options);
        if (!options.quiet) std::cout << "overall " << verdict(rep.pass()) << std::endl;
        return rep.pass() ? kExitOk : kExitVerdictFail;
    } catch (const ConfigError& e) {
        std::cerr << "config error";
        if (!e.key().empty()) std::cerr << " [" << e.key() << "]";
        if (e.line() > 0) std::cerr << " at line " << e.line();
        std::cerr << ": " << e.what() << std::endl;
        return kExitConfig;
    } catch (const NumericalFailure& e) {
        std::cerr << "numerical failure in stage " << e.stage() << ": " << e.what() << std::endl;
        return kExitNumerical;
    } catch (const DomainError& e) {
        std::cerr << "numerical failure (domain): " << e.what() << std::endl;
        return kExitNumerical;
    }
}

}  // namespace fbl
