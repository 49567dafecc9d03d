#include "tf2/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "CLI11.hpp"

namespace tf2 {

namespace {

std::string num(double v) {
    char b[40];
    std::snprintf(b, sizeof b, "%.17g", v);
    return b;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

struct KeyValue {
    std::string key, value;
    int line = 0;
};

std::vector<KeyValue> tokenize_config(const std::string& text) {
    std::vector<KeyValue> out;
    std::istringstream in(text);
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(ln) + ": expected key = value, got '" + line + "'");
        KeyValue kv;
        kv.key = trim(line.substr(0, eq));
        kv.value = trim(line.substr(eq + 1));
        kv.line = ln;
        if (kv.key.empty())
            throw ConfigError("line " + std::to_string(ln) + ": empty key");
        out.push_back(std::move(kv));
    }
    return out;
}

double parse_double(const std::string& v, int line, const std::string& key) {
    double out = 0.0;
    const char* b = v.data();
    const char* e = b + v.size();
    auto [p, ec] = std::from_chars(b, e, out);
    if (ec != std::errc() || p != e)
        throw ConfigError("line " + std::to_string(line) + ": malformed number for '" + key
                          + "': '" + v + "'");
    return out;
}

int parse_int(const std::string& v, int line, const std::string& key) {
    int out = 0;
    const char* b = v.data();
    const char* e = b + v.size();
    auto [p, ec] = std::from_chars(b, e, out);
    if (ec != std::errc() || p != e)
        throw ConfigError("line " + std::to_string(line) + ": malformed integer for '" + key
                          + "': '" + v + "'");
    return out;
}

bool parse_bool(const std::string& v, int line, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("line " + std::to_string(line) + ": malformed boolean for '" + key
                      + "': '" + v + "'");
}

std::vector<double> parse_time_list(const std::string& v, int line, const std::string& key) {
    std::vector<double> out;
    if (trim(v).empty()) return out;
    size_t pos = 0;
    while (pos <= v.size()) {
        const size_t comma = v.find(',', pos);
        const std::string item = trim(v.substr(pos, comma == std::string::npos ? comma : comma - pos));
        out.push_back(parse_double(item, line, key));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

std::string join_times(const std::vector<double>& t) {
    std::string s;
    for (size_t i = 0; i < t.size(); ++i) {
        if (i) s += ',';
        s += num(t[i]);
    }
    return s;
}

const char* status_text(StepStatus st) {
    switch (st) {
    case StepStatus::Ok: return "ok";
    case StepStatus::NonlinearFailure: return "nonlinear iteration did not converge";
    case StepStatus::LinearFailure: return "linear solver failed";
    case StepStatus::ConstraintFailure: return "constraint solve failed";
    case StepStatus::EvalFailure: return "non-finite field evaluation";
    }
    return "unknown";
}

} // namespace

void validate_config(const RunConfig& c) {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("invalid config: ") + what);
    };
    need(c.nx >= 1 && c.ny >= 1, "mesh must be at least 1x1");
    need(c.width > 0.0 && c.height > 0.0, "domain size must be positive");
    need(c.column_width > 0.0 && c.column_width <= c.width, "column width must fit the domain");
    need(c.column_height > 0.0 && c.column_height <= c.height, "column height must fit the domain");
    need(c.rho0 > 0.0 && c.rho1 > 0.0, "densities must be positive");
    need(c.mu0 >= 0.0 && c.mu1 >= 0.0, "viscosities must be nonnegative");
    need(c.eps_smooth >= 0.0, "eps_smooth must be nonnegative");
    need(c.cfl_target > 0.0, "cfl_target must be positive");
    need(c.kp > 0.0 && c.kp <= 1.0, "kp must be in (0, 1]");
    need(c.dt_min > 0.0 && c.dt_min <= c.dt_init && c.dt_init <= c.dt_max,
         "need 0 < dt_min <= dt_init <= dt_max");
    need(c.dt_growth > 1.0, "dt_growth must exceed 1");
    need(c.end_time >= 0.0, "end_time must be nonnegative");
    need(c.eps1 > 0.0 && c.eps1_abs > 0.0 && c.eps2 > 0.0, "tolerances must be positive");
    need(c.max_global_iters >= 1, "max_global_iters must be at least 1");
    need(c.quad_order >= 1 && c.quad_order <= 5, "quad_order must be in 1..5");
    need(c.krylov_rel_tol > 0.0 && c.krylov_abs_tol > 0.0, "krylov tolerances must be positive");
    need(c.krylov_restart >= 1 && c.krylov_max_iters >= 1, "krylov limits must be at least 1");
}

FormKind parse_formulation(const std::string& name) {
    if (name == "conservative") return FormKind::Conservative;
    if (name == "energy-corrected") return FormKind::EnergyCorrected;
    if (name == "convective") return FormKind::Convective;
    throw ConfigError("unknown formulation '" + name
                      + "' (expected conservative | energy-corrected | convective)");
}

std::string formulation_name(FormKind kind) {
    switch (kind) {
    case FormKind::Conservative: return "conservative";
    case FormKind::EnergyCorrected: return "energy-corrected";
    case FormKind::Convective: return "convective";
    }
    return "?";
}

Precond parse_preconditioner(const std::string& name) {
    if (name == "jacobi") return Precond::Jacobi;
    if (name == "block-ilu0") return Precond::BlockILU0;
    throw ConfigError("unknown preconditioner '" + name + "' (expected jacobi | block-ilu0)");
}

std::string preconditioner_name(Precond p) {
    return p == Precond::Jacobi ? "jacobi" : "block-ilu0";
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig c;
    std::set<std::string> seen;
    std::vector<std::string> unknown;
    for (const KeyValue& kv : tokenize_config(text)) {
        const std::string& k = kv.key;
        seen.insert(k);
        if (k == "nx") c.nx = parse_int(kv.value, kv.line, k);
        else if (k == "ny") c.ny = parse_int(kv.value, kv.line, k);
        else if (k == "width") c.width = parse_double(kv.value, kv.line, k);
        else if (k == "height") c.height = parse_double(kv.value, kv.line, k);
        else if (k == "column_width") c.column_width = parse_double(kv.value, kv.line, k);
        else if (k == "column_height") c.column_height = parse_double(kv.value, kv.line, k);
        else if (k == "rho0") c.rho0 = parse_double(kv.value, kv.line, k);
        else if (k == "rho1") c.rho1 = parse_double(kv.value, kv.line, k);
        else if (k == "mu0") c.mu0 = parse_double(kv.value, kv.line, k);
        else if (k == "mu1") c.mu1 = parse_double(kv.value, kv.line, k);
        else if (k == "gx") c.gx = parse_double(kv.value, kv.line, k);
        else if (k == "gy") c.gy = parse_double(kv.value, kv.line, k);
        else if (k == "eps_smooth") c.eps_smooth = parse_double(kv.value, kv.line, k);
        else if (k == "formulation") c.formulation = parse_formulation(kv.value);
        else if (k == "cfl_target") c.cfl_target = parse_double(kv.value, kv.line, k);
        else if (k == "kp") c.kp = parse_double(kv.value, kv.line, k);
        else if (k == "dt_init") c.dt_init = parse_double(kv.value, kv.line, k);
        else if (k == "dt_min") c.dt_min = parse_double(kv.value, kv.line, k);
        else if (k == "dt_max") c.dt_max = parse_double(kv.value, kv.line, k);
        else if (k == "dt_growth") c.dt_growth = parse_double(kv.value, kv.line, k);
        else if (k == "end_time") c.end_time = parse_double(kv.value, kv.line, k);
        else if (k == "out_dir") c.out_dir = kv.value;
        else if (k == "snapshot_times") c.snapshot_times = parse_time_list(kv.value, kv.line, k);
        else if (k == "eps1") c.eps1 = parse_double(kv.value, kv.line, k);
        else if (k == "eps1_abs") c.eps1_abs = parse_double(kv.value, kv.line, k);
        else if (k == "eps2") c.eps2 = parse_double(kv.value, kv.line, k);
        else if (k == "max_global_iters") c.max_global_iters = parse_int(kv.value, kv.line, k);
        else if (k == "quad_order") c.quad_order = parse_int(kv.value, kv.line, k);
        else if (k == "krylov_rel_tol") c.krylov_rel_tol = parse_double(kv.value, kv.line, k);
        else if (k == "krylov_abs_tol") c.krylov_abs_tol = parse_double(kv.value, kv.line, k);
        else if (k == "krylov_restart") c.krylov_restart = parse_int(kv.value, kv.line, k);
        else if (k == "krylov_max_iters") c.krylov_max_iters = parse_int(kv.value, kv.line, k);
        else if (k == "preconditioner") c.preconditioner = parse_preconditioner(kv.value);
        else if (k == "parallel") c.parallel = parse_bool(kv.value, kv.line, k);
        else if (k == "verbose") c.verbose = parse_int(kv.value, kv.line, k);
        else unknown.push_back(k);
    }
    if (!unknown.empty()) {
        std::string msg = "unknown config keys:";
        for (const auto& k : unknown) msg += " " + k;
        throw ConfigError(msg);
    }
    static const char* required[] = {"nx", "ny", "width", "height", "rho0",
                                     "rho1", "mu0", "mu1", "formulation", "end_time"};
    std::string missing;
    for (const char* k : required)
        if (!seen.count(k)) missing += std::string(" ") + k;
    if (!missing.empty()) throw ConfigError("missing required config keys:" + missing);
    validate_config(c);
    return c;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

std::string format_config(const RunConfig& c) {
    std::ostringstream o;
    o << "# two-fluid flow configuration\n";
    o << "nx = " << c.nx << "\n";
    o << "ny = " << c.ny << "\n";
    o << "width = " << num(c.width) << "\n";
    o << "height = " << num(c.height) << "\n";
    o << "column_width = " << num(c.column_width) << "\n";
    o << "column_height = " << num(c.column_height) << "\n";
    o << "rho0 = " << num(c.rho0) << "\n";
    o << "rho1 = " << num(c.rho1) << "\n";
    o << "mu0 = " << num(c.mu0) << "\n";
    o << "mu1 = " << num(c.mu1) << "\n";
    o << "gx = " << num(c.gx) << "\n";
    o << "gy = " << num(c.gy) << "\n";
    o << "eps_smooth = " << num(c.eps_smooth) << "\n";
    o << "formulation = " << formulation_name(c.formulation) << "\n";
    o << "cfl_target = " << num(c.cfl_target) << "\n";
    o << "kp = " << num(c.kp) << "\n";
    o << "dt_init = " << num(c.dt_init) << "\n";
    o << "dt_min = " << num(c.dt_min) << "\n";
    o << "dt_max = " << num(c.dt_max) << "\n";
    o << "dt_growth = " << num(c.dt_growth) << "\n";
    o << "end_time = " << num(c.end_time) << "\n";
    o << "out_dir = " << c.out_dir << "\n";
    o << "snapshot_times = " << join_times(c.snapshot_times) << "\n";
    o << "eps1 = " << num(c.eps1) << "\n";
    o << "eps1_abs = " << num(c.eps1_abs) << "\n";
    o << "eps2 = " << num(c.eps2) << "\n";
    o << "max_global_iters = " << c.max_global_iters << "\n";
    o << "quad_order = " << c.quad_order << "\n";
    o << "krylov_rel_tol = " << num(c.krylov_rel_tol) << "\n";
    o << "krylov_abs_tol = " << num(c.krylov_abs_tol) << "\n";
    o << "krylov_restart = " << c.krylov_restart << "\n";
    o << "krylov_max_iters = " << c.krylov_max_iters << "\n";
    o << "preconditioner = " << preconditioner_name(c.preconditioner) << "\n";
    o << "parallel = " << (c.parallel ? "true" : "false") << "\n";
    o << "verbose = " << c.verbose << "\n";
    return o.str();
}

void write_config(const RunConfig& c, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw ConfigError("cannot write config file: " + path);
    f << format_config(c);
}

FluidParams fluid_params(const RunConfig& c) {
    FluidParams p;
    p.rho0 = c.rho0;
    p.rho1 = c.rho1;
    p.mu0 = c.mu0;
    p.mu1 = c.mu1;
    p.gx = c.gx;
    p.gy = c.gy;
    p.eps_smooth = c.eps_smooth;
    return p;
}

StepControl step_control(const RunConfig& c) {
    StepControl s;
    s.eps1 = c.eps1;
    s.eps1_abs = c.eps1_abs;
    s.verbose = c.verbose;
    s.max_global_iters = c.max_global_iters;
    s.quad_order = c.quad_order;
    s.parallel = c.parallel;
    s.krylov.rel_tol = c.krylov_rel_tol;
    s.krylov.abs_tol = c.krylov_abs_tol;
    s.krylov.restart = c.krylov_restart;
    s.krylov.max_iters = c.krylov_max_iters;
    s.krylov.preconditioner = c.preconditioner;
    s.lambda.eps2 = c.eps2;
    return s;
}

std::string trace_header() {
    return "t,dt,e_kin_J,e_pot_J,dissipation_W,mass_kg,"
           "dkin_dt_actual_W,dkin_dt_weak_W,dpot_dt_actual_W,dpot_dt_weak_W,"
           "div_l1,div_l2,div_linf,h1,h2,h3,lambda1,lambda2,lambda3,"
           "global_iters,krylov_iters";
}

std::string trace_line(const TraceRow& r) {
    std::string s;
    s += num(r.t) + ',' + num(r.dt) + ',';
    s += num(r.e_kin) + ',' + num(r.e_pot) + ',' + num(r.dissipation) + ',' + num(r.mass) + ',';
    s += num(r.dkin_actual) + ',' + num(r.dkin_weak) + ',';
    s += num(r.dpot_actual) + ',' + num(r.dpot_weak) + ',';
    s += num(r.div_l1) + ',' + num(r.div_l2) + ',' + num(r.div_linf) + ',';
    s += num(r.h[0]) + ',' + num(r.h[1]) + ',' + num(r.h[2]) + ',';
    s += num(r.lambda[0]) + ',' + num(r.lambda[1]) + ',' + num(r.lambda[2]) + ',';
    s += std::to_string(r.global_iters) + ',' + std::to_string(r.krylov_iters);
    return s;
}

void write_trace_csv(const std::vector<TraceRow>& rows, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw ConfigError("cannot write trace file: " + path);
    f << trace_header() << '\n';
    for (const TraceRow& r : rows) f << trace_line(r) << '\n';
}

void write_snapshot(const MixedSpaces& sp, const State& state, const FluidParams& par,
                    const std::string& path, int samples_per_elem) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw ConfigError("cannot write snapshot file: " + path);
    const int n = samples_per_elem;
    const int nsx = n * sp.nx, nsy = n * sp.ny;
    const double dx = sp.hx / n, dy = sp.hy / n;
    const double ox = sp.x0 + 0.5 * dx, oy = sp.y0 + 0.5 * dy;
    f << nsx << ' ' << nsy << ' ' << num(ox) << ' ' << num(oy) << ' ' << num(dx) << ' '
      << num(dy) << ' ' << num(state.time) << '\n';
    const std::vector<double> uvx(state.u.begin(), state.u.begin() + sp.dim_vx());
    const std::vector<double> uvy(state.u.begin() + sp.dim_vx(), state.u.end());
    char buf[200];
    for (int j = 0; j < nsy; ++j)
        for (int i = 0; i < nsx; ++i) {
            const double x = ox + i * dx, y = oy + j * dy;
            double ux, uy, p, phi, alpha, g[2];
            sp.vx.eval(uvx, x, y, &ux, g);
            sp.vy.eval(uvy, x, y, &uy, g);
            sp.press.eval(state.p, x, y, &p, g);
            sp.levelset.eval(state.phi, x, y, &phi, g);
            sp.levelset.eval(state.alpha, x, y, &alpha, g);
            const PointProps pr = eval_props(phi, std::max(alpha, kAlphaFloor), par);
            std::snprintf(buf, sizeof buf, "%.10g %.10g %.10g %.10g %.10g %.10g %.10g\n",
                          x, y, ux, uy, p, phi, pr.rho);
            f << buf;
        }
}

RunResult run_simulation(const RunConfig& cfg) {
    validate_config(cfg);
    RunResult res;

    const MixedSpaces sp = build_mixed_spaces(cfg.nx, cfg.ny, 0.0, 0.0, cfg.width, cfg.height);
    const FluidParams par = fluid_params(cfg);
    const StepControl ctl = step_control(cfg);
    Stepper stepper(sp, cfg.formulation, par, ctl);
    const QuadCache& qc = stepper.quad();

    State state = make_state(sp);
    state.phi = dambreak_levelset(sp, cfg.column_width, cfg.column_height);
    state.alpha = solve_alpha_projection(sp, state.phi, cfg.eps_smooth, cfg.quad_order);

    EnergyReport now = compute_energies(sp, qc, state, par);
    res.initial = now;
    res.e0 = now.kin + now.pot;

    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + cfg.out_dir + "': " + ec.message());
    std::ofstream trace(cfg.out_dir + "/trace.csv", std::ios::trunc);
    if (!trace) throw ConfigError("cannot write trace file in '" + cfg.out_dir + "'");
    trace << trace_header() << '\n';
    trace.flush();

    std::vector<double> snaps = cfg.snapshot_times;
    std::sort(snaps.begin(), snaps.end());
    snaps.erase(std::unique(snaps.begin(), snaps.end()), snaps.end());
    size_t next_snap = 0;
    auto write_due_snapshots = [&](const State& s) {
        while (next_snap < snaps.size() && snaps[next_snap] <= s.time + 1e-12) {
            char name[48];
            std::snprintf(name, sizeof name, "/snapshot_%02zu.txt", next_snap);
            write_snapshot(sp, s, par, cfg.out_dir + name);
            ++next_snap;
        }
    };
    write_due_snapshots(state);

    State next = make_state(sp);
    StepStats stats;
    std::vector<double> umid(sp.dim_u());
    double dt_next = cfg.dt_init;
    while (state.time < cfg.end_time - 1e-12) {
        const double dt_try = std::min(dt_next, cfg.end_time - state.time);
        double dt_used = 0.0;
        StepStatus st;
        try {
            st = stepper.advance(state, dt_try, std::min(cfg.dt_min, dt_try), next, stats, dt_used);
        } catch (const std::exception& e) {
            res.exit_code = 3;
            res.last_status = StepStatus::NonlinearFailure;
            res.message = e.what();
            break;
        }
        if (st != StepStatus::Ok) {
            res.exit_code = st == StepStatus::LinearFailure ? 4 : 3;
            res.last_status = st;
            res.message = status_text(st);
            break;
        }

        const EnergyReport after = compute_energies(sp, qc, next, par);
        TraceRow row;
        row.t = next.time;
        row.dt = dt_used;
        row.e_kin = after.kin;
        row.e_pot = after.pot;
        row.dissipation = compute_dissipation(sp, qc, state, next, par);
        row.mass = after.mass;
        const RatePair actual = actual_rates(now, after, dt_used);
        const RatePair weak = weak_rates(sp, qc, state, next, dt_used, par);
        row.dkin_actual = actual.kin;
        row.dkin_weak = weak.kin;
        row.dpot_actual = actual.pot;
        row.dpot_weak = weak.pot;
        for (int i = 0; i < sp.dim_u(); ++i) umid[i] = 0.5 * (state.u[i] + next.u[i]);
        const DivNorms dn = divergence_norms(sp, qc, umid);
        row.div_l1 = dn.l1;
        row.div_l2 = dn.l2;
        row.div_linf = dn.linf;
        row.h = stats.h;
        row.lambda = stats.lambda;
        row.global_iters = stats.nonlinear_iters;
        row.krylov_iters = stats.krylov_iters;
        res.trace.push_back(row);
        trace << trace_line(row) << '\n';
        trace.flush();
        if (cfg.verbose >= 1)
            std::fprintf(stderr,
                         "step %zu t %.6f dt %.3e it %d |R| %.2e div %.2e h %.1e %.1e %.1e\n",
                         res.trace.size(), next.time, dt_used, stats.nonlinear_iters,
                         stats.residual, dn.linf, stats.h[0], stats.h[1], stats.h[2]);

        std::swap(state, next);
        now = after;
        write_due_snapshots(state);
        const double cfl = stepper.compute_cfl(state.u, dt_used);
        dt_next = Stepper::controller_dt(dt_used, cfl, cfg.cfl_target, cfg.kp, cfg.dt_min,
                                         cfg.dt_max, cfg.dt_growth);
    }
    res.final_state = std::move(state);
    return res;
}

int cli_main(int argc, char** argv) {
    CLI::App app{"two-fluid incompressible flow on divergence-conforming splines"};
    std::string config_path, form, mesh, out;
    double end_time = 0.0;
    auto* opt_config = app.add_option("--config", config_path, "config file (key = value lines)");
    auto* opt_form = app.add_option("--formulation", form,
                                    "conservative | energy-corrected | convective");
    auto* opt_mesh = app.add_option("--mesh", mesh, "mesh override, e.g. 80x40");
    auto* opt_end = app.add_option("--end-time", end_time, "end time [s]");
    auto* opt_out = app.add_option("--out", out, "output directory");
    int verbose = 0;
    app.add_flag("-v,--verbose", verbose, "per-step (-v) or per-iteration (-vv) solver output");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    RunConfig cfg;
    try {
        if (opt_config->count()) cfg = parse_config(config_path);
        if (opt_form->count()) cfg.formulation = parse_formulation(form);
        if (opt_mesh->count()) {
            int mx = 0, my = 0;
            char c = 0;
            if (std::sscanf(mesh.c_str(), "%dx%d%c", &mx, &my, &c) != 2 || mx < 1 || my < 1)
                throw ConfigError("malformed --mesh value '" + mesh + "' (expected NXxNY)");
            cfg.nx = mx;
            cfg.ny = my;
        }
        if (opt_end->count()) cfg.end_time = end_time;
        if (opt_out->count()) cfg.out_dir = out;
        if (verbose > 0) cfg.verbose = verbose;
        validate_config(cfg);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }

    RunResult r;
    try {
        r = run_simulation(cfg);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "run failed: %s\n", e.what());
        return 3;
    }

    const double ef = r.trace.empty() ? r.e0 : r.trace.back().e_kin + r.trace.back().e_pot;
    std::printf("formulation %s, mesh %dx%d, %zu steps to t = %.6g s\n",
                formulation_name(cfg.formulation).c_str(), cfg.nx, cfg.ny, r.trace.size(),
                r.final_state.time);
    std::printf("initial energy %.10g, final %.10g, outputs in %s\n", r.e0, ef,
                cfg.out_dir.c_str());
    if (r.exit_code != 0)
        std::fprintf(stderr, "run aborted at t = %.6g s: %s\n", r.final_state.time,
                     r.message.c_str());
    return r.exit_code;
}

} // namespace tf2
