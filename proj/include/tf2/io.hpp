#pragma once

#include "tf2/diagnostics.hpp"
#include "tf2/stepper.hpp"

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace tf2 {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// everything needed to reproduce a run; defaults are the shipped dambreak case
struct RunConfig {
    int nx = 40, ny = 20;
    double width = 0.584, height = 0.3504;        // m
    double column_width = 0.146, column_height = 0.292;
    double rho0 = 1.0, rho1 = 1000.0;             // kg/m^3, fluid 0 = phi < 0
    double mu0 = 2.0, mu1 = 2.0;                  // kg/(m s)
    double gx = 0.0, gy = -9.81;                  // m/s^2
    double eps_smooth = 1.0;                      // smoothing weight of the alpha projection
    FormKind formulation = FormKind::EnergyCorrected;
    double cfl_target = 0.75, kp = 0.75;
    double dt_init = 2e-6, dt_min = 1e-7, dt_max = 0.05;
    double dt_growth = 2.0;                       // cap on step-to-step dt increase
    double end_time = 0.8;
    std::string out_dir = "out";
    std::vector<double> snapshot_times = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    double eps1 = 1e-12;                          // nonlinear tolerance (relative)
    double eps1_abs = 1e-8;                       // nonlinear tolerance (absolute floor)
    double eps2 = 1e-12;                          // constraint tolerance (absolute)
    int max_global_iters = 30;
    int quad_order = 3;
    double krylov_rel_tol = 1e-9, krylov_abs_tol = 1e-14;
    int krylov_restart = 60, krylov_max_iters = 2000;
    Precond preconditioner = Precond::BlockILU0;
    bool parallel = true;
    int verbose = 0;                              // stderr solver chatter (CLI flag)

    bool operator==(const RunConfig&) const = default;
};

// throws ConfigError on violated invariants (signs, column inside domain, ...)
void validate_config(const RunConfig& cfg);

FormKind parse_formulation(const std::string& name);   // throws ConfigError
std::string formulation_name(FormKind kind);
Precond parse_preconditioner(const std::string& name); // throws ConfigError
std::string preconditioner_name(Precond p);

// flat key = value text, '#' starts a comment; unknown/missing/malformed keys throw
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::string& path);
std::string format_config(const RunConfig& cfg);       // parse(format(c)) == c
void write_config(const RunConfig& cfg, const std::string& path);

FluidParams fluid_params(const RunConfig& cfg);
StepControl step_control(const RunConfig& cfg);

// one accepted step of the diagnostics trace; energies per unit depth
struct TraceRow {
    double t = 0.0, dt = 0.0;
    double e_kin = 0.0, e_pot = 0.0;
    double dissipation = 0.0, mass = 0.0;
    double dkin_actual = 0.0, dkin_weak = 0.0;
    double dpot_actual = 0.0, dpot_weak = 0.0;
    double div_l1 = 0.0, div_l2 = 0.0, div_linf = 0.0;
    std::array<double, 3> h = {0.0, 0.0, 0.0};
    std::array<double, 3> lambda = {0.0, 0.0, 0.0};
    int global_iters = 0, krylov_iters = 0;
};

std::string trace_header();
std::string trace_line(const TraceRow& row);
void write_trace_csv(const std::vector<TraceRow>& rows, const std::string& path);

// plain-text structured grid: one header line (nx ny x0 y0 dx dy time) for a
// uniform cell-centered sample lattice (n per element per direction), then one
// line (x y u_x u_y p phi rho) per point, x fastest
void write_snapshot(const MixedSpaces& sp, const State& state, const FluidParams& par,
                    const std::string& path, int samples_per_elem = 4);

struct RunResult {
    int exit_code = 0;                 // 0 ok, 2 config, 3 nonlinear, 4 linear solver
    StepStatus last_status = StepStatus::Ok;
    std::string message;
    EnergyReport initial;              // energies/mass of the initial state
    double e0 = 0.0;                   // initial total energy
    std::vector<TraceRow> trace;       // one row per accepted step
    State final_state;                 // last accepted state
};

// CFL-controlled time loop writing trace.csv and snapshots into cfg.out_dir
RunResult run_simulation(const RunConfig& cfg);

int cli_main(int argc, char** argv);

} // namespace tf2
