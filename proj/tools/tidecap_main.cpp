// tidecap: tidal-capture encounter simulator.
//
// Subcommands: kepler, simulate, sweep, verify-operators, report.
#include "tidecap/config.hpp"
#include "tidecap/io_util.hpp"
#include "tidecap/kepler.hpp"
#include "tidecap/sphere.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace tidecap;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

int default_jobs() {
    if (const char* env = std::getenv("TIDECAP_JOBS")) {
        int j = std::atoi(env);
        if (j > 0) return j;
    }
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tidal-capture encounter simulator"};
    app.require_subcommand(1);

    // kepler
    double kp = 0.0, kb = 1.0, kgm = 1.0;
    std::vector<double> table_args;
    auto* kepler_cmd = app.add_subcommand("kepler", "point-mass scattering summary");
    kepler_cmd->add_option("--p", kp, "dimensionless parameter GM/(b v0^2)");
    kepler_cmd->add_option("--b", kb, "impact parameter");
    kepler_cmd->add_option("--GM", kgm, "gravitational parameter");
    kepler_cmd->add_option("--table", table_args, "emit CSV over a log grid: pmin pmax n")
        ->expected(3);

    // simulate
    std::string sim_config, sim_out, sim_closure, sim_stop;
    double sim_rtol = 0.0;
    bool no_modes = false, no_timestamp = false;
    auto* sim_cmd = app.add_subcommand("simulate", "integrate an encounter, write the run CSV");
    sim_cmd->add_option("--config", sim_config, "config file")->required();
    sim_cmd->add_option("--out", sim_out, "output CSV path")->required();
    sim_cmd->add_option("--closure", sim_closure, "point|ball|quadrupole (overrides config)");
    sim_cmd->add_option("--rtol", sim_rtol, "integrator tolerance (overrides config)");
    sim_cmd->add_option("--stop", sim_stop, "closest|r1=<val>|t=<val> (overrides config)");
    sim_cmd->add_flag("--no-modes", no_modes, "orbit only, skip the mode columns");
    sim_cmd->add_flag("--no-timestamp", no_timestamp, "omit the sidecar timestamp");

    // sweep
    std::string sweep_config, sweep_grid, sweep_out;
    int sweep_jobs = default_jobs();
    auto* sweep_cmd = app.add_subcommand("sweep", "parameter sweep, one summary row per run");
    sweep_cmd->add_option("--config", sweep_config, "base config file (G=M=R=1 units)");
    sweep_cmd->add_option("--grid", sweep_grid, "grid file: beta kappa alpha_exp rows")
        ->required();
    sweep_cmd->add_option("--out", sweep_out, "output CSV path")->required();
    sweep_cmd->add_option("--jobs", sweep_jobs, "concurrent runs (default $TIDECAP_JOBS or 1)");

    // verify-operators
    int vo_lmax = 8, vo_degree = 32;
    auto* vo_cmd = app.add_subcommand("verify-operators",
                                      "sphere-operator multiplier and oracle checks");
    vo_cmd->add_option("--lmax", vo_lmax, "max harmonic degree");
    vo_cmd->add_option("--grid-degree", vo_degree, "quadrature degree");

    // report
    std::string rep_run, rep_out, rep_config;
    auto* rep_cmd = app.add_subcommand("report", "energy decomposition from a run CSV");
    rep_cmd->add_option("--run", rep_run, "run CSV produced by simulate")->required();
    rep_cmd->add_option("--out", rep_out, "output JSON path")->required();
    rep_cmd->add_option("--config", rep_config, "config file (else the CSV sidecar is used)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (kepler_cmd->parsed()) {
            if (!table_args.empty()) {
                double pmin = table_args[0], pmax = table_args[1];
                int n = int(table_args[2]);
                std::cout << "p,lambda_plus,p_lambda_plus,alpha,pi_minus_alpha,"
                             "two_vplus2_rplus_over_GM\n";
                for (int i = 0; i < n; ++i) {
                    double f = n == 1 ? 0.0 : double(i) / (n - 1);
                    double p = pmin * std::pow(pmax / pmin, f);
                    KeplerSummary s = kepler_summary(p, kb, kgm);
                    double two_v2r = 2.0 * s.v_plus * s.v_plus * s.r_plus_exact / kgm;
                    std::cout << fmt_g17(p) << ',' << fmt_g17(s.lambda_plus) << ','
                              << fmt_g17(p * s.lambda_plus) << ',' << fmt_g17(s.alpha) << ','
                              << fmt_g17(M_PI - s.alpha) << ',' << fmt_g17(two_v2r) << '\n';
                }
            } else {
                std::cout << to_json(kepler_summary(kp, kb, kgm)) << '\n';
            }
            return 0;
        }
        if (sim_cmd->parsed()) {
            RunConfig cfg = load_config(sim_config);
            if (!sim_closure.empty()) {
                if (sim_closure == "point") cfg.closure = ClosureKind::PointMass;
                else if (sim_closure == "ball") cfg.closure = ClosureKind::RigidBallQuadrature;
                else if (sim_closure == "quadrupole")
                    cfg.closure = ClosureKind::QuadrupoleCoupled;
                else throw std::runtime_error("--closure must be point|ball|quadrupole");
            }
            if (sim_rtol > 0.0) cfg.rtol = sim_rtol;
            if (!sim_stop.empty()) {
                if (sim_stop == "closest") {
                    cfg.stop = {StopCondition::Kind::ClosestApproachMargin, 10.0};
                } else if (sim_stop.rfind("r1=", 0) == 0) {
                    cfg.stop = {StopCondition::Kind::RadiusBelow, std::stod(sim_stop.substr(3))};
                } else if (sim_stop.rfind("t=", 0) == 0) {
                    cfg.stop = {StopCondition::Kind::TimeHorizon, std::stod(sim_stop.substr(2))};
                } else {
                    throw std::runtime_error("--stop must be closest|r1=<val>|t=<val>");
                }
            }
            cfg.with_modes = !no_modes;
            cfg.timestamp = !no_timestamp;
            if (cfg.closure == ClosureKind::QuadrupoleCoupled) {
                CoupledRunResult res = run_coupled(cfg);
                write_coupled_csv(sim_out, cfg, res);
            } else {
                RunResult res = run_simulation(cfg);
                write_run_csv(sim_out, cfg, res);
            }
            return 0;
        }
        if (sweep_cmd->parsed()) {
            RunConfig base;
            if (!sweep_config.empty()) base = load_config(sweep_config);
            else {
                base.params.G = base.params.M = base.params.R = 1.0;
                base.params.b = 1.0;
                base.params.v0 = 1.0; // replaced per grid point
            }
            auto grid = parse_sweep_grid(read_file(sweep_grid));
            auto rows = run_sweep(base, grid, sweep_jobs);
            atomic_write_file(sweep_out, sweep_csv(rows));
            return 0;
        }
        if (vo_cmd->parsed()) {
            std::cout << operator_report_json(vo_lmax, vo_degree) << '\n';
            return 0;
        }
        if (rep_cmd->parsed()) {
            std::string json = report_from_csv(rep_run, rep_config);
            atomic_write_file(rep_out, json);
            std::cout << json << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
