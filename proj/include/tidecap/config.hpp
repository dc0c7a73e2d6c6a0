// Run configuration, the simulate -> modes -> report pipeline, and the
// machine-readable CSV/JSON outputs.
//
// Config files are flat key-value text: one `key = value` per line, `#`
// comments. Keys:
//   G M R b v0        required physical parameters (any consistent units)
//   R1                initial center distance; default 50 * r_plus_exact
//   alpha_exp         exponent of the v0 ~ beta^{-alpha} parametrization (1)
//   rtol              integrator tolerance (1e-10)
//   l_max             mode cutoff (4)
//   grid_degree       sphere quadrature degree (32)
//   quadrature_order  radial order of the ball rules (8)
//   closure           point | ball | quadrupole (point)
//   launch            conic | ballistic (conic)
//   stop              closest | r1=<val> | t=<val> (closest)
//   stop_margin       exit radius multiple for stop=closest (10)
//   sample_dt         output sampling step; default mode period / 16
// All simulation and CSV output is in internal units G = M = R = 1; the
// sidecar records the scale factors back to input units.
#pragma once

#include "tidecap/energy.hpp"
#include "tidecap/orbit.hpp"
#include "tidecap/params.hpp"
#include "tidecap/tides.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tidecap {

struct RunConfig {
    PhysicalParams params;
    double alpha_exp = 1.0;
    ClosureKind closure = ClosureKind::PointMass;
    LaunchMode launch = LaunchMode::Conic;
    double rtol = 1e-10;
    int l_max = 4;
    int grid_degree = 32;
    int quadrature_order = 8;
    StopCondition stop{StopCondition::Kind::ClosestApproachMargin, 10.0};
    double sample_dt = 0.0;
    bool with_modes = true;
    bool timestamp = true; // metadata timestamp in the sidecar
};

// Throws std::runtime_error naming the offending key on unknown keys, missing
// required keys, and malformed values.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

struct SweepPoint {
    double beta, kappa, alpha_exp;
};
// Grid file: one `beta kappa alpha_exp` triple per line (comma or space
// separated), `#` comments.
std::vector<SweepPoint> parse_sweep_grid(const std::string& text);

struct RunResult {
    ScaledParams scaled;
    DerivedGroups groups;
    Trajectory traj;      // internal units
    ModeSeries modes;     // empty when modes disabled
    DecompositionSeries energy;
    std::optional<CaptureRatio> capture;
    std::optional<EtaScalingFit> fit;
};

// Decoupled pipeline: orbit integration, mode integration, energy series.
RunResult run_simulation(const RunConfig& cfg);

// Co-integrated orbit + modes for the QuadrupoleCoupled closure. Produces the
// same sample rows as the decoupled pipeline (no dense trajectory).
struct CoupledRunResult {
    ScaledParams scaled;
    DerivedGroups groups;
    ModeSeries modes;
    std::vector<OrbitState> orbit_samples; // aligned with modes.samples
    std::optional<ClosestApproach> closest;
    double e0 = 0.0;
};
CoupledRunResult run_coupled(const RunConfig& cfg);

// CSV / JSON artifacts (atomic writes).
void write_run_csv(const std::string& path, const RunConfig& cfg, const RunResult& result);
void write_coupled_csv(const std::string& path, const RunConfig& cfg,
                       const CoupledRunResult& result);
void write_sidecar(const std::string& csv_path, const RunConfig& cfg,
                   const DerivedGroups& groups, const ScaledParams& scaled,
                   const std::optional<ClosestApproach>& closest);
std::string report_json(const RunResult& result, int max_series_rows = 2000);

// Rebuilds the energy report from a previously written run CSV (requires the
// mode columns). Params are read from the sidecar unless `config_path` is
// given.
std::string report_from_csv(const std::string& csv_path, const std::string& config_path = "");

struct SweepRowResult {
    SweepPoint point;
    double capture_index = 0.0;
    double r0 = 0.0;
    double m_ratio = 0.0;
    double slope = 0.0;
};

// Runs the grid at fixed (G = M = R = 1) base parameters; jobs > 1 runs
// points concurrently. Row order follows the grid file.
std::vector<SweepRowResult> run_sweep(const RunConfig& base, const std::vector<SweepPoint>& grid,
                                      int jobs);
std::string sweep_csv(const std::vector<SweepRowResult>& rows);

} // namespace tidecap
