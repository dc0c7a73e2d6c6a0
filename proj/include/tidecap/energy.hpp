// Total / orbital / tidal energy decomposition of the decoupled model, the
// capture ratio, and the eta-scaling diagnostics. All energies are per unit
// mass of one body.
#pragma once

#include "tidecap/orbit.hpp"
#include "tidecap/params.hpp"
#include "tidecap/tides.hpp"

#include <vector>

namespace tidecap {

struct TidalEnergy {
    // Kinetic/potential split of the surface-mode energy:
    //   kinetic   = (R / 4|B1|) ||dh2/dt||^2_{L2(S_R)}
    //   potential = (g / 5|B1|) ||h2||^2_{L2(S_R)},   g = GM/R^2
    double kinetic = 0.0;
    double potential = 0.0;
    double total = 0.0; // kinetic + potential

    // Coarser norm form of the same energy:
    //   (GM/R^5) ||h||^2_{H1(S_R)} + (1/R^2) ||dh/dt||^2_{L2(S_R)}
    // with ||h||^2_{H1} = sum (1 + l(l+1)) h_{lm}^2. On pure l = 2 data the
    // two differ by fixed constants per part (140 pi / 3 and 16 pi / 3).
    double surrogate_potential = 0.0;
    double surrogate_kinetic = 0.0;
    double surrogate_total = 0.0;
};

TidalEnergy tidal_energy(const ModeSpectrum& modes, const PhysicalParams& params);
TidalEnergy tidal_energy(const std::array<double, 5>& h2, const std::array<double, 5>& h2dot,
                         const PhysicalParams& params);

enum class OrbitalFidelity { PointMass, BallQuadrature };

// PointMass: |v1|^2/2 - GM/(4 r1). BallQuadrature evaluates the averaged
// mutual potential (1/2|B1|) int_B1 psi_2 by tensor quadrature over both
// balls; the two agree for undeformed balls. Domain error on overlap.
double orbital_energy(const OrbitState& state, const PhysicalParams& params,
                      OrbitalFidelity fidelity, int quadrature_order = 8);

struct EnergyReport {
    double t = 0.0;
    double eta = 0.0;
    double E_orbital = 0.0;
    double E_tidal = 0.0;           // kinetic + potential split
    double E_tidal_kinetic = 0.0;
    double E_tidal_potential = 0.0;
    double E_tidal_surrogate = 0.0; // H1 x L2 norm form
    double E_total = 0.0;           // E_orbital + E_tidal (definitional)
    double E_orbital_inferred = 0.0; // e0 - E_tidal_surrogate (capture diagnostic)
};

struct DecompositionSeries {
    std::vector<EnergyReport> reports;
    double e0 = 0.0;          // initial total energy (= E_orbital at T0)
    double max_drift = 0.0;   // max |E_total - e0| over the run (model error)
    double surrogate_to_split_potential = 0.0; // observed ratio at max tide
    double surrogate_to_split_kinetic = 0.0;
};

DecompositionSeries decomposition_report(const Trajectory& traj, const ModeSeries& modes,
                                         const PhysicalParams& params);

// m = E_tidal(t0) / e0 with e0 the initial total energy. The primary ratio
// uses the H1 x L2 norm form of the tidal energy; the split-based ratio is
// reported alongside. Domain error when e0 <= 0 (regime violated).
struct CaptureRatio {
    double m_ratio = 0.0;       // surrogate-based
    double m_ratio_split = 0.0; // kinetic+potential split based
    double e0 = 0.0;
    double t0 = 0.0;
};

CaptureRatio capture_ratio(const DecompositionSeries& series, const Trajectory& traj);

struct EtaScalingFit {
    double slope = 0.0;     // d log E_tidal / d log eta
    double ratio_min = 0.0; // min E_tidal / ((GM/R) eta^6)
    double ratio_max = 0.0;
    int n_samples = 0;
};

// Least-squares slope of log E_tidal vs log eta over the inbound branch with
// r1 in (window_lo_r * r0, window_hi_r * r0]. Domain error when fewer than 10
// samples fall in the window.
EtaScalingFit eta_scaling_fit(const DecompositionSeries& series, const Trajectory& traj,
                              double window_lo_r = 1.0, double window_hi_r = 2.0);

} // namespace tidecap
