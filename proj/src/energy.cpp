#include "tidecap/energy.hpp"

#include "tidecap/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace tidecap {

namespace {

TidalEnergy from_norms(double nh2_sq, double nh2dot_sq, double nh_h1_sq, double nhdot_sq,
                       const PhysicalParams& prm) {
    const double g = prm.GM() / (prm.R * prm.R);
    const double vol = prm.ball_volume();
    TidalEnergy e;
    e.kinetic = prm.R / (4.0 * vol) * nh2dot_sq;
    e.potential = g / (5.0 * vol) * nh2_sq;
    e.total = e.kinetic + e.potential;
    e.surrogate_potential = prm.GM() / std::pow(prm.R, 5) * nh_h1_sq;
    e.surrogate_kinetic = nhdot_sq / (prm.R * prm.R);
    e.surrogate_total = e.surrogate_potential + e.surrogate_kinetic;
    return e;
}

} // namespace

TidalEnergy tidal_energy(const ModeSpectrum& modes, const PhysicalParams& params) {
    double nh2_sq = 0, nh2dot_sq = 0, nh_h1_sq = 0, nhdot_sq = 0;
    for (int l = 0; l <= modes.L_max; ++l) {
        double wl = 1.0 + l * (l + 1.0);
        for (int m = -l; m <= l; ++m) {
            double h = modes.h[sh_index(l, m)];
            double hd = modes.hdot[sh_index(l, m)];
            nh_h1_sq += wl * h * h;
            nhdot_sq += hd * hd;
            if (l == 2) {
                nh2_sq += h * h;
                nh2dot_sq += hd * hd;
            }
        }
    }
    return from_norms(nh2_sq, nh2dot_sq, nh_h1_sq, nhdot_sq, params);
}

TidalEnergy tidal_energy(const std::array<double, 5>& h2, const std::array<double, 5>& h2dot,
                         const PhysicalParams& params) {
    double nh2_sq = 0, nh2dot_sq = 0;
    for (int m = 0; m < 5; ++m) {
        nh2_sq += h2[m] * h2[m];
        nh2dot_sq += h2dot[m] * h2dot[m];
    }
    return from_norms(nh2_sq, nh2dot_sq, 7.0 * nh2_sq, nh2dot_sq, params);
}

double orbital_energy(const OrbitState& state, const PhysicalParams& params,
                      OrbitalFidelity fidelity, int quadrature_order) {
    const double r1 = state.r1();
    if (fidelity == OrbitalFidelity::PointMass)
        return 0.5 * state.v1.norm2() - params.GM() / (4.0 * r1);
    if (!(r1 > 2.0 * params.R))
        throw std::domain_error("orbital_energy: bodies too close for ball quadrature");
    // (1/2|B1|) int_B1 psi_2 with psi_2 the quadrature potential of ball 2.
    GaussLegendre glr(quadrature_order);
    int n_theta = quadrature_order + 1;
    GaussLegendre glt(n_theta);
    int n_phi = 2 * quadrature_order + 2;
    const double wphi = 2.0 * M_PI / n_phi;
    const double rho = params.rho();
    double pot = 0.0, wsum = 0.0;
    struct Node { Vec3 p; double w; };
    std::vector<Node> nodes;
    for (int ir = 0; ir < quadrature_order; ++ir) {
        double r = 0.5 * (glr.nodes[ir] + 1.0) * params.R;
        double wr = 0.5 * glr.weights[ir] * r * r * params.R;
        for (int it = 0; it < n_theta; ++it) {
            double ct = glt.nodes[it];
            double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
            for (int ip = 0; ip < n_phi; ++ip) {
                double phi = wphi * ip;
                nodes.push_back({{r * st * std::cos(phi), r * st * std::sin(phi), r * ct},
                                 wr * glt.weights[it] * wphi});
            }
        }
    }
    for (const Node& a : nodes) {
        Vec3 x = state.x1 + a.p;
        double psi = 0.0;
        for (const Node& b : nodes) {
            Vec3 y = -1.0 * state.x1 + b.p;
            psi -= b.w / (x - y).norm();
        }
        psi *= params.G * rho;
        pot += a.w * psi;
        wsum += a.w;
    }
    return 0.5 * state.v1.norm2() + 0.5 * pot / wsum;
}

DecompositionSeries decomposition_report(const Trajectory& traj, const ModeSeries& modes,
                                         const PhysicalParams& params) {
    DecompositionSeries out;
    OrbitState s0 = traj.state(traj.t_begin());
    out.e0 = orbital_energy(s0, params, OrbitalFidelity::PointMass);
    double best_tide = -1.0;
    out.reports.reserve(modes.samples.size());
    for (const ModeSample& ms : modes.samples) {
        OrbitState s = traj.state(ms.t);
        TidalEnergy te = tidal_energy(ms.h2, ms.h2dot, params);
        EnergyReport r;
        r.t = ms.t;
        r.eta = ms.eta;
        r.E_orbital = orbital_energy(s, params, OrbitalFidelity::PointMass);
        r.E_tidal = te.total;
        r.E_tidal_kinetic = te.kinetic;
        r.E_tidal_potential = te.potential;
        r.E_tidal_surrogate = te.surrogate_total;
        r.E_total = r.E_orbital + r.E_tidal;
        r.E_orbital_inferred = out.e0 - r.E_tidal_surrogate;
        out.max_drift = std::max(out.max_drift, std::abs(r.E_total - out.e0));
        if (te.total > best_tide) {
            best_tide = te.total;
            out.surrogate_to_split_potential =
                te.potential > 0 ? te.surrogate_potential / te.potential : 0.0;
            out.surrogate_to_split_kinetic =
                te.kinetic > 0 ? te.surrogate_kinetic / te.kinetic : 0.0;
        }
        out.reports.push_back(r);
    }
    return out;
}

CaptureRatio capture_ratio(const DecompositionSeries& series, const Trajectory& traj) {
    auto ca = detect_closest_approach(traj);
    if (!ca) throw std::domain_error("capture_ratio: no closest approach");
    if (!(series.e0 > 0.0))
        throw std::domain_error("capture_ratio: initial total energy must be positive");
    // Report at the closest sample to t0.
    const EnergyReport* at = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (const EnergyReport& r : series.reports) {
        double d = std::abs(r.t - ca->t0);
        if (d < best) {
            best = d;
            at = &r;
        }
    }
    if (!at) throw std::domain_error("capture_ratio: empty energy series");
    CaptureRatio cr;
    cr.e0 = series.e0;
    cr.t0 = ca->t0;
    cr.m_ratio = at->E_tidal_surrogate / series.e0;
    cr.m_ratio_split = at->E_tidal / series.e0;
    return cr;
}

EtaScalingFit eta_scaling_fit(const DecompositionSeries& series, const Trajectory& traj,
                              double window_lo_r, double window_hi_r) {
    auto ca = detect_closest_approach(traj);
    if (!ca) throw std::domain_error("eta_scaling_fit: no closest approach");
    const PhysicalParams& prm = traj.params();
    EtaScalingFit fit;
    fit.ratio_min = std::numeric_limits<double>::infinity();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const EnergyReport& r : series.reports) {
        if (r.t > ca->t0) continue; // inbound branch only
        double r1 = prm.R / r.eta;
        if (r1 <= window_lo_r * ca->r0 || r1 > window_hi_r * ca->r0) continue;
        if (!(r.E_tidal > 0.0)) continue;
        double x = std::log(r.eta), y = std::log(r.E_tidal);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        double ratio = r.E_tidal / (prm.GM() / prm.R * std::pow(r.eta, 6));
        fit.ratio_min = std::min(fit.ratio_min, ratio);
        fit.ratio_max = std::max(fit.ratio_max, ratio);
        ++fit.n_samples;
    }
    if (fit.n_samples < 10)
        throw std::domain_error("eta_scaling_fit: window too short (< 10 samples)");
    double n = fit.n_samples;
    fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return fit;
}

} // namespace tidecap
