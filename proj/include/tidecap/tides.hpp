// Linearized height-function dynamics: the surface modes h_{lm} of body 1
// driven by the tidal field of body 2 along a given orbit.
//
// Mode ODE (S_R-orthonormal real basis, coefficients carry length units):
//   h_{lm}'' + a_l h_{lm} = f_{lm}(t),  a_l = (GM/R^3) 2 l (l-1) / (2l+1),
// with zero initial data. The linear source is pure l = 2:
//   f(t, w) = -(g eta^3 / 8) (1 - 3 (xi1 . w)^2),  g = GM/R^2.
#pragma once

#include "tidecap/orbit.hpp"
#include "tidecap/params.hpp"
#include "tidecap/sphere.hpp"

#include <array>
#include <vector>

namespace tidecap {

double mode_frequency(int l, double GM, double R); // a_l

struct ModeSpectrum {
    int L_max = 4;
    std::vector<double> h;    // sh_index layout, length (L_max+1)^2
    std::vector<double> hdot;
    double t = 0.0;

    double norm_h(int l) const;    // l-block L2(S_R) norm
    double norm_hdot(int l) const;
    double norm_h_total() const;
    double norm_hdot_total() const;
};

struct SourceTerm {
    double g = 0.0;                  // surface gravity GM/R^2
    double eta = 0.0;
    Vec3 xi1;
    std::array<double, 5> f2m{};     // l = 2 coefficients, m = -2..2

    // Closed-form field at unit direction w.
    double field(const Vec3& w) const {
        double c = dot(xi1, w);
        return -(g * eta * eta * eta / 8.0) * (1.0 - 3.0 * c * c);
    }
};

// Degree-2 addition-theorem projection of the closed-form field.
SourceTerm source_coefficients(const OrbitState& state, const PhysicalParams& params);

struct ModeSample {
    double t = 0.0;
    double r1 = 0.0, eta = 0.0, v1 = 0.0, r1dot = 0.0;
    std::array<double, 5> h2{}, h2dot{};
    double leak_h = 0.0, leak_hdot = 0.0; // L2 norms over l != 2 blocks

    double norm_h2() const;
    double norm_h2dot() const;
};

struct ModeSeries {
    int L_max = 4;
    std::vector<ModeSample> samples;
    ModeSpectrum final_spectrum; // full spectrum at t_end
    double max_leak_h = 0.0, max_leak_hdot = 0.0;
};

struct ModeIntegrateOptions {
    int L_max = 4;
    double rtol = 1e-10;
    double sample_dt = 0.0; // 0 -> mode period / 16
};

// Direct adaptive integration of all modes, forcing sampled from the orbit
// trajectory's dense output.
ModeSeries integrate_modes(const Trajectory& traj, const ModeIntegrateOptions& opt = {});

// Duhamel (sine-kernel) evaluation of the l = 2 block on the same sample grid:
//   h(t) = a^{-1/2} int_T0^t sin(sqrt(a)(t-s)) f(s) ds   (a > 0)
//   h(t) = int_T0^t (t-s) f(s) ds                        (a = 0)
// computed by chunked Gauss-Legendre prefix accumulation over the dense
// forcing. Returns samples at `times` (must be increasing, within the span).
struct DuhamelResult {
    std::vector<double> t;
    std::vector<std::array<double, 5>> h2, h2dot;
};

DuhamelResult duhamel_modes(const Trajectory& traj, const std::vector<double>& times);

// Scalar-mode Duhamel for arbitrary a_l and forcing, used by unit tests.
void duhamel_scalar(double a_l, const std::function<double(double)>& f, double t0,
                    const std::vector<double>& times, std::vector<double>& h,
                    std::vector<double>& hdot, double chunk_dt);

// Relative L2-in-time deviation between direct and Duhamel l = 2 blocks.
double duhamel_vs_direct_error(const Trajectory& traj, const ModeSeries& series);

// Deviation of the integrated h2dot from its integration-by-parts expansion
//   h_l' = f_l'(t)/a_l - a_l^{-3/2} int sin(sqrt(a_l)(t-s)) f_l'''(s) ds
//          + boundary terms at T0,
// max over the window r1 <= window_r_multiple * r0. Forcing derivatives by
// finite differences on the dense orbit output.
double derivative_expansion_residual(const Trajectory& traj, const ModeSeries& series,
                                     double window_r_multiple = 10.0);

struct BoundReport {
    bool window_reached = false;
    double ratio_h_min = 0.0, ratio_h_max = 0.0;       // ||h2|| / (R^2 eta^3)
    double ratio_hdot_min = 0.0, ratio_hdot_max = 0.0; // ||h2'|| / (R eta^4 |v1|)
    double subdominance_h = 0.0;    // max ||h - h2|| / ||h2||
    double subdominance_hdot = 0.0;
    int n_window_samples = 0;
};

BoundReport amplitude_bound_report(const ModeSeries& series, const Trajectory& traj,
                                   double window_lo_r = 1.0, double window_hi_r = 10.0);

struct DtfNormIdentity {
    double quadrature_total = 0.0; // int_{S_R} |df/dt|^2 dS by grid quadrature
    double eta_term = 0.0;         // (9 pi g^2 R^2 / 20) eta^4 eta'^2
    double dir_term = 0.0;         // (3 pi g^2 R^2 / 20) eta^6 |xi1'|^2
    double cross_term = 0.0;       // quadrature of the cross term (vanishes)
};

DtfNormIdentity dtf_norm_identity(const OrbitState& state, const PhysicalParams& params,
                                  const SphereGrid& grid);

} // namespace tidecap
