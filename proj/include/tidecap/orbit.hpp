// Center-of-mass dynamics of the two-body encounter.
//
// Body 1 sits at x1, body 2 at -x1 (equal masses, barycenter pinned at the
// origin). Equations of motion, energies and angular momentum follow the
// conventions in kepler.hpp: x1'' = -GM x1/(4 r1^3) plus the multipole
// remainder of the finite-ball attraction.
#pragma once

#include "tidecap/ode.hpp"
#include "tidecap/params.hpp"
#include "tidecap/vec3.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace tidecap {

struct OrbitState {
    double t = 0.0;
    Vec3 x1, v1;

    double r1() const { return x1.norm(); }
    Vec3 xi1() const { return x1.unit(); }
    Vec3 J_vec() const { return cross(x1, v1); }
    double r1dot() const { return dot(x1, v1) / x1.norm(); }
    double energy(double GM) const { return 0.5 * v1.norm2() - GM / (4.0 * x1.norm()); }
    double eta(double R) const { return R / x1.norm(); }
};

enum class ClosureKind { PointMass, RigidBallQuadrature, QuadrupoleCoupled };

// Supplies the instantaneous l = 2 surface-mode coefficients (S_R-orthonormal
// basis) of both bodies for the coupled closure.
using ModeSupplier = std::function<void(double t, std::array<double, 5>& h2)>;

struct ForceClosure {
    ClosureKind kind = ClosureKind::PointMass;
    int quadrature_order = 8; // radial points; spherical rule degree is twice this
    ModeSupplier coupling;    // required for QuadrupoleCoupled

    void validate() const;
};

// Acceleration of body 1. Throws std::domain_error on overlapping bodies
// (r1 <= R) for finite-ball closures.
Vec3 accel(const OrbitState& state, const ForceClosure& closure, const PhysicalParams& params);

// Point-mass acceleration plus the force induced by the instantaneous l = 2
// deformation of body 2 (both bodies deform identically by symmetry). Used by
// the QuadrupoleCoupled closure and by the co-integrated coupled run.
Vec3 accel_with_modes(const OrbitState& state, const std::array<double, 5>& h2,
                      const PhysicalParams& params);

// Multipole remainder of the attraction: E1(x) = grad(psi_2)(x) minus the
// monopole and quadrupole terms of its expansion about x1. Evaluated with the
// ball-2 integral done by quadrature.
Vec3 multipole_remainder_field(const Vec3& x, const OrbitState& state,
                               const PhysicalParams& params, int quadrature_order = 8);

// Average of the remainder over the (undeformed) ball B1.
Vec3 multipole_remainder_average(const OrbitState& state, const PhysicalParams& params,
                                 int quadrature_order = 8);

// Max over surface sample points of |E1| R^2 / (GM eta^4).
double multipole_remainder_surface_ratio(const OrbitState& state, const PhysicalParams& params,
                                         int quadrature_order = 8);

enum class LaunchMode {
    // State placed on the exact incoming point-mass hyperbola with asymptotic
    // speed v0 and impact parameter b, evaluated at distance R1. This is the
    // finite-R1 trace of the infinite-separation setup: conserved E1 = v0^2/2
    // and J = b v0 hold exactly, independent of R1.
    Conic,
    // Literal finite-start data: x1 = (-b, sqrt(R1^2 - b^2), 0), v1 = (0, -v0, 0).
    Ballistic,
};

OrbitState launch_state(const PhysicalParams& params, LaunchMode mode, double R1);

struct StopCondition {
    enum class Kind { ClosestApproachMargin, RadiusBelow, TimeHorizon };
    Kind kind = Kind::ClosestApproachMargin;
    // ClosestApproachMargin: continue past the first minimum of r1 until
    // r1 = min(value * r0, R1_start); RadiusBelow: stop when r1 first reaches
    // value inbound; TimeHorizon: integrate to t = value.
    double value = 10.0;
};

struct ClosestApproach {
    double t0 = 0.0;
    double r0 = 0.0;
    double E1_at_t0 = 0.0;
    double J_at_t0 = 0.0;
    double r0_pred = 0.0; // 4 J^2 / (sqrt(G^2 M^2 + 32 E1 J^2) + GM)
};

class Trajectory {
  public:
    Trajectory() = default;
    Trajectory(PhysicalParams params, ForceClosure closure, OdeSolution sol)
        : params_(params), closure_(closure), sol_(std::move(sol)) {}

    const PhysicalParams& params() const { return params_; }
    const ForceClosure& closure() const { return closure_; }
    const OdeSolution& solution() const { return sol_; }
    double t_begin() const { return sol_.t_begin(); }
    double t_end() const { return sol_.t_end(); }

    OrbitState state(double t) const;
    const std::optional<ClosestApproach>& closest() const { return closest_; }
    void set_closest(ClosestApproach ca) { closest_ = ca; }

    // Time at which r1 first equals r (inbound branch); bisection on the dense
    // output. Requires r within [r(t0_ca), r(t_begin)].
    double time_at_radius_inbound(double r) const;

  private:
    PhysicalParams params_;
    ForceClosure closure_;
    OdeSolution sol_;
    std::optional<ClosestApproach> closest_;
};

struct IntegrateOptions {
    double rtol = 1e-10;
    LaunchMode launch = LaunchMode::Conic;
    double R1 = 0.0; // 0 -> params.R1, or 50 r_plus_exact when that is unset
};

Trajectory integrate(const PhysicalParams& params, const ForceClosure& closure,
                     const StopCondition& stop, const IntegrateOptions& opt = {});

// Locates the first zero of r1' by bracketing + bisection on the dense output.
// Empty when the trajectory never turns around.
std::optional<ClosestApproach> detect_closest_approach(const Trajectory& traj);

// ---- Diagnostics -----------------------------------------------------------

struct StageBand {
    bool present = false;
    double r_lo = 0.0, r_hi = 0.0;
    double ratio_r1dot_min = 0.0, ratio_r1dot_max = 0.0;
    double ratio_v1_min = 0.0, ratio_v1_max = 0.0;
};

struct StageReport {
    StageBand far, mid, near;
    // Linear fit of |r1'|^2 against (r1 - r0) over the innermost slice of the
    // near stage (r1 - r0 <= fit_window * r0).
    double fit_slope = 0.0, fit_intercept = 0.0, fit_r2 = 0.0;
    double fit_window = 0.04;
    bool regime_warning = false;
};

StageReport stage_bounds_report(const Trajectory& traj, const DerivedGroups& groups,
                                int samples_per_stage = 160);

struct ResidualSeries {
    std::vector<double> t;
    std::vector<double> energy_residual;   // |dE1/dt + AV(E1) . v1|
    std::vector<double> momentum_residual; // |dJ/dt - AV(E1) x x1|
    std::vector<double> energy_rate_ratio; // |dE1/dt| R^2 / (GM eta^4 |v1|)
    double max_energy_residual = 0.0;
    double max_momentum_residual = 0.0;
    double max_energy_rate_ratio = 0.0;
};

ResidualSeries evolution_law_residuals(const Trajectory& traj, const ForceClosure& closure,
                                       int n_samples = 64);

// max over t of int_{T0}^{t} eta^{m+1} |v1| ds / (R eta^m(t)).
double eta_integration_constant(const Trajectory& traj, int m);

// Max relative deviation between the finite-difference third derivative of r1
// and its closed form (point-mass terms only).
double third_derivative_residual(const Trajectory& traj, int n_samples = 48);

// Integrates backward from the closest approach with reversed velocity and
// returns |x_back(T0) - x1(T0)| / |x1(T0)|.
double time_reversal_error(const Trajectory& traj);

// Asymptotic scattering angle of the trajectory, extracted from the conserved
// conic elements of its final state.
double trajectory_deflection_angle(const Trajectory& traj);

} // namespace tidecap
