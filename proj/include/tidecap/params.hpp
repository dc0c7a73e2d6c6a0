// Physical parameters, nondimensionalization, derived dimensionless groups.
#pragma once

#include <string>

namespace tidecap {

// Two equal-mass uniform fluid balls approaching each other. The density is
// always derived from (M, R) so that M = (4*pi/3) R^3 rho holds exactly.
struct PhysicalParams {
    double G = 1.0;  // gravitational constant
    double M = 1.0;  // mass of each body
    double R = 1.0;  // undeformed body radius
    double b = 1.0;  // impact parameter
    double v0 = 1.0; // asymptotic approach speed
    double R1 = 0.0; // initial center-of-mass distance from the origin (0 -> default)

    double rho() const;
    double ball_volume() const; // |B_R|
    double GM() const { return G * M; }

    // Throws std::domain_error naming the offending field.
    void validate() const;
};

// All dimensionless groups controlling the encounter.
//   p      = GM / (b v0^2)
//   beta   = b / R
//   r_plus = 2 b / p            (large-p closest-approach surrogate)
//   r_plus_exact = b * lambda_plus(p)
//   eta_plus = R / r_plus
//   v0 = kappa beta^{-alpha} sqrt(GM/R),  c0 = kappa beta^{6/7 - alpha}
//   capture_index = eta_plus^5 p^2
struct DerivedGroups {
    double p = 0.0;
    double beta = 0.0;
    double r_plus = 0.0;
    double r_plus_exact = 0.0;
    double lambda_plus = 0.0;
    double eta_plus = 0.0;
    double kappa = 0.0;
    double alpha_exp = 1.0;
    double c0 = 0.0;
    double capture_index = 0.0;
};

DerivedGroups derive(const PhysicalParams& params, double alpha_exp = 1.0,
                     bool validate_regime = false);

// The same system expressed in internal units G = M = R = 1, together with the
// factors that map internal values back to the input unit system.
struct ScaledParams {
    PhysicalParams internal; // G = M = R = 1
    double length_scale = 1.0;   // input length per internal length (= R)
    double time_scale = 1.0;     // sqrt(R^3 / GM)
    double velocity_scale = 1.0; // sqrt(GM / R)
    double energy_scale = 1.0;   // GM / R (per unit mass)
    double mass_scale = 1.0;     // M

    PhysicalParams to_input() const;
};

ScaledParams nondimensionalize(const PhysicalParams& params);

std::string to_json(const DerivedGroups& g);

} // namespace tidecap
