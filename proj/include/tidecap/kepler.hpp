// Closed-form and quadrature analysis of the point-mass two-body problem.
//
// Conventions: x1 is the position of body 1 relative to the system barycenter,
// body 2 sits at -x1, so the separation is 2 r1 and the effective one-body
// problem has gravitational parameter GM/4:
//   x1'' = -GM x1 / (4 |x1|^3),  E1 = |v1|^2/2 - GM/(4 r1),  J = x1 x v1.
#pragma once

#include "tidecap/params.hpp"

#include <string>

namespace tidecap {

struct ClosestApproachPoint {
    double lambda_plus; // positive root of lambda^2 + (p/2) lambda - 1
    double r_plus_exact;
};

struct KeplerSummary {
    double p = 0.0;
    double b = 0.0;
    double GM = 1.0;
    double energy_E1 = 0.0;     // specific energy (asymptotic: v0^2 / 2)
    double J = 0.0;             // specific angular momentum magnitude (b v0)
    double eccentricity_e = 0.0;
    double lambda_plus = 0.0;
    double r_plus_exact = 0.0;
    double alpha = 0.0;             // scattering angle
    double alpha_error = 0.0;       // reported quadrature error estimate
    double v_plus = 0.0;            // speed at closest approach
};

// e = sqrt(1 + 32 E1 J^2 / (GM)^2); throws std::domain_error when the
// radicand is negative or GM <= 0.
double eccentricity(double E1, double J, double GM);

// lambda_plus = 1 / (p/4 + sqrt(p^2/16 + 1)), r = b lambda_plus.
ClosestApproachPoint closest_approach(double p, double b);

// alpha = 2 int_{lambda_+}^inf dl / (l sqrt(l^2 + (p/2) l - 1)) - pi.
// The endpoint inverse-square-root singularity is removed with the
// substitution l = lambda_+ + s^2 before mapping to a finite interval.
// `abs_tol` is the quadrature target; the achieved estimate is written to
// *error_estimate when given. Throws std::runtime_error if the quadrature
// fails to reach the target.
double scattering_angle(double p, double abs_tol = 1e-12, double* error_estimate = nullptr);

// r(theta) = (4 J^2 / GM) / (1 + e cos(theta)); domain error on a
// non-positive denominator (asymptote direction).
double conic_radius(double theta, double J, double e, double GM);

// v_+ = sqrt( (GM / 2 r_+) (1 + 2 v0^2 r_+ / GM) ) with r_+ = b lambda_+(p).
double speed_at_closest(double p, double b, double v0, double GM);

KeplerSummary kepler_summary(double p, double b, double GM);

std::string to_json(const KeplerSummary& s);

} // namespace tidecap
