#include "tidecap/kepler.hpp"

#include "tidecap/io_util.hpp"
#include "tidecap/quadrature.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tidecap {

double eccentricity(double E1, double J, double GM) {
    if (!(GM > 0.0)) throw std::domain_error("eccentricity: GM must be positive");
    double radicand = 1.0 + 32.0 * E1 * J * J / (GM * GM);
    if (radicand < 0.0) throw std::domain_error("eccentricity: negative radicand (non-physical)");
    return std::sqrt(radicand);
}

ClosestApproachPoint closest_approach(double p, double b) {
    if (p < 0.0) throw std::domain_error("closest_approach: p must be >= 0");
    if (!(b > 0.0)) throw std::domain_error("closest_approach: b must be positive");
    // This form avoids cancellation for large p; hypot keeps it stable.
    double lambda = 1.0 / (p / 4.0 + std::hypot(p / 4.0, 1.0));
    return {lambda, b * lambda};
}

double scattering_angle(double p, double abs_tol, double* error_estimate) {
    if (p < 0.0) throw std::domain_error("scattering_angle: p must be >= 0");
    const double lp = closest_approach(p, 1.0).lambda_plus;
    const double lm = -(p / 4.0 + std::hypot(p / 4.0, 1.0)); // negative root
    // l = lambda_+ + s^2 turns the integrand into 2 / ((lp + s^2) sqrt(l - lm)),
    // then s = u / (1 - u) maps [0, inf) to [0, 1).
    auto integrand = [&](double u) {
        double om = 1.0 - u;
        double s = u / om;
        double l = lp + s * s;
        return 2.0 / (l * std::sqrt(l - lm)) / (om * om);
    };
    QuadResult q = integrate_adaptive(integrand, 0.0, 1.0, abs_tol * 0.25);
    double alpha = 2.0 * q.value - M_PI;
    if (error_estimate) *error_estimate = 2.0 * q.error_estimate;
    if (!q.converged || 2.0 * q.error_estimate > std::max(abs_tol, 1e-9)) {
        std::ostringstream os;
        os << "scattering_angle: quadrature did not converge (achieved "
           << 2.0 * q.error_estimate << ", requested " << abs_tol << ")";
        throw std::runtime_error(os.str());
    }
    return alpha;
}

double conic_radius(double theta, double J, double e, double GM) {
    if (!(GM > 0.0)) throw std::domain_error("conic_radius: GM must be positive");
    double denom = 1.0 + e * std::cos(theta);
    if (denom <= 0.0)
        throw std::domain_error("conic_radius: 1 + e cos(theta) <= 0 (asymptote direction)");
    return 4.0 * J * J / GM / denom;
}

double speed_at_closest(double p, double b, double v0, double GM) {
    double r = closest_approach(p, b).r_plus_exact;
    return std::sqrt(GM / (2.0 * r) * (1.0 + 2.0 * v0 * v0 * r / GM));
}

KeplerSummary kepler_summary(double p, double b, double GM) {
    KeplerSummary s;
    s.p = p;
    s.b = b;
    s.GM = GM;
    if (p > 0.0) {
        double v0 = std::sqrt(GM / (b * p));
        s.energy_E1 = 0.5 * v0 * v0;
        s.J = b * v0;
        s.v_plus = speed_at_closest(p, b, v0, GM);
        s.eccentricity_e = std::sqrt(1.0 + 16.0 / (p * p)); // = eccentricity(v0^2/2, b v0, GM)
    } else {
        // p -> 0 is the free-streaming limit: infinite specific energy.
        s.energy_E1 = s.J = s.v_plus = s.eccentricity_e = INFINITY;
    }
    auto ca = closest_approach(p, b);
    s.lambda_plus = ca.lambda_plus;
    s.r_plus_exact = ca.r_plus_exact;
    s.alpha = scattering_angle(p, 1e-12, &s.alpha_error);
    return s;
}

std::string to_json(const KeplerSummary& s) {
    std::ostringstream os;
    os << "{\"p\":" << json_num(s.p) << ",\"b\":" << json_num(s.b) << ",\"GM\":" << json_num(s.GM)
       << ",\"energy_E1\":" << json_num(s.energy_E1) << ",\"J\":" << json_num(s.J)
       << ",\"eccentricity_e\":" << json_num(s.eccentricity_e)
       << ",\"lambda_plus\":" << json_num(s.lambda_plus)
       << ",\"r_plus_exact\":" << json_num(s.r_plus_exact) << ",\"alpha\":" << json_num(s.alpha)
       << ",\"alpha_error\":" << json_num(s.alpha_error) << ",\"v_plus\":" << json_num(s.v_plus)
       << "}";
    return os.str();
}

} // namespace tidecap
