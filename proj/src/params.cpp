#include "tidecap/params.hpp"

#include "tidecap/kepler.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tidecap {

double PhysicalParams::rho() const { return M / ball_volume(); }
double PhysicalParams::ball_volume() const { return 4.0 * M_PI / 3.0 * R * R * R; }

void PhysicalParams::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw std::domain_error(std::string("params: ") + name + " must be positive");
    };
    positive(G, "G");
    positive(M, "M");
    positive(R, "R");
    positive(b, "b");
    positive(v0, "v0");
    // R1 >= b is required only by the ballistic launch geometry; the conic
    // launch needs just R1 > periapsis. Checked in launch_state.
    if (R1 != 0.0) positive(R1, "R1");
}

DerivedGroups derive(const PhysicalParams& params, double alpha_exp, bool validate_regime) {
    params.validate();
    DerivedGroups g;
    g.alpha_exp = alpha_exp;
    g.p = params.GM() / (params.b * params.v0 * params.v0);
    g.beta = params.b / params.R;
    g.r_plus = 2.0 * params.b / g.p;
    g.lambda_plus = closest_approach(g.p, params.b).lambda_plus;
    g.r_plus_exact = params.b * g.lambda_plus;
    g.eta_plus = params.R / g.r_plus;
    const double v_unit = std::sqrt(params.GM() / params.R);
    g.kappa = params.v0 / v_unit * std::pow(g.beta, alpha_exp);
    g.c0 = g.kappa * std::pow(g.beta, 6.0 / 7.0 - alpha_exp);
    g.capture_index = std::pow(g.eta_plus, 5) * g.p * g.p;
    if (validate_regime && (alpha_exp < 6.0 / 7.0 || alpha_exp > 1.0))
        throw std::domain_error("params: alpha_exp outside [6/7, 1]");
    return g;
}

ScaledParams nondimensionalize(const PhysicalParams& params) {
    params.validate();
    ScaledParams s;
    s.length_scale = params.R;
    s.time_scale = std::sqrt(params.R * params.R * params.R / params.GM());
    s.velocity_scale = std::sqrt(params.GM() / params.R);
    s.energy_scale = params.GM() / params.R;
    s.mass_scale = params.M;
    s.internal.G = 1.0;
    s.internal.M = 1.0;
    s.internal.R = 1.0;
    s.internal.b = params.b / s.length_scale;
    s.internal.v0 = params.v0 / s.velocity_scale;
    s.internal.R1 = params.R1 / s.length_scale;
    return s;
}

PhysicalParams ScaledParams::to_input() const {
    PhysicalParams p = internal;
    p.G = energy_scale * length_scale / mass_scale;
    p.M = mass_scale;
    p.R = length_scale;
    p.b = internal.b * length_scale;
    p.v0 = internal.v0 * velocity_scale;
    p.R1 = internal.R1 * length_scale;
    return p;
}

std::string to_json(const DerivedGroups& g) {
    std::ostringstream os;
    os.precision(17);
    os << "{\"p\":" << g.p << ",\"beta\":" << g.beta << ",\"r_plus\":" << g.r_plus
       << ",\"r_plus_exact\":" << g.r_plus_exact << ",\"lambda_plus\":" << g.lambda_plus
       << ",\"eta_plus\":" << g.eta_plus << ",\"kappa\":" << g.kappa
       << ",\"alpha_exp\":" << g.alpha_exp << ",\"c0\":" << g.c0
       << ",\"capture_index\":" << g.capture_index << "}";
    return os.str();
}

} // namespace tidecap
