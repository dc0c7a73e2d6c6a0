#include "tidecap/sphere.hpp"

#include "tidecap/io_util.hpp"
#include "tidecap/quadrature.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tidecap {

namespace {

// Associated Legendre P_l^m without Condon-Shortley phase, standard upward
// recurrence in l at fixed m.
double assoc_legendre_nocs(int l, int m, double x) {
    double somx2 = std::sqrt(std::max(0.0, (1.0 - x) * (1.0 + x)));
    double pmm = 1.0;
    for (int i = 1; i <= m; ++i) pmm *= (2.0 * i - 1.0) * somx2;
    if (l == m) return pmm;
    double pmmp1 = x * (2.0 * m + 1.0) * pmm;
    if (l == m + 1) return pmmp1;
    double pll = 0.0;
    for (int ll = m + 2; ll <= l; ++ll) {
        pll = (x * (2.0 * ll - 1.0) * pmmp1 - (ll + m - 1.0) * pmm) / (ll - m);
        pmm = pmmp1;
        pmmp1 = pll;
    }
    return pll;
}

double sh_norm(int l, int m) {
    // sqrt((2l+1)/(4pi) (l-m)!/(l+m)!)
    double lf = 0.0;
    for (int k = l - m + 1; k <= l + m; ++k) lf += std::log(double(k));
    return std::sqrt((2.0 * l + 1.0) / (4.0 * M_PI) * std::exp(-lf));
}

} // namespace

double legendre_p(int l, double x) { return assoc_legendre_nocs(l, 0, x); }

double real_sh(int l, int m, const Vec3& n) {
    if (l < 0 || std::abs(m) > l) throw std::domain_error("real_sh: invalid (l, m)");
    double ct = n.z;
    double phi = std::atan2(n.y, n.x);
    int ma = std::abs(m);
    double plm = assoc_legendre_nocs(l, ma, ct);
    double nf = sh_norm(l, ma);
    if (m == 0) return nf * plm;
    if (m > 0) return M_SQRT2 * nf * plm * std::cos(ma * phi);
    return M_SQRT2 * nf * plm * std::sin(ma * phi);
}

SphereGrid SphereGrid::make(int degree, double R) {
    if (degree < 0) throw std::domain_error("SphereGrid: degree must be >= 0");
    if (!(R > 0.0)) throw std::domain_error("SphereGrid: R must be positive");
    SphereGrid g;
    g.R = R;
    g.degree = degree;
    int n_theta = degree / 2 + 1; // exact through cos-degree 2 n_theta - 1 >= degree
    int n_phi = degree + 1;
    GaussLegendre gl(n_theta);
    g.nodes.reserve(std::size_t(n_theta) * n_phi);
    g.weights.reserve(std::size_t(n_theta) * n_phi);
    const double wphi = 2.0 * M_PI / n_phi;
    for (int i = 0; i < n_theta; ++i) {
        double ct = gl.nodes[i];
        double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        for (int j = 0; j < n_phi; ++j) {
            double phi = wphi * j;
            g.nodes.push_back({st * std::cos(phi), st * std::sin(phi), ct});
            g.weights.push_back(R * R * gl.weights[i] * wphi);
        }
    }
    return g;
}

std::vector<double> sh_analyze(const std::vector<double>& samples, const SphereGrid& grid,
                               int l_max) {
    if (samples.size() != grid.nodes.size())
        throw std::domain_error("sh_analyze: sample count does not match grid");
    std::vector<double> coeffs(sh_count(l_max), 0.0);
    for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
        double wf = grid.weights[i] * samples[i] / grid.R;
        for (int l = 0; l <= l_max; ++l)
            for (int m = -l; m <= l; ++m) coeffs[sh_index(l, m)] += wf * real_sh(l, m, grid.nodes[i]);
    }
    return coeffs;
}

std::vector<double> sh_synthesize(const std::vector<double>& coeffs, const SphereGrid& grid) {
    int l_max = int(std::lround(std::sqrt(double(coeffs.size())))) - 1;
    if (sh_count(l_max) != int(coeffs.size()))
        throw std::domain_error("sh_synthesize: coefficient count is not (L+1)^2");
    std::vector<double> samples(grid.nodes.size(), 0.0);
    for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
        double acc = 0.0;
        for (int l = 0; l <= l_max; ++l)
            for (int m = -l; m <= l; ++m)
                acc += coeffs[sh_index(l, m)] * real_sh(l, m, grid.nodes[i]);
        samples[i] = acc / grid.R;
    }
    return samples;
}

double double_layer_multiplier(int l) { return 1.0 / (2.0 * l + 1.0); }
double single_layer_multiplier(int l, double R) { return -R / (2.0 * l + 1.0); }
double dirichlet_neumann_multiplier(int l, double R) { return l / R; }

namespace {
std::vector<double> apply_multiplier(const std::vector<double>& coeffs,
                                     double (*mult)(int, double), double R) {
    int l_max = int(std::lround(std::sqrt(double(coeffs.size())))) - 1;
    std::vector<double> out(coeffs.size());
    for (int l = 0; l <= l_max; ++l) {
        double f = mult(l, R);
        for (int m = -l; m <= l; ++m) out[sh_index(l, m)] = f * coeffs[sh_index(l, m)];
    }
    return out;
}
} // namespace

std::vector<double> double_layer_apply(const std::vector<double>& coeffs) {
    return apply_multiplier(coeffs, [](int l, double) { return double_layer_multiplier(l); }, 0.0);
}
std::vector<double> single_layer_apply(const std::vector<double>& coeffs, double R) {
    return apply_multiplier(coeffs, &single_layer_multiplier, R);
}
std::vector<double> dirichlet_neumann_apply(const std::vector<double>& coeffs, double R) {
    return apply_multiplier(coeffs, &dirichlet_neumann_multiplier, R);
}

double offsurface_potential_oracle(int l, int m, double r_ratio, const SphereGrid& grid) {
    if (!(r_ratio > 1.0))
        throw std::domain_error("offsurface_potential_oracle: r_ratio must exceed 1");
    if (grid.degree < 2 * l + 4)
        throw std::domain_error("offsurface_potential_oracle: grid degree below 2l + 4");
    // Fixed probe directions, none on coordinate axes so no Y_{lm} nodal lines
    // are systematically hit.
    static const Vec3 probes_raw[] = {
        {0.3, 0.5, 0.81}, {-0.7, 0.2, 0.4},  {0.9, -0.3, 0.2},  {-0.2, -0.8, 0.5},
        {0.6, 0.6, -0.5}, {-0.4, 0.3, -0.85}, {0.1, -0.6, -0.75}, {-0.55, -0.45, -0.6}};
    double max_dev = 0.0, max_exact = 0.0;
    const double r = r_ratio;
    for (const Vec3& p : probes_raw) {
        Vec3 xi = p.unit();
        double quad = 0.0;
        for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
            const Vec3& xp = grid.nodes[i];
            double dist = (xp - r * xi).norm();
            quad += grid.weights[i] / (grid.R * grid.R) * real_sh(l, m, xp) / dist;
        }
        quad /= 4.0 * M_PI;
        double exact = std::pow(r, -l - 1) * real_sh(l, m, xi) / (2.0 * l + 1.0);
        max_dev = std::max(max_dev, std::abs(quad - exact));
        max_exact = std::max(max_exact, std::abs(exact));
    }
    return max_dev / max_exact;
}

BallSelfPotential ball_self_potential(double R, double rho, double G) {
    if (!(R > 0.0) || !(rho > 0.0) || !(G > 0.0))
        throw std::domain_error("ball_self_potential: inputs must be positive");
    double M = 4.0 * M_PI / 3.0 * R * R * R * rho;
    double volume = 4.0 * M_PI / 3.0 * R * R * R;
    BallSelfPotential out;
    out.closed_form = -3.0 * G * M * volume / (5.0 * R);
    // Interior potential of a uniform ball: psi(r) = -2 pi G rho (R^2 - r^2/3).
    GaussLegendre gl(24);
    out.quadrature = gl.integrate(
        [&](double r) {
            double psi = -2.0 * M_PI * G * rho * (R * R - r * r / 3.0);
            return 0.5 * psi * 4.0 * M_PI * r * r;
        },
        0.0, R);
    return out;
}

std::string operator_report_json(int l_max, int grid_degree) {
    SphereGrid grid = SphereGrid::make(std::max(grid_degree, 2 * l_max + 4), 1.0);
    // Multiplier checks against quadrature-projected identities.
    double max_gram_err = 0.0;
    for (int l = 0; l <= l_max; ++l)
        for (int m = -l; m <= l; ++m)
            for (int l2 = 0; l2 <= l_max; ++l2)
                for (int m2 = -l2; m2 <= l2; ++m2) {
                    double ip = grid.integrate([&](const Vec3& n) {
                        return real_sh(l, m, n) * real_sh(l2, m2, n);
                    });
                    double expect = (l == l2 && m == m2) ? 1.0 : 0.0;
                    max_gram_err = std::max(max_gram_err, std::abs(ip - expect));
                }
    double max_composite_err = 0.0;
    for (int l = 0; l <= l_max; ++l) {
        double composite = dirichlet_neumann_multiplier(l, 1.0) *
                           (1.0 - 3.0 * double_layer_multiplier(l));
        double a_l = 2.0 * l * (l - 1.0) / (2.0 * l + 1.0);
        max_composite_err = std::max(max_composite_err, std::abs(composite - a_l));
    }
    double worst_oracle = 0.0;
    for (int l = 0; l <= std::min(l_max, 6); ++l)
        worst_oracle = std::max(worst_oracle,
                                offsurface_potential_oracle(l, std::min(l, 1), 1.5, grid));
    BallSelfPotential pot = ball_self_potential(1.0, 3.0 / (4.0 * M_PI), 1.0);

    std::ostringstream os;
    os << "{\"l_max\":" << l_max << ",\"grid_degree\":" << grid.degree
       << ",\"gram_identity_max_err\":" << json_num(max_gram_err)
       << ",\"composite_mode_frequency_max_err\":" << json_num(max_composite_err)
       << ",\"offsurface_oracle_max_rel_err\":" << json_num(worst_oracle)
       << ",\"ball_self_potential_closed\":" << json_num(pot.closed_form)
       << ",\"ball_self_potential_quadrature\":" << json_num(pot.quadrature)
       << ",\"ball_self_potential_rel_err\":"
       << json_num(std::abs(pot.closed_form - pot.quadrature) / std::abs(pot.closed_form))
       << "}";
    return os.str();
}

} // namespace tidecap
