#include "tidecap/orbit.hpp"

#include "tidecap/kepler.hpp"
#include "tidecap/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

namespace tidecap {

namespace {

// Tensor-product quadrature over a unit-radius ball: Gauss-Legendre in radius
// times a Gauss-Legendre x uniform-phi rule of the requested spherical degree.
struct BallRule {
    std::vector<Vec3> offsets; // scaled by R at use site
    std::vector<double> weights;

    BallRule(int n_radial, int sph_degree) {
        GaussLegendre glr(n_radial);
        int n_theta = sph_degree / 2 + 1;
        int n_phi = sph_degree + 2 - (sph_degree % 2); // even count keeps antipodal symmetry
        GaussLegendre glt(n_theta);
        const double wphi = 2.0 * M_PI / n_phi;
        for (int ir = 0; ir < n_radial; ++ir) {
            double r = 0.5 * (glr.nodes[ir] + 1.0);
            double wr = 0.5 * glr.weights[ir] * r * r;
            for (int it = 0; it < n_theta; ++it) {
                double ct = glt.nodes[it];
                double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
                for (int ip = 0; ip < n_phi; ++ip) {
                    double phi = wphi * ip;
                    offsets.push_back({r * st * std::cos(phi), r * st * std::sin(phi), r * ct});
                    weights.push_back(wr * glt.weights[it] * wphi);
                }
            }
        }
    }
};

const BallRule& ball_rule(int order) {
    static thread_local int cached_order = -1;
    static thread_local std::unique_ptr<BallRule> rule;
    if (cached_order != order) {
        rule = std::make_unique<BallRule>(order, 2 * order);
        cached_order = order;
    }
    return *rule;
}

// grad(psi_2)(x) with the ball-2 integral evaluated by quadrature; body 2 is
// the (undeformed) ball of radius R centered at -x1.
Vec3 grad_psi2_quadrature(const Vec3& x, const Vec3& x1, const PhysicalParams& prm,
                          const BallRule& rule) {
    const Vec3 c2 = -x1;
    const double rho = prm.rho();
    Vec3 acc{};
    for (std::size_t j = 0; j < rule.offsets.size(); ++j) {
        Vec3 y = c2 + prm.R * rule.offsets[j];
        Vec3 d = x - y;
        double dn = d.norm();
        acc += (rule.weights[j] / (dn * dn * dn)) * d;
    }
    // weights integrate the unit ball; scale to radius R and multiply by G rho.
    return prm.G * rho * prm.R * prm.R * prm.R * acc;
}

Vec3 monopole_plus_quadrupole(const Vec3& x, const Vec3& x1, const PhysicalParams& prm) {
    const double r1 = x1.norm();
    const double eta = prm.R / r1;
    const Vec3 xi = x1 / r1;
    const Vec3 zeta = x - x1;
    const double GM = prm.GM();
    Vec3 term = (GM * eta * eta / (4.0 * prm.R * prm.R)) * xi;
    term += (GM * eta * eta * eta / (8.0 * prm.R * prm.R * prm.R)) *
            (zeta - 3.0 * dot(zeta, xi) * xi);
    return term;
}

// Cartesian quadratic forms of the real l = 2 harmonics: Y_{2m}(n) = Q_m(x)/r^2.
struct SolidQuad {
    double eval(const Vec3& d, int m) const {
        switch (m) {
            case -2: return c2m2 * d.x * d.y;
            case -1: return c21 * d.y * d.z;
            case 0: return c20 * (3.0 * d.z * d.z - d.norm2());
            case 1: return c21 * d.x * d.z;
            default: return c22 * (d.x * d.x - d.y * d.y);
        }
    }
    Vec3 grad(const Vec3& d, int m) const {
        switch (m) {
            case -2: return {c2m2 * d.y, c2m2 * d.x, 0.0};
            case -1: return {0.0, c21 * d.z, c21 * d.y};
            case 0: return {-2.0 * c20 * d.x, -2.0 * c20 * d.y, 4.0 * c20 * d.z};
            case 1: return {c21 * d.z, 0.0, c21 * d.x};
            default: return {2.0 * c22 * d.x, -2.0 * c22 * d.y, 0.0};
        }
    }
    double c20 = 0.25 * std::sqrt(5.0 / M_PI);
    double c21 = 0.5 * std::sqrt(15.0 / M_PI);
    double c2m2 = 0.5 * std::sqrt(15.0 / M_PI);
    double c22 = 0.25 * std::sqrt(15.0 / M_PI);
};

// Acceleration correction from the l = 2 deformation of body 2. The exterior
// potential perturbation of a nearly spherical ball with surface coefficients
// c_{2m} (S_R-orthonormal basis) is
//   delta psi(x) = -(3 GM / 5) sum_m c_{2m} Y_{2m}(d^) / |d|^3,  d = x - center.
Vec3 quadrupole_coupling_accel(const Vec3& x1, const std::array<double, 5>& h2,
                               const PhysicalParams& prm) {
    static const SolidQuad sq;
    const Vec3 d = 2.0 * x1; // from body 2 center (-x1) to the field point x1
    const double dn = d.norm();
    const double d5 = std::pow(dn, 5);
    Vec3 grad{};
    for (int m = -2; m <= 2; ++m) {
        double q = sq.eval(d, m);
        Vec3 gq = sq.grad(d, m);
        // grad(Q/d^5) = gradQ / d^5 - 5 Q d / d^7
        Vec3 g = gq / d5 - (5.0 * q / (d5 * dn * dn)) * d;
        grad += h2[std::size_t(m + 2)] * g;
    }
    return (3.0 * prm.GM() / 5.0) * grad;
}

double bisect(const std::function<double(double)>& f, double t_lo, double t_hi, double f_lo) {
    // Assumes a sign change between t_lo and t_hi.
    for (int it = 0; it < 200; ++it) {
        double tm = 0.5 * (t_lo + t_hi);
        if (tm == t_lo || tm == t_hi) break;
        double fm = f(tm);
        if ((fm > 0) == (f_lo > 0)) {
            t_lo = tm;
            f_lo = fm;
        } else {
            t_hi = tm;
        }
    }
    return 0.5 * (t_lo + t_hi);
}

ClosestApproach make_closest(const OdeSolution& sol, double t0, const PhysicalParams& prm) {
    StateVec y = sol.eval(t0);
    OrbitState s{t0, {y[0], y[1], y[2]}, {y[3], y[4], y[5]}};
    ClosestApproach ca;
    ca.t0 = t0;
    ca.r0 = s.r1();
    ca.E1_at_t0 = s.energy(prm.GM());
    ca.J_at_t0 = s.J_vec().norm();
    double GM = prm.GM();
    double disc = GM * GM + 32.0 * ca.E1_at_t0 * ca.J_at_t0 * ca.J_at_t0;
    ca.r0_pred = disc >= 0.0
                     ? 4.0 * ca.J_at_t0 * ca.J_at_t0 / (std::sqrt(disc) + GM)
                     : std::numeric_limits<double>::quiet_NaN();
    return ca;
}

} // namespace

void ForceClosure::validate() const {
    if (kind != ClosureKind::PointMass && quadrature_order < 4)
        throw std::domain_error("closure: quadrature_order must be >= 4 for ball closures");
    if (kind == ClosureKind::QuadrupoleCoupled && !coupling)
        throw std::domain_error("closure: QuadrupoleCoupled requires a mode supplier");
}

Vec3 accel(const OrbitState& state, const ForceClosure& closure, const PhysicalParams& params) {
    closure.validate();
    const double r1 = state.r1();
    if (!(r1 > 0.0)) throw std::domain_error("accel: r1 must be positive");
    const double GM = params.GM();
    Vec3 point = (-GM / (4.0 * r1 * r1 * r1)) * state.x1;
    switch (closure.kind) {
        case ClosureKind::PointMass:
            return point;
        case ClosureKind::RigidBallQuadrature: {
            if (r1 <= params.R)
                throw std::domain_error("accel: bodies overlap (r1 <= R)");
            const BallRule& rule = ball_rule(closure.quadrature_order);
            Vec3 av{};
            double wsum = 0.0;
            for (std::size_t i = 0; i < rule.offsets.size(); ++i) {
                Vec3 x = state.x1 + params.R * rule.offsets[i];
                av += rule.weights[i] * grad_psi2_quadrature(x, state.x1, params, rule);
                wsum += rule.weights[i];
            }
            return (-1.0 / wsum) * av;
        }
        case ClosureKind::QuadrupoleCoupled: {
            if (r1 <= params.R)
                throw std::domain_error("accel: bodies overlap (r1 <= R)");
            std::array<double, 5> h2{};
            closure.coupling(state.t, h2);
            return point + quadrupole_coupling_accel(state.x1, h2, params);
        }
    }
    return point;
}

Vec3 accel_with_modes(const OrbitState& state, const std::array<double, 5>& h2,
                      const PhysicalParams& params) {
    const double r1 = state.r1();
    if (r1 <= params.R) throw std::domain_error("accel: bodies overlap (r1 <= R)");
    Vec3 point = (-params.GM() / (4.0 * r1 * r1 * r1)) * state.x1;
    return point + quadrupole_coupling_accel(state.x1, h2, params);
}

Vec3 multipole_remainder_field(const Vec3& x, const OrbitState& state,
                               const PhysicalParams& params, int quadrature_order) {
    const BallRule& rule = ball_rule(quadrature_order);
    return grad_psi2_quadrature(x, state.x1, params, rule) -
           monopole_plus_quadrupole(x, state.x1, params);
}

Vec3 multipole_remainder_average(const OrbitState& state, const PhysicalParams& params,
                                 int quadrature_order) {
    const BallRule& rule = ball_rule(quadrature_order);
    Vec3 av{};
    double wsum = 0.0;
    for (std::size_t i = 0; i < rule.offsets.size(); ++i) {
        Vec3 x = state.x1 + params.R * rule.offsets[i];
        av += rule.weights[i] * multipole_remainder_field(x, state, params, quadrature_order);
        wsum += rule.weights[i];
    }
    return av / wsum;
}

double multipole_remainder_surface_ratio(const OrbitState& state, const PhysicalParams& params,
                                         int quadrature_order) {
    const double eta = state.eta(params.R);
    const double scale = params.GM() * std::pow(eta, 4) / (params.R * params.R);
    const Vec3 xi = state.xi1();
    // Orthonormal frame adapted to the line of centers.
    Vec3 a = std::abs(xi.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
    Vec3 e1 = cross(xi, a).unit();
    Vec3 e2 = cross(xi, e1);
    double worst = 0.0;
    for (int i = 0; i < 12; ++i) {
        double th = M_PI * i / 11.0;
        Vec3 n = std::cos(th) * xi + std::sin(th) * e1;
        Vec3 e = multipole_remainder_field(state.x1 + params.R * n, state, params,
                                           quadrature_order);
        worst = std::max(worst, e.norm());
        n = std::cos(th) * xi + std::sin(th) * e2;
        e = multipole_remainder_field(state.x1 + params.R * n, state, params, quadrature_order);
        worst = std::max(worst, e.norm());
    }
    return worst / scale;
}

OrbitState launch_state(const PhysicalParams& params, LaunchMode mode, double R1) {
    params.validate();
    if (mode == LaunchMode::Ballistic) {
        if (!(R1 >= params.b)) throw std::domain_error("launch: R1 must be >= b");
        double R0 = std::sqrt(R1 * R1 - params.b * params.b);
        return {0.0, {-params.b, R0, 0.0}, {0.0, -params.v0, 0.0}};
    }
    // Exact incoming hyperbola with asymptotic (b, v0): incoming asymptote is
    // the line x = -b directed along -y, so J = b v0 z^ and E1 = v0^2 / 2.
    const double GM = params.GM();
    const double gamma = GM / 4.0;
    const double J = params.b * params.v0;
    const double E1 = 0.5 * params.v0 * params.v0;
    const double e = std::sqrt(1.0 + 2.0 * E1 * J * J / (gamma * gamma));
    const double slr = J * J / gamma; // semi-latus rectum
    const double rp = slr / (1.0 + e);
    if (R1 < rp) throw std::domain_error("launch: R1 inside the conic periapsis");
    double ct = std::clamp((slr / R1 - 1.0) / e, -1.0, 1.0);
    const double theta = -std::acos(ct); // incoming branch
    const double theta_lim = std::acos(std::clamp(-1.0 / e, -1.0, 1.0));
    const double phi_p = 0.5 * M_PI + theta_lim; // periapsis azimuth
    const double ang = phi_p + theta;
    Vec3 rhat{std::cos(ang), std::sin(ang), 0.0};
    Vec3 that{-std::sin(ang), std::cos(ang), 0.0};
    double rdot2 = 2.0 * E1 + GM / (2.0 * R1) - J * J / (R1 * R1);
    double rdot = -std::sqrt(std::max(0.0, rdot2));
    return {0.0, R1 * rhat, rdot * rhat + (J / R1) * that};
}

OrbitState Trajectory::state(double t) const {
    StateVec y = sol_.eval(t);
    return {std::clamp(t, sol_.t_begin(), sol_.t_end()), {y[0], y[1], y[2]}, {y[3], y[4], y[5]}};
}

double Trajectory::time_at_radius_inbound(double r) const {
    double t_lo = sol_.t_begin();
    double t_hi = closest_ ? closest_->t0 : sol_.t_end();
    double r_lo = state(t_lo).r1(), r_hi = state(t_hi).r1();
    if (r > r_lo || r < r_hi)
        throw std::domain_error("time_at_radius_inbound: radius outside inbound span");
    auto f = [&](double t) { return state(t).r1() - r; };
    return bisect(f, t_lo, t_hi, r_lo - r);
}

Trajectory integrate(const PhysicalParams& params, const ForceClosure& closure,
                     const StopCondition& stop, const IntegrateOptions& opt) {
    params.validate();
    closure.validate();
    double R1 = opt.R1;
    if (R1 == 0.0) R1 = params.R1;
    if (R1 == 0.0) {
        double p = params.GM() / (params.b * params.v0 * params.v0);
        R1 = 50.0 * closest_approach(p, params.b).r_plus_exact;
    }
    OrbitState init = launch_state(params, opt.launch, R1);

    OdeRhs rhs = [&params, &closure](double t, const StateVec& y, StateVec& dydt) {
        OrbitState s{t, {y[0], y[1], y[2]}, {y[3], y[4], y[5]}};
        Vec3 a = accel(s, closure, params);
        dydt.resize(6);
        dydt[0] = y[3];
        dydt[1] = y[4];
        dydt[2] = y[5];
        dydt[3] = a.x;
        dydt[4] = a.y;
        dydt[5] = a.z;
    };

    OdeOptions oo;
    oo.rtol = opt.rtol;
    oo.atol = 0.0;
    // Component scales: positions ~ R1, velocities ~ local speed scale.
    double vscale = std::max({params.v0, std::sqrt(params.GM() / (2.0 * R1)),
                              std::sqrt(params.GM() / params.R) * 1e-6});
    oo.atol_per_component = {opt.rtol * R1,    opt.rtol * R1,    opt.rtol * R1,
                             opt.rtol * vscale, opt.rtol * vscale, opt.rtol * vscale};

    double t_final;
    if (stop.kind == StopCondition::Kind::TimeHorizon) {
        t_final = stop.value;
    } else {
        double tfall = R1 / std::max(params.v0, 1e-300);
        double tff = 4.0 * std::pow(R1, 1.5) / std::sqrt(params.GM());
        t_final = 1000.0 * std::max(tfall, tff);
    }

    StateVec y0 = {init.x1.x, init.x1.y, init.x1.z, init.v1.x, init.v1.y, init.v1.z};

    std::optional<ClosestApproach> closest;
    double t_stop = t_final;
    bool stopped = false;
    const bool point_mass = closure.kind == ClosureKind::PointMass;

    DormandPrince5::Monitor monitor = [&](const OdeSolution& sol, double t_prev, double t_now,
                                          const StateVec& y) -> bool {
        OrbitState s{t_now, {y[0], y[1], y[2]}, {y[3], y[4], y[5]}};
        if (!point_mass && s.r1() <= params.R)
            throw std::domain_error("integrate: bodies overlap (r1 <= R)");
        auto radial_speed = [&](double t) {
            StateVec yy = sol.eval(t);
            return yy[0] * yy[3] + yy[1] * yy[4] + yy[2] * yy[5];
        };
        auto radius = [&](double t) {
            StateVec yy = sol.eval(t);
            return Vec3{yy[0], yy[1], yy[2]}.norm();
        };
        if (!closest && radial_speed(t_now) > 0.0) {
            double f_lo = radial_speed(t_prev);
            double t0 = f_lo >= 0.0 ? t_prev : bisect(radial_speed, t_prev, t_now, f_lo);
            closest = make_closest(sol, t0, params);
        }
        switch (stop.kind) {
            case StopCondition::Kind::TimeHorizon:
                return false;
            case StopCondition::Kind::RadiusBelow: {
                if (radius(t_now) <= stop.value) {
                    double f_lo = radius(t_prev) - stop.value;
                    t_stop = bisect([&](double t) { return radius(t) - stop.value; }, t_prev,
                                    t_now, f_lo);
                    stopped = true;
                    return true;
                }
                if (closest && closest->r0 > stop.value)
                    throw std::domain_error("integrate: radius target below periapsis");
                return false;
            }
            case StopCondition::Kind::ClosestApproachMargin: {
                if (!closest) return false;
                double r_exit = std::min(stop.value * closest->r0, radius(sol.t_begin()));
                if (radius(t_now) >= r_exit) {
                    double f_lo = radius(t_prev) - r_exit;
                    t_stop = bisect([&](double t) { return radius(t) - r_exit; }, t_prev, t_now,
                                    f_lo);
                    stopped = true;
                    return true;
                }
                return false;
            }
        }
        return false;
    };

    DormandPrince5 solver(rhs, oo);
    OdeSolution sol = solver.integrate(0.0, y0, t_final, monitor);
    if (stopped) sol.truncate(t_stop);

    PhysicalParams run_params = params;
    run_params.R1 = R1;
    Trajectory traj(run_params, closure, std::move(sol));
    if (closest) traj.set_closest(*closest);
    return traj;
}

std::optional<ClosestApproach> detect_closest_approach(const Trajectory& traj) {
    if (traj.closest()) return traj.closest();
    const OdeSolution& sol = traj.solution();
    auto g = [&](double t) {
        OrbitState s = traj.state(t);
        return dot(s.x1, s.v1);
    };
    double t_prev = sol.t_begin();
    double g_prev = g(t_prev);
    for (const OdeStepRecord& st : sol.steps()) {
        double t1 = std::min(st.t1, sol.t_end());
        double g1 = g(t1);
        if (g_prev < 0.0 && g1 >= 0.0) {
            double t0 = bisect(g, t_prev, t1, g_prev);
            return make_closest(sol, t0, traj.params());
        }
        t_prev = t1;
        g_prev = g1;
        if (t1 >= sol.t_end()) break;
    }
    return std::nullopt;
}

StageReport stage_bounds_report(const Trajectory& traj, const DerivedGroups& groups,
                                int samples_per_stage) {
    const PhysicalParams& prm = traj.params();
    const double GM = prm.GM(), R = prm.R;
    const double c0 = groups.c0, beta = groups.beta;
    StageReport rep;
    rep.regime_warning = (beta < 100.0) || (c0 >= 1.0);

    auto ca = detect_closest_approach(traj);
    if (!ca) throw std::domain_error("stage_bounds_report: trajectory has no closest approach");
    const double r0 = ca->r0;
    const double r_begin = traj.state(traj.t_begin()).r1();

    const double far_lo = R * std::pow(c0, -2.0) * std::pow(beta, 12.0 / 7.0);
    const double mid_lo = 3.0 * R * c0 * c0 * std::pow(beta, 2.0 / 7.0);
    const double near_hi = 4.0 * R * c0 * c0 * std::pow(beta, 2.0 / 7.0);
    const double vunit = std::sqrt(GM / R);

    auto scan = [&](double lo, double hi, auto&& denom_r1dot, auto&& denom_v1, StageBand& band) {
        lo = std::max(lo, r0 * (1.0 + 1e-10));
        hi = std::min(hi, r_begin);
        if (!(lo < hi)) return;
        band.present = true;
        band.r_lo = lo;
        band.r_hi = hi;
        band.ratio_r1dot_min = band.ratio_v1_min = std::numeric_limits<double>::infinity();
        for (int i = 0; i < samples_per_stage; ++i) {
            double f = double(i) / (samples_per_stage - 1);
            double r = lo * std::pow(hi / lo, f);
            double t = traj.time_at_radius_inbound(r);
            OrbitState s = traj.state(t);
            double q1 = std::abs(s.r1dot()) / denom_r1dot(r);
            double q2 = s.v1.norm() / denom_v1(r);
            band.ratio_r1dot_min = std::min(band.ratio_r1dot_min, q1);
            band.ratio_r1dot_max = std::max(band.ratio_r1dot_max, q1);
            band.ratio_v1_min = std::min(band.ratio_v1_min, q2);
            band.ratio_v1_max = std::max(band.ratio_v1_max, q2);
        }
    };

    double far_norm = vunit * c0 * std::pow(beta, -6.0 / 7.0);
    scan(far_lo, r_begin, [&](double) { return far_norm; }, [&](double) { return far_norm; },
         rep.far);
    scan(mid_lo, far_lo, [&](double r) { return vunit * std::sqrt(R / r); },
         [&](double r) { return vunit * std::sqrt(R / r); }, rep.mid);
    double near_v = vunit * std::pow(beta, -1.0 / 7.0) / c0;
    double near_c = std::sqrt(GM) * std::pow(beta, -2.0 / 7.0) / (c0 * c0 * R);
    scan(r0 * (1.0 + 1e-8), near_hi,
         [&](double r) { return near_c * std::sqrt(std::max(r - r0, 1e-300)); },
         [&](double) { return near_v; }, rep.near);

    // |r1'|^2 vs (r1 - r0) over the innermost slice of the near stage.
    {
        double x_max = rep.fit_window * r0;
        x_max = std::min(x_max, std::min(near_hi, r_begin) - r0);
        int n = 50;
        double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
        std::vector<double> xs, ys;
        for (int i = 1; i <= n; ++i) {
            double x = x_max * i / n;
            double t = traj.time_at_radius_inbound(r0 + x);
            OrbitState s = traj.state(t);
            double y = s.r1dot() * s.r1dot();
            xs.push_back(x);
            ys.push_back(y);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            syy += y * y;
        }
        double denom = n * sxx - sx * sx;
        rep.fit_slope = (n * sxy - sx * sy) / denom;
        rep.fit_intercept = (sy - rep.fit_slope * sx) / n;
        double ss_res = 0, ss_tot = 0, ymean = sy / n;
        for (int i = 0; i < n; ++i) {
            double pred = rep.fit_slope * xs[i] + rep.fit_intercept;
            ss_res += (ys[i] - pred) * (ys[i] - pred);
            ss_tot += (ys[i] - ymean) * (ys[i] - ymean);
        }
        rep.fit_r2 = 1.0 - ss_res / ss_tot;
    }
    return rep;
}

ResidualSeries evolution_law_residuals(const Trajectory& traj, const ForceClosure& closure,
                                       int n_samples) {
    const PhysicalParams& prm = traj.params();
    const double GM = prm.GM();
    ResidualSeries out;
    double t_a = traj.t_begin(), t_b = traj.t_end();
    for (int i = 0; i < n_samples; ++i) {
        double t = t_a + (t_b - t_a) * (i + 0.5) / n_samples;
        OrbitState s = traj.state(t);
        double tau = s.r1() / std::max(s.v1.norm(), 1e-300);
        double h = std::min(0.01 * tau, 0.25 * std::min(t - t_a, t_b - t));
        if (!(h > 0.0)) continue;
        auto E = [&](double tt) { return traj.state(tt).energy(GM); };
        auto Jv = [&](double tt) { return traj.state(tt).J_vec(); };
        // Five-point central differences.
        double dE = (-E(t + 2 * h) + 8 * E(t + h) - 8 * E(t - h) + E(t - 2 * h)) / (12 * h);
        Vec3 dJ = (-Jv(t + 2 * h) + 8.0 * Jv(t + h) - 8.0 * Jv(t - h) + Jv(t - 2 * h)) /
                  (12 * h);
        Vec3 av = closure.kind == ClosureKind::PointMass
                      ? Vec3{}
                      : multipole_remainder_average(s, prm, closure.quadrature_order);
        double resE = std::abs(dE + dot(av, s.v1));
        double resJ = (dJ - cross(av, s.x1)).norm();
        double eta = s.eta(prm.R);
        double rate_ratio = std::abs(dE) * prm.R * prm.R /
                            (GM * std::pow(eta, 4) * std::max(s.v1.norm(), 1e-300));
        out.t.push_back(t);
        out.energy_residual.push_back(resE);
        out.momentum_residual.push_back(resJ);
        out.energy_rate_ratio.push_back(rate_ratio);
        out.max_energy_residual = std::max(out.max_energy_residual, resE);
        out.max_momentum_residual = std::max(out.max_momentum_residual, resJ);
        out.max_energy_rate_ratio = std::max(out.max_energy_rate_ratio, rate_ratio);
    }
    return out;
}

double eta_integration_constant(const Trajectory& traj, int m) {
    const PhysicalParams& prm = traj.params();
    // The bound holds on the inbound phase (r1 >= r0, r1 decreasing).
    auto ca = detect_closest_approach(traj);
    const double t_stop = ca ? ca->t0 : traj.t_end();
    GaussLegendre gl(6);
    double integral = 0.0, worst = 0.0;
    double t_prev = traj.t_begin();
    for (const OdeStepRecord& st : traj.solution().steps()) {
        double t1 = std::min(st.t1, t_stop);
        integral += gl.integrate(
            [&](double t) {
                OrbitState s = traj.state(t);
                return std::pow(s.eta(prm.R), m + 1) * s.v1.norm();
            },
            t_prev, t1);
        OrbitState s = traj.state(t1);
        double bound = prm.R * std::pow(s.eta(prm.R), m);
        worst = std::max(worst, integral / bound);
        t_prev = t1;
        if (t1 >= t_stop) break;
    }
    return worst;
}

double third_derivative_residual(const Trajectory& traj, int n_samples) {
    const PhysicalParams& prm = traj.params();
    const double GM = prm.GM();
    auto r2dot = [&](double t) {
        OrbitState s = traj.state(t);
        double r = s.r1();
        double J = s.J_vec().norm();
        return -GM / (4.0 * r * r) + J * J / (r * r * r);
    };
    double worst = 0.0;
    double t_a = traj.t_begin(), t_b = traj.t_end();
    for (int i = 0; i < n_samples; ++i) {
        double t = t_a + (t_b - t_a) * (i + 0.5) / n_samples;
        OrbitState s = traj.state(t);
        double tau = s.r1() / std::max(s.v1.norm(), 1e-300);
        double h = std::min(0.005 * tau, 0.25 * std::min(t - t_a, t_b - t));
        if (!(h > 0.0)) continue;
        double fd = (-r2dot(t + 2 * h) + 8 * r2dot(t + h) - 8 * r2dot(t - h) +
                     r2dot(t - 2 * h)) /
                    (12 * h);
        double r = s.r1(), rd = s.r1dot();
        double J = s.J_vec().norm();
        double formula = GM * rd / (2.0 * r * r * r) - 3.0 * J * J * rd / (r * r * r * r);
        double scale = std::abs(formula) + GM * s.v1.norm() / (4.0 * r * r * r);
        worst = std::max(worst, std::abs(fd - formula) / scale);
    }
    return worst;
}

double time_reversal_error(const Trajectory& traj) {
    auto ca = detect_closest_approach(traj);
    if (!ca) throw std::domain_error("time_reversal_error: no closest approach");
    OrbitState s = traj.state(ca->t0);
    PhysicalParams prm = traj.params();
    ForceClosure closure = traj.closure();
    OdeRhs rhs = [&prm, &closure](double t, const StateVec& y, StateVec& dydt) {
        OrbitState st{t, {y[0], y[1], y[2]}, {y[3], y[4], y[5]}};
        Vec3 a = accel(st, closure, prm);
        dydt = {y[3], y[4], y[5], a.x, a.y, a.z};
    };
    OdeOptions oo;
    oo.rtol = 1e-11;
    oo.atol = 1e-14 * prm.R1;
    DormandPrince5 solver(rhs, oo);
    StateVec y0 = {s.x1.x, s.x1.y, s.x1.z, -s.v1.x, -s.v1.y, -s.v1.z};
    double span = ca->t0 - traj.t_begin();
    OdeSolution back = solver.integrate(0.0, y0, span);
    StateVec yb = back.eval(span);
    OrbitState start = traj.state(traj.t_begin());
    Vec3 xb{yb[0], yb[1], yb[2]};
    return (xb - start.x1).norm() / start.x1.norm();
}

double trajectory_deflection_angle(const Trajectory& traj) {
    OrbitState s = traj.state(traj.t_end());
    const double gamma = traj.params().GM() / 4.0;
    Vec3 evec = cross(s.v1, s.J_vec()) / gamma - s.xi1();
    double e = evec.norm();
    if (e <= 1.0)
        throw std::domain_error("trajectory_deflection_angle: trajectory is not hyperbolic");
    return 2.0 * std::acos(-1.0 / e) - M_PI;
}

} // namespace tidecap
