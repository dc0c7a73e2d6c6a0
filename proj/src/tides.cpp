#include "tidecap/tides.hpp"

#include "tidecap/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tidecap {

namespace {

double block_norm(const std::vector<double>& c, int l) {
    double acc = 0.0;
    for (int m = -l; m <= l; ++m) acc += c[sh_index(l, m)] * c[sh_index(l, m)];
    return std::sqrt(acc);
}

double off_block_norm(const std::vector<double>& c, int l_excluded, int l_max) {
    double acc = 0.0;
    for (int l = 0; l <= l_max; ++l) {
        if (l == l_excluded) continue;
        for (int m = -l; m <= l; ++m) acc += c[sh_index(l, m)] * c[sh_index(l, m)];
    }
    return std::sqrt(acc);
}

struct Arr5 {
    std::array<double, 5> v{};
    Arr5& operator+=(const Arr5& o) {
        for (int i = 0; i < 5; ++i) v[i] += o.v[i];
        return *this;
    }
    Arr5 operator*(double s) const {
        Arr5 r;
        for (int i = 0; i < 5; ++i) r.v[i] = v[i] * s;
        return r;
    }
};

} // namespace

double mode_frequency(int l, double GM, double R) {
    if (l < 0) throw std::domain_error("mode_frequency: l must be >= 0");
    return GM / (R * R * R) * 2.0 * l * (l - 1.0) / (2.0 * l + 1.0);
}

double ModeSpectrum::norm_h(int l) const { return block_norm(h, l); }
double ModeSpectrum::norm_hdot(int l) const { return block_norm(hdot, l); }
double ModeSpectrum::norm_h_total() const {
    double acc = 0.0;
    for (double c : h) acc += c * c;
    return std::sqrt(acc);
}
double ModeSpectrum::norm_hdot_total() const {
    double acc = 0.0;
    for (double c : hdot) acc += c * c;
    return std::sqrt(acc);
}

double ModeSample::norm_h2() const {
    double acc = 0.0;
    for (double c : h2) acc += c * c;
    return std::sqrt(acc);
}
double ModeSample::norm_h2dot() const {
    double acc = 0.0;
    for (double c : h2dot) acc += c * c;
    return std::sqrt(acc);
}

SourceTerm source_coefficients(const OrbitState& state, const PhysicalParams& params) {
    SourceTerm src;
    src.g = params.GM() / (params.R * params.R);
    src.eta = state.eta(params.R);
    src.xi1 = state.xi1();
    // f = (g eta^3 / 4) P_2(xi1 . w); projecting with the addition theorem
    // gives f_{2m} = (g eta^3 / 4) (4 pi / 5) R Y_{2m}(xi1) in the
    // S_R-orthonormal basis.
    const double amp = src.g * std::pow(src.eta, 3) / 4.0 * (4.0 * M_PI / 5.0) * params.R;
    for (int m = -2; m <= 2; ++m) src.f2m[std::size_t(m + 2)] = amp * real_sh(2, m, src.xi1);
    return src;
}

ModeSeries integrate_modes(const Trajectory& traj, const ModeIntegrateOptions& opt) {
    if (opt.L_max < 2) throw std::domain_error("integrate_modes: L_max must be >= 2");
    const PhysicalParams& prm = traj.params();
    const int N = sh_count(opt.L_max);
    std::vector<double> a(N, 0.0);
    for (int l = 0; l <= opt.L_max; ++l)
        for (int m = -l; m <= l; ++m) a[sh_index(l, m)] = mode_frequency(l, prm.GM(), prm.R);

    const double a2 = mode_frequency(2, prm.GM(), prm.R);
    const double period = 2.0 * M_PI / std::sqrt(a2);
    const double dt_sample = opt.sample_dt > 0.0 ? opt.sample_dt : period / 16.0;

    OdeRhs rhs = [&](double t, const StateVec& y, StateVec& dydt) {
        dydt.assign(2 * N, 0.0);
        SourceTerm src = source_coefficients(traj.state(t), prm);
        for (int i = 0; i < N; ++i) {
            dydt[i] = y[N + i];
            dydt[N + i] = -a[i] * y[i];
        }
        for (int m = -2; m <= 2; ++m)
            dydt[N + sh_index(2, m)] += src.f2m[std::size_t(m + 2)];
    };

    // Error scales: the driven amplitude near closest approach.
    double eta_plus = prm.R / (traj.closest() ? traj.closest()->r0
                                              : traj.state(traj.t_end()).r1());
    double h_scale = prm.R * prm.R * std::pow(eta_plus, 3);
    OdeOptions oo;
    oo.rtol = opt.rtol;
    oo.keep_history = false;
    oo.atol_per_component.assign(2 * N, 1e-4 * opt.rtol * h_scale);
    for (int i = 0; i < N; ++i)
        oo.atol_per_component[N + i] = 1e-4 * opt.rtol * h_scale * std::sqrt(a2);

    ModeSeries series;
    series.L_max = opt.L_max;
    const double t0 = traj.t_begin(), t1 = traj.t_end();
    series.samples.reserve(std::size_t((t1 - t0) / dt_sample) + 2);

    double next_sample = t0;
    StateVec yi(2 * N);
    DormandPrince5::Monitor monitor = [&](const OdeSolution& sol, double, double t_now,
                                          const StateVec&) -> bool {
        while (next_sample <= t_now + 1e-12 * std::abs(t_now)) {
            sol.eval(std::min(next_sample, t_now), yi);
            ModeSample ms;
            ms.t = next_sample;
            OrbitState os = traj.state(next_sample);
            ms.r1 = os.r1();
            ms.eta = os.eta(prm.R);
            ms.v1 = os.v1.norm();
            ms.r1dot = os.r1dot();
            for (int m = -2; m <= 2; ++m) {
                ms.h2[std::size_t(m + 2)] = yi[sh_index(2, m)];
                ms.h2dot[std::size_t(m + 2)] = yi[N + sh_index(2, m)];
            }
            double lh = 0.0, lhd = 0.0;
            for (int l = 0; l <= opt.L_max; ++l) {
                if (l == 2) continue;
                for (int m = -l; m <= l; ++m) {
                    lh += yi[sh_index(l, m)] * yi[sh_index(l, m)];
                    lhd += yi[N + sh_index(l, m)] * yi[N + sh_index(l, m)];
                }
            }
            ms.leak_h = std::sqrt(lh);
            ms.leak_hdot = std::sqrt(lhd);
            series.max_leak_h = std::max(series.max_leak_h, ms.leak_h);
            series.max_leak_hdot = std::max(series.max_leak_hdot, ms.leak_hdot);
            series.samples.push_back(ms);
            next_sample += dt_sample;
        }
        return false;
    };

    DormandPrince5 solver(rhs, oo);
    StateVec y0(2 * N, 0.0);
    OdeSolution sol = solver.integrate(t0, y0, t1, monitor);

    StateVec yf = sol.eval(t1);
    series.final_spectrum.L_max = opt.L_max;
    series.final_spectrum.t = t1;
    series.final_spectrum.h.assign(yf.begin(), yf.begin() + N);
    series.final_spectrum.hdot.assign(yf.begin() + N, yf.end());
    return series;
}

namespace {

// Prefix pass shared by the Duhamel evaluations: accumulates
//   C += int cos(w (s - t0)) f(s) ds,  S += int sin(w (s - t0)) f(s) ds
// chunk by chunk (8-point Gauss-Legendre per chunk) and emits requested times.
template <typename Forcing, typename Emit>
void duhamel_prefix(double a_l, double t0, double t_end, const Forcing& f,
                    const std::vector<double>& times, double chunk_dt, const Emit& emit) {
    const double w = std::sqrt(std::max(a_l, 0.0));
    GaussLegendre gl(8);
    const bool oscillatory = a_l > 0.0;
    // C,S per component for a > 0; A = int f, B = int (s-t0) f for a = 0.
    std::vector<double> C, S;
    std::size_t idx_time = 0;
    double t_cur = t0;

    auto accumulate = [&](double lo, double hi) {
        if (!(hi > lo)) return;
        int nsub = std::max(1, int(std::ceil((hi - lo) / chunk_dt)));
        double dt = (hi - lo) / nsub;
        for (int k = 0; k < nsub; ++k) {
            double a0 = lo + k * dt, b0 = a0 + dt;
            double mid = 0.5 * (a0 + b0), half = 0.5 * (b0 - a0);
            for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
                double s = mid + half * gl.nodes[q];
                double wq = gl.weights[q] * half;
                auto fv = f(s);
                if (C.empty()) {
                    C.assign(fv.size(), 0.0);
                    S.assign(fv.size(), 0.0);
                }
                double cw, sw;
                if (oscillatory) {
                    cw = std::cos(w * (s - t0));
                    sw = std::sin(w * (s - t0));
                } else {
                    cw = 1.0;
                    sw = s - t0;
                }
                for (std::size_t i = 0; i < fv.size(); ++i) {
                    C[i] += wq * cw * fv[i];
                    S[i] += wq * sw * fv[i];
                }
            }
        }
    };

    while (idx_time < times.size()) {
        double t_req = std::min(times[idx_time], t_end);
        accumulate(t_cur, t_req);
        t_cur = std::max(t_cur, t_req);
        if (C.empty()) { // zero-length span before any accumulation
            auto fv = f(t0);
            C.assign(fv.size(), 0.0);
            S.assign(fv.size(), 0.0);
        }
        std::vector<double> h(C.size()), hdot(C.size());
        if (oscillatory) {
            double ct = std::cos(w * (t_req - t0)), st = std::sin(w * (t_req - t0));
            for (std::size_t i = 0; i < C.size(); ++i) {
                h[i] = (st * C[i] - ct * S[i]) / w;
                hdot[i] = ct * C[i] + st * S[i];
            }
        } else {
            for (std::size_t i = 0; i < C.size(); ++i) {
                h[i] = (t_req - t0) * C[i] - S[i];
                hdot[i] = C[i];
            }
        }
        emit(t_req, h, hdot);
        ++idx_time;
    }
}

} // namespace

DuhamelResult duhamel_modes(const Trajectory& traj, const std::vector<double>& times) {
    const PhysicalParams& prm = traj.params();
    const double a2 = mode_frequency(2, prm.GM(), prm.R);
    const double chunk = (2.0 * M_PI / std::sqrt(a2)) / 6.0;
    auto forcing = [&](double s) {
        SourceTerm src = source_coefficients(traj.state(s), prm);
        return std::vector<double>(src.f2m.begin(), src.f2m.end());
    };
    DuhamelResult out;
    duhamel_prefix(a2, traj.t_begin(), traj.t_end(), forcing, times, chunk,
                   [&](double t, const std::vector<double>& h, const std::vector<double>& hd) {
                       out.t.push_back(t);
                       std::array<double, 5> ha{}, hda{};
                       std::copy_n(h.begin(), 5, ha.begin());
                       std::copy_n(hd.begin(), 5, hda.begin());
                       out.h2.push_back(ha);
                       out.h2dot.push_back(hda);
                   });
    return out;
}

void duhamel_scalar(double a_l, const std::function<double(double)>& f, double t0,
                    const std::vector<double>& times, std::vector<double>& h,
                    std::vector<double>& hdot, double chunk_dt) {
    if (a_l < 0.0) throw std::domain_error("duhamel_scalar: a_l must be >= 0");
    h.clear();
    hdot.clear();
    double t_end = times.empty() ? t0 : times.back();
    duhamel_prefix(a_l, t0, t_end, [&](double s) { return std::vector<double>{f(s)}; }, times,
                   chunk_dt,
                   [&](double, const std::vector<double>& hv, const std::vector<double>& hd) {
                       h.push_back(hv[0]);
                       hdot.push_back(hd[0]);
                   });
}

double duhamel_vs_direct_error(const Trajectory& traj, const ModeSeries& series) {
    std::vector<double> times;
    times.reserve(series.samples.size());
    for (const ModeSample& s : series.samples) times.push_back(s.t);
    DuhamelResult du = duhamel_modes(traj, times);
    double num_h = 0, den_h = 0, num_hd = 0, den_hd = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        for (int m = 0; m < 5; ++m) {
            double dh = series.samples[i].h2[m] - du.h2[i][m];
            double dhd = series.samples[i].h2dot[m] - du.h2dot[i][m];
            num_h += dh * dh;
            den_h += series.samples[i].h2[m] * series.samples[i].h2[m];
            num_hd += dhd * dhd;
            den_hd += series.samples[i].h2dot[m] * series.samples[i].h2dot[m];
        }
    }
    double eh = den_h > 0 ? std::sqrt(num_h / den_h) : 0.0;
    double ehd = den_hd > 0 ? std::sqrt(num_hd / den_hd) : 0.0;
    return std::max(eh, ehd);
}

double derivative_expansion_residual(const Trajectory& traj, const ModeSeries& series,
                                     double window_r_multiple) {
    const PhysicalParams& prm = traj.params();
    const double a2 = mode_frequency(2, prm.GM(), prm.R);
    const double sa = std::sqrt(a2);
    const double t0 = traj.t_begin();
    auto ca = detect_closest_approach(traj);
    if (!ca) throw std::domain_error("derivative_expansion_residual: no closest approach");
    const double r_window = window_r_multiple * ca->r0;

    auto fvec = [&](double s) -> Arr5 {
        SourceTerm src = source_coefficients(traj.state(s), prm);
        Arr5 a;
        a.v = src.f2m;
        return a;
    };
    auto fd_step = [&](double s) {
        OrbitState os = traj.state(s);
        double tau = os.r1() / std::max(os.v1.norm(), 1e-300);
        return std::min(0.01 * tau, 0.2 * (traj.t_end() - traj.t_begin()));
    };
    // Stencil centers are clamped into the covered span; the edge bias is
    // negligible against the boundary terms it feeds.
    auto clamped = [&](double s, double h) {
        return std::clamp(s, traj.t_begin() + 2 * h, traj.t_end() - 2 * h);
    };
    auto fprime = [&](double s) -> Arr5 {
        double h = fd_step(s);
        s = clamped(s, h);
        Arr5 out;
        Arr5 f1 = fvec(s + h), f2 = fvec(s - h), f3 = fvec(s + 2 * h), f4 = fvec(s - 2 * h);
        for (int i = 0; i < 5; ++i)
            out.v[i] = (-f3.v[i] + 8 * f1.v[i] - 8 * f2.v[i] + f4.v[i]) / (12 * h);
        return out;
    };
    auto fthird = [&](double s) -> Arr5 {
        double h = fd_step(s);
        s = clamped(s, h);
        Arr5 out;
        Arr5 fp2 = fvec(s + 2 * h), fp1 = fvec(s + h), fm1 = fvec(s - h), fm2 = fvec(s - 2 * h);
        for (int i = 0; i < 5; ++i)
            out.v[i] = (-fm2.v[i] + 2 * fm1.v[i] - 2 * fp1.v[i] + fp2.v[i]) / (-2 * h * h * h);
        return out;
    };

    Arr5 f_t0 = fvec(t0 + 2 * fd_step(t0)); // boundary values, pushed off the edge a touch
    Arr5 fp_t0 = fprime(t0 + 2 * fd_step(t0));
    Arr5 fpp_t0;
    {
        double h = fd_step(t0 + 2 * fd_step(t0));
        double s = t0 + 2 * h;
        Arr5 fp2 = fvec(s + h), fc = fvec(s), fm = fvec(s - h);
        for (int i = 0; i < 5; ++i) fpp_t0.v[i] = (fp2.v[i] - 2 * fc.v[i] + fm.v[i]) / (h * h);
    }

    // Window times and their direct h2dot values.
    std::vector<double> times;
    std::vector<std::array<double, 5>> direct;
    double max_direct = 0.0;
    for (const ModeSample& s : series.samples) {
        if (s.r1 <= r_window) {
            times.push_back(s.t);
            direct.push_back(s.h2dot);
            max_direct = std::max(max_direct, s.norm_h2dot());
        }
    }
    if (times.empty()) throw std::domain_error("derivative_expansion_residual: empty window");

    // Sine-kernel prefix over f''' .
    const double chunk = (2.0 * M_PI / sa) / 6.0;
    std::vector<std::array<double, 5>> tail(times.size());
    std::size_t k = 0;
    duhamel_prefix(a2, t0, traj.t_end(),
                   [&](double s) {
                       Arr5 f3 = fthird(s);
                       return std::vector<double>(f3.v.begin(), f3.v.end());
                   },
                   times, chunk,
                   [&](double, const std::vector<double>& h, const std::vector<double>&) {
                       // h already carries the 1/sqrt(a) factor of the sine kernel.
                       std::copy_n(h.begin(), 5, tail[k].begin());
                       ++k;
                   });

    double worst = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        double t = times[i];
        Arr5 fp = fprime(t);
        double st = std::sin(sa * (t - t0)), ct = std::cos(sa * (t - t0));
        double dev2 = 0.0;
        for (int m = 0; m < 5; ++m) {
            double expansion = fp.v[m] / a2 - tail[i][m] / a2 // a^{-3/2} int sin f'''
                               - st * fpp_t0.v[m] / (a2 * sa) + st * f_t0.v[m] / sa -
                               ct * fp_t0.v[m] / a2;
            double d = expansion - direct[i][m];
            dev2 += d * d;
        }
        if (!std::isfinite(dev2))
            throw std::runtime_error("derivative_expansion_residual: non-finite deviation");
        worst = std::max(worst, std::sqrt(dev2));
    }
    return worst / max_direct;
}

BoundReport amplitude_bound_report(const ModeSeries& series, const Trajectory& traj,
                                   double window_lo_r, double window_hi_r) {
    auto ca = detect_closest_approach(traj);
    if (!ca) throw std::domain_error("amplitude_bound_report: no closest approach");
    const PhysicalParams& prm = traj.params();
    BoundReport rep;
    rep.ratio_h_min = rep.ratio_hdot_min = std::numeric_limits<double>::infinity();
    for (const ModeSample& s : series.samples) {
        if (s.r1 < window_lo_r * ca->r0 || s.r1 > window_hi_r * ca->r0) continue;
        double nh = s.norm_h2(), nhd = s.norm_h2dot();
        double rh = nh / (prm.R * prm.R * std::pow(s.eta, 3));
        double rhd = nhd / (prm.R * std::pow(s.eta, 4) * std::max(s.v1, 1e-300));
        rep.ratio_h_min = std::min(rep.ratio_h_min, rh);
        rep.ratio_h_max = std::max(rep.ratio_h_max, rh);
        rep.ratio_hdot_min = std::min(rep.ratio_hdot_min, rhd);
        rep.ratio_hdot_max = std::max(rep.ratio_hdot_max, rhd);
        if (nh > 0) rep.subdominance_h = std::max(rep.subdominance_h, s.leak_h / nh);
        if (nhd > 0) rep.subdominance_hdot = std::max(rep.subdominance_hdot, s.leak_hdot / nhd);
        ++rep.n_window_samples;
    }
    rep.window_reached = rep.n_window_samples > 0;
    return rep;
}

DtfNormIdentity dtf_norm_identity(const OrbitState& state, const PhysicalParams& params,
                                  const SphereGrid& grid) {
    const double g = params.GM() / (params.R * params.R);
    const double r1 = state.r1();
    const double eta = params.R / r1;
    const double r1dot = state.r1dot();
    const double eta_dot = -params.R * r1dot / (r1 * r1);
    const Vec3 xi = state.xi1();
    const Vec3 xi_dot = (state.v1 - r1dot * xi) / r1;
    const double c1 = -g / 8.0;

    auto term_eta = [&](const Vec3& w) {
        double c = dot(xi, w);
        return c1 * 3.0 * eta * eta * eta_dot * (1.0 - 3.0 * c * c);
    };
    auto term_dir = [&](const Vec3& w) {
        return -6.0 * c1 * std::pow(eta, 3) * dot(xi, w) * dot(xi_dot, w);
    };

    DtfNormIdentity out;
    out.quadrature_total = grid.integrate([&](const Vec3& w) {
        double v = term_eta(w) + term_dir(w);
        return v * v;
    });
    out.cross_term =
        grid.integrate([&](const Vec3& w) { return 2.0 * term_eta(w) * term_dir(w); });
    const double R2 = params.R * params.R;
    out.eta_term = 9.0 * M_PI * g * g * R2 / 20.0 * std::pow(eta, 4) * eta_dot * eta_dot;
    out.dir_term = 3.0 * M_PI * g * g * R2 / 20.0 * std::pow(eta, 6) * xi_dot.norm2();
    return out;
}

} // namespace tidecap
