#include "tidecap/ode.hpp"

#include <algorithm>
#include <cmath>

namespace tidecap {

namespace {

// Dormand-Prince coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// b - b_hat (5th minus embedded 4th order) for the error estimate.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// Dense-output coefficients (Hairer, Norsett, Wanner).
constexpr double d1 = -12715105075.0 / 11282082432.0;
constexpr double d3 = 87487479700.0 / 32700410799.0;
constexpr double d4 = -10690763975.0 / 1880347072.0;
constexpr double d5 = 701980252875.0 / 199316789632.0;
constexpr double d6 = -1453857185.0 / 822651844.0;
constexpr double d7 = 69997945.0 / 29380423.0;

} // namespace

void OdeSolution::push_step(OdeStepRecord&& rec) {
    if (!keep_history_ && !steps_.empty()) {
        steps_.front() = std::move(rec);
        hint_ = 0;
    } else {
        steps_.push_back(std::move(rec));
    }
    t_end_ = steps_.back().t1;
}

std::size_t OdeSolution::locate(double t) const {
    const bool fwd = t_end_ >= t_begin_;
    if (steps_.empty()) throw std::runtime_error("OdeSolution::eval on empty solution");
    auto inside = [&](const OdeStepRecord& s) {
        return fwd ? (t >= s.t0 && t <= s.t1) : (t <= s.t0 && t >= s.t1);
    };
    if (hint_ < steps_.size() && inside(steps_[hint_])) return hint_;
    // Binary search over step start times.
    std::size_t lo = 0, hi = steps_.size() - 1;
    while (lo < hi) {
        std::size_t mid = (lo + hi + 1) / 2;
        bool before = fwd ? (steps_[mid].t0 <= t) : (steps_[mid].t0 >= t);
        if (before)
            lo = mid;
        else
            hi = mid - 1;
    }
    hint_ = lo;
    return lo;
}

void OdeSolution::eval(double t, StateVec& out) const {
    const bool fwd = t_end_ >= t_begin_;
    t = fwd ? std::clamp(t, t_begin_, t_end_) : std::clamp(t, t_end_, t_begin_);
    const OdeStepRecord& st = steps_[locate(t)];
    const double h = st.t1 - st.t0;
    const double s = (h == 0.0) ? 0.0 : (t - st.t0) / h;
    const double s1 = 1.0 - s;
    out.resize(dim_);
    const double* r = st.rcont.data();
    const std::size_t n = dim_;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = r[i] +
                 s * (r[n + i] + s1 * (r[2 * n + i] + s * (r[3 * n + i] + s1 * r[4 * n + i])));
    }
}

StateVec OdeSolution::eval(double t) const {
    StateVec out;
    eval(t, out);
    return out;
}

OdeSolution DormandPrince5::integrate(double t0, const StateVec& y0, double t_final,
                                      const Monitor& monitor) const {
    const std::size_t n = y0.size();
    const double dir = (t_final >= t0) ? 1.0 : -1.0;
    OdeSolution sol(n, t0, opt_.keep_history);

    StateVec y = y0, ynew(n), yerr(n);
    StateVec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n);
    rhs_(t0, y, k1);

    auto tol_i = [&](std::size_t i, double yi, double yni) {
        double at = opt_.atol_per_component.empty() ? opt_.atol : opt_.atol_per_component[i];
        return at + opt_.rtol * std::max(std::abs(yi), std::abs(yni));
    };

    // Initial step size: crude scale estimate from |y|/|y'|.
    double h = opt_.initial_step;
    if (h == 0.0) {
        double ny = 0, nd = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double sc = tol_i(i, y[i], y[i]);
            ny += (y[i] / sc) * (y[i] / sc);
            nd += (k1[i] / sc) * (k1[i] / sc);
        }
        h = (nd > 0 && ny > 0) ? 0.01 * std::sqrt(ny / nd) : 1e-6 * std::abs(t_final - t0);
        if (h == 0.0) h = 1e-6;
        h = std::min(h, std::abs(t_final - t0));
    }
    h *= dir;

    double t = t0;
    std::size_t nsteps = 0;
    while (dir * (t_final - t) > 0.0) {
        if (++nsteps > opt_.max_steps) throw std::runtime_error("ode: step limit exceeded");
        if (opt_.max_step > 0.0) h = dir * std::min(std::abs(h), opt_.max_step);
        if (dir * (t + h - t_final) > 0.0) h = t_final - t;
        if (std::abs(h) <= std::abs(t) * 1e-16 + 1e-300)
            throw std::runtime_error("ode: step size underflow");

        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
        rhs_(t + c2 * h, ytmp, k2);
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        rhs_(t + c3 * h, ytmp, k3);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        rhs_(t + c4 * h, ytmp, k4);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        rhs_(t + c5 * h, ytmp, k5);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                                  a65 * k5[i]);
        rhs_(t + h, ytmp, k6);
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        rhs_(t + h, ynew, k7);

        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                             e7 * k7[i]);
            double sc = tol_i(i, y[i], ynew[i]);
            err += (ei / sc) * (ei / sc);
        }
        err = std::sqrt(err / n);

        if (err <= 1.0) {
            OdeStepRecord rec;
            rec.t0 = t;
            rec.t1 = t + h;
            rec.rcont.resize(5 * n);
            double* r = rec.rcont.data();
            for (std::size_t i = 0; i < n; ++i) {
                double dy = ynew[i] - y[i];
                r[i] = y[i];
                r[n + i] = dy;
                r[2 * n + i] = h * k1[i] - dy;
                r[3 * n + i] = dy - h * k7[i] - r[2 * n + i];
                r[4 * n + i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] +
                                    d6 * k6[i] + d7 * k7[i]);
            }
            double t_prev = t;
            t += h;
            y.swap(ynew);
            k1.swap(k7); // FSAL
            sol.push_step(std::move(rec));
            if (monitor && monitor(sol, t_prev, t, y)) break;
        }

        double fac = (err > 0.0) ? 0.9 * std::pow(err, -0.2) : 5.0;
        fac = std::clamp(fac, 0.2, 5.0);
        h *= fac;
    }
    return sol;
}

} // namespace tidecap
