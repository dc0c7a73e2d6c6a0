// Adaptive Dormand-Prince 5(4) integration with dense output.
//
// Solutions keep the per-step interpolation coefficients, so a finished
// integration can be evaluated at any interior time. That is what lets the
// tidal-mode pass reuse the orbit solution as its forcing without
// re-integrating the orbit.
#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

namespace tidecap {

using StateVec = std::vector<double>;
using OdeRhs = std::function<void(double t, const StateVec& y, StateVec& dydt)>;

struct OdeOptions {
    double rtol = 1e-10;
    double atol = 1e-14;
    std::vector<double> atol_per_component; // optional, overrides atol
    double initial_step = 0.0;              // 0 -> automatic
    double max_step = 0.0;                  // 0 -> unlimited
    std::size_t max_steps = 50'000'000;
    // When false only the most recent step is retained: eval() then covers the
    // current step only, which is all a sampling monitor needs. Keeps memory
    // flat for long mode integrations.
    bool keep_history = true;
};

struct OdeStepRecord {
    double t0, t1;
    // Dense-output coefficients r1..r5 (contiguous, 5*n doubles):
    // y(t0 + s*(t1-t0)) = r1 + s*(r2 + (1-s)*(r3 + s*(r4 + (1-s)*r5)))
    std::vector<double> rcont;
};

class OdeSolution {
  public:
    OdeSolution() = default;
    OdeSolution(std::size_t dim, double t_begin, bool keep_history = true)
        : dim_(dim), keep_history_(keep_history), t_begin_(t_begin), t_end_(t_begin) {}

    std::size_t dim() const { return dim_; }
    double t_begin() const { return t_begin_; }
    double t_end() const { return t_end_; }
    std::size_t step_count() const { return steps_.size(); }
    const std::vector<OdeStepRecord>& steps() const { return steps_; }

    void push_step(OdeStepRecord&& rec);
    void truncate(double t_stop) { t_end_ = t_stop; }

    // Interpolated state at t in [t_begin, t_end] (clamped to the covered span).
    void eval(double t, StateVec& out) const;
    StateVec eval(double t) const;

  private:
    std::size_t locate(double t) const;

    std::size_t dim_ = 0;
    bool keep_history_ = true;
    double t_begin_ = 0.0, t_end_ = 0.0;
    std::vector<OdeStepRecord> steps_;
    mutable std::size_t hint_ = 0;
};

struct StepEndInfo {
    double t;
    const StateVec& y;
};

// Integrates dy/dt = rhs from (t0, y0) to t_final (t_final < t0 integrates
// backward). `monitor`, when set, is called after every accepted step and may
// return a stop time within the step (found by the caller via the dense
// output); returning a value < t0-side sentinel keeps going. Throws
// std::runtime_error on step-size underflow.
class DormandPrince5 {
  public:
    DormandPrince5(OdeRhs rhs, OdeOptions opt) : rhs_(std::move(rhs)), opt_(opt) {}

    // Monitor: given the just-finished step (accessible through `sol`), return
    // true to stop the integration (the solution may then be truncated).
    using Monitor = std::function<bool(const OdeSolution& sol, double t_prev, double t_now,
                                       const StateVec& y_now)>;

    OdeSolution integrate(double t0, const StateVec& y0, double t_final,
                          const Monitor& monitor = nullptr) const;

  private:
    OdeRhs rhs_;
    OdeOptions opt_;
};

} // namespace tidecap
