// Gauss-Legendre rules and adaptive Gauss-Kronrod quadrature.
#pragma once

#include <functional>
#include <vector>

namespace tidecap {

// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
// Exact for polynomials of degree <= 2n-1.
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussLegendre(int n);

    // Integrate f over [a, b].
    template <typename F>
    double integrate(F&& f, double a, double b) const {
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        double acc = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            acc += weights[i] * f(mid + half * nodes[i]);
        return acc * half;
    }
};

struct QuadResult {
    double value = 0.0;
    double error_estimate = 0.0; // absolute
    int subdivisions = 0;
    bool converged = false;
};

// Adaptive Gauss-Kronrod (G7, K15) on a finite interval.
QuadResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                              double abs_tol, double rel_tol = 0.0, int max_depth = 48);

} // namespace tidecap
