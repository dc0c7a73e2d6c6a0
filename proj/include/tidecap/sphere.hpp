// Spherical-harmonic transforms on a quadrature grid and the spectral actions
// of the layer potentials and the Dirichlet-Neumann map on the sphere S_R.
//
// Basis: real spherical harmonics without the Condon-Shortley phase,
// orthonormal on the unit sphere:
//   Y_{l,0}  = N_{l0} P_l(cos th)
//   Y_{l,m}  = sqrt(2) N_{lm} P_l^m(cos th) cos(m phi),  m > 0
//   Y_{l,-m} = sqrt(2) N_{lm} P_l^m(cos th) sin(m phi),  m > 0
// The basis orthonormal on S_R is Y_{lm}/R; coefficient arrays below are
// always in that S_R-orthonormal convention, so ||f||^2_{L2(S_R)} = sum c^2.
// The complex convention used in closed-form references differs by the
// (-1)^m phase and the sqrt(2) real/imaginary split only.
#pragma once

#include "tidecap/vec3.hpp"

#include <string>
#include <vector>

namespace tidecap {

// Flattened (l, m) indexing: index = l^2 + (m + l), m in [-l, l].
inline int sh_index(int l, int m) { return l * l + m + l; }
inline int sh_count(int l_max) { return (l_max + 1) * (l_max + 1); }

// Real orthonormal (unit-sphere) harmonic at direction n (|n| = 1).
double real_sh(int l, int m, const Vec3& n);

// Legendre polynomial P_l(x).
double legendre_p(int l, double x);

struct SphereGrid {
    double R = 1.0;
    int degree = 0; // products of harmonics with l + l' <= degree integrate exactly
    std::vector<Vec3> nodes;     // unit directions
    std::vector<double> weights; // sum = 4 pi R^2

    static SphereGrid make(int degree, double R = 1.0);

    template <typename F>
    double integrate(F&& f) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
        return acc;
    }
};

// Weighted inner products with the S_R-orthonormal basis. `samples` holds one
// value per grid node. Requires grid.degree >= 2 l_max for exactness.
std::vector<double> sh_analyze(const std::vector<double>& samples, const SphereGrid& grid,
                               int l_max);

std::vector<double> sh_synthesize(const std::vector<double>& coeffs, const SphereGrid& grid);

// Spectral multipliers on S_R (block-diagonal over l):
//   double layer K : 1 / (2l + 1)
//   single layer S : -R / (2l + 1)
//   Dirichlet-Neumann D : l / R
double double_layer_multiplier(int l);
double single_layer_multiplier(int l, double R);
double dirichlet_neumann_multiplier(int l, double R);

std::vector<double> double_layer_apply(const std::vector<double>& coeffs);
std::vector<double> single_layer_apply(const std::vector<double>& coeffs, double R);
std::vector<double> dirichlet_neumann_apply(const std::vector<double>& coeffs, double R);

// Off-surface check of the double-layer eigenvalues: evaluates
//   (1/4pi) int_{S^2} Y_{lm}(xi') / |xi' - r xi| dS(xi')
// by quadrature at a fixed probe set of directions xi and compares with
// r^{-l-1} Y_{lm}(xi) / (2l + 1). Returns the max deviation over probes,
// relative to the max |exact| over probes. r_ratio must exceed 1.
double offsurface_potential_oracle(int l, int m, double r_ratio, const SphereGrid& grid);

struct BallSelfPotential {
    double closed_form; // -3 G M |B_R| / (5 R)
    double quadrature;  // radial quadrature of (1/2) int_B psi dx
};

BallSelfPotential ball_self_potential(double R, double rho, double G);

// Report emitted by the verify-operators CLI.
std::string operator_report_json(int l_max, int grid_degree);

} // namespace tidecap
