/**
 * @file constructions.hpp
 * @brief Moser sequences, the bubble profile, symmetric Green functions with
 *        their regular constant, and the glued test-function family.
 */
#pragma once

#include "tmsym/discretization.hpp"
#include "tmsym/spectrum.hpp"

#include <Eigen/Core>

#include <string>
#include <utility>
#include <vector>

namespace tmsym {

// Radial model of a model surface: area element s(rho) of geodesic polar
// coordinates and the exact volume.
struct RadialSurface {
    SurfaceKind kind = SurfaceKind::UnitSphere;
    double volume = 0.0;

    double area_element(double rho) const;  // sin(rho) or rho
    double ball_area(double rho) const;     // 2pi(1 - cos rho) or pi rho^2
};

RadialSurface radial_surface(const SurfaceMesh& mesh);

// Quarter of the smallest pairwise distance inside the orbit, capped by the
// injectivity radius.
double orbit_ball_radius(const SurfaceMesh& mesh, const std::vector<int>& orbit);

// Distance from vertex v to the nearest point of the orbit.
double orbit_distance(const SurfaceMesh& mesh, const std::vector<int>& orbit, int v);

// ---------------------------------------------------------------- Moser

struct MoserSequence {
    int center = 0;
    double radius = 0.1;
    double k = 10.0;
    int ell = 1;  // orbit size of the center
    std::vector<int> orbit;
};

MoserSequence make_moser_sequence(const SurfaceMesh& mesh, const GroupAction& action, int center, double radius,
                                  double k);

// log k on rho <= r k^{-1/4}, 4 log(r/rho) up to r, zero outside.
double moser_profile(double rho, double radius, double k);

struct MoserEvaluation {
    Eigen::VectorXd values;
    double mesh_energy = 0.0;
    double closed_form_energy = 0.0;  // 8 pi ell log k
};

MoserEvaluation moser_evaluate(const MoserSequence& seq, const SurfaceMesh& mesh);

// (M - mean) / ||M - mean||_{1,alpha}, optionally restricted to a complement.
InvariantVector moser_normalized(const MoserSequence& seq, const SurfaceMesh& mesh, const GroupAction& action,
                                 const FemOperators& ops, const NormParams& p, const ComplementSpace* complement = nullptr);

struct MoserSemiAnalytic {
    double energy = 0.0;       // integral of |grad M|^2
    double mean = 0.0;
    double centered_l2 = 0.0;  // integral of (M - mean)^2
    double norm_sq = 0.0;      // energy - alpha * centered_l2
    double log_value = 0.0;    // log of integral exp(beta (M*)^2)
};

// Radial quadrature of the normalized Moser function on the model surface.
MoserSemiAnalytic moser_semi_analytic(const RadialSurface& surface, int ell, double radius, double k, double alpha,
                                      double beta);

// ---------------------------------------------------------------- bubble

struct BubbleProfile {
    int ell = 1;
    double operator()(double s) const;  // -(1/4 pi ell) log(1 + pi ell s^2)
};

double bubble_integral(int ell, double R);             // closed form
double bubble_integral_quadrature(int ell, double R);  // adaptive Gauss-Kronrod

// ---------------------------------------------------------------- Green

struct GreenDecomposition {
    Eigen::VectorXd values;
    int source = 0;
    std::vector<int> source_orbit;
    double alpha = 0.0;
    int ell = 1;
    double residual = 0.0;  // relative, in the constrained space
    int iterations = 0;
    std::vector<std::string> warnings;
};

GreenDecomposition green_solve(const FemOperators& ops, const GroupAction& action, const InvariantSpace& space,
                               int source, const NormParams& p);
GreenDecomposition green_solve(const FemOperators& ops, const GroupAction& action, int source, const NormParams& p);

struct AFitOptions {
    double inner_factor = 5.0;   // inner radius in mean edge lengths
    double outer_factor = 20.0;  // outer radius in mean edge lengths
    double scale = 1.0;          // multiplies both radii
    double inner_radius = -1.0;  // explicit overrides when positive
    double outer_radius = -1.0;
};

struct AFit {
    double A = 0.0;
    double residual_rms = 0.0;
    Eigen::Vector2d slope = Eigen::Vector2d::Zero();
    double b = 0.0;   // fixed coefficient of rho^2 log rho, alpha / (8 pi ell)
    double q2 = 0.0;  // fitted rho^2 coefficient of the regular part
    double q4 = 0.0;  // fitted rho^4 coefficient
    double r_inner = 0.0;
    double r_outer = 0.0;
    double h = 0.0;
    int samples = 0;
    std::vector<std::pair<double, double>> psi_samples;  // (rho, G + log(rho)/(2 pi ell) - A)
};

// Least squares of G + log(rho)/(2 pi ell) - b rho^2 log rho against
// A + slope . t + q2 rho^2 + q4 rho^4 over an annulus around the source.
AFit extract_A(const GreenDecomposition& dec, const SurfaceMesh& mesh, const AFitOptions& opts = {});

// fine + (fine - coarse) / (2^order - 1)
double richardson(double coarse, double fine, double order = 2.0);

struct UpperBound {
    double value = 0.0;
    double log_value = 0.0;
};

// Vol + pi ell exp(1 + 4 pi ell A).
UpperBound upper_bound_value(double A, double volume, int ell);

// ||G||_2^2 with triangles of the two innermost rings around the sources
// integrated from the local expansion.
double green_l2_squared(const GreenDecomposition& dec, const AFit& fit, const SurfaceMesh& mesh,
                        const FemOperators& ops);

// ---------------------------------------------------------------- test family

// G(rho) ~ -log(rho)/(2 pi ell) + A + b rho^2 log rho + q2 rho^2 + q4 rho^4
struct LocalGreen {
    int ell = 1;
    double A = 0.0, b = 0.0, q2 = 0.0, q4 = 0.0;

    double value(double rho) const;
    double derivative(double rho) const;
    double regular(double rho) const;  // psi~: the last three terms
    double regular_derivative(double rho) const;
};

LocalGreen local_green(const AFit& fit, int ell);

struct TestFunctionFamily {
    double epsilon = 0.0;
    double R = 0.0;
    double rho_inner = 0.0;  // R eps
    double rho_outer = 0.0;  // 2 R eps
    double c2 = 0.0, c = 0.0, B = 0.0;
    double c2_closed_form = 0.0, B_closed_form = 0.0;
    double plateau = 0.0;     // c^2 + B, fixed by continuity
    double mean_H = 0.0;      // c * mean(eta)
    double energy_inner = 0.0, energy_annulus = 0.0, energy_outside = 0.0;
    double centered_l2 = 0.0;  // integral (H - mean H)^2
    double continuity_gap = 0.0;
    double norm = 0.0;         // ||phi_eps||_{1,alpha}
    double green_l2 = 0.0;
    double volume = 0.0;
    double alpha = 0.0;
    int ell = 1;
    LocalGreen g;
    RadialSurface surface;
    std::vector<int> orbit;

    // H = c * eta as a function of the distance to the orbit (radial parts
    // only; outside 2 R eps it returns the local Green expansion).
    double H(double rho) const;
    double H_derivative(double rho) const;
    double cutoff(double rho) const;  // zeta
};

TestFunctionFamily build_test_family(const GreenDecomposition& dec, const AFit& fit, const SurfaceMesh& mesh,
                                     const FemOperators& ops, const NormParams& p, double epsilon);

struct LowerBound {
    double value = 0.0;
    double bound = 0.0;
    double margin = 0.0;
    double inner = 0.0;    // exact, on the orbit balls of radius R eps
    double annulus = 0.0;  // exact, R eps < rho < 2 R eps
    double outer = 0.0;    // 1 + t lower bound outside 2 R eps
    double outer_mesh_linear = 0.0;  // same bound by lumped mesh quadrature
    double outer_mesh_full = 0.0;    // full exponential by lumped mesh quadrature
};

LowerBound test_family_lower_bound(const TestFunctionFamily& fam, const GreenDecomposition& dec,
                                   const SurfaceMesh& mesh, const FemOperators& ops);

// phi_eps sampled at vertices (mesh Green values outside 2 R eps).
Eigen::VectorXd test_family_samples(const TestFunctionFamily& fam, const GreenDecomposition& dec,
                                    const SurfaceMesh& mesh);

}  // namespace tmsym
