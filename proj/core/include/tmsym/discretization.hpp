/**
 * @file discretization.hpp
 * @brief P1 finite elements on a SurfaceMesh: stiffness/mass, the shifted
 *        norm, invariant projection and the exponential functional.
 */
#pragma once

#include "tmsym/geometry.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <iosfwd>
#include <limits>
#include <vector>

namespace tmsym {

using SpMat = Eigen::SparseMatrix<double>;
// Per-vertex values; "invariant" when constant on orbits and mass-mean zero.
using InvariantVector = Eigen::VectorXd;

struct FemOperators {
    SpMat stiffness;               // cotangent Laplacian
    SpMat mass;                    // consistent P1 mass
    Eigen::VectorXd lumped_mass;   // barycentric thirds
    Eigen::VectorXd triangle_areas;
    double total_area = 0.0;
};

struct NormParams {
    double alpha = 0.0;
    double beta = 1.0;
    double eigen_gap_check = std::numeric_limits<double>::infinity();

    NormParams() = default;
    // Throws ConfigError unless alpha < eigen_gap_check and beta > 0.
    NormParams(double alpha, double beta, double eigen_gap_check = std::numeric_limits<double>::infinity());
};

struct ExpValue {
    double value = 0.0;      // may be +inf when the log exceeds the double range
    double log_value = 0.0;
};

FemOperators assemble(const SurfaceMesh& mesh);

// (1/N) sum_i u o sigma_i, with each orbit sum taken in sorted order.
Eigen::VectorXd group_average(const Eigen::VectorXd& u, const GroupAction& action);

// Subtracts the lumped-mass mean.
Eigen::VectorXd remove_mean(const Eigen::VectorXd& u, const FemOperators& ops);

InvariantVector project_invariant_meanzero(const Eigen::VectorXd& u, const GroupAction& action,
                                           const FemOperators& ops);

// u'Ku - alpha u'Mu.
double quadratic_form(const Eigen::VectorXd& u, const FemOperators& ops, double alpha);

double norm_one_alpha(const InvariantVector& u, const FemOperators& ops, const NormParams& p);

// Lumped sum_x area(x) exp(beta u(x)^2) evaluated through a shifted log-sum-exp.
ExpValue exp_functional(const Eigen::VectorXd& u, double beta, const FemOperators& ops);

// Per-triangle Dirichlet energies, computed without a global matrix.
std::vector<double> triangle_energies(const SurfaceMesh& mesh, const Eigen::VectorXd& u);
double dirichlet_energy(const SurfaceMesh& mesh, const Eigen::VectorXd& u);

// Coordinate-format (Matrix Market) export.
void write_matrix_market(const SpMat& a, std::ostream& out);

// Sum of values in ascending order; order-independent given the multiset.
double sorted_sum(std::vector<double>& values);

}  // namespace tmsym
