/**
 * @file spectrum.hpp
 * @brief Invariant eigenpairs of K u = lambda M u, orthogonal complements,
 *        and constrained solves with K - alpha M on the invariant space.
 */
#pragma once

#include "tmsym/discretization.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCholesky>

#include <memory>
#include <string>
#include <vector>

namespace tmsym {

// Orbit coordinates: an invariant vector u is P w with P the 0/1 orbit
// indicator matrix, so K_r = P'KP and M_r = P'MP act on w exactly.
struct InvariantSpace {
    std::vector<std::vector<int>> orbits;
    std::vector<int> orbit_index;  // vertex -> orbit
    SpMat K, M;
    Eigen::VectorXd a;  // reduced lumped mass, P' * lumped
    double total_area = 0.0;

    int dim() const { return static_cast<int>(orbits.size()); }
    Eigen::VectorXd lift(const Eigen::VectorXd& w) const;        // P w
    Eigen::VectorXd restrict_dual(const Eigen::VectorXd& f) const;  // P' f
    Eigen::VectorXd coordinates(const Eigen::VectorXd& u) const;  // w with P w = u for invariant u
};

InvariantSpace make_invariant_space(const FemOperators& ops, const GroupAction& action);

struct SolveReport {
    int iterations = 0;
    double relative_residual = 0.0;
};

// Solves (K_r - alpha M_r) w = f in the weak sense on
// V = { w : a'w = 0, (M_r c_k)'w = 0 } by projected preconditioned CG,
// preconditioned with an LDL' factorization of K_r + M_r.
class ShiftedSolver {
public:
    ShiftedSolver(const InvariantSpace& space, double alpha, std::vector<Eigen::VectorXd> deflation = {},
                  double tolerance = 1e-13, int max_iterations = 5000);

    Eigen::VectorXd solve(const Eigen::VectorXd& f, SolveReport* report = nullptr) const;
    Eigen::VectorXd project(const Eigen::VectorXd& w) const;       // onto V, oblique in M
    Eigen::VectorXd project_dual(const Eigen::VectorXd& f) const;  // transpose of project
    double energy(const Eigen::VectorXd& w) const;                 // w'(K_r - alpha M_r)w
    double alpha() const { return alpha_; }
    const InvariantSpace& space() const { return *space_; }

private:
    const InvariantSpace* space_;
    double alpha_;
    double tol_;
    int max_it_;
    Eigen::MatrixXd C_;  // spanning vectors of the excluded directions (ones, c_k)
    Eigen::MatrixXd L_;  // constraint functionals (a, M_r c_k)
    Eigen::MatrixXd G_inv_;
    std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> precond_;
};

struct InvariantSpectrum {
    std::vector<double> eigenvalues;            // ascending, repeated by multiplicity
    std::vector<Eigen::VectorXd> eigenvectors;  // full vertex vectors, mass-orthonormal
    std::vector<Eigen::VectorXd> reduced;       // orbit coordinates of the same vectors
    std::vector<int> multiplicities;            // group sizes, in order
    std::vector<double> residuals;              // ||K e - lambda M e|| / ||M e||
    int iterations = 0;

    int groups() const { return static_cast<int>(multiplicities.size()); }
    double distinct(int j) const;  // lambda_j^G, j >= 1
    int count_through(int j) const;  // m_j: eigenvectors in the first j groups
};

struct EigenOptions {
    double tolerance = 1e-10;
    int max_iterations = 2000;
    unsigned long long seed = 20240917ull;
    double grouping = 1e-6;
};

InvariantSpectrum invariant_spectrum(const FemOperators& ops, const GroupAction& action, int count,
                                     const EigenOptions& opts = {});
InvariantSpectrum invariant_spectrum(const InvariantSpace& space, int count, const EigenOptions& opts = {});

double rayleigh_quotient(const InvariantVector& u, const FemOperators& ops);

struct ComplementSpace {
    int level = 1;
    double lambda = 0.0;                  // lambda_j^G
    std::vector<Eigen::VectorXd> basis;   // e_1 .. e_{m_{j-1}}
    std::vector<Eigen::VectorXd> reduced;

    // u - sum_i (e_i' M u) e_i, followed by removal of the lumped mean.
    Eigen::VectorXd project(const Eigen::VectorXd& u, const FemOperators& ops) const;
};

// j = 1 gives the identity on the invariant mean-zero space.
ComplementSpace complement_projector(const InvariantSpectrum& spec, int j);

}  // namespace tmsym
