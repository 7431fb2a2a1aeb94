/**
 * @file maximizer.hpp
 * @brief Subcritical maximizers of the exponential functional on the unit
 *        ball of the shifted norm, their multipliers, blow-up diagnostics
 *        and the sharpness probes.
 */
#pragma once

#include "tmsym/constructions.hpp"
#include "tmsym/spectrum.hpp"

#include <Eigen/Core>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tmsym {

// Working data of one problem: the invariant space, the complement of the
// first j-1 eigenspaces and the constrained solver for K - alpha M.
class SubcriticalProblem {
public:
    // level j >= 1; spectrum must contain group j. Throws ConfigError unless
    // alpha < lambda_j^G and 0 < epsilon < 4 pi ell.
    SubcriticalProblem(const SurfaceMesh& mesh, const FemOperators& ops, const GroupAction& action,
                       const InvariantSpace& space, const InvariantSpectrum& spectrum, int level, double alpha,
                       double epsilon);

    const SurfaceMesh& mesh() const { return *mesh_; }
    const FemOperators& ops() const { return *ops_; }
    const GroupAction& action() const { return *action_; }
    const InvariantSpace& space() const { return *space_; }
    const ComplementSpace& complement() const { return complement_; }
    const ShiftedSolver& solver() const { return *solver_; }
    int level() const { return level_; }
    int ell() const { return ell_; }
    double alpha() const { return alpha_; }
    double epsilon() const { return epsilon_; }
    double beta() const;  // 4 pi ell - epsilon
    double lambda() const { return complement_.lambda; }

    // Invariant, mean-zero, complement-projected copy of a vertex vector,
    // scaled to unit shifted norm. Throws NumericalError for the zero vector.
    Eigen::VectorXd admissible(const Eigen::VectorXd& u) const;

private:
    const SurfaceMesh* mesh_;
    const FemOperators* ops_;
    const GroupAction* action_;
    const InvariantSpace* space_;
    ComplementSpace complement_;
    std::shared_ptr<ShiftedSolver> solver_;
    int level_;
    int ell_;
    double alpha_;
    double epsilon_;
};

enum class SeedKind { Moser, Random, Eigen, Given };

SeedKind parse_seed_kind(const std::string& text);
std::string to_string(SeedKind kind);

struct SeedOptions {
    SeedKind kind = SeedKind::Moser;
    double moser_k = 10.0;
    double moser_radius = -1.0;  // half the orbit ball radius when not positive
    unsigned long long rng_seed = 20240917ull;
    Eigen::VectorXd given;  // vertex values for SeedKind::Given
};

// Moser: at the lowest-index vertex of a minimal orbit. Random: uniform on
// orbits. Eigen: the first eigenvector of the working level (smooth,
// symmetric start).
Eigen::VectorXd make_seed(const SubcriticalProblem& problem, const InvariantSpectrum& spectrum,
                          const SeedOptions& opts);

struct SolveOptions {
    int max_iterations = 5000;
    double tolerance = 1e-9;  // dual-norm Euler-Lagrange residual
};

struct MaximizerState {
    Eigen::VectorXd u;       // vertex values, unit shifted norm
    double norm = 0.0;       // ||u||_{1,alpha} after the last step
    double lambda_eps = 0.0;
    double log_lambda_eps = 0.0;
    double mu_eps = 0.0;
    std::vector<double> gammas;  // empty for level 1
    double c_eps = 0.0;          // max |u|
    int x_eps = 0;               // lowest index attaining c_eps
    double value = 0.0;
    double log_value = 0.0;
    double residual = 0.0;
    int iterations = 0;
    int backtracks = 0;
    bool converged = false;
    std::vector<double> history;  // log-value after each accepted step
    double beta = 0.0;
    double alpha = 0.0;
    double epsilon = 0.0;
    int ell = 1;
    int level = 1;
};

// Fixed-point ascent u <- normalize(u + s (K - alpha M)^{-1} grad), s = inf
// first, halved on a decrease of the log-functional beyond a relative
// rounding slack of 1e-13. Stops when the Euler-Lagrange residual drops
// below the tolerance; otherwise returns the best iterate with
// converged = false.
MaximizerState solve_subcritical(const SubcriticalProblem& problem, const Eigen::VectorXd& seed,
                                 const SolveOptions& opts = {});

// With h = M(u e^{beta u^2}) / lambda the discrete equation reads
// R(phi) = phi'(K - alpha M)u - phi'h + (mu/lambda) phi'M1 + sum gamma_k phi'M e_k = 0.
// The identities are |R| tested with u, 1 and each e_k.
struct MultiplierReport {
    double lambda_eps = 0.0;
    double log_lambda_eps = 0.0;
    double mu_eps = 0.0;
    std::vector<double> gammas;
    double mu_over_lambda = 0.0;  // |mu| / lambda
    double norm_identity = 0.0;
    double mean_identity = 0.0;
    std::vector<double> gamma_identities;
    double state_mismatch = 0.0;  // largest relative gap to the multipliers stored in the state
    double max_identity() const;
};

MultiplierReport multiplier_report(const MaximizerState& state, const SubcriticalProblem& problem);

struct BallEnergy {
    int center = 0;
    double radius = 0.0;
    double energy = 0.0;
};

struct DiagnosticsOptions {
    std::vector<double> radii{0.2};
    double c_threshold = 3.0;
    double disk_radius = 5.0;
    int radial_samples = 21;
    int angular_samples = 16;
};

struct BlowupDiagnostics {
    double r_eps = 0.0;
    double log_r_eps = 0.0;
    std::vector<BallEnergy> local_energies;  // orbit of x_eps, per radius
    double energy_budget = 0.0;              // 1 + alpha u'Mu
    bool profile_checked = false;
    double profile_error = 0.0;
    std::vector<std::string> warnings;
};

BlowupDiagnostics blowup_diagnostics(const MaximizerState& state, const SurfaceMesh& mesh, const GroupAction& action,
                                     const BubbleProfile& bubble, const DiagnosticsOptions& opts = {});

// Barycentric value of u at a surface point (unit vector on the sphere,
// (x, y, 0) in the fundamental cell on the torus). Returns nothing when no
// triangle near the hint vertex contains the point.
std::optional<double> interpolate_at(const SurfaceMesh& mesh, const Eigen::VectorXd& u, int near_vertex,
                                     const Eigen::Vector3d& point, double search_radius);

struct SharpnessRow {
    double beta = 0.0;
    double k = 0.0;
    double radius = 0.0;
    double log_value = 0.0;       // semi-analytic radial evaluation
    double mesh_log_value = 0.0;  // NaN when no mesh path was requested
};

struct SharpnessTable {
    std::vector<SharpnessRow> rows;
    std::vector<double> slopes;  // per beta: least-squares slope of log-value against log k
};

struct SharpnessSpec {
    RadialSurface surface;
    int ell = 1;
    double alpha = 0.0;
    double radius = 0.05;
    std::vector<double> betas;
    std::vector<double> ks;
    // optional mesh path
    const SurfaceMesh* mesh = nullptr;
    const GroupAction* action = nullptr;
    const FemOperators* ops = nullptr;
    int center = -1;
};

SharpnessTable sharpness_probe(const SharpnessSpec& spec);

struct FailureRow {
    double t = 0.0;
    double norm_sq = 0.0;    // ||t e||^2_{1,alpha}
    double log_value = 0.0;  // log of the lumped integral of exp(beta (t e)^2)
    double growth = 0.0;     // log_value - log Vol
};

// Scaling along the first eigenvector of group j with alpha = lambda_j^G.
std::vector<FailureRow> failure_scan(const FemOperators& ops, const InvariantSpectrum& spectrum, int level, double beta,
                                     const std::vector<double>& ts);

}  // namespace tmsym
