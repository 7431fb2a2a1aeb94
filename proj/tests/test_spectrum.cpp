#include "oracles.hpp"
#include "tmsym/error.hpp"
#include "tmsym/spectrum.hpp"

#include <gtest/gtest.h>

using namespace tmsym;

namespace {

struct Problem {
    SurfaceMesh mesh;
    GroupAction action;
    FemOperators ops;
    InvariantSpace space;
};

Problem sphere(int level, const char* group) {
    auto [m, a] = build_sphere_mesh(level, GroupSpec::parse(group));
    Problem p{std::move(m), std::move(a), {}, {}};
    p.ops = assemble(p.mesh);
    p.space = make_invariant_space(p.ops, p.action);
    return p;
}

}  // namespace

TEST(Spectrum, TrivialSphereMatchesHarmonics) {
    const Problem p = sphere(3, "trivial");
    const InvariantSpectrum s = invariant_spectrum(p.space, 8);
    ASSERT_GE(s.groups(), 2);
    EXPECT_EQ(s.multiplicities[0], 3);
    EXPECT_EQ(s.multiplicities[1], 5);
    EXPECT_NEAR(s.distinct(1), oracle::sphere_eigenvalue(1), 0.02);
    EXPECT_NEAR(s.distinct(2), oracle::sphere_eigenvalue(2), 0.015 * 6.0);
    for (double r : s.residuals) EXPECT_LT(r, 1e-9);
}

TEST(Spectrum, AntipodalSphereSkipsOddDegrees) {
    const Problem p = sphere(3, "antipodal");
    const InvariantSpectrum s = invariant_spectrum(p.space, 5);
    EXPECT_EQ(s.multiplicities[0], 5);
    EXPECT_NEAR(s.distinct(1), oracle::sphere_eigenvalue(2), 0.015 * 6.0);
    EXPECT_EQ(s.count_through(1), 5);
    EXPECT_THROW(s.distinct(2), ConfigError);
}

TEST(Spectrum, EigenvectorsAreMassOrthonormalAndInvariant) {
    const Problem p = sphere(3, "dihedral:2");
    const InvariantSpectrum s = invariant_spectrum(p.space, 6);
    for (std::size_t i = 0; i < s.eigenvectors.size(); ++i) {
        const Eigen::VectorXd& e = s.eigenvectors[i];
        for (std::size_t j = 0; j < s.eigenvectors.size(); ++j)
            EXPECT_NEAR(e.dot(p.ops.mass * s.eigenvectors[j]), i == j ? 1.0 : 0.0, 1e-10);
        EXPECT_NEAR(e.dot(p.ops.lumped_mass), 0.0, 1e-12);
        for (const auto& perm : p.action.permutations)
            for (int v = 0; v < p.mesh.num_vertices(); ++v) ASSERT_EQ(e[perm[v]], e[v]);
        EXPECT_NEAR(rayleigh_quotient(e, p.ops), s.eigenvalues[i], 1e-9 * s.eigenvalues[i]);
    }
    for (std::size_t i = 1; i < s.eigenvalues.size(); ++i) EXPECT_LE(s.eigenvalues[i - 1], s.eigenvalues[i]);
}

TEST(Spectrum, TorusFirstEigenvalue) {
    auto [mesh, act] = build_flat_torus_mesh(32, 32, {});
    const FemOperators ops = assemble(mesh);
    const InvariantSpectrum s = invariant_spectrum(ops, act, 4);
    EXPECT_EQ(s.multiplicities[0], 4);
    EXPECT_NEAR(s.distinct(1), 4.0 * oracle::pi * oracle::pi, 0.01 * 4.0 * oracle::pi * oracle::pi);
}

TEST(Spectrum, CountValidation) {
    const Problem p = sphere(1, "antipodal");
    EXPECT_THROW(invariant_spectrum(p.space, 0), ConfigError);
    EXPECT_THROW(invariant_spectrum(p.space, p.space.dim()), ConfigError);
}

TEST(InvariantSpace, LiftAndCoordinatesInvert) {
    const Problem p = sphere(2, "cyclic:4");
    oracle::Gen g(4);
    Eigen::VectorXd w(p.space.dim());
    for (int i = 0; i < w.size(); ++i) w[i] = g.uniform(-1, 1);
    const Eigen::VectorXd u = p.space.lift(w);
    EXPECT_EQ((p.space.coordinates(u) - w).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_NEAR(w.dot(p.space.K * w), u.dot(p.ops.stiffness * u), 1e-11);
    EXPECT_NEAR(w.dot(p.space.M * w), u.dot(p.ops.mass * u), 1e-12);
    EXPECT_NEAR(p.space.a.sum(), p.ops.total_area, 1e-12);
}

TEST(Complement, ProjectionRemovesLowerModes) {
    const Problem p = sphere(3, "antipodal");
    const InvariantSpectrum s = invariant_spectrum(p.space, 12);
    const ComplementSpace c = complement_projector(s, 2);
    EXPECT_EQ(c.basis.size(), 5u);
    EXPECT_DOUBLE_EQ(c.lambda, s.distinct(2));
    oracle::Gen g(8);
    Eigen::VectorXd u(p.mesh.num_vertices());
    for (int i = 0; i < u.size(); ++i) u[i] = g.uniform(-1, 1);
    const Eigen::VectorXd v = c.project(u, p.ops);
    for (const auto& e : c.basis) EXPECT_NEAR(e.dot(p.ops.mass * v), 0.0, 1e-12);
    EXPECT_NEAR(v.dot(p.ops.lumped_mass), 0.0, 1e-13);
    EXPECT_TRUE(complement_projector(s, 1).basis.empty());
    EXPECT_THROW(complement_projector(s, 0), ConfigError);
}

TEST(ShiftedSolver, InvertsOnAnEigenvector) {
    const Problem p = sphere(3, "antipodal");
    const InvariantSpectrum s = invariant_spectrum(p.space, 5);
    const double alpha = 1.0;
    const ShiftedSolver solver(p.space, alpha);
    const Eigen::VectorXd& e = s.reduced[0];
    SolveReport rep;
    const Eigen::VectorXd w = solver.solve(p.space.M * e, &rep);
    EXPECT_LT((w - e / (s.eigenvalues[0] - alpha)).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT(rep.relative_residual, 1e-12);
}

TEST(ShiftedSolver, SolutionSatisfiesConstraints) {
    const Problem p = sphere(3, "antipodal");
    const InvariantSpectrum s = invariant_spectrum(p.space, 12);
    const ComplementSpace c = complement_projector(s, 2);
    const double alpha = 0.5 * (s.distinct(1) + c.lambda);  // above lambda_1, below lambda_2
    const ShiftedSolver solver(p.space, alpha, c.reduced);
    oracle::Gen g(2);
    Eigen::VectorXd f(p.space.dim());
    for (int i = 0; i < f.size(); ++i) f[i] = g.uniform(-1, 1);
    const Eigen::VectorXd w = solver.solve(f);
    EXPECT_NEAR(p.space.a.dot(w), 0.0, 1e-12);
    for (const auto& e : c.reduced) EXPECT_NEAR(e.dot(p.space.M * w), 0.0, 1e-12);
    EXPECT_GT(solver.energy(w), 0.0);
    // Galerkin orthogonality against test vectors from the constrained space
    for (int trial = 0; trial < 5; ++trial) {
        Eigen::VectorXd phi(p.space.dim());
        for (int i = 0; i < phi.size(); ++i) phi[i] = g.uniform(-1, 1);
        phi = solver.project(phi);
        const Eigen::VectorXd aw = p.space.K * w - alpha * (p.space.M * w);
        EXPECT_NEAR(phi.dot(aw), phi.dot(f), 1e-9 * std::max(1.0, std::abs(phi.dot(f))));
    }
}

TEST(ShiftedSolver, IndefiniteShiftIsReported) {
    const Problem p = sphere(3, "antipodal");
    const InvariantSpectrum s = invariant_spectrum(p.space, 5);
    const ShiftedSolver solver(p.space, s.distinct(1) + 2.0);
    oracle::Gen g(6);
    Eigen::VectorXd f(p.space.dim());
    for (int i = 0; i < f.size(); ++i) f[i] = g.uniform(-1, 1);
    EXPECT_THROW(solver.solve(p.space.M * s.reduced[0] + 1e-3 * f), NumericalError);
}
