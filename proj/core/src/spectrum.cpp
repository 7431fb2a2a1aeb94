#include "tmsym/spectrum.hpp"

#include "tmsym/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

namespace tmsym {

namespace {

// Uniform in [-1/2, 1/2) from raw engine bits, identical on every platform.
Eigen::MatrixXd random_block(int n, int p, unsigned long long seed) {
    std::mt19937_64 eng(seed);
    Eigen::MatrixXd X(n, p);
    for (int j = 0; j < p; ++j)
        for (int i = 0; i < n; ++i) X(i, j) = static_cast<double>(eng() >> 11) * 0x1.0p-53 - 0.5;
    return X;
}

void deflate_constant(Eigen::MatrixXd& X, const Eigen::VectorXd& m_ones, double ones_m_ones) {
    const Eigen::RowVectorXd c = (m_ones.transpose() * X) / ones_m_ones;
    X.rowwise() -= c;
}

}  // namespace

double InvariantSpectrum::distinct(int j) const {
    if (j < 1 || j > groups()) throw ConfigError("eigenvalue group " + std::to_string(j) + " was not computed");
    return eigenvalues[count_through(j - 1)];
}

int InvariantSpectrum::count_through(int j) const {
    int c = 0;
    for (int g = 0; g < j && g < groups(); ++g) c += multiplicities[g];
    return c;
}

InvariantSpectrum invariant_spectrum(const FemOperators& ops, const GroupAction& action, int count,
                                     const EigenOptions& opts) {
    return invariant_spectrum(make_invariant_space(ops, action), count, opts);
}

InvariantSpectrum invariant_spectrum(const InvariantSpace& space, int count, const EigenOptions& opts) {
    const int n = space.dim();
    if (count < 1) throw ConfigError("eigenvalue count must be at least 1");
    if (count > n - 1)
        throw ConfigError("requested " + std::to_string(count) + " eigenpairs but the invariant mean-zero space has dimension " +
                          std::to_string(n - 1));
    const int p = std::min(n - 1, 2 * count + 8);

    const double sigma = -1.0;
    SpMat shifted = space.K - sigma * space.M;
    Eigen::SimplicialLDLT<SpMat> solver(shifted);
    if (solver.info() != Eigen::Success) throw NumericalError("factorization of K + M failed");

    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd m_ones = space.M * ones;
    const double omo = ones.dot(m_ones);

    Eigen::MatrixXd X = random_block(n, p, opts.seed);
    deflate_constant(X, m_ones, omo);

    Eigen::VectorXd theta;
    Eigen::MatrixXd Y(n, p), KY(n, p), MY(n, p);
    int want = count;
    double worst = 0.0;
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        const Eigen::MatrixXd MX = space.M * X;
        for (int j = 0; j < p; ++j) Y.col(j) = solver.solve(MX.col(j));
        deflate_constant(Y, m_ones, omo);
        KY = space.K * Y;
        MY = space.M * Y;
        Eigen::MatrixXd A = Y.transpose() * KY;
        Eigen::MatrixXd B = Y.transpose() * MY;
        A = 0.5 * (A + A.transpose()).eval();
        B = 0.5 * (B + B.transpose()).eval();
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> rr(A, B);
        if (rr.info() != Eigen::Success) throw NumericalError("Rayleigh-Ritz step failed");
        theta = rr.eigenvalues();
        const Eigen::MatrixXd V = rr.eigenvectors();
        X = Y * V;

        // keep whole eigenvalue clusters
        want = count;
        while (want < p - 1 && std::abs(theta[want] - theta[want - 1]) <= opts.grouping * std::abs(theta[want - 1]))
            ++want;

        const Eigen::MatrixXd KX = KY * V, MXn = MY * V;
        worst = 0.0;
        for (int j = 0; j < want; ++j) {
            const double res = (KX.col(j) - theta[j] * MXn.col(j)).norm() / MXn.col(j).norm();
            worst = std::max(worst, res);
        }
        if (worst <= opts.tolerance) break;
    }
    if (worst > opts.tolerance)
        throw NumericalError("invariant eigensolver did not converge: worst residual " + std::to_string(worst) +
                             " after " + std::to_string(it) + " iterations");

    InvariantSpectrum out;
    out.iterations = it + 1;
    for (int j = 0; j < want; ++j) {
        Eigen::VectorXd w = X.col(j);
        w /= std::sqrt(w.dot(space.M * w));
        Eigen::Index imax = 0;
        w.cwiseAbs().maxCoeff(&imax);
        if (w[imax] < 0.0) w = -w;
        Eigen::VectorXd u = space.lift(w);
        const Eigen::VectorXd r = space.K * w - theta[j] * (space.M * w);
        out.eigenvalues.push_back(theta[j]);
        out.residuals.push_back(r.norm() / (space.M * w).norm());
        out.reduced.push_back(std::move(w));
        out.eigenvectors.push_back(std::move(u));
    }
    for (int j = 0; j < want;) {
        int k = j + 1;
        while (k < want && std::abs(out.eigenvalues[k] - out.eigenvalues[k - 1]) <=
                               opts.grouping * std::abs(out.eigenvalues[k - 1]))
            ++k;
        out.multiplicities.push_back(k - j);
        j = k;
    }
    return out;
}

double rayleigh_quotient(const InvariantVector& u, const FemOperators& ops) {
    const double m = u.dot(ops.mass * u);
    if (!(m > 0.0)) throw NumericalError("Rayleigh quotient of the zero vector");
    return u.dot(ops.stiffness * u) / m;
}

Eigen::VectorXd ComplementSpace::project(const Eigen::VectorXd& u, const FemOperators& ops) const {
    if (basis.empty()) return remove_mean(u, ops);
    const Eigen::VectorXd mu = ops.mass * u;
    Eigen::VectorXd out = u;
    for (const auto& e : basis) out -= e.dot(mu) * e;
    return remove_mean(out, ops);
}

ComplementSpace complement_projector(const InvariantSpectrum& spec, int j) {
    if (j < 1) throw ConfigError("complement level must be at least 1");
    ComplementSpace c;
    c.level = j;
    c.lambda = spec.distinct(j);
    const int m = spec.count_through(j - 1);
    for (int i = 0; i < m; ++i) {
        c.basis.push_back(spec.eigenvectors[i]);
        c.reduced.push_back(spec.reduced[i]);
    }
    return c;
}

}  // namespace tmsym
