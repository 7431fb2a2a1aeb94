#include "tmsym/error.hpp"
#include "tmsym/spectrum.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace tmsym {

InvariantSpace make_invariant_space(const FemOperators& ops, const GroupAction& action) {
    InvariantSpace s;
    s.orbits = orbits(action);
    const int n = static_cast<int>(ops.lumped_mass.size());
    s.orbit_index.assign(n, -1);
    for (int o = 0; o < s.dim(); ++o)
        for (int v : s.orbits[o]) s.orbit_index[v] = o;

    std::vector<Eigen::Triplet<double>> pt;
    pt.reserve(n);
    for (int v = 0; v < n; ++v) pt.emplace_back(v, s.orbit_index[v], 1.0);
    SpMat P(n, s.dim());
    P.setFromTriplets(pt.begin(), pt.end());
    const SpMat Pt = P.transpose();
    s.K = Pt * ops.stiffness * P;
    s.M = Pt * ops.mass * P;
    s.K.makeCompressed();
    s.M.makeCompressed();
    s.a = Pt * ops.lumped_mass;
    s.total_area = ops.total_area;
    return s;
}

Eigen::VectorXd InvariantSpace::lift(const Eigen::VectorXd& w) const {
    Eigen::VectorXd u(orbit_index.size());
    for (std::size_t v = 0; v < orbit_index.size(); ++v) u[v] = w[orbit_index[v]];
    return u;
}

Eigen::VectorXd InvariantSpace::restrict_dual(const Eigen::VectorXd& f) const {
    Eigen::VectorXd r(dim());
    std::vector<double> vals;
    for (int o = 0; o < dim(); ++o) {
        vals.clear();
        for (int v : orbits[o]) vals.push_back(f[v]);
        r[o] = sorted_sum(vals);
    }
    return r;
}

Eigen::VectorXd InvariantSpace::coordinates(const Eigen::VectorXd& u) const {
    Eigen::VectorXd w(dim());
    for (int o = 0; o < dim(); ++o) w[o] = u[orbits[o].front()];
    return w;
}

ShiftedSolver::ShiftedSolver(const InvariantSpace& space, double alpha, std::vector<Eigen::VectorXd> deflation,
                             double tolerance, int max_iterations)
    : space_(&space), alpha_(alpha), tol_(tolerance), max_it_(max_iterations) {
    const int n = space.dim();
    const int m = 1 + static_cast<int>(deflation.size());
    C_.resize(n, m);
    L_.resize(n, m);
    C_.col(0).setOnes();
    L_.col(0) = space.a;
    for (int k = 1; k < m; ++k) {
        C_.col(k) = deflation[k - 1];
        L_.col(k) = space.M * deflation[k - 1];
    }
    const Eigen::MatrixXd G = L_.transpose() * C_;
    G_inv_ = G.inverse();

    SpMat pre = space.K + space.M;
    precond_ = std::make_shared<Eigen::SimplicialLDLT<SpMat>>(pre);
    if (precond_->info() != Eigen::Success) throw NumericalError("factorization of K + M failed");
}

Eigen::VectorXd ShiftedSolver::project(const Eigen::VectorXd& w) const {
    return w - C_ * (G_inv_ * (L_.transpose() * w));
}

Eigen::VectorXd ShiftedSolver::project_dual(const Eigen::VectorXd& f) const {
    return f - L_ * (G_inv_.transpose() * (C_.transpose() * f));
}

double ShiftedSolver::energy(const Eigen::VectorXd& w) const {
    return w.dot(space_->K * w) - alpha_ * w.dot(space_->M * w);
}

Eigen::VectorXd ShiftedSolver::solve(const Eigen::VectorXd& f, SolveReport* report) const {
    const InvariantSpace& s = *space_;
    auto apply = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return s.K * x - alpha_ * (s.M * x); };
    Eigen::VectorXd x = Eigen::VectorXd::Zero(s.dim());
    Eigen::VectorXd r = project_dual(f);
    Eigen::VectorXd z = project(precond_->solve(r));
    double rz = r.dot(z);
    const double rz0 = rz;
    SolveReport rep;
    if (rz0 <= 0.0) {
        if (report) *report = rep;
        return x;
    }
    Eigen::VectorXd p = z;
    int it = 0;
    for (; it < max_it_; ++it) {
        if (std::sqrt(rz / rz0) <= tol_) break;
        const Eigen::VectorXd q = apply(p);
        const double pq = p.dot(q);
        if (!(pq > 0.0))
            throw NumericalError("K - alpha M is not positive on the constrained space (alpha at or above the "
                                 "invariant eigenvalue)");
        const double step = rz / pq;
        x += step * p;
        r -= step * project_dual(q);
        z = project(precond_->solve(r));
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    rep.iterations = it;
    rep.relative_residual = std::sqrt(std::max(rz, 0.0) / rz0);
    if (rep.relative_residual > tol_ * 10.0)
        throw NumericalError("constrained CG did not converge: relative residual " +
                             std::to_string(rep.relative_residual) + " after " + std::to_string(it) + " iterations");
    if (report) *report = rep;
    return project(x);
}

}  // namespace tmsym
