#include "tmsym/discretization.hpp"

#include "tmsym/error.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <iomanip>

namespace tmsym {

namespace {

struct TriangleGeometry {
    double area;
    std::array<double, 3> half_cot;  // half_cot[e] weights edge (t[e], t[e+1]), opposite t[e+2]
};

TriangleGeometry triangle_geometry(const SurfaceMesh& mesh, const std::array<int, 3>& t, std::size_t index) {
    std::array<double, 3> l2;
    for (int e = 0; e < 3; ++e) l2[e] = mesh.edge_vector(t[e], t[(e + 1) % 3]).squaredNorm();
    std::array<double, 3> s{std::sqrt(l2[0]), std::sqrt(l2[1]), std::sqrt(l2[2])};
    std::sort(s.begin(), s.end(), std::greater<>());
    const double prod =
        (s[0] + (s[1] + s[2])) * (s[2] - (s[0] - s[1])) * (s[2] + (s[0] - s[1])) * (s[0] + (s[1] - s[2]));
    const double area = 0.25 * std::sqrt(std::max(prod, 0.0));
    if (!(area > 1e-14 * s[0] * s[0]))
        throw ConstructionError("degenerate triangle " + std::to_string(index) + " (zero area)");
    TriangleGeometry g{area, {}};
    for (int e = 0; e < 3; ++e) {
        // edge e joins t[e], t[e+1]; the two other edges are e+1 and e+2
        const double cot = (l2[(e + 1) % 3] + l2[(e + 2) % 3] - l2[e]) / (4.0 * area);
        g.half_cot[e] = 0.5 * cot;
    }
    return g;
}

}  // namespace

double sorted_sum(std::vector<double>& values) {
    std::sort(values.begin(), values.end());
    double s = 0.0;
    for (double v : values) s += v;
    return s;
}

NormParams::NormParams(double alpha_, double beta_, double gap)
    : alpha(alpha_), beta(beta_), eigen_gap_check(gap) {
    if (!(beta > 0.0)) throw ConfigError("beta must be positive");
    if (!(alpha < eigen_gap_check))
        throw ConfigError("alpha must be below the invariant eigenvalue of the working space");
}

FemOperators assemble(const SurfaceMesh& mesh) {
    const int n = mesh.num_vertices();
    FemOperators ops;
    ops.triangle_areas.resize(mesh.num_triangles());

    std::vector<std::vector<double>> k_diag(n), m_diag(n), thirds(n);
    std::vector<Eigen::Triplet<double>> kt, mt;
    kt.reserve(mesh.triangles.size() * 6 + n);
    mt.reserve(mesh.triangles.size() * 6 + n);
    for (std::size_t ti = 0; ti < mesh.triangles.size(); ++ti) {
        const auto& t = mesh.triangles[ti];
        const TriangleGeometry g = triangle_geometry(mesh, t, ti);
        ops.triangle_areas[static_cast<Eigen::Index>(ti)] = g.area;
        for (int e = 0; e < 3; ++e) {
            const int i = t[e], j = t[(e + 1) % 3];
            kt.emplace_back(i, j, -g.half_cot[e]);
            kt.emplace_back(j, i, -g.half_cot[e]);
            mt.emplace_back(i, j, g.area / 12.0);
            mt.emplace_back(j, i, g.area / 12.0);
        }
        for (int v = 0; v < 3; ++v) {
            // vertex t[v] touches edges v (to t[v+1]) and v+2 (from t[v+2])
            k_diag[t[v]].push_back(g.half_cot[v] + g.half_cot[(v + 2) % 3]);
            m_diag[t[v]].push_back(g.area / 6.0);
            thirds[t[v]].push_back(g.area / 3.0);
        }
    }
    ops.lumped_mass.resize(n);
    for (int v = 0; v < n; ++v) {
        kt.emplace_back(v, v, sorted_sum(k_diag[v]));
        mt.emplace_back(v, v, sorted_sum(m_diag[v]));
        ops.lumped_mass[v] = sorted_sum(thirds[v]);
    }
    ops.stiffness.resize(n, n);
    ops.mass.resize(n, n);
    ops.stiffness.setFromTriplets(kt.begin(), kt.end());
    ops.mass.setFromTriplets(mt.begin(), mt.end());
    ops.stiffness.makeCompressed();
    ops.mass.makeCompressed();
    ops.total_area = ops.lumped_mass.sum();
    return ops;
}

Eigen::VectorXd group_average(const Eigen::VectorXd& u, const GroupAction& action) {
    const Eigen::Index n = u.size();
    if (action.permutations.empty() || static_cast<Eigen::Index>(action.permutations[0].size()) != n)
        throw ConfigError("vector length does not match the group action");
    if (action.group_order == 1) return u;
    Eigen::VectorXd out(n);
    std::vector<double> vals(action.permutations.size());
    for (Eigen::Index x = 0; x < n; ++x) {
        for (std::size_t g = 0; g < action.permutations.size(); ++g) vals[g] = u[action.permutations[g][x]];
        out[x] = sorted_sum(vals) / static_cast<double>(action.group_order);
    }
    return out;
}

Eigen::VectorXd remove_mean(const Eigen::VectorXd& u, const FemOperators& ops) {
    const double mean = ops.lumped_mass.dot(u) / ops.total_area;
    return u.array() - mean;
}

InvariantVector project_invariant_meanzero(const Eigen::VectorXd& u, const GroupAction& action,
                                           const FemOperators& ops) {
    return remove_mean(group_average(u, action), ops);
}

double quadratic_form(const Eigen::VectorXd& u, const FemOperators& ops, double alpha) {
    return u.dot(ops.stiffness * u) - alpha * u.dot(ops.mass * u);
}

double norm_one_alpha(const InvariantVector& u, const FemOperators& ops, const NormParams& p) {
    const double ku = u.dot(ops.stiffness * u);
    const double q = ku - p.alpha * u.dot(ops.mass * u);
    if (q < 0.0) {
        if (q > -1e-13 * std::max(ku, 1e-300)) return 0.0;
        throw NumericalError("negative squared norm (" + std::to_string(q) +
                             "): alpha is at or above the invariant eigenvalue, or the input is not projected");
    }
    return std::sqrt(q);
}

ExpValue exp_functional(const Eigen::VectorXd& u, double beta, const FemOperators& ops) {
    if (!(beta > 0.0)) throw ConfigError("beta must be positive");
    const Eigen::Index n = u.size();
    double shift = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) shift = std::max(shift, beta * u[i] * u[i]);
    std::vector<double> terms(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) terms[i] = ops.lumped_mass[i] * std::exp(beta * u[i] * u[i] - shift);
    const double s = sorted_sum(terms);
    ExpValue r;
    r.log_value = shift + std::log(s);
    r.value = std::exp(r.log_value);
    return r;
}

std::vector<double> triangle_energies(const SurfaceMesh& mesh, const Eigen::VectorXd& u) {
    std::vector<double> out(mesh.triangles.size());
    for (std::size_t ti = 0; ti < mesh.triangles.size(); ++ti) {
        const auto& t = mesh.triangles[ti];
        const TriangleGeometry g = triangle_geometry(mesh, t, ti);
        std::array<double, 3> terms;
        for (int e = 0; e < 3; ++e) {
            const double d = u[t[e]] - u[t[(e + 1) % 3]];
            terms[e] = g.half_cot[e] * d * d;
        }
        std::sort(terms.begin(), terms.end());
        out[ti] = terms[0] + terms[1] + terms[2];
    }
    return out;
}

double dirichlet_energy(const SurfaceMesh& mesh, const Eigen::VectorXd& u) {
    auto e = triangle_energies(mesh, u);
    double s = 0.0;
    for (double x : e) s += x;
    return s;
}

void write_matrix_market(const SpMat& a, std::ostream& out) {
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << a.rows() << ' ' << a.cols() << ' ' << a.nonZeros() << '\n';
    out << std::setprecision(17);
    for (int k = 0; k < a.outerSize(); ++k)
        for (SpMat::InnerIterator it(a, k); it; ++it) out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

}  // namespace tmsym
