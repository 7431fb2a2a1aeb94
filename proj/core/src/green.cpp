#include "tmsym/constructions.hpp"
#include "tmsym/error.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace tmsym {

namespace {

constexpr double pi = std::numbers::pi;

// Tangent-plane coordinates of v around x0 (log map on the sphere).
Eigen::Vector2d tangent_coords(const SurfaceMesh& mesh, int x0, int v) {
    if (mesh.kind == SurfaceKind::FlatTorus) {
        const Eigen::Vector3d d = mesh.edge_vector(x0, v);
        return {d.x(), d.y()};
    }
    const Eigen::Vector3d& p = mesh.vertices[x0];
    Eigen::Vector3d e1 = std::abs(p.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
    e1 = (e1 - e1.dot(p) * p).normalized();
    const Eigen::Vector3d e2 = p.cross(e1);
    const Eigen::Vector3d& x = mesh.vertices[v];
    const Eigen::Vector3d w = x - x.dot(p) * p;
    const double wn = w.norm();
    if (wn == 0.0) return Eigen::Vector2d::Zero();
    const double rho = mesh.distance(x0, v);
    return {rho * w.dot(e1) / wn, rho * w.dot(e2) / wn};
}

// Surface point for the flat-triangle point, and its distance to the orbit.
double point_orbit_distance(const SurfaceMesh& mesh, const std::vector<int>& orbit, const Eigen::Vector3d& base,
                            const Eigen::Vector3d& offset) {
    Eigen::Vector3d p = base + offset;
    if (mesh.kind == SurfaceKind::UnitSphere) p.normalize();
    double d = std::numeric_limits<double>::infinity();
    for (int q : orbit) d = std::min(d, mesh.distance_to_point(q, p));
    return d;
}

}  // namespace

GreenDecomposition green_solve(const FemOperators& ops, const GroupAction& action, int source, const NormParams& p) {
    return green_solve(ops, action, make_invariant_space(ops, action), source, p);
}

GreenDecomposition green_solve(const FemOperators& ops, const GroupAction& action, const InvariantSpace& space,
                               int source, const NormParams& p) {
    const int n = static_cast<int>(ops.lumped_mass.size());
    if (source < 0 || source >= n) throw ConfigError("Green source vertex out of range");
    GreenDecomposition dec;
    dec.source = source;
    dec.source_orbit = orbit_of(action, source);
    dec.alpha = p.alpha;
    dec.ell = static_cast<int>(dec.source_orbit.size());
    if (dec.ell != action.min_orbit)
        dec.warnings.push_back("source orbit has " + std::to_string(dec.ell) + " points but the minimal orbit size is " +
                               std::to_string(action.min_orbit));

    // unit load spread over the orbit (weight 1/ell per point) minus the uniform density
    Eigen::VectorXd b = -space.a / ops.total_area;
    b[space.orbit_index[source]] += 1.0;

    ShiftedSolver solver(space, p.alpha);
    SolveReport rep;
    const Eigen::VectorXd w = solver.solve(b, &rep);
    const Eigen::VectorXd r = solver.project_dual(b - (space.K * w - p.alpha * (space.M * w)));
    dec.residual = r.norm() / solver.project_dual(b).norm();
    dec.iterations = rep.iterations;
    dec.values = space.lift(w);
    return dec;
}

AFit extract_A(const GreenDecomposition& dec, const SurfaceMesh& mesh, const AFitOptions& opts) {
    const int x0 = dec.source;
    const int ell = dec.ell;
    const double kappa = 1.0 / (2.0 * pi * ell);
    AFit fit;
    fit.h = mesh.mean_edge_length();
    fit.b = dec.alpha / (8.0 * pi * ell);
    fit.r_inner = opts.inner_radius > 0.0 ? opts.inner_radius : opts.inner_factor * fit.h * opts.scale;
    fit.r_outer = opts.outer_radius > 0.0 ? opts.outer_radius : opts.outer_factor * fit.h * opts.scale;
    if (opts.outer_radius <= 0.0) {
        // keep clear of the cut locus and of the other orbit points
        double cap = 0.5 * mesh.radius_cap();
        for (int q : dec.source_orbit)
            if (q != x0) cap = std::min(cap, 0.25 * mesh.distance(x0, q));
        fit.r_outer = std::min(fit.r_outer, cap);
    }
    for (int q : dec.source_orbit) {
        if (q != x0 && mesh.distance(x0, q) <= fit.r_outer)
            throw ConstructionError("fit annulus around vertex " + std::to_string(x0) + " contains orbit point " +
                                    std::to_string(q));
    }
    if (!(fit.r_outer > fit.r_inner))
        throw ConstructionError("fit annulus is empty (mesh too coarse for the requested radii)");

    std::vector<int> verts;
    std::vector<double> rhos;
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        const double rho = mesh.distance(x0, v);
        if (rho >= fit.r_inner && rho <= fit.r_outer) {
            verts.push_back(v);
            rhos.push_back(rho);
        }
    }
    const int m = static_cast<int>(verts.size());
    if (m < 12) throw ConstructionError("fit annulus holds only " + std::to_string(m) + " vertices");

    Eigen::MatrixXd X(m, 5);
    Eigen::VectorXd y(m);
    for (int i = 0; i < m; ++i) {
        const double rho = rhos[i];
        const Eigen::Vector2d t = tangent_coords(mesh, x0, verts[i]);
        X.row(i) << 1.0, t.x(), t.y(), rho * rho, rho * rho * rho * rho;
        y[i] = dec.values[verts[i]] + kappa * std::log(rho) - fit.b * rho * rho * std::log(rho);
    }
    const Eigen::VectorXd coef = X.colPivHouseholderQr().solve(y);
    fit.A = coef[0];
    fit.slope = coef.segment<2>(1);
    fit.q2 = coef[3];
    fit.q4 = coef[4];
    fit.samples = m;
    fit.residual_rms = std::sqrt((X * coef - y).squaredNorm() / m);
    fit.psi_samples.reserve(m);
    for (int i = 0; i < m; ++i)
        fit.psi_samples.emplace_back(rhos[i], dec.values[verts[i]] + kappa * std::log(rhos[i]) - fit.A);
    std::sort(fit.psi_samples.begin(), fit.psi_samples.end());
    return fit;
}

double richardson(double coarse, double fine, double order) {
    return fine + (fine - coarse) / (std::pow(2.0, order) - 1.0);
}

UpperBound upper_bound_value(double A, double volume, int ell) {
    UpperBound u;
    const double x = 1.0 + 4.0 * pi * ell * A;  // exponent
    const double log_peak = std::log(pi * ell) + x;
    const double big = std::max(std::log(volume), log_peak);
    u.log_value = big + std::log(std::exp(std::log(volume) - big) + std::exp(log_peak - big));
    u.value = std::exp(u.log_value);
    return u;
}

LocalGreen local_green(const AFit& fit, int ell) {
    LocalGreen g;
    g.ell = ell;
    g.A = fit.A;
    g.b = fit.b;
    g.q2 = fit.q2;
    g.q4 = fit.q4;
    return g;
}

double LocalGreen::regular(double rho) const {
    const double r2 = rho * rho;
    return b * r2 * std::log(rho) + q2 * r2 + q4 * r2 * r2;
}

double LocalGreen::regular_derivative(double rho) const {
    return b * (2.0 * rho * std::log(rho) + rho) + 2.0 * q2 * rho + 4.0 * q4 * rho * rho * rho;
}

double LocalGreen::value(double rho) const {
    return -std::log(rho) / (2.0 * pi * ell) + A + regular(rho);
}

double LocalGreen::derivative(double rho) const {
    return -1.0 / (2.0 * pi * ell * rho) + regular_derivative(rho);
}

double green_l2_squared(const GreenDecomposition& dec, const AFit& fit, const SurfaceMesh& mesh,
                        const FemOperators& ops) {
    const LocalGreen g = local_green(fit, dec.ell);
    std::set<int> near(dec.source_orbit.begin(), dec.source_orbit.end());
    std::set<int> ring1 = near;
    for (const auto& t : mesh.triangles) {
        const bool touches = near.count(t[0]) || near.count(t[1]) || near.count(t[2]);
        if (touches) ring1.insert(t.begin(), t.end());
    }
    // Gauss-Legendre on [0, 1]
    using GL = boost::math::quadrature::gauss<double, 20>;
    std::vector<double> xs, ws;
    {
        const auto& ab = GL::abscissa();
        const auto& wt = GL::weights();
        for (std::size_t i = 0; i < ab.size(); ++i) {
            const double signs[2] = {1.0, -1.0};
            for (double s : signs) {
                if (ab[i] == 0.0 && s < 0) continue;
                xs.push_back(0.5 * (1.0 + s * ab[i]));
                ws.push_back(0.5 * wt[i]);
            }
        }
    }

    std::vector<double> terms;
    terms.reserve(mesh.triangles.size());
    for (std::size_t ti = 0; ti < mesh.triangles.size(); ++ti) {
        const auto& t = mesh.triangles[ti];
        const double area = ops.triangle_areas[static_cast<Eigen::Index>(ti)];
        const bool excluded = ring1.count(t[0]) || ring1.count(t[1]) || ring1.count(t[2]);
        if (!excluded) {
            const double u0 = dec.values[t[0]], u1 = dec.values[t[1]], u2 = dec.values[t[2]];
            terms.push_back(area / 6.0 * (u0 * u0 + u1 * u1 + u2 * u2 + u0 * u1 + u1 * u2 + u2 * u0));
            continue;
        }
        // Duffy map collapsing at the vertex nearest the sources
        int apex = 0;
        double best = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 3; ++k) {
            const double d = orbit_distance(mesh, dec.source_orbit, t[k]);
            if (d < best) {
                best = d;
                apex = k;
            }
        }
        const int v0 = t[apex], v1 = t[(apex + 1) % 3], v2 = t[(apex + 2) % 3];
        const Eigen::Vector3d base = mesh.vertices[v0];
        const Eigen::Vector3d e1 = mesh.edge_vector(v0, v1), e2 = mesh.edge_vector(v1, v2);
        double sum = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            for (std::size_t j = 0; j < xs.size(); ++j) {
                const double s = xs[i], u = xs[j];
                const double rho = point_orbit_distance(mesh, dec.source_orbit, base, s * e1 + s * u * e2);
                const double gv = g.value(std::max(rho, 1e-300));
                sum += ws[i] * ws[j] * 2.0 * area * s * gv * gv;
            }
        }
        terms.push_back(sum);
    }
    return sorted_sum(terms);
}

}  // namespace tmsym
