#include "tmsym/error.hpp"
#include "tmsym/maximizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace tmsym {

namespace {

constexpr double pi = std::numbers::pi;

Eigen::Vector3d cross(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double wrap(double x, double period) {
    x -= period * std::floor(x / period + 0.5);
    return x;
}

// Point at geodesic distance s from vertex x in direction theta.
Eigen::Vector3d exp_map(const SurfaceMesh& mesh, int x, double s, double theta) {
    const Eigen::Vector3d& p = mesh.vertices[x];
    if (mesh.kind == SurfaceKind::FlatTorus)
        return {p[0] + s * std::cos(theta), p[1] + s * std::sin(theta), 0.0};
    Eigen::Vector3d e1 = std::abs(p[0]) < 0.9 ? Eigen::Vector3d(1.0, 0.0, 0.0) : Eigen::Vector3d(0.0, 1.0, 0.0);
    e1 -= e1.dot(p) * p;
    e1 /= e1.norm();
    const Eigen::Vector3d e2 = cross(p, e1);
    return std::cos(s) * p + std::sin(s) * (std::cos(theta) * e1 + std::sin(theta) * e2);
}

}  // namespace

std::optional<double> interpolate_at(const SurfaceMesh& mesh, const Eigen::VectorXd& u, int near_vertex,
                                     const Eigen::Vector3d& point, double search_radius) {
    if (mesh.kind == SurfaceKind::Imported) throw UnsupportedError("interpolation needs a model surface");
    for (const auto& t : mesh.triangles) {
        bool close = false;
        for (int k = 0; k < 3 && !close; ++k) close = mesh.distance(near_vertex, t[k]) <= search_radius;
        if (!close) continue;
        const Eigen::Vector3d& v0 = mesh.vertices[t[0]];
        const Eigen::Vector3d e1 = mesh.edge_vector(t[0], t[1]);
        const Eigen::Vector3d e2 = mesh.edge_vector(t[0], t[2]);
        Eigen::Vector3d d;
        if (mesh.kind == SurfaceKind::UnitSphere) {
            const Eigen::Vector3d n = cross(e1, e2);
            const double denom = n.dot(point);
            if (!(denom > 0.0)) continue;
            d = (n.dot(v0) / denom) * point - v0;
        } else {
            d = {wrap(point[0] - v0[0], mesh.torus.a), wrap(point[1] - v0[1], mesh.torus.b), 0.0};
        }
        const double g11 = e1.dot(e1), g12 = e1.dot(e2), g22 = e2.dot(e2);
        const double r1 = e1.dot(d), r2 = e2.dot(d);
        const double det = g11 * g22 - g12 * g12;
        const double b1 = (g22 * r1 - g12 * r2) / det;
        const double b2 = (g11 * r2 - g12 * r1) / det;
        const double b0 = 1.0 - b1 - b2;
        const double tol = -1e-10;
        if (b0 >= tol && b1 >= tol && b2 >= tol) return b0 * u[t[0]] + b1 * u[t[1]] + b2 * u[t[2]];
    }
    return std::nullopt;
}

BlowupDiagnostics blowup_diagnostics(const MaximizerState& state, const SurfaceMesh& mesh, const GroupAction& action,
                                     const BubbleProfile& bubble, const DiagnosticsOptions& opts) {
    BlowupDiagnostics d;
    const double c = state.c_eps;
    if (!(c > 0.0)) throw NumericalError("diagnostics need a nonzero state");
    d.log_r_eps = 0.5 * state.log_lambda_eps - std::log(c) - (2.0 * pi * state.ell - 0.5 * state.epsilon) * c * c;
    d.r_eps = std::exp(d.log_r_eps);

    const std::vector<double> te = triangle_energies(mesh, state.u);
    const std::vector<int> centers = orbit_of(action, state.x_eps);
    for (double r : opts.radii) {
        for (int x : centers) {
            std::vector<double> inside;
            for (std::size_t ti = 0; ti < mesh.triangles.size(); ++ti) {
                const auto& t = mesh.triangles[ti];
                if (mesh.distance(x, t[0]) <= r && mesh.distance(x, t[1]) <= r && mesh.distance(x, t[2]) <= r)
                    inside.push_back(te[ti]);
            }
            d.local_energies.push_back({x, r, sorted_sum(inside)});
        }
    }
    // ||u||^2_{1,alpha} = 1 puts the full Dirichlet energy at 1 + alpha u'Mu;
    // recomputed here from the lumped mass so no operators are needed
    std::vector<double> l2;
    for (int v = 0; v < mesh.num_vertices(); ++v) l2.push_back(mesh.vertex_areas[v] * state.u[v] * state.u[v]);
    d.energy_budget = 1.0 + state.alpha * sorted_sum(l2);

    const double h = mesh.mean_edge_length();
    if (c < opts.c_threshold) {
        d.warnings.push_back("c_eps = " + std::to_string(c) + " below the blow-up threshold " +
                             std::to_string(opts.c_threshold) + "; profile comparison skipped");
        return d;
    }
    if (d.r_eps < h) {
        d.warnings.push_back("r_eps = " + std::to_string(d.r_eps) + " below mesh resolution " + std::to_string(h) +
                             "; profile comparison skipped");
        return d;
    }
    const double sign = state.u[state.x_eps] >= 0.0 ? 1.0 : -1.0;
    double err = 0.0;
    int missing = 0;
    const double search = opts.disk_radius * d.r_eps + 2.0 * h;
    for (int i = 0; i < opts.radial_samples; ++i) {
        const double rho = opts.disk_radius * i / (opts.radial_samples - 1);
        for (int a = 0; a < (i == 0 ? 1 : opts.angular_samples); ++a) {
            const double theta = 2.0 * pi * a / opts.angular_samples;
            const auto val = interpolate_at(mesh, state.u, state.x_eps, exp_map(mesh, state.x_eps, d.r_eps * rho, theta),
                                            search);
            if (!val) {
                ++missing;
                continue;
            }
            const double phi = c * (sign * *val - c);
            err = std::max(err, std::abs(phi - bubble(rho)));
        }
    }
    if (missing) d.warnings.push_back(std::to_string(missing) + " profile samples could not be located");
    d.profile_checked = true;
    d.profile_error = err;
    return d;
}

SharpnessTable sharpness_probe(const SharpnessSpec& spec) {
    if (spec.betas.empty() || spec.ks.empty()) throw ConfigError("sharpness probe needs beta and k grids");
    const bool with_mesh = spec.mesh && spec.action && spec.ops;
    SharpnessTable table;
    for (double beta : spec.betas) {
        std::vector<double> xs, ys;
        for (double k : spec.ks) {
            SharpnessRow row;
            row.beta = beta;
            row.k = k;
            row.radius = spec.radius;
            row.log_value = moser_semi_analytic(spec.surface, spec.ell, spec.radius, k, spec.alpha, beta).log_value;
            row.mesh_log_value = std::numeric_limits<double>::quiet_NaN();
            if (with_mesh) {
                int center = spec.center;
                if (center < 0) {
                    center = 0;
                    while (spec.action->orbit_size[center] != spec.action->min_orbit) ++center;
                }
                const MoserSequence seq = make_moser_sequence(*spec.mesh, *spec.action, center, spec.radius, k);
                const NormParams p(spec.alpha, beta);
                const Eigen::VectorXd u = moser_normalized(seq, *spec.mesh, *spec.action, *spec.ops, p);
                row.mesh_log_value = exp_functional(u, beta, *spec.ops).log_value;
            }
            xs.push_back(std::log(k));
            ys.push_back(row.log_value);
            table.rows.push_back(row);
        }
        double slope = 0.0;
        if (xs.size() > 1) {
            double mx = 0.0, my = 0.0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                mx += xs[i];
                my += ys[i];
            }
            mx /= xs.size();
            my /= ys.size();
            double sxy = 0.0, sxx = 0.0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                sxy += (xs[i] - mx) * (ys[i] - my);
                sxx += (xs[i] - mx) * (xs[i] - mx);
            }
            slope = sxy / sxx;
        }
        table.slopes.push_back(slope);
    }
    return table;
}

std::vector<FailureRow> failure_scan(const FemOperators& ops, const InvariantSpectrum& spectrum, int level, double beta,
                                     const std::vector<double>& ts) {
    if (level < 1 || level > spectrum.groups()) throw ConfigError("failure scan level out of range");
    const Eigen::VectorXd& e = spectrum.eigenvectors[spectrum.count_through(level - 1)];
    const double alpha = spectrum.distinct(level);
    const double q = e.dot(ops.stiffness * e) - alpha * e.dot(ops.mass * e);
    const double log_vol = std::log(ops.total_area);
    std::vector<FailureRow> rows;
    for (double t : ts) {
        FailureRow r;
        r.t = t;
        r.norm_sq = t * t * q;
        r.log_value = exp_functional(t * e, beta, ops).log_value;
        r.growth = r.log_value - log_vol;
        rows.push_back(r);
    }
    return rows;
}

}  // namespace tmsym
