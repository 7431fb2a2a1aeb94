#include "tmsym/constructions.hpp"
#include "tmsym/error.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tmsym {

namespace {

constexpr double pi = std::numbers::pi;

template <class F>
double gk(F f, double a, double b) {
    if (!(b > a)) return 0.0;
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 12, 1e-12, &err);
}

}  // namespace

double RadialSurface::area_element(double rho) const {
    return kind == SurfaceKind::UnitSphere ? std::sin(rho) : rho;
}

double RadialSurface::ball_area(double rho) const {
    // 2 pi (1 - cos rho) written without cancellation
    if (kind == SurfaceKind::UnitSphere) {
        const double s = std::sin(0.5 * rho);
        return 4.0 * pi * s * s;
    }
    return pi * rho * rho;
}

RadialSurface radial_surface(const SurfaceMesh& mesh) {
    RadialSurface s;
    s.kind = mesh.kind;
    switch (mesh.kind) {
        case SurfaceKind::UnitSphere: s.volume = 4.0 * pi; break;
        case SurfaceKind::FlatTorus: s.volume = mesh.torus.a * mesh.torus.b; break;
        case SurfaceKind::Imported: throw UnsupportedError("radial model is not available on imported meshes");
    }
    return s;
}

double orbit_ball_radius(const SurfaceMesh& mesh, const std::vector<int>& orbit) {
    double cap = mesh.radius_cap();
    for (std::size_t i = 0; i < orbit.size(); ++i)
        for (std::size_t j = i + 1; j < orbit.size(); ++j) cap = std::min(cap, 0.25 * mesh.distance(orbit[i], orbit[j]));
    return cap;
}

double orbit_distance(const SurfaceMesh& mesh, const std::vector<int>& orbit, int v) {
    double d = std::numeric_limits<double>::infinity();
    for (int q : orbit) d = std::min(d, mesh.distance(q, v));
    return d;
}

MoserSequence make_moser_sequence(const SurfaceMesh& mesh, const GroupAction& action, int center, double radius,
                                  double k) {
    if (center < 0 || center >= mesh.num_vertices()) throw ConfigError("Moser center out of range");
    if (!(k >= 1.0)) throw ConfigError("Moser level k must be at least 1");
    if (!(radius > 0.0)) throw ConfigError("Moser radius must be positive");
    MoserSequence s;
    s.center = center;
    s.radius = radius;
    s.k = k;
    s.orbit = orbit_of(action, center);
    s.ell = static_cast<int>(s.orbit.size());
    const double r0 = orbit_ball_radius(mesh, s.orbit);
    if (radius > r0)
        throw ConstructionError("Moser radius " + std::to_string(radius) + " exceeds r0 = " + std::to_string(r0) +
                                ": orbit balls would overlap");
    return s;
}

double moser_profile(double rho, double radius, double k) {
    if (rho >= radius) return 0.0;
    const double log_k = std::log(k);
    if (rho <= radius * std::pow(k, -0.25)) return log_k;
    return 4.0 * std::log(radius / rho);
}

MoserEvaluation moser_evaluate(const MoserSequence& seq, const SurfaceMesh& mesh) {
    MoserEvaluation ev;
    ev.values.resize(mesh.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v)
        ev.values[v] = moser_profile(orbit_distance(mesh, seq.orbit, v), seq.radius, seq.k);
    ev.mesh_energy = dirichlet_energy(mesh, ev.values);
    ev.closed_form_energy = 8.0 * pi * seq.ell * std::log(seq.k);
    return ev;
}

InvariantVector moser_normalized(const MoserSequence& seq, const SurfaceMesh& mesh, const GroupAction& action,
                                 const FemOperators& ops, const NormParams& p, const ComplementSpace* complement) {
    const MoserEvaluation ev = moser_evaluate(seq, mesh);
    Eigen::VectorXd u = project_invariant_meanzero(ev.values, action, ops);
    if (complement) u = complement->project(u, ops);
    const double n = norm_one_alpha(u, ops, p);
    if (!(n > 0.0)) throw NumericalError("Moser function has zero norm (k = 1 or radius below mesh resolution)");
    return u / n;
}

MoserSemiAnalytic moser_semi_analytic(const RadialSurface& surf, int ell, double r, double k, double alpha,
                                      double beta) {
    if (!(k > 1.0)) throw ConfigError("semi-analytic Moser evaluation needs k > 1");
    const double log_k = std::log(k);
    const double T = 0.25 * log_k;  // annulus in t = log(r / rho)
    const double rho_k = r * std::exp(-T);
    auto s_of_t = [&](double t) {
        const double rho = r * std::exp(-t);
        return surf.area_element(rho) * rho;  // d rho = rho dt
    };
    MoserSemiAnalytic out;
    out.energy = ell * 2.0 * pi * gk([&](double t) { return 16.0 / std::pow(r * std::exp(-t), 2) * s_of_t(t); }, 0.0, T);
    const double plate = surf.ball_area(rho_k);
    const double int1 = ell * (log_k * plate + 2.0 * pi * gk([&](double t) { return 4.0 * t * s_of_t(t); }, 0.0, T));
    const double int2 =
        ell * (log_k * log_k * plate + 2.0 * pi * gk([&](double t) { return 16.0 * t * t * s_of_t(t); }, 0.0, T));
    out.mean = int1 / surf.volume;
    out.centered_l2 = int2 - surf.volume * out.mean * out.mean;
    out.norm_sq = out.energy - alpha * out.centered_l2;
    if (!(out.norm_sq > 0.0)) throw NumericalError("Moser function has non-positive squared norm");

    const double m = out.mean, n2 = out.norm_sq;
    auto expo = [&](double value) { return beta * (value - m) * (value - m) / n2; };
    const double x_plate = expo(log_k), x_out = expo(0.0);
    double shift = std::max(x_plate, x_out);
    for (int i = 0; i <= 64; ++i) shift = std::max(shift, expo(4.0 * T * i / 64.0));
    const double annulus = 2.0 * pi * gk([&](double t) { return std::exp(expo(4.0 * t) - shift) * s_of_t(t); }, 0.0, T);
    const double outside = surf.volume - ell * surf.ball_area(r);
    const double scaled = ell * plate * std::exp(x_plate - shift) + ell * annulus + outside * std::exp(x_out - shift);
    out.log_value = shift + std::log(scaled);
    return out;
}

double BubbleProfile::operator()(double s) const {
    return -std::log1p(pi * ell * s * s) / (4.0 * pi * ell);
}

double bubble_integral(int ell, double R) {
    if (R < 0.0) throw ConfigError("bubble radius must be non-negative");
    const double x = pi * ell * R * R;
    return x / (1.0 + x) / ell;  // (1/ell)(1 - 1/(1 + x))
}

double bubble_integral_quadrature(int ell, double R) {
    if (R < 0.0) throw ConfigError("bubble radius must be non-negative");
    const double scale = 1.0 / std::sqrt(pi * ell);
    auto f = [&](double s) {
        const double d = 1.0 + pi * ell * s * s;
        return 2.0 * pi * s / (d * d);
    };
    const double split = std::min(R, 4.0 * scale);
    double total = gk(f, 0.0, split);
    if (R > split) {
        // tail on a logarithmic scale
        total += gk([&](double u) {
            const double s = std::exp(u);
            return f(s) * s;
        }, std::log(split), std::log(R));
    }
    return total;
}

}  // namespace tmsym
