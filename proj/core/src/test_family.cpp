#include "tmsym/constructions.hpp"
#include "tmsym/error.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace tmsym {

namespace {

constexpr double pi = std::numbers::pi;

template <class F>
double gk(F f, double a, double b) {
    if (!(b > a)) return 0.0;
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 12, 1e-12, &err);
}

// integral over [0, r] of f, through rho = r e^{-t} so that log-type
// singularities at the origin become exponentially decaying tails.
template <class F>
double gk_origin(F f, double r) {
    return gk([&](double t) {
        const double rho = r * std::exp(-t);
        return f(rho) * rho;
    }, 0.0, 80.0);
}

}  // namespace

double TestFunctionFamily::cutoff(double rho) const {
    if (rho <= rho_inner) return 1.0;
    if (rho >= rho_outer) return 0.0;
    const double t = (rho - rho_inner) / (rho_outer - rho_inner);
    return 1.0 - t * t * (3.0 - 2.0 * t);
}

double TestFunctionFamily::H(double rho) const {
    if (rho <= rho_inner) return plateau - std::log1p(pi * ell * rho * rho / (epsilon * epsilon)) / (4.0 * pi * ell);
    if (rho <= rho_outer)
        return -std::log(rho) / (2.0 * pi * ell) + g.A + (1.0 - cutoff(rho)) * g.regular(rho);
    return g.value(rho);
}

double TestFunctionFamily::H_derivative(double rho) const {
    if (rho <= rho_inner) {
        const double x = pi * ell * rho * rho / (epsilon * epsilon);
        return -(2.0 * pi * ell * rho / (epsilon * epsilon)) / (1.0 + x) / (4.0 * pi * ell);
    }
    if (rho <= rho_outer) {
        const double w = rho_outer - rho_inner;
        const double t = (rho - rho_inner) / w;
        const double dzeta = -(6.0 * t - 6.0 * t * t) / w;
        return -1.0 / (2.0 * pi * ell * rho) - dzeta * g.regular(rho) + (1.0 - cutoff(rho)) * g.regular_derivative(rho);
    }
    return g.derivative(rho);
}

TestFunctionFamily build_test_family(const GreenDecomposition& dec, const AFit& fit, const SurfaceMesh& mesh,
                                     const FemOperators& ops, const NormParams& p, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("test family needs 0 < epsilon < 1");
    TestFunctionFamily f;
    f.epsilon = epsilon;
    f.R = -std::log(epsilon);
    f.rho_inner = f.R * epsilon;
    f.rho_outer = 2.0 * f.rho_inner;
    f.ell = dec.ell;
    f.alpha = p.alpha;
    f.orbit = dec.source_orbit;
    f.surface = radial_surface(mesh);
    f.g = local_green(fit, dec.ell);
    f.volume = ops.total_area;
    const double r0 = orbit_ball_radius(mesh, dec.source_orbit);
    if (!(f.rho_outer < r0))
        throw ConstructionError("epsilon " + std::to_string(epsilon) + " too large: 2 R eps = " +
                                std::to_string(f.rho_outer) + " exceeds r0 = " + std::to_string(r0));
    const int ell = f.ell;
    const double kappa = 1.0 / (2.0 * pi * ell);
    f.plateau = -kappa * std::log(f.rho_inner) + f.g.A + std::log1p(pi * ell * f.R * f.R) / (4.0 * pi * ell);
    f.continuity_gap = std::abs(f.H(f.rho_inner) - (-kappa * std::log(f.rho_inner) + f.g.A));

    const auto& S = f.surface;
    const double ra = f.rho_inner, rb = f.rho_outer;
    auto Hs = [&](double r) { return f.H(r); };
    auto dH2 = [&](double r) {
        const double d = f.H_derivative(r);
        return d * d * S.area_element(r);
    };
    f.energy_inner = 2.0 * pi * gk(dH2, 0.0, ra);
    f.energy_annulus = 2.0 * pi * gk(dH2, ra, rb);
    f.green_l2 = green_l2_squared(dec, fit, mesh, ops);
    const double ig2 = 2.0 * pi * gk_origin([&](double r) { return std::pow(f.g.value(r), 2) * S.area_element(r); }, rb);
    const double ig = 2.0 * pi * gk_origin([&](double r) { return f.g.value(r) * S.area_element(r); }, rb);
    f.energy_outside = p.alpha * (f.green_l2 - ell * ig2) + ell / f.volume * ig -
                       ell * 2.0 * pi * S.area_element(rb) * f.g.value(rb) * f.g.derivative(rb);
    const double grad = ell * (f.energy_inner + f.energy_annulus) + f.energy_outside;

    const double ih = 2.0 * pi * (gk([&](double r) { return Hs(r) * S.area_element(r); }, 0.0, ra) +
                                  gk([&](double r) { return Hs(r) * S.area_element(r); }, ra, rb));
    const double ih2 = 2.0 * pi * (gk([&](double r) { return std::pow(Hs(r), 2) * S.area_element(r); }, 0.0, ra) +
                                   gk([&](double r) { return std::pow(Hs(r), 2) * S.area_element(r); }, ra, rb));
    const double int_H = ell * (ih - ig);
    const double int_H2 = f.green_l2 + ell * (ih2 - ig2);
    f.mean_H = int_H / f.volume;
    f.centered_l2 = int_H2 - f.volume * f.mean_H * f.mean_H;
    const double norm_H_sq = grad - p.alpha * f.centered_l2;

    // the constraint is linear in c^2 (H = c eta does not depend on c), so one
    // Newton step from the closed forms is exact
    f.c2_closed_form = -std::log(epsilon) / (2.0 * pi * ell) + std::log(pi * ell) / (4.0 * pi * ell) -
                       1.0 / (4.0 * pi * ell) + f.g.A;
    f.B_closed_form = 1.0 / (4.0 * pi * ell);
    const double residual = norm_H_sq - f.c2_closed_form;
    f.c2 = f.c2_closed_form + residual;
    if (!(f.c2 > 0.0)) {
        std::ostringstream os;
        os << "normalization not reachable: energies inner " << f.energy_inner << ", annulus " << f.energy_annulus
           << ", outside " << f.energy_outside << ", squared norm " << norm_H_sq;
        throw NumericalError(os.str());
    }
    f.c = std::sqrt(f.c2);
    f.B = f.plateau - f.c2;
    f.norm = std::sqrt(norm_H_sq / f.c2);
    if (std::abs(f.norm - 1.0) > 1e-6) throw NumericalError("test family normalization failed");
    if (f.continuity_gap > 1e-8) throw NumericalError("test family is discontinuous at R eps");
    return f;
}

LowerBound test_family_lower_bound(const TestFunctionFamily& f, const GreenDecomposition& dec,
                                   const SurfaceMesh& mesh, const FemOperators& ops) {
    const auto& S = f.surface;
    const int ell = f.ell;
    const double beta = 4.0 * pi * ell;
    auto expo = [&](double h) {
        const double phi = (h - f.mean_H) / f.c;
        return beta * phi * phi;
    };
    const double ra = f.rho_inner, rb = f.rho_outer;
    const double shift = expo(f.H(0.0));
    auto integrand = [&](double r) { return std::exp(expo(f.H(r)) - shift) * S.area_element(r); };
    LowerBound lb;
    lb.inner = ell * 2.0 * pi * gk(integrand, 0.0, ra) * std::exp(shift);
    lb.annulus = ell * 2.0 * pi * gk(integrand, ra, rb) * std::exp(shift);

    const double ig2 = 2.0 * pi * gk_origin([&](double r) { return std::pow(f.g.value(r), 2) * S.area_element(r); }, rb);
    const double ig = 2.0 * pi * gk_origin([&](double r) { return f.g.value(r) * S.area_element(r); }, rb);
    const double vol_out = f.volume - ell * S.ball_area(rb);
    const double out2 = f.green_l2 - ell * ig2 + 2.0 * f.mean_H * ell * ig + f.mean_H * f.mean_H * vol_out;
    lb.outer = vol_out + beta / f.c2 * out2;

    std::vector<double> lin, full;
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        if (orbit_distance(mesh, f.orbit, v) < rb) continue;
        const double t = expo(dec.values[v]);
        lin.push_back(ops.lumped_mass[v] * (1.0 + t));
        full.push_back(ops.lumped_mass[v] * std::exp(t));
    }
    lb.outer_mesh_linear = sorted_sum(lin);
    lb.outer_mesh_full = sorted_sum(full);

    lb.value = lb.inner + lb.annulus + lb.outer;
    lb.bound = upper_bound_value(f.g.A, f.volume, ell).value;
    lb.margin = lb.value - lb.bound;
    return lb;
}

Eigen::VectorXd test_family_samples(const TestFunctionFamily& f, const GreenDecomposition& dec,
                                    const SurfaceMesh& mesh) {
    Eigen::VectorXd out(mesh.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        const double rho = orbit_distance(mesh, f.orbit, v);
        const double h = rho < f.rho_outer ? f.H(rho) : dec.values[v];
        out[v] = (h - f.mean_H) / f.c;
    }
    return out;
}

}  // namespace tmsym
