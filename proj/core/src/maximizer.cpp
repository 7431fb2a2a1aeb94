#include "tmsym/maximizer.hpp"
#include "tmsym/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace tmsym {

namespace {

constexpr double pi = std::numbers::pi;
constexpr double kAscentSlack = 1e-13;

// M(u e^{beta u^2}) in the lumped sense, scaled by e^{-shift} with shift = max beta u^2.
struct Force {
    Eigen::VectorXd g;  // scaled, full vertex vector
    double shift = 0.0;
    double lambda_scaled = 0.0;  // u'g
    double mean_scaled = 0.0;    // 1'g
};

Force force(const Eigen::VectorXd& u, double beta, const FemOperators& ops) {
    Force f;
    const Eigen::Index n = u.size();
    for (Eigen::Index i = 0; i < n; ++i) f.shift = std::max(f.shift, beta * u[i] * u[i]);
    f.g.resize(n);
    std::vector<double> lam(static_cast<std::size_t>(n)), mean(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        f.g[i] = ops.lumped_mass[i] * u[i] * std::exp(beta * u[i] * u[i] - f.shift);
        lam[i] = f.g[i] * u[i];
        mean[i] = f.g[i];
    }
    f.lambda_scaled = sorted_sum(lam);
    f.mean_scaled = sorted_sum(mean);
    return f;
}

int argmax_abs(const Eigen::VectorXd& u) {
    int best = 0;
    for (int i = 1; i < u.size(); ++i)
        if (std::abs(u[i]) > std::abs(u[best])) best = i;
    return best;
}

}  // namespace

SubcriticalProblem::SubcriticalProblem(const SurfaceMesh& mesh, const FemOperators& ops, const GroupAction& action,
                                       const InvariantSpace& space, const InvariantSpectrum& spectrum, int level,
                                       double alpha, double epsilon)
    : mesh_(&mesh), ops_(&ops), action_(&action), space_(&space), level_(level), ell_(action.min_orbit),
      alpha_(alpha), epsilon_(epsilon) {
    if (level < 1) throw ConfigError("spectrum level must be at least 1");
    if (level > spectrum.groups())
        throw ConfigError("spectrum level " + std::to_string(level) + " needs more eigenpairs (have " +
                          std::to_string(spectrum.groups()) + " groups)");
    complement_ = complement_projector(spectrum, level);
    if (!(alpha < complement_.lambda))
        throw ConfigError("alpha = " + std::to_string(alpha) + " must be below lambda_" + std::to_string(level) +
                          "^G = " + std::to_string(complement_.lambda));
    if (!(epsilon > 0.0 && epsilon < 4.0 * pi * ell_))
        throw ConfigError("epsilon must lie in (0, 4 pi ell) = (0, " + std::to_string(4.0 * pi * ell_) + ")");
    solver_ = std::make_shared<ShiftedSolver>(space, alpha, complement_.reduced);
}

double SubcriticalProblem::beta() const { return 4.0 * pi * ell_ - epsilon_; }

Eigen::VectorXd SubcriticalProblem::admissible(const Eigen::VectorXd& u) const {
    if (u.size() != static_cast<Eigen::Index>(ops_->lumped_mass.size()))
        throw ConfigError("seed has " + std::to_string(u.size()) + " entries, mesh has " +
                          std::to_string(ops_->lumped_mass.size()) + " vertices");
    const Eigen::VectorXd v = complement_.project(project_invariant_meanzero(u, *action_, *ops_), *ops_);
    const Eigen::VectorXd w = solver_->project(space_->coordinates(v));
    const double q = solver_->energy(w);
    if (!(q > 0.0)) throw NumericalError("seed vanishes on the working subspace");
    return space_->lift(w / std::sqrt(q));
}

SeedKind parse_seed_kind(const std::string& text) {
    if (text == "moser") return SeedKind::Moser;
    if (text == "random") return SeedKind::Random;
    if (text == "eigen") return SeedKind::Eigen;
    if (text == "file" || text == "given") return SeedKind::Given;
    throw ConfigError("unknown seed kind '" + text + "' (moser, random, eigen, file)");
}

std::string to_string(SeedKind kind) {
    switch (kind) {
        case SeedKind::Moser: return "moser";
        case SeedKind::Random: return "random";
        case SeedKind::Eigen: return "eigen";
        case SeedKind::Given: return "file";
    }
    return "unknown";
}

Eigen::VectorXd make_seed(const SubcriticalProblem& problem, const InvariantSpectrum& spectrum,
                          const SeedOptions& opts) {
    const SurfaceMesh& mesh = problem.mesh();
    switch (opts.kind) {
        case SeedKind::Moser: {
            const auto& sizes = problem.action().orbit_size;
            int center = 0;
            while (sizes[center] != problem.ell()) ++center;
            double r = opts.moser_radius;
            if (!(r > 0.0)) r = 0.5 * orbit_ball_radius(mesh, orbit_of(problem.action(), center));
            const MoserSequence seq = make_moser_sequence(mesh, problem.action(), center, r, opts.moser_k);
            return problem.admissible(moser_evaluate(seq, mesh).values);
        }
        case SeedKind::Random: {
            std::mt19937_64 rng(opts.rng_seed);
            const InvariantSpace& s = problem.space();
            Eigen::VectorXd w(s.dim());
            // raw bits keep the stream identical across standard libraries
            for (int i = 0; i < s.dim(); ++i) w[i] = 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
            return problem.admissible(s.lift(w));
        }
        case SeedKind::Eigen: {
            const int idx = spectrum.count_through(problem.level() - 1);
            return problem.admissible(spectrum.eigenvectors.at(idx));
        }
        case SeedKind::Given: return problem.admissible(opts.given);
    }
    throw ConfigError("unknown seed kind");
}

MaximizerState solve_subcritical(const SubcriticalProblem& problem, const Eigen::VectorXd& seed,
                                 const SolveOptions& opts) {
    const InvariantSpace& s = problem.space();
    const ShiftedSolver& solver = problem.solver();
    const FemOperators& ops = problem.ops();
    const double beta = problem.beta();

    Eigen::VectorXd w = solver.project(s.coordinates(problem.admissible(seed)));
    w /= std::sqrt(solver.energy(w));
    double log_f = exp_functional(s.lift(w), beta, ops).log_value;

    MaximizerState st;
    st.beta = beta;
    st.alpha = problem.alpha();
    st.epsilon = problem.epsilon();
    st.ell = problem.ell();
    st.level = problem.level();
    st.history.push_back(log_f);

    Force f;
    Eigen::VectorXd v;
    auto evaluate = [&]() {
        f = force(s.lift(w), beta, ops);
        if (!(f.lambda_scaled > 0.0)) throw NumericalError("lambda_eps is not positive");
        v = solver.solve(s.restrict_dual(f.g)) / f.lambda_scaled;
        const Eigen::VectorXd d = w - v;
        return std::sqrt(std::max(solver.energy(d), 0.0));
    };

    double res = evaluate();
    int it = 0;
    for (; it < opts.max_iterations && res > opts.tolerance; ++it) {
        const Eigen::VectorXd d = v - w;
        bool accepted = false;
        double step = 1.0;
        for (int bt = 0; bt < 30; ++bt, step *= 0.5) {
            Eigen::VectorXd trial = w + step * d;
            const double q = solver.energy(trial);
            if (!(q > 0.0)) continue;
            trial /= std::sqrt(q);
            const double lt = exp_functional(s.lift(trial), beta, ops).log_value;
            // near convergence the gain is O(residual^2) and drowns in rounding
            if (lt >= log_f - kAscentSlack * std::max(1.0, std::abs(log_f))) {
                w = trial;
                log_f = lt;
                accepted = true;
                break;
            }
            ++st.backtracks;
        }
        if (!accepted) break;
        st.history.push_back(log_f);
        res = evaluate();
    }

    st.u = s.lift(w);
    st.norm = std::sqrt(solver.energy(w));
    st.iterations = it;
    st.residual = res;
    st.converged = res <= opts.tolerance;
    const ExpValue ev = exp_functional(st.u, beta, ops);
    st.value = ev.value;
    st.log_value = ev.log_value;
    st.log_lambda_eps = f.shift + std::log(f.lambda_scaled);
    st.lambda_eps = std::exp(st.log_lambda_eps);
    st.mu_eps = std::exp(f.shift) * f.mean_scaled / ops.total_area;
    for (const auto& e : problem.complement().basis) st.gammas.push_back(e.dot(f.g) / f.lambda_scaled);
    st.x_eps = argmax_abs(st.u);
    st.c_eps = std::abs(st.u[st.x_eps]);
    return st;
}

double MultiplierReport::max_identity() const {
    double m = std::max(norm_identity, mean_identity);
    for (double g : gamma_identities) m = std::max(m, g);
    return m;
}

MultiplierReport multiplier_report(const MaximizerState& state, const SubcriticalProblem& problem) {
    const FemOperators& ops = problem.ops();
    const Eigen::VectorXd& u = state.u;
    const Force f = force(u, state.beta, ops);
    MultiplierReport r;
    r.log_lambda_eps = f.shift + std::log(f.lambda_scaled);
    r.lambda_eps = std::exp(r.log_lambda_eps);
    r.mu_eps = std::exp(f.shift) * f.mean_scaled / ops.total_area;
    r.mu_over_lambda = std::abs(f.mean_scaled / ops.total_area) / f.lambda_scaled;

    const Eigen::VectorXd h = f.g / f.lambda_scaled;
    const double m = f.mean_scaled / f.lambda_scaled / ops.total_area;  // mu / lambda
    const auto& basis = problem.complement().basis;
    for (const auto& e : basis) r.gammas.push_back(e.dot(h));

    const Eigen::VectorXd Au = ops.stiffness * u - problem.alpha() * (ops.mass * u);
    auto R = [&](const Eigen::VectorXd& phi) {
        const Eigen::VectorXd mphi = ops.mass * phi;
        double out = phi.dot(Au) - phi.dot(h) + m * phi.dot(ops.lumped_mass);
        for (std::size_t k = 0; k < basis.size(); ++k) out += r.gammas[k] * mphi.dot(basis[k]);
        return std::abs(out);
    };
    r.norm_identity = R(u);
    r.mean_identity = R(Eigen::VectorXd::Ones(u.size()));
    for (const auto& e : basis) r.gamma_identities.push_back(R(e));

    auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); };
    r.state_mismatch = std::abs(r.log_lambda_eps - state.log_lambda_eps);
    r.state_mismatch = std::max(r.state_mismatch, rel(r.mu_eps, state.mu_eps));
    for (std::size_t k = 0; k < r.gammas.size() && k < state.gammas.size(); ++k)
        r.state_mismatch = std::max(r.state_mismatch, rel(r.gammas[k], state.gammas[k]));
    return r;
}

}  // namespace tmsym
