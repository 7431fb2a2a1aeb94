// Acceptance gate: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset. Exit status is non-zero if any check fails.
#include "oracles.hpp"
#include "tmsym/error.hpp"
#include "tmsym/experiment.hpp"
#include "tmsym/maximizer.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

using namespace tmsym;
namespace fs = std::filesystem;

namespace {

constexpr double pi = oracle::pi;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[failed: " << what << "] ";
        }
    }
};

struct World {
    SurfaceMesh mesh;
    GroupAction action;
    FemOperators ops;
    InvariantSpace space;
    std::optional<InvariantSpectrum> spectrum;
};

World make_world(std::pair<SurfaceMesh, GroupAction> ma) {
    World w{std::move(ma.first), std::move(ma.second), {}, {}, std::nullopt};
    w.ops = assemble(w.mesh);
    w.space = make_invariant_space(w.ops, w.action);
    return w;
}

World& sphere(int level, const std::string& group, int eigen_count = 12) {
    static std::map<std::pair<int, std::string>, World> cache;
    auto key = std::make_pair(level, group);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, make_world(build_sphere_mesh(level, GroupSpec::parse(group)))).first;
    World& w = it->second;
    if (eigen_count > 0 && (!w.spectrum || static_cast<int>(w.spectrum->eigenvalues.size()) < eigen_count))
        w.spectrum = invariant_spectrum(w.space, eigen_count);
    return w;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// ------------------------------------------------------------------ 1

void criterion1(Outcome& o) {
    const World& t = sphere(4, "trivial", 8);
    const World& a = sphere(4, "antipodal", 8);
    const double l1 = t.spectrum->distinct(1), g1 = a.spectrum->distinct(1);
    o.detail << "trivial lambda_1 " << l1 << " x" << t.spectrum->multiplicities[0] << ", antipodal " << g1 << " x"
             << a.spectrum->multiplicities[0] << ". ";
    o.check(rel(l1, 2.0) < 0.01, "trivial lambda_1 within 1% of 2");
    o.check(t.spectrum->multiplicities[0] == 3, "trivial multiplicity 3");
    o.check(rel(g1, 6.0) < 0.02, "antipodal lambda_1 within 2% of 6");
    o.check(a.spectrum->multiplicities[0] == 5, "antipodal multiplicity 5");
}

// ------------------------------------------------------------------ 2

void criterion2(Outcome& o) {
    World w = make_world(build_flat_torus_mesh(64, 64, {}));
    const InvariantSpectrum s = invariant_spectrum(w.space, 6);
    const double l1 = s.distinct(1), ref = 4.0 * pi * pi;
    o.detail << "lambda_1 " << l1 << " vs " << ref << " (rel " << rel(l1, ref) << ") x" << s.multiplicities[0] << ". ";
    o.check(rel(l1, ref) < 0.005, "within 0.5%");
    o.check(s.multiplicities[0] == 4, "multiplicity 4");
}

// ------------------------------------------------------------------ 3

void criterion3(Outcome& o) {
    double worst = 0.0;
    for (int ell : {1, 2, 4}) {
        for (double R : {1.0, 10.0, 1e3}) {
            const double c = bubble_integral(ell, R), q = bubble_integral_quadrature(ell, R);
            worst = std::max(worst, std::abs(c - q));
            o.check(std::abs(c - oracle::bubble_mass(ell, R)) < 1e-12, "closed form matches the oracle");
        }
        const double big = bubble_integral(ell, 1e3);
        o.check(std::abs(big - 1.0 / ell) < 1e-3, "R = 1e3 within 1e-3 of 1/ell");
    }
    o.detail << "max |closed - quadrature| " << worst << ". ";
    o.check(worst < 1e-9, "closed form vs quadrature 1e-9");
}

// ------------------------------------------------------------------ 4

void criterion4(Outcome& o) {
    const double k = 1e3;
    {
        World& w = sphere(8, "antipodal", 0);
        const MoserSequence seq = make_moser_sequence(w.mesh, w.action, 0, 0.1, k);
        const MoserEvaluation ev = moser_evaluate(seq, w.mesh);
        const double e = rel(ev.mesh_energy, 8.0 * pi * 2 * std::log(k));
        o.detail << "sphere L8 r=0.1: " << ev.mesh_energy << " vs " << ev.closed_form_energy << " (rel " << e << "). ";
        o.check(e < 0.05, "sphere within 5%");
    }
    {
        auto [mesh, act] = build_flat_torus_mesh(2048, 2048, {});
        const MoserSequence seq = make_moser_sequence(mesh, act, 0, 0.1, k);
        const MoserEvaluation ev = moser_evaluate(seq, mesh);
        const double e = rel(ev.mesh_energy, 8.0 * pi * std::log(k));
        o.detail << "torus 2048^2 r=0.1: " << ev.mesh_energy << " vs " << ev.closed_form_energy << " (rel " << e << "). ";
        o.check(e < 0.005, "torus within 0.5%");
    }
}

// ------------------------------------------------------------------ 5

void criterion5(Outcome& o) {
    const World& w = sphere(4, "antipodal");
    SharpnessSpec s;
    s.surface = radial_surface(w.mesh);
    s.ell = 2;
    s.alpha = 0.25 * w.spectrum->distinct(1);
    s.radius = 0.05;
    const double crit = 4.0 * pi * s.ell;
    s.betas = {1.1 * crit, 0.9 * crit};
    s.ks = {1e2, 1e3, 1e4, 1e5};
    const SharpnessTable t = sharpness_probe(s);
    bool increasing = true;
    double lo = 1e300, hi = -1e300;
    o.detail << "1.1: ";
    for (std::size_t i = 0; i < 4; ++i) {
        o.detail << t.rows[i].log_value << " ";
        if (i > 0 && !(t.rows[i].log_value > t.rows[i - 1].log_value)) increasing = false;
    }
    o.detail << "| 0.9: ";
    for (std::size_t i = 4; i < 8; ++i) {
        o.detail << t.rows[i].log_value << " ";
        lo = std::min(lo, t.rows[i].log_value);
        hi = std::max(hi, t.rows[i].log_value);
    }
    const double variation = (hi - lo) / std::abs(lo);
    o.detail << "(variation " << variation << "). ";
    o.check(increasing, "strictly increasing above the critical exponent");
    o.check(variation < 0.05, "bounded below the critical exponent");
}

// ------------------------------------------------------------------ 6 / 12

void failure_check(Outcome& o, int level) {
    const World& w = sphere(4, "antipodal");
    const std::vector<double> ts{1.0, 2.0, 4.0, 8.0};
    const auto rows = failure_scan(w.ops, *w.spectrum, level, 1.0, ts);
    o.detail << "j=" << level << " alpha=" << w.spectrum->distinct(level) << " growth:";
    for (const auto& r : rows) {
        o.detail << " " << r.growth;
        o.check(r.norm_sq <= 1.0, "t e feasible");
    }
    o.detail << " norm_sq max " << std::max_element(rows.begin(), rows.end(), [](auto& a, auto& b) {
                                      return std::abs(a.norm_sq) < std::abs(b.norm_sq);
                                  })->norm_sq
             << ". ";
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double ratio = rows[i].growth / rows[i - 1].growth;
        const double tr = ts[i] / ts[i - 1];
        o.check(ratio >= tr * tr, "growth at least quadratic in t");
    }
}

void criterion6(Outcome& o) { failure_check(o, 1); }

// ------------------------------------------------------------------ 7

void criterion7(Outcome& o) {
    {
        World w = make_world(build_flat_torus_mesh(128, 128, {}));
        const GreenDecomposition g = green_solve(w.ops, w.action, w.space, 0, NormParams(0.0, 1.0));
        double err = 0.0, scale = 0.0;
        for (int v = 0; v < w.mesh.num_vertices(); ++v) {
            if (w.mesh.distance(0, v) < 0.1) continue;
            const double ref = oracle::torus_green(w.mesh.vertices[v].x(), w.mesh.vertices[v].y());
            err = std::max(err, std::abs(g.values[v] - ref));
            scale = std::max(scale, std::abs(ref));
        }
        o.detail << "torus 128^2 max err / max|G| " << err / scale << ". ";
        o.check(err / scale <= 1e-3, "torus Green within 1e-3");
    }
    {
        World& w = sphere(5, "antipodal", 0);
        const GreenDecomposition g = green_solve(w.ops, w.action, w.space, 0, NormParams(0.0, 1.0));
        double absmass = 0.0, sym = 0.0;
        for (int v = 0; v < w.mesh.num_vertices(); ++v) {
            absmass += w.ops.lumped_mass[v] * std::abs(g.values[v]);
            for (const auto& p : w.action.permutations) sym = std::max(sym, std::abs(g.values[p[v]] - g.values[v]));
        }
        const double mean = std::abs(g.values.dot(w.ops.lumped_mass)) / absmass;
        o.detail << "antipodal L5 mean residual " << mean << ", symmetry residual " << sym << ", solve residual "
                 << g.residual << ". ";
        o.check(mean <= 1e-8 && sym <= 1e-8, "mean-zero and symmetry residuals");
    }
}

// ------------------------------------------------------------------ 8

void criterion8(Outcome& o) {
    World& w4 = sphere(4, "antipodal");
    World& w5 = sphere(5, "antipodal", 0);
    const double l1 = w4.spectrum->distinct(1);
    for (double frac : {0.0, 0.5}) {
        const double alpha = frac * l1;
        const GreenDecomposition g4 = green_solve(w4.ops, w4.action, w4.space, 0, NormParams(alpha, 1.0));
        const GreenDecomposition g5 = green_solve(w5.ops, w5.action, w5.space, 0, NormParams(alpha, 1.0));
        AFitOptions base, wide;
        wide.scale = 1.5;
        const double a4 = extract_A(g4, w4.mesh, base).A, a5 = extract_A(g5, w5.mesh, base).A;
        const double r1 = richardson(a4, a5);
        const double r15 = richardson(extract_A(g4, w4.mesh, wide).A, extract_A(g5, w5.mesh, wide).A);
        o.detail << "alpha " << alpha << ": A4 " << a4 << " A5 " << a5 << " Richardson " << r1 << " / " << r15
                 << " (oracle " << oracle::sphere_antipodal_A(alpha) << "). ";
        o.check(std::abs(a4 - a5) < 5e-3, "A stable across levels");
        o.check(std::abs(r1 - r15) < 1e-3, "Richardson stable under annulus scaling");
    }
}

// ------------------------------------------------------------------ 9

void criterion9(Outcome& o) {
    World& w = sphere(5, "antipodal", 6);
    const int ell = 2;
    const double alpha = 0.25 * w.spectrum->distinct(1);
    const NormParams np(alpha, 4.0 * pi * ell);
    const GreenDecomposition g = green_solve(w.ops, w.action, w.space, 0, np);
    const AFit fit = extract_A(g, w.mesh);
    const double gl2 = green_l2_squared(g, fit, w.mesh, w.ops);
    const double lead = 4.0 * pi * ell * gl2;
    const double b_limit = 1.0 / (4.0 * pi * ell);
    double prev_gap = 1e300;
    o.detail << "4 pi ell |G|^2 = " << lead << ";";
    for (double eps : {1e-3, 1e-4, 1e-5}) {
        const TestFunctionFamily fam = build_test_family(g, fit, w.mesh, w.ops, np, eps);
        const LowerBound lb = test_family_lower_bound(fam, g, w.mesh, w.ops);
        const double scaled = lb.margin * -std::log(eps);
        const double gap = std::abs(fam.B - b_limit);
        o.detail << " eps " << eps << ": margin " << lb.margin << ", margin*(-log eps) " << scaled << ", B " << fam.B
                 << ";";
        o.check(lb.margin > 0.0, "positive margin");
        o.check(std::abs(scaled - lead) <= 0.3 * lead, "margin*(-log eps) within 30% of 4 pi ell |G|^2");
        o.check(gap < prev_gap, "B approaches 1/(4 pi ell) monotonically");
        prev_gap = gap;
    }
    o.detail << " ";
}

// ------------------------------------------------------------------ 10 / 12

void optimality_check(Outcome& o, int level) {
    World& w = sphere(4, "antipodal");
    const InvariantSpectrum& spec = *w.spectrum;
    const int ell = w.action.min_orbit;
    const double alpha = 0.25 * spec.distinct(level);
    const SubcriticalProblem p(w.mesh, w.ops, w.action, w.space, spec, level, alpha, pi * ell);
    const MaximizerState st = solve_subcritical(p, make_seed(p, spec, {}));
    const MultiplierReport mr = multiplier_report(st, p);

    int beaten = 0, total = 0;
    double best_competitor = -1e300;
    const ComplementSpace* comp = level > 1 ? &p.complement() : nullptr;
    for (double r : {0.05, 0.1})
        for (int i = 0; i < 10; ++i) {
            const double k = std::pow(10.0, 1.0 + 3.0 * i / 9.0);
            const MoserSequence seq = make_moser_sequence(w.mesh, w.action, 0, r, k);
            const InvariantVector u = moser_normalized(seq, w.mesh, w.action, w.ops, NormParams(alpha, p.beta()), comp);
            const double lv = exp_functional(u, p.beta(), w.ops).log_value;
            best_competitor = std::max(best_competitor, lv);
            ++total;
            if (st.log_value > lv) ++beaten;
        }
    for (unsigned long long s = 1; s <= 20; ++s) {
        SeedOptions so;
        so.kind = SeedKind::Random;
        so.rng_seed = s;
        const double lv = exp_functional(make_seed(p, spec, so), p.beta(), w.ops).log_value;
        best_competitor = std::max(best_competitor, lv);
        ++total;
        if (st.log_value > lv) ++beaten;
    }
    o.detail << "j=" << level << " log F " << st.log_value << " vs best competitor " << best_competitor << " ("
             << beaten << "/" << total << " beaten), residual " << st.residual << ", identities "
             << mr.max_identity() << " (" << mr.gamma_identities.size() << " gamma), lambda_eps " << st.lambda_eps
             << ". ";
    o.check(beaten == total, "beats every competitor");
    o.check(st.residual <= 1e-7, "Euler-Lagrange residual");
    o.check(mr.max_identity() <= 1e-8, "multiplier identities");
    o.check(st.lambda_eps > 0.0, "lambda_eps positive");
    if (level > 1) o.check(mr.gamma_identities.size() == p.complement().basis.size(), "gamma identities present");
}

void criterion10(Outcome& o) { optimality_check(o, 1); }

// ------------------------------------------------------------------ 11

void criterion11(Outcome& o) {
    World& w = sphere(5, "antipodal", 6);
    const double alpha = 0.25 * w.spectrum->distinct(1);
    const std::vector<double> sweep{2.0 * pi, 4.0, 2.0, 1.0, 0.5, 0.25};
    Eigen::VectorXd seed;
    MaximizerState last;
    for (double eps : sweep) {
        const SubcriticalProblem p(w.mesh, w.ops, w.action, w.space, *w.spectrum, 1, alpha, eps);
        SeedOptions so;
        if (seed.size() > 0) {
            so.kind = SeedKind::Given;
            so.given = seed;
        }
        last = solve_subcritical(p, make_seed(p, *w.spectrum, so));
        seed = last.u;
    }
    DiagnosticsOptions dopt;
    dopt.radii = {0.2};
    const BlowupDiagnostics d = blowup_diagnostics(last, w.mesh, w.action, BubbleProfile{2}, dopt);
    const double e0 = d.local_energies.at(0).energy, e1 = d.local_energies.at(1).energy;
    const double share = (e0 + e1) / d.energy_budget;
    o.detail << "eps " << sweep.back() << ": converged " << last.converged << ", c_eps " << last.c_eps
             << ", ball energies " << e0 << " / " << e1 << ", share of budget " << share
             << (share >= 0.7 ? " (>= 0.7)" : " (soft: below 0.7)") << ". ";
    o.check(last.converged, "maximizer converged");
    o.check(e0 == e1, "orbit-ball energies exactly equal");
}

// ------------------------------------------------------------------ 12

void criterion12(Outcome& o) {
    failure_check(o, 2);
    optimality_check(o, 2);
}

// ------------------------------------------------------------------ 13

void criterion13(Outcome& o) {
    const std::string text = R"({
      "name": "determinism",
      "surface": "sphere",
      "group": "antipodal",
      "levels": [4],
      "alpha_fraction": 0.25,
      "eigen_count": 12,
      "epsilon_grid": [6.283185307179586, 2.0],
      "test_epsilon_grid": [0.001, 0.0001],
      "beta_grid": [22.6, 27.6],
      "k_grid": [100, 1000, 10000],
      "seed_kind": "random",
      "pipeline": ["mesh", "spectrum", "green", "bounds", "maximize", "diagnostics", "sharpness"]
    })";
    const fs::path root = fs::temp_directory_path() / ("tmsym_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    std::vector<std::map<std::string, std::string>> payloads;
    for (const char* sub : {"a", "b"}) {
        ExperimentConfig c = parse_config(text);
        c.output_dir = (root / sub).string();
        const RunResult r = run_experiment(c);
        o.check(r.exit_code == 0, "run succeeded");
        std::map<std::string, std::string> files;
        for (const auto& f : r.files) {
            if (f == "config.json" || f == "manifest.json") continue;
            std::ifstream in(root / sub / f, std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            files[f] = ss.str();
        }
        payloads.push_back(std::move(files));
    }
    int differing = 0;
    for (const auto& [name, bytes] : payloads[0]) {
        auto it = payloads[1].find(name);
        if (it == payloads[1].end() || it->second != bytes) ++differing;
    }
    o.detail << payloads[0].size() << " payload files, " << differing << " differ. ";
    o.check(differing == 0 && payloads[0].size() == payloads[1].size(), "byte-identical reruns");
    fs::remove_all(root);
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria{
        {"spectral oracle, sphere", criterion1},
        {"spectral oracle, torus", criterion2},
        {"bubble normalization", criterion3},
        {"Moser energy", criterion4},
        {"sharpness dichotomy", criterion5},
        {"failure at alpha = lambda_1", criterion6},
        {"Green function oracle", criterion7},
        {"regular constant stability", criterion8},
        {"sandwich consistency", criterion9},
        {"maximizer optimality", criterion10},
        {"concentration symmetry", criterion11},
        {"second level (j = 2)", criterion12},
        {"determinism", criterion13},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int n = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(n)) continue;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            criteria[i].second(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "[exception: " << e.what() << "] ";
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!o.pass) ++failures;
        std::printf("CRITERION %2d %s  %s: %s(%.1fs)\n", n, o.pass ? "PASS" : "FAIL", criteria[i].first,
                    o.detail.str().c_str(), secs);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
