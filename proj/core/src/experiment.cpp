#include "tmsym/experiment.hpp"
#include "tmsym/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#ifndef TMSYM_VERSION
#define TMSYM_VERSION "0.0.0"
#endif

namespace tmsym {

namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;

template <class T>
T take(const Json& j, const char* key, const T& fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// Plain CSV of an array of flat objects; header from the first row.
std::string to_csv(const Json& rows) {
    std::ostringstream os;
    os << std::setprecision(17);
    if (!rows.is_array() || rows.empty()) return "";
    bool first = true;
    for (const auto& [k, v] : rows.front().items()) {
        if (v.is_structured()) continue;
        os << (first ? "" : ",") << k;
        first = false;
    }
    os << '\n';
    for (const auto& row : rows) {
        first = true;
        for (const auto& [k, v] : rows.front().items()) {
            if (v.is_structured()) continue;
            os << (first ? "" : ",");
            first = false;
            const Json& x = row.contains(k) ? row.at(k) : Json();
            if (x.is_string()) os << x.get<std::string>();
            else if (x.is_number_float()) os << x.get<double>();
            else if (!x.is_null()) os << x.dump();
        }
        os << '\n';
    }
    return os.str();
}

int minimal_orbit_vertex(const GroupAction& action) {
    int v = 0;
    while (action.orbit_size[v] != action.min_orbit) ++v;
    return v;
}

// Runs f(i) for i in [0, n) on the sweep pool; results are stored by index so
// the order of completion does not matter.
template <class F>
void parallel_for(int n, F f) {
    const int workers = std::max(1, std::min(sweep_threads(), n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}


}  // namespace

std::string tool_version() { return TMSYM_VERSION; }

int sweep_threads() {
    if (const char* env = std::getenv("TM_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

const std::vector<std::string>& known_stages() {
    static const std::vector<std::string> s{"mesh", "spectrum", "green", "bounds", "maximize", "diagnostics",
                                            "sharpness"};
    return s;
}

ExperimentConfig parse_config(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    static const std::vector<std::string> keys{
        "schema_version", "name", "surface", "mesh_file", "torus", "group", "levels", "alpha", "alpha_fraction",
        "spectrum_level", "eigen_count", "epsilon_grid", "test_epsilon_grid", "beta_grid", "k_grid", "t_grid",
        "failure_beta", "moser_radius", "diagnostic_radii", "blowup_threshold", "fit_scale", "tolerances", "seed_kind",
        "seed_file", "seed", "output_dir", "pipeline"};
    for (const auto& [k, v] : j.items())
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw ConfigError("unknown config key '" + k + "'");

    ExperimentConfig c;
    c.schema_version = take(j, "schema_version", c.schema_version);
    if (c.schema_version != kSchemaVersion)
        throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version));
    c.name = take(j, "name", c.name);
    c.surface = take(j, "surface", c.surface);
    if (c.surface != "sphere" && c.surface != "torus" && c.surface != "file")
        throw ConfigError("surface must be sphere, torus or file");
    c.mesh_file = take(j, "mesh_file", c.mesh_file);
    if (c.surface == "file" && c.mesh_file.empty()) throw ConfigError("surface = file needs mesh_file");
    if (j.contains("torus")) {
        const Json& t = j.at("torus");
        c.torus.nx = take(t, "nx", c.torus.nx);
        c.torus.ny = take(t, "ny", c.torus.ny);
        c.torus.a = take(t, "a", c.torus.a);
        c.torus.b = take(t, "b", c.torus.b);
        c.torus.translations = take(t, "translations", c.torus.translations);
    }
    c.group = take(j, "group", c.group);
    GroupSpec::parse(c.group);
    c.levels = take(j, "levels", c.levels);
    if (c.levels.empty()) throw ConfigError("levels must not be empty");
    for (int l : c.levels)
        if (l < 0 || l > 9) throw ConfigError("mesh level " + std::to_string(l) + " out of range [0, 9]");
    if (j.contains("alpha") && !j.at("alpha").is_null()) c.alpha = take(j, "alpha", 0.0);
    c.alpha_fraction = take(j, "alpha_fraction", c.alpha_fraction);
    c.spectrum_level = take(j, "spectrum_level", c.spectrum_level);
    if (c.spectrum_level < 1) throw ConfigError("spectrum_level must be at least 1");
    c.eigen_count = take(j, "eigen_count", c.eigen_count);
    if (c.eigen_count < 1) throw ConfigError("eigen_count must be at least 1");
    c.epsilon_grid = take(j, "epsilon_grid", c.epsilon_grid);
    c.test_epsilon_grid = take(j, "test_epsilon_grid", c.test_epsilon_grid);
    c.beta_grid = take(j, "beta_grid", c.beta_grid);
    c.k_grid = take(j, "k_grid", c.k_grid);
    c.t_grid = take(j, "t_grid", c.t_grid);
    c.failure_beta = take(j, "failure_beta", c.failure_beta);
    c.moser_radius = take(j, "moser_radius", c.moser_radius);
    c.diagnostic_radii = take(j, "diagnostic_radii", c.diagnostic_radii);
    c.blowup_threshold = take(j, "blowup_threshold", c.blowup_threshold);
    c.fit_scale = take(j, "fit_scale", c.fit_scale);
    if (j.contains("tolerances")) {
        const Json& t = j.at("tolerances");
        for (const auto& [k, v] : t.items())
            if (k != "eigen" && k != "maximizer" && k != "max_iterations")
                throw ConfigError("unknown tolerance key '" + k + "'");
        c.eigen_tolerance = take(t, "eigen", c.eigen_tolerance);
        c.maximizer_tolerance = take(t, "maximizer", c.maximizer_tolerance);
        c.max_iterations = take(t, "max_iterations", c.max_iterations);
    }
    c.seed_kind = take(j, "seed_kind", c.seed_kind);
    parse_seed_kind(c.seed_kind);
    c.seed_file = take(j, "seed_file", c.seed_file);
    c.seed = take(j, "seed", c.seed);
    c.output_dir = take(j, "output_dir", c.output_dir);
    c.pipeline = take(j, "pipeline", c.pipeline);
    for (const auto& s : c.pipeline)
        if (std::find(known_stages().begin(), known_stages().end(), s) == known_stages().end())
            throw ConfigError("unknown pipeline stage '" + s + "'");
    return c;
}

ExperimentConfig load_config(const std::string& path) { return parse_config(slurp(path)); }

std::string emit_config(const ExperimentConfig& c) {
    Json j;
    j["schema_version"] = c.schema_version;
    j["name"] = c.name;
    j["surface"] = c.surface;
    j["mesh_file"] = c.mesh_file;
    j["torus"] = {{"nx", c.torus.nx}, {"ny", c.torus.ny}, {"a", c.torus.a}, {"b", c.torus.b},
                  {"translations", c.torus.translations}};
    j["group"] = c.group;
    j["levels"] = c.levels;
    j["alpha"] = c.alpha ? Json(*c.alpha) : Json(nullptr);
    j["alpha_fraction"] = c.alpha_fraction;
    j["spectrum_level"] = c.spectrum_level;
    j["eigen_count"] = c.eigen_count;
    j["epsilon_grid"] = c.epsilon_grid;
    j["test_epsilon_grid"] = c.test_epsilon_grid;
    j["beta_grid"] = c.beta_grid;
    j["k_grid"] = c.k_grid;
    j["t_grid"] = c.t_grid;
    j["failure_beta"] = c.failure_beta;
    j["moser_radius"] = c.moser_radius;
    j["diagnostic_radii"] = c.diagnostic_radii;
    j["blowup_threshold"] = c.blowup_threshold;
    j["fit_scale"] = c.fit_scale;
    j["tolerances"] = {{"eigen", c.eigen_tolerance}, {"maximizer", c.maximizer_tolerance},
                       {"max_iterations", c.max_iterations}};
    j["seed_kind"] = c.seed_kind;
    j["seed_file"] = c.seed_file;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    j["pipeline"] = c.pipeline;
    return dump(j);
}

MeshContext build_context(const ExperimentConfig& cfg, int level) {
    MeshContext ctx;
    ctx.level = level;
    const GroupSpec gs = GroupSpec::parse(cfg.group);
    if (cfg.surface == "sphere") {
        auto [m, a] = build_sphere_mesh(level, gs);
        ctx.mesh = std::move(m);
        ctx.action = std::move(a);
    } else if (cfg.surface == "torus") {
        if (gs.kind != GroupSpec::Kind::Trivial)
            throw ConfigError("torus groups are given as translations, group must be trivial");
        auto [m, a] = build_flat_torus_mesh(cfg.torus.nx, cfg.torus.ny, cfg.torus.translations, cfg.torus.a,
                                            cfg.torus.b);
        ctx.mesh = std::move(m);
        ctx.action = std::move(a);
    } else {
        std::ifstream in(cfg.mesh_file);
        if (!in) throw ConfigError("cannot open mesh file " + cfg.mesh_file);
        ctx.mesh = read_off(in);
        ctx.action = group_from_coordinates(ctx.mesh, gs);
    }
    ctx.ops = assemble(ctx.mesh);
    ctx.space = make_invariant_space(ctx.ops, ctx.action);
    return ctx;
}

void ensure_spectrum(MeshContext& ctx, const ExperimentConfig& cfg) {
    if (ctx.spectrum) return;
    EigenOptions eo;
    eo.tolerance = cfg.eigen_tolerance;
    eo.seed = cfg.seed;
    const int count = std::min(cfg.eigen_count, ctx.space.dim() - 1);
    ctx.spectrum = invariant_spectrum(ctx.space, count, eo);
}

double resolve_alpha(const MeshContext& ctx, const ExperimentConfig& cfg) {
    if (cfg.alpha) return *cfg.alpha;
    if (cfg.alpha_fraction == 0.0) return 0.0;
    if (!ctx.spectrum) throw ConfigError("alpha_fraction needs the spectrum");
    return cfg.alpha_fraction * ctx.spectrum->distinct(1);
}

Json stage_mesh(const MeshContext& ctx) {
    const OrbitStats os = orbit_stats(ctx.action);
    Json j;
    j["level"] = ctx.level;
    j["surface"] = to_string(ctx.mesh.kind);
    j["vertices"] = ctx.mesh.num_vertices();
    j["triangles"] = ctx.mesh.num_triangles();
    j["total_area"] = ctx.ops.total_area;
    j["mean_edge_length"] = ctx.mesh.mean_edge_length();
    j["group_order"] = ctx.action.group_order;
    j["generators"] = ctx.action.generators;
    j["ell"] = os.ell;
    j["orbits"] = ctx.space.dim();
    j["minimal_orbits"] = os.minimal_orbits.size();
    j["mesh_hash"] = hex64(mesh_hash(ctx.mesh));
    return j;
}

Json stage_spectrum(MeshContext& ctx, const ExperimentConfig& cfg) {
    ensure_spectrum(ctx, cfg);
    const InvariantSpectrum& s = *ctx.spectrum;
    Json j;
    j["count"] = s.eigenvalues.size();
    j["iterations"] = s.iterations;
    Json rows = Json::array();
    int group = 0, in_group = 0;
    for (std::size_t i = 0; i < s.eigenvalues.size(); ++i) {
        if (in_group == s.multiplicities[group]) {
            ++group;
            in_group = 0;
        }
        ++in_group;
        rows.push_back({{"index", i + 1}, {"eigenvalue", s.eigenvalues[i]}, {"group", group + 1},
                        {"residual", s.residuals[i]}});
    }
    Json groups = Json::array();
    for (int g = 1; g <= s.groups(); ++g)
        groups.push_back({{"j", g}, {"lambda", s.distinct(g)}, {"multiplicity", s.multiplicities[g - 1]}});
    j["groups"] = groups;
    j["eigenpairs"] = rows;
    return j;
}

Json stage_green(MeshContext& ctx, const ExperimentConfig& cfg) {
    if (cfg.alpha_fraction != 0.0 && !cfg.alpha) ensure_spectrum(ctx, cfg);
    const double alpha = resolve_alpha(ctx, cfg);
    const NormParams p(alpha, 1.0, ctx.spectrum ? ctx.spectrum->distinct(1) : std::numeric_limits<double>::infinity());
    const int source = minimal_orbit_vertex(ctx.action);
    ctx.green = green_solve(ctx.ops, ctx.action, ctx.space, source, p);
    AFitOptions fo;
    fo.scale = cfg.fit_scale;
    ctx.fit = extract_A(*ctx.green, ctx.mesh, fo);
    AFitOptions wide = fo;
    wide.scale = 1.5 * cfg.fit_scale;
    const AFit fit_wide = extract_A(*ctx.green, ctx.mesh, wide);
    const UpperBound ub = upper_bound_value(ctx.fit->A, ctx.ops.total_area, ctx.green->ell);
    Json j;
    j["alpha"] = alpha;
    j["source"] = source;
    j["ell"] = ctx.green->ell;
    j["iterations"] = ctx.green->iterations;
    j["residual"] = ctx.green->residual;
    j["A"] = ctx.fit->A;
    j["A_wide_annulus"] = fit_wide.A;
    j["fit_residual_rms"] = ctx.fit->residual_rms;
    j["fit_samples"] = ctx.fit->samples;
    j["fit_r_inner"] = ctx.fit->r_inner;
    j["fit_r_outer"] = ctx.fit->r_outer;
    j["green_l2_squared"] = green_l2_squared(*ctx.green, *ctx.fit, ctx.mesh, ctx.ops);
    j["upper_bound"] = ub.value;
    j["upper_bound_log"] = ub.log_value;
    j["warnings"] = ctx.green->warnings;
    return j;
}

Json stage_bounds(MeshContext& ctx, const ExperimentConfig& cfg) {
    if (!ctx.green) stage_green(ctx, cfg);
    const double alpha = ctx.green->alpha;
    const NormParams p(alpha, 1.0);
    Json rows = Json::array();
    for (double eps : cfg.test_epsilon_grid) {
        const TestFunctionFamily fam = build_test_family(*ctx.green, *ctx.fit, ctx.mesh, ctx.ops, p, eps);
        const LowerBound lb = test_family_lower_bound(fam, *ctx.green, ctx.mesh, ctx.ops);
        const double ell = fam.ell;
        rows.push_back({{"epsilon", eps},
                        {"R", fam.R},
                        {"c2", fam.c2},
                        {"c2_leading", fam.c2_closed_form},
                        {"B", fam.B},
                        {"B_limit", fam.B_closed_form},
                        {"norm", fam.norm},
                        {"lower_bound", lb.value},
                        {"lower_bound_log", std::log(lb.value)},
                        {"upper_bound", lb.bound},
                        {"upper_bound_log", std::log(lb.bound)},
                        {"margin", lb.margin},
                        {"margin_times_R", lb.margin * fam.R},
                        {"leading_term", 4.0 * pi * ell * fam.green_l2},
                        {"inner", lb.inner},
                        {"annulus", lb.annulus},
                        {"outer", lb.outer},
                        {"outer_mesh_linear", lb.outer_mesh_linear},
                        {"outer_mesh_full", lb.outer_mesh_full}});
    }
    return {{"alpha", alpha}, {"rows", rows}};
}

Json state_to_json(const MaximizerState& st) {
    Json j;
    j["level"] = st.level;
    j["alpha"] = st.alpha;
    j["epsilon"] = st.epsilon;
    j["beta"] = st.beta;
    j["ell"] = st.ell;
    j["converged"] = st.converged;
    j["iterations"] = st.iterations;
    j["backtracks"] = st.backtracks;
    j["residual"] = st.residual;
    j["norm"] = st.norm;
    j["value"] = st.value;
    j["log_value"] = st.log_value;
    j["lambda_eps"] = st.lambda_eps;
    j["lambda_eps_log"] = st.log_lambda_eps;
    j["mu_eps"] = st.mu_eps;
    j["gammas"] = st.gammas;
    j["c_eps"] = st.c_eps;
    j["x_eps"] = st.x_eps;
    return j;
}

Json stage_maximize(MeshContext& ctx, const ExperimentConfig& cfg, std::vector<MaximizerState>* states) {
    ensure_spectrum(ctx, cfg);
    const double alpha = resolve_alpha(ctx, cfg);
    if (cfg.epsilon_grid.empty()) throw ConfigError("maximize needs a non-empty epsilon_grid");
    SeedOptions so;
    so.kind = parse_seed_kind(cfg.seed_kind);
    so.rng_seed = cfg.seed;
    if (so.kind == SeedKind::Given) {
        const Json s = Json::parse(slurp(cfg.seed_file));
        so.given = Eigen::Map<const Eigen::VectorXd>(s.at("u").get<std::vector<double>>().data(),
                                                     static_cast<Eigen::Index>(s.at("u").size()));
    }
    SolveOptions opts;
    opts.tolerance = cfg.maximizer_tolerance;
    opts.max_iterations = cfg.max_iterations;

    const int n = static_cast<int>(cfg.epsilon_grid.size());
    std::vector<MaximizerState> out(n);
    std::vector<MultiplierReport> reports(n);
    // problems are built up front so that configuration errors surface before any work
    std::vector<SubcriticalProblem> problems;
    for (double eps : cfg.epsilon_grid)
        problems.emplace_back(ctx.mesh, ctx.ops, ctx.action, ctx.space, *ctx.spectrum, cfg.spectrum_level, alpha, eps);
    const Eigen::VectorXd seed = make_seed(problems.front(), *ctx.spectrum, so);
    parallel_for(n, [&](int i) {
        out[i] = solve_subcritical(problems[i], seed, opts);
        reports[i] = multiplier_report(out[i], problems[i]);
    });
    Json rows = Json::array();
    for (int i = 0; i < n; ++i) {
        Json r = state_to_json(out[i]);
        r["mu_over_lambda"] = reports[i].mu_over_lambda;
        r["identity_residual"] = reports[i].max_identity();
        rows.push_back(r);
    }
    if (states) *states = std::move(out);
    return {{"alpha", alpha}, {"seed_kind", cfg.seed_kind}, {"rows", rows}};
}

Json stage_diagnostics(MeshContext& ctx, const ExperimentConfig& cfg, const std::vector<MaximizerState>& states) {
    DiagnosticsOptions o;
    o.radii = cfg.diagnostic_radii;
    o.c_threshold = cfg.blowup_threshold;
    Json rows = Json::array();
    for (const auto& st : states) {
        const BlowupDiagnostics d = blowup_diagnostics(st, ctx.mesh, ctx.action, BubbleProfile{st.ell}, o);
        Json balls = Json::array();
        double total = 0.0;
        for (const auto& b : d.local_energies) {
            balls.push_back({{"center", b.center}, {"radius", b.radius}, {"energy", b.energy}});
            if (b.radius == o.radii.front()) total += b.energy;
        }
        rows.push_back({{"epsilon", st.epsilon},
                        {"c_eps", st.c_eps},
                        {"x_eps", st.x_eps},
                        {"r_eps", d.r_eps},
                        {"r_eps_log", d.log_r_eps},
                        {"energy_budget", d.energy_budget},
                        {"orbit_energy", total},
                        {"orbit_share", total / d.energy_budget},
                        {"profile_checked", d.profile_checked},
                        {"profile_error", d.profile_checked ? Json(d.profile_error) : Json(nullptr)},
                        {"balls", balls},
                        {"warnings", d.warnings}});
    }
    return {{"rows", rows}};
}

Json stage_sharpness(MeshContext& ctx, const ExperimentConfig& cfg) {
    ensure_spectrum(ctx, cfg);
    Json j;
    if (!cfg.beta_grid.empty() && !cfg.k_grid.empty()) {
        SharpnessSpec s;
        s.surface = radial_surface(ctx.mesh);
        s.ell = ctx.action.min_orbit;
        s.alpha = resolve_alpha(ctx, cfg);
        s.radius = cfg.moser_radius;
        s.betas = cfg.beta_grid;
        s.ks = cfg.k_grid;
        s.mesh = &ctx.mesh;
        s.action = &ctx.action;
        s.ops = &ctx.ops;
        const SharpnessTable t = sharpness_probe(s);
        Json rows = Json::array();
        for (const auto& r : t.rows)
            rows.push_back({{"beta", r.beta},
                            {"beta_over_critical", r.beta / (4.0 * pi * s.ell)},
                            {"k", r.k},
                            {"radius", r.radius},
                            {"log_value", r.log_value},
                            {"mesh_log_value", r.mesh_log_value}});
        j["rows"] = rows;
        j["slopes"] = t.slopes;
    }
    const int level = cfg.spectrum_level;
    const auto fr = failure_scan(ctx.ops, *ctx.spectrum, level, cfg.failure_beta, cfg.t_grid);
    Json rows = Json::array();
    for (const auto& r : fr)
        rows.push_back({{"t", r.t}, {"norm_sq", r.norm_sq}, {"log_value", r.log_value}, {"growth", r.growth}});
    j["failure"] = {{"alpha", ctx.spectrum->distinct(level)}, {"beta", cfg.failure_beta}, {"rows", rows}};
    return j;
}

RunResult run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
    RunResult res;
    const fs::path dir(cfg.output_dir);
    const std::string canonical = emit_config(cfg);
    ExperimentConfig hashed = cfg;
    hashed.output_dir.clear();  // where results go does not change them
    const std::string config_hash = hex64(fnv1a(emit_config(hashed)));
    Json results;
    results["schema_version"] = kSchemaVersion;
    results["name"] = cfg.name;
    results["config_hash"] = config_hash;
    results["levels"] = Json::array();
    Json mesh_hashes = Json::array();
    std::vector<std::string> files;

    auto has = [&](const std::string& s) {
        return std::find(cfg.pipeline.begin(), cfg.pipeline.end(), s) != cfg.pipeline.end();
    };
    auto note = [&](const std::string& msg) {
        if (log) *log << msg << '\n';
    };
    auto save_results = [&] {
        write_text(dir / "results.json", dump(results));
        if (std::find(files.begin(), files.end(), "results.json") == files.end()) files.push_back("results.json");
    };
    auto save_table = [&](const std::string& name, const Json& rows) {
        write_text(dir / name, to_csv(rows));
        if (std::find(files.begin(), files.end(), name) == files.end()) files.push_back(name);
    };

    std::string stage = "setup";
    try {
        fs::create_directories(dir);
        write_text(dir / "config.json", canonical);
        files.push_back("config.json");
        if (has("diagnostics") && !has("maximize")) throw ConfigError("diagnostics needs the maximize stage");
        const bool per_level = cfg.surface == "sphere";
        const std::vector<int> levels = per_level ? cfg.levels : std::vector<int>{cfg.levels.front()};
        for (int level : levels) {
            if (cfg.pipeline.empty()) break;
            const std::string tag = per_level ? "L" + std::to_string(level) : "mesh";
            stage = "mesh";
            note("[" + tag + "] mesh");
            MeshContext ctx = build_context(cfg, level);
            Json entry;
            entry["level"] = level;
            entry["mesh"] = stage_mesh(ctx);
            mesh_hashes.push_back({{"level", level}, {"mesh_hash", entry["mesh"]["mesh_hash"]}});
            if (has("mesh")) {
                std::ostringstream off;
                write_off(ctx.mesh, off);
                write_text(dir / ("mesh_" + tag + ".off"), off.str());
                write_text(dir / ("group_" + tag + ".json"), group_to_json(ctx.action));
                files.push_back("mesh_" + tag + ".off");
                files.push_back("group_" + tag + ".json");
            }
            results["levels"].push_back(entry);
            Json& e = results["levels"].back();
            save_results();

            std::vector<MaximizerState> states;
            for (const auto& s : known_stages()) {
                if (s == "mesh" || !has(s)) continue;
                stage = s;
                note("[" + tag + "] " + s);
                Json section;
                if (s == "spectrum") {
                    section = stage_spectrum(ctx, cfg);
                    save_table("spectrum_" + tag + ".csv", section["eigenpairs"]);
                } else if (s == "green") {
                    section = stage_green(ctx, cfg);
                } else if (s == "bounds") {
                    section = stage_bounds(ctx, cfg);
                    save_table("bounds_" + tag + ".csv", section["rows"]);
                } else if (s == "maximize") {
                    section = stage_maximize(ctx, cfg, &states);
                    save_table("maximize_" + tag + ".csv", section["rows"]);
                    for (std::size_t i = 0; i < states.size(); ++i) {
                        const fs::path sub = dir / ("maximize_" + tag) / ("eps_" + std::to_string(i));
                        fs::create_directories(sub);
                        Json sj = state_to_json(states[i]);
                        sj["u"] = std::vector<double>(states[i].u.data(), states[i].u.data() + states[i].u.size());
                        write_text(sub / "state.json", dump(sj));
                        files.push_back(fs::relative(sub / "state.json", dir).generic_string());
                    }
                } else if (s == "diagnostics") {
                    section = stage_diagnostics(ctx, cfg, states);
                    save_table("diagnostics_" + tag + ".csv", section["rows"]);
                } else if (s == "sharpness") {
                    section = stage_sharpness(ctx, cfg);
                    if (section.contains("rows")) save_table("sharpness_" + tag + ".csv", section["rows"]);
                    save_table("failure_" + tag + ".csv", section["failure"]["rows"]);
                }
                e[s] = section;
                save_results();
            }
        }
        stage = "report";
        // refinement table across consecutive levels
        const Json& lv = results["levels"];
        if (lv.size() >= 2) {
            Json conv = Json::array();
            for (std::size_t i = 1; i < lv.size(); ++i) {
                Json row{{"coarse", lv[i - 1]["level"]}, {"fine", lv[i]["level"]}};
                if (lv[i].contains("spectrum") && lv[i - 1].contains("spectrum")) {
                    const double a = lv[i - 1]["spectrum"]["groups"][0]["lambda"], b = lv[i]["spectrum"]["groups"][0]["lambda"];
                    row["lambda_1_diff"] = std::abs(b - a);
                }
                if (lv[i].contains("green") && lv[i - 1].contains("green")) {
                    const double a = lv[i - 1]["green"]["A"], b = lv[i]["green"]["A"];
                    row["A_diff"] = std::abs(b - a);
                    row["A_richardson"] = richardson(a, b);
                }
                conv.push_back(row);
            }
            results["convergence"] = conv;
        }
        if (!cfg.pipeline.empty()) save_results();
    } catch (const ConfigError& e) {
        res.exit_code = 2;
        res.failed_stage = stage;
        res.message = e.what();
    } catch (const UnsupportedError& e) {
        res.exit_code = 2;
        res.failed_stage = stage;
        res.message = e.what();
    } catch (const ConstructionError& e) {
        res.exit_code = 2;
        res.failed_stage = stage;
        res.message = e.what();
    } catch (const std::exception& e) {
        res.exit_code = 3;
        res.failed_stage = stage;
        res.message = e.what();
    }

    Json manifest;
    manifest["schema_version"] = kSchemaVersion;
    manifest["tool_version"] = tool_version();
    manifest["name"] = cfg.name;
    manifest["config_hash"] = config_hash;
    manifest["mesh_hashes"] = mesh_hashes;
    manifest["pipeline"] = cfg.pipeline;
    manifest["status"] = res.exit_code == 0 ? "ok" : "failed";
    if (res.exit_code != 0) {
        manifest["failed_stage"] = res.failed_stage;
        manifest["error"] = res.message;
    }
    manifest["files"] = files;
    try {
        fs::create_directories(dir);
        write_text(dir / "manifest.json", dump(manifest));
    } catch (const std::exception& e) {
        if (res.exit_code == 0) {
            res.exit_code = 2;
            res.failed_stage = "manifest";
            res.message = e.what();
        }
    }
    files.push_back("manifest.json");
    res.files = files;
    if (res.exit_code != 0) note("stage '" + res.failed_stage + "' failed: " + res.message);
    return res;
}

namespace {

void flatten(const Json& j, const std::string& path, std::vector<std::pair<std::string, double>>& out) {
    if (j.is_number()) {
        out.emplace_back(path, j.get<double>());
    } else if (j.is_object()) {
        for (const auto& [k, v] : j.items()) flatten(v, path + "/" + k, out);
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], path + "/" + std::to_string(i), out);
    }
}

Json read_json(const fs::path& p) {
    try {
        return Json::parse(slurp(p.string()));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(p.string() + " is not valid JSON: " + e.what());
    }
}

}  // namespace

Json compare_report(const std::string& run_a, const std::string& run_b) {
    const Json ma = read_json(fs::path(run_a) / "manifest.json");
    const Json mb = read_json(fs::path(run_b) / "manifest.json");
    if (ma.value("schema_version", -1) != mb.value("schema_version", -2))
        throw ConfigError("schema mismatch between runs");
    const Json ra = read_json(fs::path(run_a) / "results.json");
    const Json rb = read_json(fs::path(run_b) / "results.json");
    std::vector<std::pair<std::string, double>> fa, fb;
    flatten(ra, "", fa);
    flatten(rb, "", fb);
    std::map<std::string, double> mbv(fb.begin(), fb.end());
    Json rows = Json::array();
    double worst = 0.0;
    int only_a = 0;
    for (const auto& [path, a] : fa) {
        auto it = mbv.find(path);
        if (it == mbv.end()) {
            ++only_a;
            continue;
        }
        const double b = it->second;
        const double scale = std::max(std::abs(a), std::abs(b));
        const double rel = scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
        worst = std::max(worst, rel);
        rows.push_back({{"path", path}, {"a", a}, {"b", b}, {"abs_diff", std::abs(a - b)}, {"rel_diff", rel}});
        mbv.erase(it);
    }
    Json rep;
    rep["schema_version"] = kSchemaVersion;
    rep["run_a"] = run_a;
    rep["run_b"] = run_b;
    rep["config_hash_a"] = ma.value("config_hash", "");
    rep["config_hash_b"] = mb.value("config_hash", "");
    rep["max_rel_diff"] = worst;
    rep["only_in_a"] = only_a;
    rep["only_in_b"] = mbv.size();
    // extrapolated constant from the finest level of each run (a coarse, b fine)
    if (!ra["levels"].empty() && !rb["levels"].empty() && ra["levels"].back().contains("green") &&
        rb["levels"].back().contains("green")) {
        const double a = ra["levels"].back()["green"]["A"], b = rb["levels"].back()["green"]["A"];
        rep["A_richardson"] = richardson(a, b);
    }
    rep["quantities"] = rows;
    return rep;
}

}  // namespace tmsym
