// tm: command-line front end for the tmsym library.
#include "tmsym/error.hpp"
#include "tmsym/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace tmsym;

namespace {

struct MeshArgs {
    std::string mesh = "sphere:4";  // sphere:L, torus:N, torus:NXxNY or an OFF path
    std::string group = "trivial";
    std::vector<std::string> shifts;  // torus translations "i,j"
    std::optional<double> alpha;
    double alpha_fraction = 0.0;
    int eigen_count = 12;
    unsigned long long seed = 20240917ull;
};

void add_mesh_options(CLI::App* cmd, MeshArgs& m) {
    cmd->add_option("--mesh", m.mesh, "sphere:L, torus:N, torus:NXxNY or an OFF file")->capture_default_str();
    cmd->add_option("--group", m.group, "trivial, antipodal, cyclic:m, dihedral:m")->capture_default_str();
    cmd->add_option("--shift", m.shifts, "torus translation i,j (repeatable)");
}

void add_alpha_options(CLI::App* cmd, MeshArgs& m) {
    cmd->add_option("--alpha", m.alpha, "shift alpha");
    cmd->add_option("--alpha-fraction", m.alpha_fraction, "alpha as a fraction of lambda_1^G");
    cmd->add_option("--eigen-count", m.eigen_count, "eigenpairs to compute")->capture_default_str();
    cmd->add_option("--rng-seed", m.seed, "random seed")->capture_default_str();
}

ExperimentConfig config_from(const MeshArgs& m) {
    ExperimentConfig c;
    c.group = m.group;
    c.alpha = m.alpha;
    c.alpha_fraction = m.alpha_fraction;
    c.eigen_count = m.eigen_count;
    c.seed = m.seed;
    const auto colon = m.mesh.find(':');
    const std::string kind = m.mesh.substr(0, colon);
    if (colon != std::string::npos && kind == "sphere") {
        c.surface = "sphere";
        c.levels = {std::stoi(m.mesh.substr(colon + 1))};
    } else if (colon != std::string::npos && kind == "torus") {
        c.surface = "torus";
        const std::string dims = m.mesh.substr(colon + 1);
        const auto x = dims.find('x');
        c.torus.nx = std::stoi(dims.substr(0, x));
        c.torus.ny = x == std::string::npos ? c.torus.nx : std::stoi(dims.substr(x + 1));
        for (const auto& s : m.shifts) {
            const auto comma = s.find(',');
            if (comma == std::string::npos) throw ConfigError("torus shift must be i,j");
            c.torus.translations.push_back({std::stoi(s.substr(0, comma)), std::stoi(s.substr(comma + 1))});
        }
    } else {
        c.surface = "file";
        c.mesh_file = m.mesh;
    }
    return c;
}

void emit(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + out);
    f << text;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::string csv(const Json& rows) {
    std::ostringstream os;
    os.precision(17);
    if (rows.empty()) return "";
    bool first = true;
    for (const auto& [k, v] : rows.front().items()) {
        os << (first ? "" : ",") << k;
        first = false;
    }
    os << '\n';
    for (const auto& r : rows) {
        first = true;
        for (const auto& [k, v] : r.items()) {
            os << (first ? "" : ",");
            first = false;
            if (v.is_number_float()) os << v.get<double>();
            else if (!v.is_null()) os << v.dump();
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tm: group-invariant Trudinger-Moser experiments"};
    app.set_version_flag("--version", tool_version());
    app.require_subcommand(1);

    MeshArgs m;
    std::string out, group_out, csv_out, seed_kind = "moser", seed_file, config_path, run_a, run_b, failure_out;
    std::vector<double> eps_grid, beta_grid, k_grid, t_grid{1.0, 2.0, 4.0, 8.0};
    double eps = 0.0, radius = 0.05, tol = 1e-9, failure_beta = 1.0;
    int level = 1, max_iters = 5000;

    auto* mesh_cmd = app.add_subcommand("mesh", "build a mesh, print orbit statistics");
    add_mesh_options(mesh_cmd, m);
    mesh_cmd->add_option("--out", out, "OFF output");
    mesh_cmd->add_option("--group-out", group_out, "group permutations as JSON");

    auto* spec_cmd = app.add_subcommand("spectrum", "invariant eigenpairs");
    add_mesh_options(spec_cmd, m);
    add_alpha_options(spec_cmd, m);
    spec_cmd->add_option("--out", out, "JSON output (stdout by default)");
    spec_cmd->add_option("--csv", csv_out, "eigenpair table");

    auto* green_cmd = app.add_subcommand("green", "symmetric Green function and its regular constant");
    add_mesh_options(green_cmd, m);
    add_alpha_options(green_cmd, m);
    green_cmd->add_option("--out", out, "JSON output");

    auto* bounds_cmd = app.add_subcommand("bounds", "upper bound and test-function lower bounds");
    add_mesh_options(bounds_cmd, m);
    add_alpha_options(bounds_cmd, m);
    bounds_cmd->add_option("--eps-grid", eps_grid, "test-function epsilons")->required();
    bounds_cmd->add_option("--out", out, "JSON output");
    bounds_cmd->add_option("--csv", csv_out, "table output");

    auto* max_cmd = app.add_subcommand("maximize", "subcritical maximizer");
    add_mesh_options(max_cmd, m);
    add_alpha_options(max_cmd, m);
    max_cmd->add_option("--eps", eps, "exponent is 4 pi ell - eps")->required();
    max_cmd->add_option("--level", level, "spectrum level j")->capture_default_str();
    max_cmd->add_option("--seed", seed_kind, "moser, random, eigen or file")->capture_default_str();
    max_cmd->add_option("--seed-file", seed_file, "state.json whose u seeds the solve");
    max_cmd->add_option("--tol", tol, "Euler-Lagrange residual tolerance")->capture_default_str();
    max_cmd->add_option("--max-iters", max_iters, "iteration cap")->capture_default_str();
    max_cmd->add_option("--out", out, "state JSON (with u)");

    auto* sharp_cmd = app.add_subcommand("sharpness", "Moser probe across beta and the alpha >= lambda scan");
    add_mesh_options(sharp_cmd, m);
    add_alpha_options(sharp_cmd, m);
    sharp_cmd->add_option("--beta-grid", beta_grid, "exponents")->required();
    sharp_cmd->add_option("--k-grid", k_grid, "Moser levels")->required();
    sharp_cmd->add_option("--radius", radius, "Moser radius")->capture_default_str();
    sharp_cmd->add_option("--level", level, "spectrum level of the failure scan")->capture_default_str();
    sharp_cmd->add_option("--t-grid", t_grid, "failure-scan scalings");
    sharp_cmd->add_option("--failure-beta", failure_beta, "failure-scan exponent")->capture_default_str();
    sharp_cmd->add_option("--out", out, "CSV table");
    sharp_cmd->add_option("--failure-out", failure_out, "CSV of the failure scan");

    auto* run_cmd = app.add_subcommand("run", "run a JSON experiment config");
    run_cmd->add_option("config", config_path, "config file")->required();
    run_cmd->add_option("--output-dir", out, "override output_dir");

    auto* cmp_cmd = app.add_subcommand("compare", "relative differences between two runs");
    cmp_cmd->add_option("run_a", run_a, "first output directory")->required();
    cmp_cmd->add_option("run_b", run_b, "second output directory")->required();
    cmp_cmd->add_option("--out", out, "JSON output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*run_cmd) {
            ExperimentConfig cfg = load_config(config_path);
            if (!out.empty()) cfg.output_dir = out;
            const RunResult r = run_experiment(cfg, &std::cerr);
            if (r.exit_code != 0) std::cerr << "tm: stage " << r.failed_stage << ": " << r.message << '\n';
            return r.exit_code;
        }
        if (*cmp_cmd) {
            emit(out, dump(compare_report(run_a, run_b)));
            return 0;
        }

        ExperimentConfig cfg = config_from(m);
        MeshContext ctx = build_context(cfg, cfg.levels.front());
        if (*mesh_cmd) {
            if (!out.empty()) {
                std::ofstream f(out);
                if (!f) throw ConfigError("cannot write " + out);
                write_off(ctx.mesh, f);
            }
            if (!group_out.empty()) emit(group_out, group_to_json(ctx.action) + "\n");
            std::cout << dump(stage_mesh(ctx));
        } else if (*spec_cmd) {
            const Json j = stage_spectrum(ctx, cfg);
            if (!csv_out.empty()) emit(csv_out, csv(j["eigenpairs"]));
            emit(out, dump(j));
        } else if (*green_cmd) {
            emit(out, dump(stage_green(ctx, cfg)));
        } else if (*bounds_cmd) {
            cfg.test_epsilon_grid = eps_grid;
            const Json j = stage_bounds(ctx, cfg);
            if (!csv_out.empty()) emit(csv_out, csv(j["rows"]));
            emit(out, dump(j));
        } else if (*max_cmd) {
            cfg.epsilon_grid = {eps};
            cfg.spectrum_level = level;
            cfg.seed_kind = seed_kind;
            cfg.seed_file = seed_file;
            cfg.maximizer_tolerance = tol;
            cfg.max_iterations = max_iters;
            parse_seed_kind(seed_kind);
            if (seed_kind == "file" && seed_file.empty()) throw ConfigError("--seed file needs --seed-file");
            std::vector<MaximizerState> states;
            const Json j = stage_maximize(ctx, cfg, &states);
            Json s = j["rows"][0];
            s["seed_kind"] = seed_kind;
            s["u"] = std::vector<double>(states[0].u.data(), states[0].u.data() + states[0].u.size());
            emit(out, dump(s));
            if (!states[0].converged) {
                std::cerr << "tm: maximizer did not converge (residual " << states[0].residual << ")\n";
                return 3;
            }
        } else if (*sharp_cmd) {
            cfg.beta_grid = beta_grid;
            cfg.k_grid = k_grid;
            cfg.moser_radius = radius;
            cfg.spectrum_level = level;
            cfg.t_grid = t_grid;
            cfg.failure_beta = failure_beta;
            const Json j = stage_sharpness(ctx, cfg);
            emit(out, csv(j["rows"]));
            if (!failure_out.empty()) emit(failure_out, csv(j["failure"]["rows"]));
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "tm: config error: " << e.what() << '\n';
        return 2;
    } catch (const UnsupportedError& e) {
        std::cerr << "tm: unsupported: " << e.what() << '\n';
        return 2;
    } catch (const ConstructionError& e) {
        std::cerr << "tm: construction error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "tm: numerical failure: " << e.what() << '\n';
        return 3;
    }
}
