/**
 * @file experiment.hpp
 * @brief JSON experiment configuration, the staged pipeline behind the
 *        `tm` tool, manifests and run comparison.
 */
#pragma once

#include "tmsym/constructions.hpp"
#include "tmsym/maximizer.hpp"
#include "tmsym/spectrum.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tmsym {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

std::string tool_version();

struct TorusConfig {
    int nx = 64;
    int ny = 64;
    double a = 1.0;
    double b = 1.0;
    std::vector<Shift> translations;
};

struct ExperimentConfig {
    int schema_version = kSchemaVersion;
    std::string name = "experiment";
    std::string surface = "sphere";  // sphere | torus | file
    std::string mesh_file;           // for surface = file
    TorusConfig torus;
    std::string group = "trivial";
    std::vector<int> levels{4};      // sphere subdivision levels (ignored for torus/file)
    std::optional<double> alpha;     // absolute shift
    double alpha_fraction = 0.0;     // of lambda_1^G, used when alpha is absent
    int spectrum_level = 1;          // j
    int eigen_count = 12;
    std::vector<double> epsilon_grid;       // maximizer exponents 4 pi ell - eps
    std::vector<double> test_epsilon_grid;  // test-function family
    std::vector<double> beta_grid;
    std::vector<double> k_grid;
    std::vector<double> t_grid{1.0, 2.0, 4.0, 8.0};
    double failure_beta = 1.0;
    double moser_radius = 0.05;
    std::vector<double> diagnostic_radii{0.2};
    double blowup_threshold = 3.0;
    double fit_scale = 1.0;
    double eigen_tolerance = 1e-10;
    double maximizer_tolerance = 1e-9;
    int max_iterations = 5000;
    std::string seed_kind = "moser";
    std::string seed_file;
    unsigned long long seed = 20240917ull;
    std::string output_dir = "tm-out";
    std::vector<std::string> pipeline;  // mesh spectrum green bounds maximize diagnostics sharpness
};

// Throws ConfigError with the offending key.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
// Canonical form: fixed key order, two-space indent, trailing newline.
std::string emit_config(const ExperimentConfig& cfg);

std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t v);

const std::vector<std::string>& known_stages();

// Everything the stages share for one mesh.
struct MeshContext {
    int level = 0;
    SurfaceMesh mesh;
    GroupAction action;
    FemOperators ops;
    InvariantSpace space;
    std::optional<InvariantSpectrum> spectrum;
    std::optional<GreenDecomposition> green;
    std::optional<AFit> fit;
};

MeshContext build_context(const ExperimentConfig& cfg, int level);
void ensure_spectrum(MeshContext& ctx, const ExperimentConfig& cfg);
double resolve_alpha(const MeshContext& ctx, const ExperimentConfig& cfg);

// Individual stages; each returns the JSON section it contributes.
Json stage_mesh(const MeshContext& ctx);
Json stage_spectrum(MeshContext& ctx, const ExperimentConfig& cfg);
Json stage_green(MeshContext& ctx, const ExperimentConfig& cfg);
Json stage_bounds(MeshContext& ctx, const ExperimentConfig& cfg);
// One entry per epsilon; states are returned for diagnostics.
Json stage_maximize(MeshContext& ctx, const ExperimentConfig& cfg, std::vector<MaximizerState>* states = nullptr);
Json stage_diagnostics(MeshContext& ctx, const ExperimentConfig& cfg, const std::vector<MaximizerState>& states);
Json stage_sharpness(MeshContext& ctx, const ExperimentConfig& cfg);

Json state_to_json(const MaximizerState& st);

struct RunResult {
    int exit_code = 0;  // 0 ok, 2 config error, 3 numerical failure
    std::string failed_stage;
    std::string message;
    std::vector<std::string> files;  // relative to the output directory
};

// Writes results.json, per-stage CSV tables, per-epsilon state files and
// manifest.json into cfg.output_dir.
RunResult run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

// Per-quantity relative differences of two result files (directories holding
// manifest.json and results.json). Throws ConfigError on schema mismatch.
Json compare_report(const std::string& run_a, const std::string& run_b);

// Worker count for parameter sweeps: TM_THREADS when set, else hardware.
int sweep_threads();

}  // namespace tmsym
