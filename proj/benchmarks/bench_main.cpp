#include "tmsym/constructions.hpp"
#include "tmsym/maximizer.hpp"

#include <benchmark/benchmark.h>

#include <numbers>

using namespace tmsym;

namespace {

struct Setup {
    SurfaceMesh mesh;
    GroupAction action;
    FemOperators ops;
    InvariantSpace space;
};

Setup antipodal(int level) {
    auto [m, a] = build_sphere_mesh(level, GroupSpec::parse("antipodal"));
    Setup s{std::move(m), std::move(a), {}, {}};
    s.ops = assemble(s.mesh);
    s.space = make_invariant_space(s.ops, s.action);
    return s;
}

}  // namespace

static void BM_SphereMesh(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(build_sphere_mesh(static_cast<int>(state.range(0)), GroupSpec::parse("antipodal")));
}
BENCHMARK(BM_SphereMesh)->DenseRange(3, 5)->Unit(benchmark::kMillisecond);

static void BM_Assemble(benchmark::State& state) {
    auto [mesh, act] = build_sphere_mesh(static_cast<int>(state.range(0)), GroupSpec::parse("trivial"));
    for (auto _ : state) benchmark::DoNotOptimize(assemble(mesh));
    state.counters["vertices"] = mesh.num_vertices();
}
BENCHMARK(BM_Assemble)->DenseRange(3, 6)->Unit(benchmark::kMillisecond);

static void BM_Spectrum(benchmark::State& state) {
    const Setup s = antipodal(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(invariant_spectrum(s.space, 12));
}
BENCHMARK(BM_Spectrum)->DenseRange(3, 5)->Unit(benchmark::kMillisecond);

static void BM_GreenSolve(benchmark::State& state) {
    const Setup s = antipodal(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(green_solve(s.ops, s.action, s.space, 0, NormParams(1.5, 1.0)));
}
BENCHMARK(BM_GreenSolve)->DenseRange(3, 5)->Unit(benchmark::kMillisecond);

static void BM_ExpFunctional(benchmark::State& state) {
    const Setup s = antipodal(static_cast<int>(state.range(0)));
    Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(s.mesh.num_vertices(), -1.0, 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(exp_functional(u, 20.0, s.ops));
}
BENCHMARK(BM_ExpFunctional)->DenseRange(3, 6);

static void BM_Maximizer(benchmark::State& state) {
    const Setup s = antipodal(static_cast<int>(state.range(0)));
    const InvariantSpectrum spec = invariant_spectrum(s.space, 6);
    const SubcriticalProblem p(s.mesh, s.ops, s.action, s.space, spec, 1, 0.25 * spec.distinct(1), 2.0 * std::numbers::pi);
    const Eigen::VectorXd seed = make_seed(p, spec, {});
    for (auto _ : state) benchmark::DoNotOptimize(solve_subcritical(p, seed));
}
BENCHMARK(BM_Maximizer)->DenseRange(3, 4)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
