#include "skewspin/verifier.hpp"

#include <benchmark/benchmark.h>

using namespace sks;

namespace {

const Spinor4 kPsi(cplx(0.6, 0.1), cplx(-0.2, 0.3), cplx(0.1, 0.5), cplx(0.4, -0.2));

void BM_FormClifford(benchmark::State& st) {
    const ExtForm w(2, {0.3, -0.1, 0.7, 0.2, -0.5, 0.9});
    for (auto _ : st) benchmark::DoNotOptimize(form_clifford(w, kPsi));
}
BENCHMARK(BM_FormClifford);

void BM_DeriveFields(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(derive_fields(kPsi, 1));
}
BENCHMARK(BM_DeriveFields);

void BM_Curvature(benchmark::State& st) {
    const Candidate4 c = build_s2xr2(S2xR2Mode::Plus, S2xR2Combo::AetaNonzero);
    Chart<4> chart = c.chart;
    chart.mode = st.range(0) ? DerivMode::Analytic : DerivMode::FiniteDifference;
    const Vec4 x = chart.center();
    for (auto _ : st) benchmark::DoNotOptimize(curvature<4>(chart, x));
}
BENCHMARK(BM_Curvature)->Arg(0)->Arg(1);

void BM_IntegrateDwp(benchmark::State& st) {
    DwpParams p;
    p.step = 1e-3 / double(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(integrate_dwp(p));
}
BENCHMARK(BM_IntegrateDwp)->Arg(1)->Arg(4);

void BM_SuiteS2(benchmark::State& st) {
    const Candidate4 c = build_s2xr2(S2xR2Mode::Plus, S2xR2Combo::AetaNonzero);
    VerifyOptions o;
    const int n = int(st.range(0));
    o.grid = {n, n, n, n};
    o.threads = 1;
    for (auto _ : st) benchmark::DoNotOptimize(run_suites(c, {Suite::S1, Suite::S2}, o));
    st.counters["points"] = n * n * n * n;
}
BENCHMARK(BM_SuiteS2)->Arg(3)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_DwpSpinor(benchmark::State& st) {
    const Candidate4 c = build_dwp_candidate(integrate_dwp(DwpParams{}), berger_flow(1.0, 1.0), cplx(1.0, 0.0));
    const Vec4 x = c.chart.center();
    for (auto _ : st) benchmark::DoNotOptimize(c.psi(x));
}
BENCHMARK(BM_DwpSpinor)->Unit(benchmark::kMicrosecond);

void BM_DwpSuites(benchmark::State& st) {
    const Candidate4 c = build_dwp_candidate(integrate_dwp(DwpParams{}), berger_flow(1.0, 1.0), cplx(1.0, 0.0));
    VerifyOptions o;
    o.grid = {2, 2, 2, 2};
    o.threads = 1;
    for (auto _ : st) benchmark::DoNotOptimize(run_suites(c, {Suite::S3, Suite::S4}, o));
}
BENCHMARK(BM_DwpSuites)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
