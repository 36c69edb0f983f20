// Serial reference vs OpenMP kernels. Thread count is the benchmark argument
// for the parallel variants.

#include <benchmark/benchmark.h>

#include <random>

#include "nrrr/kernels.hpp"
#include "nrrr/sim.hpp"

namespace {

using namespace nrrr;
using Eigen::MatrixXd;

const GeneratedData& data() {
    static const GeneratedData d = [] {
        ScenarioSpec s = setting_preset(2);
        s.n = 400;
        s.n_test = 1;
        return generate(s);
    }();
    return d;
}

void BM_AssembleDesignSerial(benchmark::State& state) {
    const GeneratedData& d = data();
    for (auto _ : state)
        benchmark::DoNotOptimize(assemble_design(d.train, d.x_spec, d.y_spec, d.y_gram, Exec::serial));
}

void BM_AssembleDesignParallel(benchmark::State& state) {
    const GeneratedData& d = data();
    ThreadScope threads(static_cast<int>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(assemble_design(d.train, d.x_spec, d.y_spec, d.y_gram, Exec::parallel));
}

struct BvInputs {
    MatrixXd XtX, XtZ, Z, B;
    int p = 0, Jx = 0, rx = 0;
};

const BvInputs& bv_inputs() {
    static const BvInputs in = [] {
        const IntegratedDesign& D = data().train_design;
        std::mt19937_64 rng(7);
        std::normal_distribution<double> nd;
        BvInputs b;
        b.p = D.p;
        b.Jx = D.Jx;
        b.rx = 5;
        const int r = 6;
        b.Z = MatrixXd::NullaryExpr(D.n, r, [&] { return nd(rng); });
        b.B = MatrixXd::NullaryExpr(static_cast<Eigen::Index>(D.Jx) * b.rx, r, [&] { return nd(rng); });
        b.XtX = D.X.transpose() * D.X;
        b.XtZ = D.X.transpose() * b.Z;
        return b;
    }();
    return in;
}

void BM_BvNormalReference(benchmark::State& state) {
    const BvInputs& b = bv_inputs();
    for (auto _ : state)
        benchmark::DoNotOptimize(kernels::bv_normal_equations_reference(data().train_design, b.Z, b.B, b.rx));
}

void BM_BvNormalSerial(benchmark::State& state) {
    const BvInputs& b = bv_inputs();
    for (auto _ : state)
        benchmark::DoNotOptimize(kernels::bv_normal_equations(b.XtX, b.XtZ, b.B, b.p, b.Jx, b.rx, Exec::serial));
}

void BM_BvNormalParallel(benchmark::State& state) {
    const BvInputs& b = bv_inputs();
    ThreadScope threads(static_cast<int>(state.range(0)));
    for (auto _ : state)
        benchmark::DoNotOptimize(kernels::bv_normal_equations(b.XtX, b.XtZ, b.B, b.p, b.Jx, b.rx, Exec::parallel));
}

}  // namespace

BENCHMARK(BM_AssembleDesignSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AssembleDesignParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BvNormalReference)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_BvNormalSerial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_BvNormalParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
