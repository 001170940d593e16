// Evaluator step costs: one Adam batch and one full loss/grad pass.

#include <benchmark/benchmark.h>

#include "agps/eval/model.hpp"
#include "agps/rng.hpp"

using namespace agps;

namespace {

struct Fixture {
    Eigen::MatrixXd X;
    std::vector<int> y;
    Eigen::MatrixXd t1, t2;
    eval::Batch batch;

    explicit Fixture(int n) : X(n, eval::kDescriptorDim), t1(n, 3), t2(n, 9) {
        Rng rng(21);
        y.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < eval::kDescriptorDim; ++j) X(i, j) = rng.normal();
            for (int j = 0; j < 3; ++j) t1(i, j) = rng.normal();
            for (int j = 0; j < 9; ++j) t2(i, j) = rng.normal();
            y[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(4));
        }
        batch.X = &X;
        batch.y = &y;
        batch.targets = {&t1, &t2};
    }
};

void bench_adam_step(benchmark::State& state) {
    Fixture f(static_cast<int>(state.range(0)));
    eval::EvalModel model(eval::kDescriptorDim, 4, {3, 9}, 17);
    eval::TrainConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(model.adam_step(f.batch, cfg));
}
BENCHMARK(bench_adam_step)->Arg(128)->Arg(512);

void bench_loss_and_grad(benchmark::State& state) {
    Fixture f(static_cast<int>(state.range(0)));
    eval::EvalModel model(eval::kDescriptorDim, 4, {3, 9}, 17);
    for (auto _ : state) benchmark::DoNotOptimize(model.loss_and_grad(f.batch, 1.0));
}
BENCHMARK(bench_loss_and_grad)->Arg(128)->Arg(512);

void bench_predict(benchmark::State& state) {
    Fixture f(static_cast<int>(state.range(0)));
    eval::EvalModel model(eval::kDescriptorDim, 4, {3, 9}, 17);
    for (auto _ : state) benchmark::DoNotOptimize(model.predict(f.X));
}
BENCHMARK(bench_predict)->Arg(512);

}  // namespace
