// Tree evaluation throughput on one neighbor context.

#include <benchmark/benchmark.h>

#include "agps/dsl/context.hpp"
#include "agps/dsl/eval.hpp"
#include "agps/dsl/tree.hpp"
#include "agps/eval/crossval.hpp"
#include "agps/rng.hpp"

using namespace agps;

namespace {

dsl::PartContext make_context(int k, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixX3d P(k, 3), N(k, 3);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < 3; ++j) {
            P(i, j) = rng.normal();
            N(i, j) = rng.normal();
        }
    std::vector<int> rows(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) rows[static_cast<std::size_t>(i)] = i;
    return dsl::PartContext(rows, eval::task_operants(synth::Task::Primitive), {P, N});
}

void bench_eval_tree(benchmark::State& state, const char* text) {
    auto tree = dsl::parse_tree(text);
    auto ctx = make_context(static_cast<int>(state.range(0)), 11);
    for (auto _ : state) benchmark::DoNotOptimize(dsl::evaluate_tree(tree, ctx));
}

}  // namespace

BENCHMARK_CAPTURE(bench_eval_tree, svd_leaf, "identity(svd(centralize(N)))")->Arg(32);
BENCHMARK_CAPTURE(bench_eval_tree, pair_mid,
                  "identity(sum(add(square(mean(mul(identity(P),identity(N)))),neg(A_mul_B))))")
    ->Arg(32);
BENCHMARK_CAPTURE(bench_eval_tree, cartesian,
                  "identity(mean(cartesian(identity(P),identity(N))))")
    ->Arg(32)
    ->Arg(128);

BENCHMARK_MAIN();
