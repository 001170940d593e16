// Sampling, scoring and update costs of the distribution space.

#include <benchmark/benchmark.h>

#include "agps/eval/crossval.hpp"
#include "agps/grammar/space.hpp"
#include "agps/rng.hpp"

using namespace agps;

namespace {

grammar::DistributionSpace primitive_space() {
    return grammar::DistributionSpace(
        grammar::full_grammar(eval::task_operants(synth::Task::Primitive)));
}

void bench_sample(benchmark::State& state) {
    auto space = primitive_space();
    Rng rng(3);
    for (auto _ : state) benchmark::DoNotOptimize(grammar::sample_tree(space, rng));
}
BENCHMARK(bench_sample);

void bench_log_prob(benchmark::State& state) {
    auto space = primitive_space();
    Rng rng(3);
    auto [tree, lp] = grammar::sample_tree(space, rng);
    for (auto _ : state) benchmark::DoNotOptimize(grammar::log_prob(space, tree));
}
BENCHMARK(bench_log_prob);

void bench_reinforce(benchmark::State& state) {
    auto space = primitive_space();
    grammar::ReinforceState st;
    Rng rng(3);
    auto [tree, lp] = grammar::sample_tree(space, rng);
    double r = 0.0;
    for (auto _ : state) {
        grammar::reinforce_update(space, st, tree, r);
        r = 1.0 - r;
    }
}
BENCHMARK(bench_reinforce);

void bench_checkpoint(benchmark::State& state) {
    auto space = primitive_space();
    grammar::ReinforceState st;
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        auto [tree, lp] = grammar::sample_tree(space, rng);
        grammar::reinforce_update(space, st, tree, rng.uniform());
    }
    for (auto _ : state) benchmark::DoNotOptimize(grammar::save_space(space, st));
}
BENCHMARK(bench_checkpoint);

}  // namespace
