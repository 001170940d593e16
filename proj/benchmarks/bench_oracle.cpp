// Geometric fitting primitives on exact parts.

#include <benchmark/benchmark.h>

#include "agps/oracle/fits.hpp"
#include "agps/rng.hpp"

using namespace agps;

namespace {

Eigen::MatrixX3d random_points(int n, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixX3d P(n, 3);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 3; ++j) P(i, j) = rng.normal();
    return P;
}

void bench_procrustes(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    auto A = random_points(n, 5);
    Eigen::Matrix3d R =
        Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 2).normalized()).toRotationMatrix();
    Eigen::MatrixX3d B = A * R.transpose();
    for (auto _ : state) benchmark::DoNotOptimize(oracle::procrustes_rotation(A, B));
}
BENCHMARK(bench_procrustes)->Arg(32)->Arg(256);

void bench_sphere_fit(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(9);
    Eigen::MatrixX3d P(n, 3);
    const Eigen::Vector3d c(0.2, -0.1, 0.4);
    for (int i = 0; i < n; ++i) {
        Eigen::Vector3d d(rng.normal(), rng.normal(), rng.normal());
        P.row(i) = (c + 0.8 * d.normalized()).transpose();
    }
    for (auto _ : state) benchmark::DoNotOptimize(oracle::sphere_fit(P));
}
BENCHMARK(bench_sphere_fit)->Arg(32)->Arg(256);

void bench_plane_normal(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(13);
    Eigen::MatrixX3d P(n, 3);
    for (int i = 0; i < n; ++i) P.row(i) << rng.normal(), rng.normal(), 0.0;
    for (auto _ : state) benchmark::DoNotOptimize(oracle::plane_normal(P));
}
BENCHMARK(bench_plane_normal)->Arg(32)->Arg(256);

}  // namespace
