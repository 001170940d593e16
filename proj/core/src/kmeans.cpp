#include "agps/synth/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "agps/rng.hpp"

namespace agps::synth {

namespace {

int nearest_center(const Eigen::Vector4d& x, const std::vector<Eigen::Vector4d>& centers) {
    int best = 0;
    double best_d = (x - centers[0]).squaredNorm();
    for (std::size_t j = 1; j < centers.size(); ++j) {
        const double d = (x - centers[j]).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(j);
        }
    }
    return best;
}

}  // namespace

std::vector<int> kmeanspp_domain_split(const std::vector<Shape>& shapes, int k_clusters,
                                       int k_merged, std::uint64_t seed) {
    if (k_merged < 2 || k_clusters < k_merged)
        throw SpecError("need k_clusters >= k_merged >= 2");
    if (static_cast<int>(shapes.size()) < k_clusters)
        throw SpecError("need at least as many shapes as clusters");
    std::vector<Eigen::Vector4d> feats;
    feats.reserve(shapes.size());
    for (const auto& sh : shapes) {
        if (!sh.has_prim_types)
            throw SpecError("domain split needs primitive type channels on every shape");
        feats.push_back(prim_type_histogram(sh));
    }
    const auto n = feats.size();

    Rng rng(seed);
    std::vector<Eigen::Vector4d> centers;
    centers.push_back(feats[rng.uniform_int(n)]);
    std::vector<double> d2(n);
    while (static_cast<int>(centers.size()) < k_clusters) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centers) best = std::min(best, (feats[i] - c).squaredNorm());
            d2[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            const double u = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (u < acc) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.uniform_int(n);
        }
        centers.push_back(feats[pick]);
    }

    std::vector<int> assign(n, 0);
    for (int iter = 0; iter < 100; ++iter) {
        for (std::size_t i = 0; i < n; ++i) assign[i] = nearest_center(feats[i], centers);
        double max_shift = 0.0;
        for (int j = 0; j < k_clusters; ++j) {
            Eigen::Vector4d sum = Eigen::Vector4d::Zero();
            int count = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (assign[i] == j) {
                    sum += feats[i];
                    ++count;
                }
            if (count == 0) continue;  // empty cluster keeps its previous center
            const Eigen::Vector4d next = sum / count;
            max_shift = std::max(max_shift, (next - centers[j]).norm());
            centers[static_cast<std::size_t>(j)] = next;
        }
        if (max_shift < 1e-9) break;
    }
    for (std::size_t i = 0; i < n; ++i) assign[i] = nearest_center(feats[i], centers);

    // Merge: clusters by size descending, each joins the currently smallest
    // group, balancing member counts.
    std::vector<int> sizes(static_cast<std::size_t>(k_clusters), 0);
    for (int a : assign) ++sizes[static_cast<std::size_t>(a)];
    std::vector<int> order(static_cast<std::size_t>(k_clusters));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return sizes[static_cast<std::size_t>(a)] > sizes[static_cast<std::size_t>(b)]; });
    std::vector<int> group_of(static_cast<std::size_t>(k_clusters), 0);
    std::vector<int> group_size(static_cast<std::size_t>(k_merged), 0);
    for (int cl : order) {
        int g = 0;
        for (int j = 1; j < k_merged; ++j)
            if (group_size[static_cast<std::size_t>(j)] < group_size[static_cast<std::size_t>(g)]) g = j;
        group_of[static_cast<std::size_t>(cl)] = g;
        group_size[static_cast<std::size_t>(g)] += sizes[static_cast<std::size_t>(cl)];
    }
    std::vector<int> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = group_of[static_cast<std::size_t>(assign[i])];
    return out;
}

}  // namespace agps::synth
