#pragma once

#include <cstdint>
#include <vector>

#include "agps/synth/data.hpp"

namespace agps::synth {

// k-means++ seeding, Lloyd to convergence, then greedy size-balanced merge of
// k_clusters clusters into k_merged groups. Returns one group id per shape.
std::vector<int> kmeanspp_domain_split(const std::vector<Shape>& shapes, int k_clusters,
                                       int k_merged, std::uint64_t seed);

}  // namespace agps::synth
