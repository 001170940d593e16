#pragma once

#include "agps/rng.hpp"
#include "agps/synth/data.hpp"

namespace agps::synth {

std::vector<DomainSpec> default_primitive_specs();
std::vector<DomainSpec> default_mobility_specs();

PartDataset gen_primitive_dataset(const std::vector<DomainSpec>& specs, std::uint64_t seed);
PartDataset gen_mobility_dataset(const std::vector<DomainSpec>& specs, std::uint64_t seed);

}  // namespace agps::synth
