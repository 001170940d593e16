#pragma once

#include <string>

#include "agps/synth/data.hpp"

namespace agps::synth {

std::string serialize_dataset(const PartDataset& ds);
PartDataset parse_dataset(const std::string& bytes);

void write_dataset(const PartDataset& ds, const std::string& path);
PartDataset read_dataset(const std::string& path);

}  // namespace agps::synth
