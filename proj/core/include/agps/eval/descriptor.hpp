#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "agps/synth/data.hpp"

namespace agps::eval {

inline constexpr int kDescriptorDim = 12;
inline constexpr int kNeighborCount = 16;

// Per-point descriptors: position (3), task channel (normal or flow, 3),
// 16-NN mean offset (3), 16-NN covariance eigenvalues sorted descending (3).
// Neighborhoods span the whole shape; part labels are never consulted.
Eigen::MatrixXd featurize(const synth::Shape& shape, synth::Task task);

int n_classes(synth::Task task);

// Primitive task: the point's primitive type. Mobility: translation rank.
std::vector<int> class_labels(const synth::Shape& shape, synth::Task task);

struct PreparedShape {
    Eigen::MatrixXd X;         // n x kDescriptorDim
    std::vector<int> y;        // class per point
    Eigen::MatrixXi contexts;  // n x n_rows part-aware neighbor indices
    int domain = 0;
    const synth::Shape* src = nullptr;
};

struct PreparedDataset {
    synth::Task task = synth::Task::Primitive;
    std::vector<std::string> domain_names;
    std::vector<PreparedShape> shapes;
    int n_rows = 32;
    double radius = 0.5;
};

// Descriptors, labels and fixed supervision contexts for every shape.
// Context sampling is seeded per (domain, shape) so the result is a pure
// function of (dataset bytes, n_rows, radius, seed).
PreparedDataset prepare(const synth::PartDataset& ds, int n_rows, double radius,
                        std::uint64_t seed);

}  // namespace agps::eval
