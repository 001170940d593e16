#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "agps/oracle/fits.hpp"

namespace agps::synth {

enum class Task : std::uint8_t { Primitive = 0, Mobility = 1 };

// Per-part ground truth. Rigid parts carry the axis-angle vector as the
// primary stored form; R is derived from it so write/read/write is stable.
struct PartMeta {
    bool is_rigid = false;
    oracle::PrimitiveParams prim;
    oracle::RigidTransform rigid;
    Eigen::Vector3d rigid_axis_angle = Eigen::Vector3d::Zero();
};

struct Shape {
    Eigen::MatrixX3d positions;  // unit-ball units
    Eigen::MatrixX3d normals;
    Eigen::MatrixX3d flow;
    std::vector<int> part_labels;
    std::vector<int> prim_types;  // 0 plane, 1 sphere, 2 cylinder, 3 cone
    std::vector<PartMeta> part_meta;
    bool has_normals = false;
    bool has_flow = false;
    bool has_prim_types = false;

    Eigen::Index n_points() const { return positions.rows(); }
    int n_parts() const { return static_cast<int>(part_meta.size()); }
};

struct Domain {
    std::string name;
    std::vector<Shape> shapes;
};

struct PartDataset {
    Task task = Task::Primitive;
    std::uint64_t seed = 0;
    std::vector<Domain> domains;
};

struct DomainSpec {
    std::string name;
    std::array<double, 4> mixture{0.25, 0.25, 0.25, 0.25};  // plane,sphere,cyl,cone
    int shapes_count = 60;
    int parts_min = 2;
    int parts_max = 5;
    int points_per_shape = 512;
    double noise_sigma = 0.0;
};

// Mobility class per point: parts ranked by recorded translation magnitude,
// magnitudes closer than 1e-9 share a rank (0 = static).
std::vector<int> mobility_class_labels(const Shape& shape);

const char* task_name(Task task);

// Copy without domain `idx` (holds a domain out of search and training).
PartDataset drop_domain(const PartDataset& ds, int idx);

// Fraction of points per primitive type, 4 bins.
Eigen::Vector4d prim_type_histogram(const Shape& shape);

}  // namespace agps::synth
