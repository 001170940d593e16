#pragma once

#include <Eigen/Dense>

#include "agps/errors.hpp"

namespace agps::oracle {

// Proper rotation plus translation. Construction rejects improper or
// non-orthogonal R; fitted matrices from procrustes_rotation stay raw 3x3.
struct RigidTransform {
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    Eigen::Vector3d t = Eigen::Vector3d::Zero();

    RigidTransform() = default;
    RigidTransform(const Eigen::Matrix3d& rot, const Eigen::Vector3d& trans);

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return R * p + t; }
};

// F between frames: row i is (R p_i + t) - p_i.
Eigen::MatrixX3d flow_matrix(const RigidTransform& T, const Eigen::MatrixX3d& P);

enum class PrimitiveKind { Plane, Sphere, Cylinder, Cone };

struct PrimitiveParams {
    PrimitiveKind kind = PrimitiveKind::Plane;
    Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();  // plane
    double offset = 0.0;                                // plane: n.p = offset
    Eigen::Vector3d center = Eigen::Vector3d::Zero();   // sphere
    double radius = 1.0;                                // sphere, cylinder
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();    // cylinder, cone
    Eigen::Vector3d axis_point = Eigen::Vector3d::Zero();  // cylinder
    Eigen::Vector3d apex = Eigen::Vector3d::Zero();     // cone
    double half_angle = 0.5;                            // cone, radians

    static PrimitiveParams plane(const Eigen::Vector3d& n, double offset);
    static PrimitiveParams sphere(const Eigen::Vector3d& c, double r);
    static PrimitiveParams cylinder(const Eigen::Vector3d& axis, const Eigen::Vector3d& point,
                                    double r);
    static PrimitiveParams cone(const Eigen::Vector3d& apex, const Eigen::Vector3d& axis,
                                double half_angle);
};

// R = U V^T from the SVD of sum_i a_i b_i^T, a = after rows, b = before rows.
// No centering and no reflection correction. DegenerateInput when the
// singular-value spread indicates rank < 2.
Eigen::Matrix3d procrustes_rotation(const Eigen::MatrixX3d& P_before,
                                    const Eigen::MatrixX3d& P_after);

// Smallest right singular vector of the column-centered input, sign-normalized
// (largest-magnitude component positive, ties to the lowest index).
Eigen::Vector3d cylinder_axis(const Eigen::MatrixX3d& N);
Eigen::Vector3d plane_normal(const Eigen::MatrixX3d& P);

// Least-squares apex a with n_i . a = n_i . p_i for every i.
Eigen::Vector3d cone_apex(const Eigen::MatrixX3d& N, const Eigen::MatrixX3d& P);

// Algebraic fit: solve 2 (p_i - pbar)^T c = |p_i|^2 - mean |p|^2, then
// r = sqrt(mean |p_i - c|^2).
std::pair<Eigen::Vector3d, double> sphere_fit(const Eigen::MatrixX3d& P);

}  // namespace agps::oracle
