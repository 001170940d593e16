#include "agps/oracle/fits.hpp"

#include <cmath>

namespace agps::oracle {

namespace {

constexpr double kRankTol = 1e-8;

Eigen::Vector3d sign_normalize(Eigen::Vector3d v) {
    int best = 0;
    double mag = std::abs(v[0]);
    for (int i = 1; i < 3; ++i)
        if (std::abs(v[i]) > mag) {
            mag = std::abs(v[i]);
            best = i;
        }
    if (v[best] < 0.0) v = -v;
    return v;
}

void require_unit(const Eigen::Vector3d& v, const char* what) {
    if (std::abs(v.norm() - 1.0) > 1e-12)
        throw SpecError(std::string(what) + " must be unit length");
}

}  // namespace

RigidTransform::RigidTransform(const Eigen::Matrix3d& rot, const Eigen::Vector3d& trans)
    : R(rot), t(trans) {
    if ((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9)
        throw SpecError("rotation matrix is not orthogonal");
    if (std::abs(R.determinant() - 1.0) > 1e-9)
        throw SpecError("rotation matrix is not proper (det != +1)");
}

Eigen::MatrixX3d flow_matrix(const RigidTransform& T, const Eigen::MatrixX3d& P) {
    Eigen::MatrixX3d F(P.rows(), 3);
    for (Eigen::Index i = 0; i < P.rows(); ++i)
        F.row(i) = (T.apply(P.row(i).transpose()) - P.row(i).transpose()).transpose();
    return F;
}

PrimitiveParams PrimitiveParams::plane(const Eigen::Vector3d& n, double offset) {
    require_unit(n, "plane normal");
    PrimitiveParams p;
    p.kind = PrimitiveKind::Plane;
    p.normal = n;
    p.offset = offset;
    return p;
}

PrimitiveParams PrimitiveParams::sphere(const Eigen::Vector3d& c, double r) {
    if (r <= 0.0) throw SpecError("sphere radius must be positive");
    PrimitiveParams p;
    p.kind = PrimitiveKind::Sphere;
    p.center = c;
    p.radius = r;
    return p;
}

PrimitiveParams PrimitiveParams::cylinder(const Eigen::Vector3d& axis,
                                          const Eigen::Vector3d& point, double r) {
    require_unit(axis, "cylinder axis");
    if (r <= 0.0) throw SpecError("cylinder radius must be positive");
    PrimitiveParams p;
    p.kind = PrimitiveKind::Cylinder;
    p.axis = axis;
    p.axis_point = point;
    p.radius = r;
    return p;
}

PrimitiveParams PrimitiveParams::cone(const Eigen::Vector3d& apex, const Eigen::Vector3d& axis,
                                      double half_angle) {
    require_unit(axis, "cone axis");
    if (half_angle <= 0.0 || half_angle >= M_PI / 2.0)
        throw SpecError("cone half-angle must lie in (0, pi/2)");
    PrimitiveParams p;
    p.kind = PrimitiveKind::Cone;
    p.apex = apex;
    p.axis = axis;
    p.half_angle = half_angle;
    return p;
}

Eigen::Matrix3d procrustes_rotation(const Eigen::MatrixX3d& P_before,
                                    const Eigen::MatrixX3d& P_after) {
    if (P_before.rows() != P_after.rows() || P_before.rows() < 3)
        throw SpecError("procrustes needs matched point sets with k >= 3");
    const Eigen::Matrix3d M = P_after.transpose() * P_before;
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    if (s[0] <= 0.0 || s[1] / s[0] < kRankTol)
        throw DegenerateInput("point spread has rank < 2, rotation is not identifiable");
    return svd.matrixU() * svd.matrixV().transpose();
}

namespace {

Eigen::Vector3d smallest_centered_direction(const Eigen::MatrixX3d& M, const char* what) {
    if (M.rows() < 3) throw SpecError(std::string(what) + " needs k >= 3 rows");
    const Eigen::RowVector3d mu = M.colwise().mean();
    const Eigen::MatrixX3d C = M.rowwise() - mu;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    if (s[0] <= 0.0 || s[1] / s[0] < kRankTol)
        throw DegenerateInput(std::string(what) + ": centered spread has rank < 2");
    return sign_normalize(svd.matrixV().col(2));
}

}  // namespace

Eigen::Vector3d cylinder_axis(const Eigen::MatrixX3d& N) {
    return smallest_centered_direction(N, "cylinder_axis");
}

Eigen::Vector3d plane_normal(const Eigen::MatrixX3d& P) {
    return smallest_centered_direction(P, "plane_normal");
}

Eigen::Vector3d cone_apex(const Eigen::MatrixX3d& N, const Eigen::MatrixX3d& P) {
    if (N.rows() != P.rows() || N.rows() < 3)
        throw SpecError("cone_apex needs matched normals/positions with k >= 3");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(N, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    if (s[0] <= 0.0 || s[2] / s[0] < kRankTol)
        throw DegenerateInput("cone_apex: normals have rank < 3, apex unidentifiable");
    const Eigen::VectorXd y = (N.array() * P.array()).rowwise().sum().matrix();
    return svd.solve(y);
}

std::pair<Eigen::Vector3d, double> sphere_fit(const Eigen::MatrixX3d& P) {
    if (P.rows() < 4) throw SpecError("sphere_fit needs k >= 4 points");
    const Eigen::RowVector3d mu = P.colwise().mean();
    const Eigen::MatrixX3d A = 2.0 * (P.rowwise() - mu);
    const Eigen::VectorXd sq = P.rowwise().squaredNorm();
    const Eigen::VectorXd b = sq.array() - sq.mean();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    if (s[0] <= 0.0 || s[2] / s[0] < kRankTol)
        throw DegenerateInput("sphere_fit: coplanar points, center unidentifiable");
    const Eigen::Vector3d c = svd.solve(b);
    const double r = std::sqrt((P.rowwise() - c.transpose()).rowwise().squaredNorm().mean());
    return {c, r};
}

}  // namespace agps::oracle
