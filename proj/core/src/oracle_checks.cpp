#include "agps/oracle/checks.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "agps/dsl/context.hpp"
#include "agps/dsl/eval.hpp"
#include "agps/dsl/ops.hpp"
#include "agps/dsl/tree.hpp"
#include "agps/oracle/fits.hpp"
#include "agps/rng.hpp"

namespace agps::oracle {

namespace {

Eigen::Vector3d rand_unit(Rng& rng) {
    while (true) {
        Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
        double n = v.norm();
        if (n > 1e-6) return v / n;
    }
}

Eigen::Matrix3d rand_rotation(Rng& rng) {
    Eigen::Vector3d axis = rand_unit(rng);
    double angle = rng.uniform(0.2, 3.0);
    return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

// Two unit vectors completing axis to a right-handed frame.
void frame(const Eigen::Vector3d& a, Eigen::Vector3d& e1, Eigen::Vector3d& e2) {
    Eigen::Vector3d h = std::abs(a.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
    e1 = a.cross(h).normalized();
    e2 = a.cross(e1).normalized();
}

// Full-part context: every point sees all k rows of each channel.
dsl::PartContext full_context(const std::vector<std::string>& bases,
                              const std::vector<Eigen::MatrixXd>& channels) {
    std::vector<int> idx(static_cast<std::size_t>(channels[0].rows()));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    return dsl::build_context(channels, idx, dsl::build_operant_set(bases));
}

double max_abs(const Eigen::VectorXd& v) { return v.cwiseAbs().maxCoeff(); }

CheckRow rotation_row(Rng& rng) {
    const int k = 50;
    Eigen::MatrixXd P(k, 3);
    for (int i = 0; i < k; ++i) P.row(i) = (rand_unit(rng) * std::cbrt(rng.uniform())).transpose();
    Eigen::Matrix3d R = rand_rotation(rng);
    Eigen::MatrixXd after = P * R.transpose();
    Eigen::MatrixXd F = after - P;

    Eigen::Matrix3d R_est = procrustes_rotation(P, after);
    double err = (R_est - R).cwiseAbs().maxCoeff();

    auto tree = dsl::parse_tree("orth(sum(cartesian(identity(P_add_F),identity(P))))");
    Eigen::VectorXd out = dsl::evaluate_tree(tree, full_context({"P", "F"}, {P, F}));
    Eigen::VectorXd flat(9);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) flat[3 * r + c] = R_est(r, c);
    err = std::max(err, max_abs(out - flat));

    return {"rotation", "tree+formula", err, 1e-6, err < 1e-6};
}

CheckRow cone_apex_row(Rng& rng) {
    const int k = 60;
    Eigen::Vector3d apex(1.0, 2.0, 3.0);
    Eigen::Vector3d a = rand_unit(rng);
    Eigen::Vector3d e1, e2;
    frame(a, e1, e2);
    double alpha = 0.5;
    Eigen::MatrixXd P(k, 3), N(k, 3);
    for (int i = 0; i < k; ++i) {
        double s = rng.uniform(0.2, 1.0);
        double phi = rng.uniform(0.0, 2.0 * M_PI);
        Eigen::Vector3d radial = std::cos(phi) * e1 + std::sin(phi) * e2;
        P.row(i) = (apex + s * (std::cos(alpha) * a + std::sin(alpha) * radial)).transpose();
        N.row(i) = (std::cos(alpha) * radial - std::sin(alpha) * a).transpose();
    }
    Eigen::Vector3d est = cone_apex(N, P);
    double err = (est - apex).cwiseAbs().maxCoeff();
    return {"cone_apex", "formula", err, 1e-6, err < 1e-6};
}

CheckRow cylinder_axis_row(Rng& rng) {
    const int k = 60;
    Eigen::Vector3d a = rand_unit(rng);
    Eigen::Vector3d e1, e2;
    frame(a, e1, e2);
    double r = 0.4;
    Eigen::MatrixXd P(k, 3), N(k, 3);
    for (int i = 0; i < k; ++i) {
        double t = rng.uniform(-0.5, 0.5);
        double phi = rng.uniform(0.0, 2.0 * M_PI);
        Eigen::Vector3d radial = std::cos(phi) * e1 + std::sin(phi) * e2;
        P.row(i) = (t * a + r * radial).transpose();
        N.row(i) = radial.transpose();
    }
    Eigen::Vector3d est = cylinder_axis(N);
    double err = 1.0 - std::abs(est.dot(a));

    auto tree = dsl::parse_tree("identity(svd(centralize(N)))");
    Eigen::VectorXd out = dsl::evaluate_tree(tree, full_context({"P", "N"}, {P, N}));
    err = std::max(err, max_abs(out - est));

    return {"cylinder_axis", "tree+formula", err, 1e-6, err < 1e-6};
}

CheckRow plane_normal_row(Rng& rng) {
    const int k = 50;
    Eigen::Vector3d n = rand_unit(rng);
    Eigen::Vector3d e1, e2;
    frame(n, e1, e2);
    Eigen::Vector3d c0(0.2, -0.1, 0.4);
    Eigen::MatrixXd P(k, 3);
    for (int i = 0; i < k; ++i) {
        double u = rng.uniform(-0.5, 0.5), v = rng.uniform(-0.5, 0.5);
        P.row(i) = (c0 + u * e1 + v * e2).transpose();
    }
    Eigen::Vector3d est = plane_normal(P);
    double err = 1.0 - std::abs(est.dot(n));

    auto tree = dsl::parse_tree("identity(svd(centralize(P)))");
    Eigen::VectorXd out = dsl::evaluate_tree(tree, full_context({"P", "N"}, {P, P}));
    err = std::max(err, max_abs(out - est));

    return {"plane_normal", "tree+formula", err, 1e-6, err < 1e-6};
}

void sphere_rows(Rng& rng, CheckRow& center_row, CheckRow& radius_row) {
    const int k = 100;
    Eigen::Vector3d c(0.3, -0.2, 0.5);
    double r = 0.7;
    Eigen::MatrixXd P(k, 3);
    for (int i = 0; i < k; ++i) P.row(i) = (c + r * rand_unit(rng)).transpose();
    auto [c_est, r_est] = sphere_fit(P);
    double ce = (c_est - c).cwiseAbs().maxCoeff();
    double re = std::abs(r_est - r);
    center_row = {"sphere_center", "formula", ce, 1e-6, ce < 1e-6};
    radius_row = {"sphere_radius", "formula", re, 1e-6, re < 1e-6};
}

}  // namespace

std::vector<CheckRow> run_oracle_checks(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<CheckRow> rows;
    rows.push_back(rotation_row(rng));
    rows.push_back(cone_apex_row(rng));
    rows.push_back(cylinder_axis_row(rng));
    CheckRow sc, sr;
    sphere_rows(rng, sc, sr);
    rows.push_back(sc);
    rows.push_back(sr);
    rows.push_back(plane_normal_row(rng));
    return rows;
}

}  // namespace agps::oracle
