#include "agps/synth/generate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Geometry>

namespace agps::synth {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

Eigen::Vector3d random_unit(Rng& rng) {
    for (;;) {
        Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
        const double n = v.norm();
        if (n > 1e-6) return v / n;
    }
}

Eigen::Vector3d random_in_ball(double radius, Rng& rng) {
    const Eigen::Vector3d dir = random_unit(rng);
    return dir * (radius * std::cbrt(rng.uniform()));
}

// Orthonormal pair spanning the plane perpendicular to unit v.
std::pair<Eigen::Vector3d, Eigen::Vector3d> basis_perp(const Eigen::Vector3d& v) {
    int least = 0;
    for (int i = 1; i < 3; ++i)
        if (std::abs(v[i]) < std::abs(v[least])) least = i;
    const Eigen::Vector3d e1 = v.cross(Eigen::Vector3d::Unit(least)).normalized();
    return {e1, v.cross(e1)};
}

int draw_mixture(const std::array<double, 4>& w, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (int i = 0; i < 4; ++i) {
        acc += w[i];
        if (u < acc) return i;
    }
    return 3;
}

struct Patch {
    Eigen::MatrixX3d points;
    Eigen::MatrixX3d normals;
    oracle::PrimitiveParams params;
};

Patch make_plane_patch(const Eigen::Vector3d& c0, int n, Rng& rng) {
    const Eigen::Vector3d nrm = random_unit(rng);
    const auto [e1, e2] = basis_perp(nrm);
    const double R = rng.uniform(0.2, 0.45);
    Patch p;
    p.points.resize(n, 3);
    p.normals.resize(n, 3);
    for (int i = 0; i < n; ++i) {
        const double r = R * std::sqrt(rng.uniform());
        const double th = rng.uniform(0.0, kTwoPi);
        p.points.row(i) = (c0 + r * (std::cos(th) * e1 + std::sin(th) * e2)).transpose();
        p.normals.row(i) = nrm.transpose();
    }
    p.params = oracle::PrimitiveParams::plane(nrm, nrm.dot(c0));
    return p;
}

Patch make_sphere_patch(const Eigen::Vector3d& c0, int n, Rng& rng) {
    const double r = rng.uniform(0.15, 0.4);
    const Eigen::Vector3d w = random_unit(rng);
    const auto [e1, e2] = basis_perp(w);
    const double theta_max = rng.uniform(0.6, 1.2);
    const double cmin = std::cos(theta_max);
    Patch p;
    p.points.resize(n, 3);
    p.normals.resize(n, 3);
    for (int i = 0; i < n; ++i) {
        const double ct = rng.uniform(cmin, 1.0);
        const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        const double ph = rng.uniform(0.0, kTwoPi);
        const Eigen::Vector3d dir = ct * w + st * (std::cos(ph) * e1 + std::sin(ph) * e2);
        p.points.row(i) = (c0 + r * dir).transpose();
        p.normals.row(i) = dir.transpose();
    }
    p.params = oracle::PrimitiveParams::sphere(c0, r);
    return p;
}

Patch make_cylinder_patch(const Eigen::Vector3d& c0, int n, Rng& rng) {
    const Eigen::Vector3d a = random_unit(rng);
    const auto [e1, e2] = basis_perp(a);
    const double r = rng.uniform(0.1, 0.3);
    const double h = rng.uniform(0.3, 0.6);
    const double phi0 = rng.uniform(0.0, kTwoPi);
    const double phi_ext = rng.uniform(1.5, kTwoPi);
    Patch p;
    p.points.resize(n, 3);
    p.normals.resize(n, 3);
    for (int i = 0; i < n; ++i) {
        const double t = rng.uniform(-h / 2.0, h / 2.0);
        const double ph = phi0 + rng.uniform(0.0, phi_ext);
        const Eigen::Vector3d radial = std::cos(ph) * e1 + std::sin(ph) * e2;
        p.points.row(i) = (c0 + t * a + r * radial).transpose();
        p.normals.row(i) = radial.transpose();
    }
    p.params = oracle::PrimitiveParams::cylinder(a, c0, r);
    return p;
}

Patch make_cone_patch(const Eigen::Vector3d& c0, int n, Rng& rng) {
    const Eigen::Vector3d a = random_unit(rng);
    const auto [e1, e2] = basis_perp(a);
    const double alpha = rng.uniform(0.3, 0.7);
    const double s0 = 0.1, s1 = rng.uniform(0.35, 0.6);
    const double phi0 = rng.uniform(0.0, kTwoPi);
    const double phi_ext = rng.uniform(1.5, kTwoPi);
    const double ca = std::cos(alpha), sa = std::sin(alpha);
    Patch p;
    p.points.resize(n, 3);
    p.normals.resize(n, 3);
    for (int i = 0; i < n; ++i) {
        const double s = std::sqrt(rng.uniform() * (s1 * s1 - s0 * s0) + s0 * s0);
        const double ph = phi0 + rng.uniform(0.0, phi_ext);
        const Eigen::Vector3d radial = std::cos(ph) * e1 + std::sin(ph) * e2;
        p.points.row(i) = (c0 + s * (ca * a + sa * radial)).transpose();
        p.normals.row(i) = (ca * radial - sa * a).transpose();
    }
    p.params = oracle::PrimitiveParams::cone(c0, a, alpha);
    return p;
}

Patch make_patch(int prim_type, const Eigen::Vector3d& c0, int n, Rng& rng) {
    switch (prim_type) {
        case 0: return make_plane_patch(c0, n, rng);
        case 1: return make_sphere_patch(c0, n, rng);
        case 2: return make_cylinder_patch(c0, n, rng);
        default: return make_cone_patch(c0, n, rng);
    }
}

// Anchors at least 0.3 apart; gives up rejection after 100 tries so
// generation always terminates.
Eigen::Vector3d place_anchor(const std::vector<Eigen::Vector3d>& taken, Rng& rng) {
    Eigen::Vector3d c = random_in_ball(0.5, rng);
    for (int attempt = 0; attempt < 100; ++attempt) {
        bool ok = true;
        for (const auto& o : taken)
            if ((c - o).norm() < 0.3) {
                ok = false;
                break;
            }
        if (ok) break;
        c = random_in_ball(0.5, rng);
    }
    return c;
}

std::vector<int> split_points(int total, int parts) {
    std::vector<int> out(parts, total / parts);
    for (int i = 0; i < total % parts; ++i) ++out[i];
    return out;
}

void validate_spec(const DomainSpec& spec, int max_parts) {
    if (spec.shapes_count < 1) throw SpecError("domain '" + spec.name + "' is empty");
    double sum = 0.0;
    for (double w : spec.mixture) {
        if (w < 0.0) throw SpecError("domain '" + spec.name + "' has a negative mixture weight");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw SpecError("domain '" + spec.name + "' mixture weights do not sum to 1");
    if (spec.parts_min < 1 || spec.parts_min > spec.parts_max || spec.parts_max > max_parts)
        throw SpecError("domain '" + spec.name + "' has an invalid parts range");
    if (spec.points_per_shape < spec.parts_max)
        throw SpecError("domain '" + spec.name + "' has fewer points than parts");
}

// Centers on the centroid and scales so max |p| sits just inside 1; the
// 1e-6 margin keeps the ball invariant true after f32 storage.
struct Normalization {
    Eigen::Vector3d center;
    double scale;
};

Normalization normalize_positions(Eigen::MatrixX3d& P) {
    const Eigen::RowVector3d c = P.colwise().mean();
    P.rowwise() -= c;
    double s = P.rowwise().norm().maxCoeff() * (1.0 + 1e-6);
    P /= s;
    return {c.transpose(), s};
}

void remap_meta(PartMeta& m, const Normalization& nm) {
    if (m.is_rigid) {
        m.rigid.t = (m.rigid.t + (m.rigid.R - Eigen::Matrix3d::Identity()) * nm.center) / nm.scale;
        return;
    }
    auto& p = m.prim;
    switch (p.kind) {
        case oracle::PrimitiveKind::Plane:
            p.offset = (p.offset - p.normal.dot(nm.center)) / nm.scale;
            break;
        case oracle::PrimitiveKind::Sphere:
            p.center = (p.center - nm.center) / nm.scale;
            p.radius /= nm.scale;
            break;
        case oracle::PrimitiveKind::Cylinder:
            p.axis_point = (p.axis_point - nm.center) / nm.scale;
            p.radius /= nm.scale;
            break;
        case oracle::PrimitiveKind::Cone:
            p.apex = (p.apex - nm.center) / nm.scale;
            break;
    }
}

Shape gen_primitive_shape(const DomainSpec& spec, Rng& rng) {
    const int parts = spec.parts_min + rng.uniform_int(spec.parts_max - spec.parts_min + 1);
    const std::vector<int> counts = split_points(spec.points_per_shape, parts);
    Shape sh;
    sh.positions.resize(spec.points_per_shape, 3);
    sh.normals.resize(spec.points_per_shape, 3);
    sh.part_labels.resize(spec.points_per_shape);
    sh.prim_types.resize(spec.points_per_shape);
    sh.has_normals = true;
    sh.has_prim_types = true;
    std::vector<Eigen::Vector3d> anchors;
    int row = 0;
    for (int part = 0; part < parts; ++part) {
        const int type = draw_mixture(spec.mixture, rng);
        const Eigen::Vector3d c0 = place_anchor(anchors, rng);
        anchors.push_back(c0);
        Patch patch = make_patch(type, c0, counts[part], rng);
        for (int i = 0; i < counts[part]; ++i, ++row) {
            sh.positions.row(row) = patch.points.row(i);
            sh.normals.row(row) = patch.normals.row(i);
            sh.part_labels[row] = part;
            sh.prim_types[row] = type;
        }
        PartMeta meta;
        meta.prim = patch.params;
        sh.part_meta.push_back(meta);
    }
    if (spec.noise_sigma > 0.0)
        for (Eigen::Index i = 0; i < sh.positions.rows(); ++i)
            for (int j = 0; j < 3; ++j) sh.positions(i, j) += spec.noise_sigma * rng.normal();
    const Normalization nm = normalize_positions(sh.positions);
    for (auto& m : sh.part_meta) remap_meta(m, nm);
    return sh;
}

Shape gen_mobility_shape_once(const DomainSpec& spec, Rng& rng) {
    const int parts = spec.parts_min + rng.uniform_int(spec.parts_max - spec.parts_min + 1);
    const std::vector<int> counts = split_points(spec.points_per_shape, parts);
    Shape sh;
    sh.positions.resize(spec.points_per_shape, 3);
    sh.normals.resize(spec.points_per_shape, 3);
    sh.part_labels.resize(spec.points_per_shape);
    sh.prim_types.resize(spec.points_per_shape);
    sh.has_normals = true;
    sh.has_flow = true;
    sh.has_prim_types = true;
    std::vector<Eigen::Vector3d> anchors;
    int row = 0;
    for (int part = 0; part < parts; ++part) {
        const int type = draw_mixture(spec.mixture, rng);
        const Eigen::Vector3d c0 = place_anchor(anchors, rng);
        anchors.push_back(c0);
        Patch patch = make_patch(type, c0, counts[part], rng);
        const int first_row = row;
        for (int i = 0; i < counts[part]; ++i, ++row) {
            sh.positions.row(row) = patch.points.row(i);
            sh.normals.row(row) = patch.normals.row(i);
            sh.part_labels[row] = part;
            sh.prim_types[row] = type;
        }
        PartMeta meta;
        meta.is_rigid = true;
        meta.prim = patch.params;
        if (part == 0) {
            meta.rigid = oracle::RigidTransform();
            meta.rigid_axis_angle.setZero();
        } else {
            const Eigen::Vector3d axis = random_unit(rng);
            const double angle = rng.uniform(0.1745, 1.0472);  // 10..60 degrees
            const Eigen::Matrix3d R = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
            const Eigen::Vector3d t_dir = random_unit(rng);
            const double t_mag = rng.uniform(0.05, 0.3);
            const Eigen::Vector3d g =
                sh.positions.middleRows(first_row, counts[part]).colwise().mean().transpose();
            meta.rigid.R = R;
            meta.rigid.t = g - R * g + t_mag * t_dir;
            meta.rigid_axis_angle = axis * angle;
        }
        sh.part_meta.push_back(meta);
    }
    if (spec.noise_sigma > 0.0)
        for (Eigen::Index i = 0; i < sh.positions.rows(); ++i)
            for (int j = 0; j < 3; ++j) sh.positions(i, j) += spec.noise_sigma * rng.normal();
    const Normalization nm = normalize_positions(sh.positions);
    for (auto& m : sh.part_meta) remap_meta(m, nm);
    // Flow from the recorded normalized transforms, so the two stay exactly
    // consistent.
    sh.flow.resize(spec.points_per_shape, 3);
    for (Eigen::Index i = 0; i < sh.positions.rows(); ++i) {
        const auto& T = sh.part_meta[static_cast<std::size_t>(sh.part_labels[i])].rigid;
        const Eigen::Vector3d p = sh.positions.row(i).transpose();
        sh.flow.row(i) = (T.R * p + T.t - p).transpose();
    }
    return sh;
}

bool distinct_motion_magnitudes(const Shape& sh) {
    std::vector<double> mags;
    for (const auto& m : sh.part_meta) mags.push_back(m.rigid.t.norm());
    std::sort(mags.begin(), mags.end());
    for (std::size_t i = 1; i < mags.size(); ++i)
        if (mags[i] - mags[i - 1] <= 1e-6) return false;
    return true;
}

Shape gen_mobility_shape(const DomainSpec& spec, Rng& rng) {
    for (int tries = 0; tries < 100; ++tries) {
        Shape sh = gen_mobility_shape_once(spec, rng);
        if (distinct_motion_magnitudes(sh)) return sh;
    }
    throw SpecError("could not draw distinct part motion magnitudes in 100 tries");
}

}  // namespace

std::vector<DomainSpec> default_primitive_specs() {
    std::vector<DomainSpec> specs(4);
    specs[0].name = "planes";
    specs[0].mixture = {0.7, 0.1, 0.1, 0.1};
    specs[1].name = "spheres";
    specs[1].mixture = {0.1, 0.7, 0.1, 0.1};
    specs[2].name = "cylinders";
    specs[2].mixture = {0.1, 0.1, 0.7, 0.1};
    specs[3].name = "cones";
    specs[3].mixture = {0.1, 0.1, 0.1, 0.7};
    return specs;
}

std::vector<DomainSpec> default_mobility_specs() {
    std::vector<DomainSpec> specs(4);
    specs[0].name = "pair_planar";
    specs[0].mixture = {0.7, 0.1, 0.1, 0.1};
    specs[0].parts_min = specs[0].parts_max = 2;
    specs[1].name = "triple_round";
    specs[1].mixture = {0.1, 0.7, 0.1, 0.1};
    specs[1].parts_min = specs[1].parts_max = 3;
    specs[2].name = "mixed_tubes";
    specs[2].mixture = {0.1, 0.1, 0.7, 0.1};
    specs[2].parts_min = 2;
    specs[2].parts_max = 3;
    specs[3].name = "mixed_tips";
    specs[3].mixture = {0.1, 0.1, 0.1, 0.7};
    specs[3].parts_min = 2;
    specs[3].parts_max = 3;
    return specs;
}

PartDataset gen_primitive_dataset(const std::vector<DomainSpec>& specs, std::uint64_t seed) {
    if (specs.size() < 2) throw SpecError("need at least 2 domains for cross-validation");
    for (const auto& s : specs) validate_spec(s, 5);
    PartDataset ds;
    ds.task = Task::Primitive;
    ds.seed = seed;
    Rng rng(seed);
    for (const auto& spec : specs) {
        Domain dom;
        dom.name = spec.name;
        for (int i = 0; i < spec.shapes_count; ++i) dom.shapes.push_back(gen_primitive_shape(spec, rng));
        ds.domains.push_back(std::move(dom));
    }
    return ds;
}

PartDataset gen_mobility_dataset(const std::vector<DomainSpec>& specs, std::uint64_t seed) {
    if (specs.size() < 2) throw SpecError("need at least 2 domains for cross-validation");
    for (const auto& s : specs) validate_spec(s, 3);
    PartDataset ds;
    ds.task = Task::Mobility;
    ds.seed = seed;
    Rng rng(seed);
    for (const auto& spec : specs) {
        Domain dom;
        dom.name = spec.name;
        for (int i = 0; i < spec.shapes_count; ++i) dom.shapes.push_back(gen_mobility_shape(spec, rng));
        ds.domains.push_back(std::move(dom));
    }
    return ds;
}

std::vector<int> mobility_class_labels(const Shape& shape) {
    const int parts = shape.n_parts();
    std::vector<double> mag(static_cast<std::size_t>(parts));
    for (int i = 0; i < parts; ++i) mag[static_cast<std::size_t>(i)] = shape.part_meta[static_cast<std::size_t>(i)].rigid.t.norm();
    std::vector<int> order(static_cast<std::size_t>(parts));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return mag[static_cast<std::size_t>(a)] < mag[static_cast<std::size_t>(b)];
    });
    std::vector<int> rank(static_cast<std::size_t>(parts), 0);
    int cls = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i > 0 && mag[static_cast<std::size_t>(order[i])] -
                             mag[static_cast<std::size_t>(order[i - 1])] > 1e-9)
            ++cls;
        rank[static_cast<std::size_t>(order[i])] = cls;
    }
    std::vector<int> out(static_cast<std::size_t>(shape.n_points()));
    for (Eigen::Index i = 0; i < shape.n_points(); ++i)
        out[static_cast<std::size_t>(i)] = rank[static_cast<std::size_t>(shape.part_labels[static_cast<std::size_t>(i)])];
    return out;
}

Eigen::Vector4d prim_type_histogram(const Shape& shape) {
    if (!shape.has_prim_types) throw SpecError("shape has no primitive type channel");
    Eigen::Vector4d h = Eigen::Vector4d::Zero();
    for (int t : shape.prim_types) h[t] += 1.0;
    return h / static_cast<double>(shape.prim_types.size());
}

const char* task_name(Task task) { return task == Task::Primitive ? "primitive" : "mobility"; }

PartDataset drop_domain(const PartDataset& ds, int idx) {
    if (idx < 0 || idx >= static_cast<int>(ds.domains.size()))
        throw SpecError("drop_domain: index out of range");
    PartDataset out;
    out.task = ds.task;
    out.seed = ds.seed;
    for (int i = 0; i < static_cast<int>(ds.domains.size()); ++i)
        if (i != idx) out.domains.push_back(ds.domains[i]);
    return out;
}

}  // namespace agps::synth
