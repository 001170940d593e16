#include "agps/eval/descriptor.hpp"

#include <algorithm>
#include <numeric>

#include "agps/dsl/context.hpp"
#include "agps/rng.hpp"

namespace agps::eval {

namespace {

// Indices of the k nearest neighbors of point i, self excluded, ties broken
// by index so the result is deterministic.
std::vector<int> nearest_neighbors(const Eigen::MatrixX3d& P, Eigen::Index i, int k) {
    const Eigen::Index n = P.rows();
    std::vector<std::pair<double, int>> d;
    d.reserve(static_cast<std::size_t>(n) - 1);
    for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        d.emplace_back((P.row(j) - P.row(i)).squaredNorm(), static_cast<int>(j));
    }
    const auto kk = static_cast<std::size_t>(std::min<Eigen::Index>(k, n - 1));
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
    std::vector<int> out(kk);
    for (std::size_t t = 0; t < kk; ++t) out[t] = d[t].second;
    return out;
}

}  // namespace

Eigen::MatrixXd featurize(const synth::Shape& shape, synth::Task task) {
    if (task == synth::Task::Primitive && !shape.has_normals)
        throw MissingChannel("primitive task needs the normals channel");
    if (task == synth::Task::Mobility && !shape.has_flow)
        throw MissingChannel("mobility task needs the flow channel");
    const Eigen::MatrixX3d& channel =
        task == synth::Task::Primitive ? shape.normals : shape.flow;
    const Eigen::Index n = shape.n_points();
    Eigen::MatrixXd X(n, kDescriptorDim);
    for (Eigen::Index i = 0; i < n; ++i) {
        X.block<1, 3>(i, 0) = shape.positions.row(i);
        X.block<1, 3>(i, 3) = channel.row(i);
        const std::vector<int> nbrs = nearest_neighbors(shape.positions, i, kNeighborCount);
        if (nbrs.empty()) {
            X.block<1, 6>(i, 6).setZero();
            continue;
        }
        Eigen::MatrixX3d nb(static_cast<Eigen::Index>(nbrs.size()), 3);
        for (std::size_t t = 0; t < nbrs.size(); ++t) nb.row(static_cast<Eigen::Index>(t)) = shape.positions.row(nbrs[t]);
        const Eigen::RowVector3d mu = nb.colwise().mean();
        X.block<1, 3>(i, 6) = mu - shape.positions.row(i);
        const Eigen::MatrixX3d C = nb.rowwise() - mu;
        const Eigen::Matrix3d cov = C.transpose() * C / static_cast<double>(nb.rows());
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
        const Eigen::Vector3d ev = es.eigenvalues();  // ascending
        X(i, 9) = ev[2];
        X(i, 10) = ev[1];
        X(i, 11) = ev[0];
    }
    return X;
}

int n_classes(synth::Task task) { return task == synth::Task::Primitive ? 4 : 3; }

std::vector<int> class_labels(const synth::Shape& shape, synth::Task task) {
    if (task == synth::Task::Primitive) {
        if (!shape.has_prim_types)
            throw MissingChannel("primitive task needs the primitive type channel");
        return shape.prim_types;
    }
    return synth::mobility_class_labels(shape);
}

PreparedDataset prepare(const synth::PartDataset& ds, int n_rows, double radius,
                        std::uint64_t seed) {
    PreparedDataset pd;
    pd.task = ds.task;
    pd.n_rows = n_rows;
    pd.radius = radius;
    for (std::size_t d = 0; d < ds.domains.size(); ++d) {
        pd.domain_names.push_back(ds.domains[d].name);
        for (std::size_t s = 0; s < ds.domains[d].shapes.size(); ++s) {
            const synth::Shape& sh = ds.domains[d].shapes[s];
            PreparedShape ps;
            ps.domain = static_cast<int>(d);
            ps.src = &sh;
            ps.X = featurize(sh, ds.task);
            ps.y = class_labels(sh, ds.task);
            Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(s)}));
            ps.contexts.resize(sh.n_points(), n_rows);
            for (Eigen::Index i = 0; i < sh.n_points(); ++i) {
                const std::vector<int> rows = dsl::sample_part_neighbors(
                    sh.positions, sh.part_labels, static_cast<int>(i), radius, n_rows, rng);
                for (int r = 0; r < n_rows; ++r) ps.contexts(i, r) = rows[static_cast<std::size_t>(r)];
            }
            pd.shapes.push_back(std::move(ps));
        }
    }
    return pd;
}

}  // namespace agps::eval
